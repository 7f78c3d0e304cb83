import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import pandas as pd

from models.instance import Instance
from models.lp import LpSolution
from models.policy import PolicyConfig, PolicyKind
from models.results import ExactEval, McSummary, RunSpec
from services.instance_service import InstanceService, ReferenceKind
from services.lp_service import LpService
from services.oracle_service import OracleMode, OracleService
from services.policy_service import PolicyService
from services.simulation_service import SimulationService
from utils.errors import ParameterError, SizeBudgetError
from utils.instance_io import load_instance
from utils.stats_utils import BoundCalculator, ReferenceFormulas

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ['gamma', 'mean_profit', 'se_profit', 'cr_estimate', 'mean_h', 'var_h', 'se_var_h',
                 'cr_bound', 'var_bound']
REPRODUCE_COLUMNS = ['figure', 'params', 'quantity', 'formula', 'exact', 'estimate', 'standard_error',
                     'band', 'passed']

# exact values must match closed forms this tightly
EXACT_TOL = 1e-7
BAND_SIGMAS = 4.0


@dataclass(frozen=True, eq=False)
class PreparedInstance:
    """An instance ready for the policies: unit capacities plus its LP optimum"""
    source: str
    original: Instance
    instance: Instance
    solution: LpSolution


@dataclass(frozen=True)
class FigureSetup:
    kind: str
    policy: str
    gamma: float
    eps: Sequence[float] = ()
    m: Optional[int] = None


FIGURES: Dict[int, FigureSetup] = {
    1: FigureSetup(kind=ReferenceKind.ATT_CR, policy=PolicyKind.ATT, gamma=0.5, eps=(0.1,)),
    2: FigureSetup(kind=ReferenceKind.ATT_VAR, policy=PolicyKind.ATT, gamma=0.3, m=50),
    3: FigureSetup(kind=ReferenceKind.SAMP_CR, policy=PolicyKind.SAMP, gamma=0.5, eps=(0.1, 0.01, 0.001)),
    4: FigureSetup(kind=ReferenceKind.SAMP_VAR, policy=PolicyKind.SAMP, gamma=0.8, m=40),
}


class ExperimentService:
    """Glue between the command line and the services: prepare, run, sweep, reproduce"""

    def __init__(self, instance_service: Optional[InstanceService] = None,
                 lp_service: Optional[LpService] = None,
                 oracle_service: Optional[OracleService] = None,
                 simulation_service: Optional[SimulationService] = None):
        self.instance_service = instance_service or InstanceService()
        self.lp_service = lp_service or LpService()
        policy_service = PolicyService(self.lp_service)
        self.oracle_service = oracle_service or OracleService(policy_service)
        self.simulation_service = simulation_service or SimulationService(policy_service)

    def load(self, spec: RunSpec, gamma: Optional[float] = None) -> Instance:
        """Read --instance or build --ref; samp-var takes its gamma from --ref-gamma or the policy"""
        if spec.instance_path is not None:
            return load_instance(spec.instance_path)
        ref_gamma = spec.ref_gamma
        if ref_gamma is None and spec.ref_kind == ReferenceKind.SAMP_VAR:
            ref_gamma = spec.gamma if gamma is None else gamma
        return self.instance_service.build_reference_instance(spec.ref_kind, eps=spec.eps, m=spec.m,
                                                              gamma=ref_gamma)

    def prepare(self, inst: Instance, source: str) -> PreparedInstance:
        """validate -> expand capacities -> benchmark LP"""
        self.instance_service.require_valid(inst)
        expanded = self.instance_service.expand_capacities(inst)
        solution = self.lp_service.solve_instance(expanded)
        return PreparedInstance(source=source, original=inst, instance=expanded, solution=solution)

    @staticmethod
    def describe_source(spec: RunSpec) -> str:
        if spec.instance_path is not None:
            return spec.instance_path
        params = [f"eps={spec.eps:g}"] if spec.eps is not None else []
        if spec.m is not None:
            params.append(f"m={spec.m}")
        if spec.ref_gamma is not None:
            params.append(f"ref_gamma={spec.ref_gamma:g}")
        return f"{spec.ref_kind}({', '.join(params)})"

    def _check_spec(self, spec: RunSpec) -> None:
        problems = spec.validate()
        if problems:
            raise ParameterError("; ".join(problems))

    def run(self, spec: RunSpec, risk_threshold: Optional[float] = None) -> Dict:
        """One Monte Carlo run with its theoretical reference values"""
        self._check_spec(spec)
        prepared = self.prepare(self.load(spec), self.describe_source(spec))
        config = PolicyConfig(spec.policy, spec.gamma)
        summary = self.simulation_service.monte_carlo(prepared.instance, prepared.solution, config,
                                                      spec.n, spec.master_seed)
        row = self._summary_row(prepared, config, summary)
        row.update({'source': prepared.source, 'policy': config.kind, 'gamma': config.gamma,
                    'n': spec.n, 'seed': spec.master_seed})

        if risk_threshold is not None:
            if summary.var_profit is None:
                raise ParameterError("--risk-threshold needs n >= 2 for a profit variance")
            row['risk_threshold'] = risk_threshold
            row['risk_bound'] = self.simulation_service.risk_bound(summary.mean_profit, summary.var_profit,
                                                                   risk_threshold)
        return row

    def _summary_row(self, prepared: PreparedInstance, config: PolicyConfig, summary: McSummary) -> Dict:
        opt_lp = prepared.solution.objective
        cr_bound = BoundCalculator.competitive_ratio_bound(config.kind, config.gamma)
        capacity = prepared.original.total_capacity
        return {
            'opt_lp': opt_lp,
            'mean_profit': summary.mean_profit,
            'se_profit': summary.se_profit,
            'ratio': summary.mean_profit / opt_lp if opt_lp > 0 else None,
            'ratio_se': summary.se_profit / opt_lp if opt_lp > 0 else None,
            'mean_h': summary.mean_h,
            'se_h': summary.se_h,
            'var_h': summary.var_h,
            'se_var_h': summary.se_var_h,
            'var_profit': summary.var_profit,
            'cr_bound': cr_bound,
            'profit_bound': cr_bound * opt_lp,
            'total_capacity': capacity,
            'var_bound': BoundCalculator.variance_bound(config.kind, config.gamma, capacity)
        }

    def sweep(self, spec: RunSpec, gammas: Sequence[float]) -> pd.DataFrame:
        """One row per gamma, all rows under the same master seed"""
        if not gammas:
            raise ParameterError("The gamma grid is empty")
        upper = PolicyKind.GAMMA_MAX.get(str(spec.policy).lower())
        outside = [g for g in gammas if upper is None or not 0.0 <= g <= upper]
        if outside:
            raise ParameterError(f"gamma values outside the legal range of {spec.policy}: {outside}")

        rebuild = spec.ref_kind == ReferenceKind.SAMP_VAR and spec.ref_gamma is None
        prepared = None
        rows = []
        for gamma in gammas:
            self._check_spec(RunSpec(**{**spec.__dict__, 'gamma': gamma}))
            if prepared is None or rebuild:
                prepared = self.prepare(self.load(spec, gamma), self.describe_source(spec))
            config = PolicyConfig(spec.policy, gamma)
            summary = self.simulation_service.monte_carlo(prepared.instance, prepared.solution, config,
                                                          spec.n, spec.master_seed)
            row = self._summary_row(prepared, config, summary)
            rows.append({'gamma': gamma, 'mean_profit': row['mean_profit'], 'se_profit': row['se_profit'],
                         'cr_estimate': row['ratio'], 'mean_h': row['mean_h'], 'var_h': row['var_h'],
                         'se_var_h': row['se_var_h'], 'cr_bound': row['cr_bound'], 'var_bound': row['var_bound']})
        return pd.DataFrame(rows, columns=SWEEP_COLUMNS)

    def exact(self, spec: RunSpec) -> Dict:
        """Exact evaluation plus the optimal benchmarks that fit the oracle budget"""
        self._check_spec(spec)
        prepared = self.prepare(self.load(spec), self.describe_source(spec))
        config = PolicyConfig(spec.policy, spec.gamma)
        result = self.oracle_service.exact_policy_eval(prepared.instance, prepared.solution, config)

        report = {'source': prepared.source, 'policy': config.kind, 'gamma': config.gamma,
                  'opt_lp': prepared.solution.objective}
        report.update(result.to_dict())
        report['cr_bound'] = BoundCalculator.competitive_ratio_bound(config.kind, config.gamma)
        report['var_bound'] = BoundCalculator.variance_bound(config.kind, config.gamma,
                                                             prepared.original.total_capacity)
        for name, compute in (('opt_off', lambda: self.oracle_service.opt_off(prepared.instance, seed=spec.master_seed)),
                              ('opt_on', lambda: self.oracle_service.opt_on(prepared.instance))):
            try:
                report[name] = compute().to_dict()
            except SizeBudgetError as e:
                logger.warning(f"Skipping {name}: {str(e)}")
                report[name] = None
        return report

    def reproduce(self, figure: int, n: int, seed: int) -> pd.DataFrame:
        """
        Compare closed forms, exact oracle values and Monte Carlo estimates on
        one of the four tightness instances. Exact values must match the
        closed forms within EXACT_TOL; estimates must fall within BAND_SIGMAS
        standard errors of the exact values.
        """
        setup = FIGURES.get(figure)
        if setup is None:
            raise ParameterError(f"Unknown figure {figure}; expected one of {sorted(FIGURES)}")
        if n < 2:
            raise ParameterError("reproduce needs n >= 2 for variance bands")

        rows: List[Dict] = []
        if setup.eps:
            ratios = []
            for eps in setup.eps:
                ratios.append(self._reproduce_ratio(rows, figure, setup, eps, n, seed))
            if len(ratios) > 1:
                limit = setup.gamma * (1.0 - setup.gamma)
                gaps = [abs(r - limit) for r in ratios]
                monotone = all(later <= earlier + EXACT_TOL for earlier, later in zip(gaps, gaps[1:]))
                rows.append(self._row(figure, f"eps={list(setup.eps)}", 'ratio approaches gamma(1-gamma)',
                                      limit, ratios[-1], None, None, 'monotone', monotone))
        else:
            self._reproduce_variance(rows, figure, setup, n, seed)

        frame = pd.DataFrame(rows, columns=REPRODUCE_COLUMNS)
        failed = int((~frame['passed']).sum())
        logger.info(f"Figure {figure}: {len(frame) - failed}/{len(frame)} checks passed (n={n}, seed={seed})")
        return frame

    def _reproduce_ratio(self, rows: List[Dict], figure: int, setup: FigureSetup, eps: float,
                         n: int, seed: int) -> float:
        inst = self.instance_service.build_reference_instance(setup.kind, eps=eps)
        prepared = self.prepare(inst, setup.kind)
        config = PolicyConfig(setup.policy, setup.gamma)
        params = f"eps={eps:g}, gamma={setup.gamma:g}"

        if setup.kind == ReferenceKind.ATT_CR:
            formula = ReferenceFormulas.att_cr(eps, setup.gamma)
        else:
            formula = ReferenceFormulas.samp_cr(eps, setup.gamma)

        opt_off = self.oracle_service.opt_off(prepared.instance, mode=OracleMode.EXACT).value
        result = self.oracle_service.exact_policy_eval(prepared.instance, prepared.solution, config)
        summary = self.simulation_service.monte_carlo(prepared.instance, prepared.solution, config, n, seed)
        ratio = result.expected_profit / opt_off

        self._exact_row(rows, figure, params, 'opt_lp', formula['opt_lp'], prepared.solution.objective)
        self._exact_row(rows, figure, params, 'opt_off', formula['opt_off'], opt_off)
        if 'opt_on' in formula:
            opt_on = self.oracle_service.opt_on(prepared.instance).value
            self._exact_row(rows, figure, params, 'opt_on', formula['opt_on'], opt_on)
        self._band_row(rows, figure, params, 'ratio', formula['ratio'], ratio,
                       summary.mean_profit / opt_off, summary.se_profit / opt_off)
        self._band_row(rows, figure, params, 'expected_profit', formula['expected_profit'],
                       result.expected_profit, summary.mean_profit, summary.se_profit)
        return ratio

    def _reproduce_variance(self, rows: List[Dict], figure: int, setup: FigureSetup, n: int, seed: int) -> None:
        inst = self.instance_service.build_reference_instance(setup.kind, m=setup.m, gamma=setup.gamma)
        prepared = self.prepare(inst, setup.kind)
        config = PolicyConfig(setup.policy, setup.gamma)
        params = f"m={setup.m}, gamma={setup.gamma:g}"

        if setup.kind == ReferenceKind.ATT_VAR:
            formula = ReferenceFormulas.att_var(setup.m, setup.gamma)
            self._exact_row(rows, figure, params, 'opt_lp', formula['opt_lp'], prepared.solution.objective)
        else:
            formula = ReferenceFormulas.samp_var(setup.m, setup.gamma)

        result: ExactEval = self.oracle_service.exact_policy_eval(prepared.instance, prepared.solution, config)
        summary = self.simulation_service.monte_carlo(prepared.instance, prepared.solution, config, n, seed)
        self._band_row(rows, figure, params, 'E[H]', formula['expected_h'], result.expected_h,
                       summary.mean_h, summary.se_h)
        self._band_row(rows, figure, params, 'Var[H]', formula['var_h'], result.var_h,
                       summary.var_h, summary.se_var_h)

    def _exact_row(self, rows: List[Dict], figure: int, params: str, quantity: str,
                   formula: float, exact: float) -> None:
        rows.append(self._row(figure, params, quantity, formula, exact, None, None,
                              f"+/-{EXACT_TOL:g}", abs(exact - formula) <= EXACT_TOL * max(1.0, abs(formula))))

    def _band_row(self, rows: List[Dict], figure: int, params: str, quantity: str, formula: float,
                  exact: float, estimate: float, standard_error: float) -> None:
        exact_ok = abs(exact - formula) <= EXACT_TOL * max(1.0, abs(formula))
        width = BAND_SIGMAS * standard_error
        band_ok = abs(estimate - exact) <= max(width, EXACT_TOL)
        rows.append(self._row(figure, params, quantity, formula, exact, estimate, standard_error,
                              f"{BAND_SIGMAS:g} sigma", exact_ok and band_ok))

    @staticmethod
    def _row(figure: int, params: str, quantity: str, formula: float, exact: float,
             estimate: Optional[float], standard_error: Optional[float], band: str, passed: bool) -> Dict:
        return {'figure': figure, 'params': params, 'quantity': quantity, 'formula': formula, 'exact': exact,
                'estimate': estimate, 'standard_error': standard_error, 'band': band, 'passed': bool(passed)}
