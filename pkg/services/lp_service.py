import logging
import time
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from config.settings import Config
from models.instance import AssignmentRound, Instance, ValidationReport, Violation
from models.lp import LpProblem, LpSolution, LpStatus
from utils.errors import ContractError, SizeBudgetError, SolverError
from utils.simplex import DenseSimplex

logger = logging.getLogger(__name__)


class LpService:
    def __init__(self, feas_tol: Optional[float] = None, max_columns: Optional[int] = None):
        """Initialize LP service with tolerance and desk-scale column cap"""
        self.feas_tol = Config.GIGMATCH_FEAS_TOL if feas_tol is None else feas_tol
        self.max_columns = Config.GIGMATCH_MAX_LP_COLUMNS if max_columns is None else max_columns

    def build_lp(self, inst: Instance, aggregate: bool = False) -> LpProblem:
        """
        Build the benchmark LP.

        Columns: one per (f, t) with q_{j,t} > 0, round-major, then edge order,
        then price index. Rows: arrival rows (j, t) with RHS q_{j,t}, then one
        capacity row per offline type with coefficients p_{f,t} and RHS b_i.
        With aggregate=False the instance must have unit capacities.
        """
        if not aggregate and not inst.is_unit_capacity:
            raise ContractError("build_lp needs unit capacities; run expand_capacities first")

        columns: List[AssignmentRound] = []
        for t in inst.rounds():
            for f in inst.assignments:
                if inst.q(f[1], t) > 0:
                    columns.append((f, t))

        if len(columns) > self.max_columns:
            raise SizeBudgetError("benchmark LP", len(columns), self.max_columns,
                                  hint="raise GIGMATCH_MAX_LP_COLUMNS for larger problems")

        arrival_rows = [(j, t) for t in inst.rounds() for j in inst.arrival_support(t)]
        arrival_index = {key: n for n, key in enumerate(arrival_rows)}
        offline_index = {i: n for n, i in enumerate(inst.offline_ids)}
        n_rows = len(arrival_rows) + len(offline_index)

        matrix = np.zeros((n_rows, len(columns)))
        objective = np.zeros(len(columns))
        for col, (f, t) in enumerate(columns):
            i, j, _ = f
            p = inst.p(f, t)
            objective[col] = p * inst.w(f, t)
            matrix[arrival_index[(j, t)], col] = 1.0
            matrix[len(arrival_rows) + offline_index[i], col] = p

        rhs = np.array([inst.q(j, t) for j, t in arrival_rows] +
                       [float(o.capacity) for o in inst.offline_types])
        labels = tuple([f"arrival[{j},{t}]" for j, t in arrival_rows] +
                       [f"capacity[{i}]" for i in inst.offline_ids])

        return LpProblem(
            columns=tuple(columns),
            objective=objective,
            matrix=matrix,
            rhs=rhs,
            row_labels=labels,
            n_arrival_rows=len(arrival_rows)
        )

    def solve_lp(self, prob: LpProblem, tol: Optional[float] = None) -> LpSolution:
        """Solve to optimality; any other outcome is an internal failure"""
        tol = self.feas_tol if tol is None else tol
        started = time.perf_counter()

        if prob.n_columns == 0:
            return LpSolution(x={}, objective=0.0, status=LpStatus.OPTIMAL, iterations=0)

        result = DenseSimplex(tol=tol).maximize(prob.objective, prob.matrix, prob.rhs)
        if result.status != LpStatus.OPTIMAL:
            raise SolverError(
                f"Benchmark LP reported {result.status}; it is bounded by construction",
                diagnostics={'status': result.status, 'iterations': result.iterations,
                             'rows': prob.n_rows, 'columns': prob.n_columns}
            )

        slack = prob.rhs - prob.matrix @ result.x
        if slack.min() < -tol * max(1.0, float(np.abs(prob.rhs).max())):
            raise SolverError(
                "Simplex returned a primal-infeasible point",
                diagnostics={'worst_row': prob.row_labels[int(slack.argmin())], 'violation': float(-slack.min())}
            )

        x = {col: float(v) for col, v in zip(prob.columns, result.x)}
        objective = float(prob.objective @ result.x)

        logger.info(f"Benchmark LP solved: objective={objective:.9f}, {result.iterations} pivots, "
                    f"{prob.n_rows}x{prob.n_columns}, {time.perf_counter() - started:.3f}s")
        return LpSolution(x=x, objective=objective, status=LpStatus.OPTIMAL, iterations=result.iterations)

    def solve_instance(self, inst: Instance) -> LpSolution:
        return self.solve_lp(self.build_lp(inst))

    def check_feasibility(self, inst: Instance, x: Mapping[AssignmentRound, float],
                          tol: Optional[float] = None) -> ValidationReport:
        """Check arrival, capacity and non-negativity constraints of x on a unit-capacity instance"""
        if not inst.is_unit_capacity:
            raise ContractError("check_feasibility needs unit capacities; run expand_capacities first")
        tol = self.feas_tol if tol is None else tol
        violations: List[Violation] = []

        arrival_load: Dict[Tuple[str, int], float] = {}
        capacity_load: Dict[str, float] = {i: 0.0 for i in inst.offline_ids}
        known = set(inst.assignments)

        for (f, t), value in x.items():
            if f not in known or not 1 <= t <= inst.horizon:
                violations.append(Violation('unknown-variable', f"x[{f},{t}]",
                                            "variable does not match an assignment and round"))
                continue
            if value < -tol:
                violations.append(Violation('nonnegativity', f"x[{f},{t}]", f"value {value} is negative"))
            arrival_load[(f[1], t)] = arrival_load.get((f[1], t), 0.0) + value
            capacity_load[f[0]] += value * inst.p(f, t)

        for (j, t), load in sorted(arrival_load.items(), key=lambda item: (item[0][1], item[0][0])):
            q = inst.q(j, t)
            if load > q + tol:
                violations.append(Violation('arrival-constraint', f"arrival[{j},{t}]",
                                            f"sum of x is {load}, exceeds q = {q}"))

        for i, load in capacity_load.items():
            if load > 1.0 + tol:
                violations.append(Violation('capacity-constraint', f"capacity[{i}]",
                                            f"expected usage {load} exceeds capacity 1"))

        return ValidationReport(tuple(violations))

    @staticmethod
    def dump_lp(prob: LpProblem) -> str:
        """Plain-text listing of the LP in LP-file style, for external cross-checks"""
        def linear(coefficients: np.ndarray) -> str:
            terms = [f"{value:+.12g} x{col + 1}" for col, value in enumerate(coefficients) if value != 0.0]
            return " ".join(terms) if terms else "0"

        lines = ["\\ benchmark LP", "maximize", f" obj: {linear(prob.objective)}", "subject to"]
        for row, label in enumerate(prob.row_labels):
            lines.append(f" {label}: {linear(prob.matrix[row])} <= {prob.rhs[row]:.12g}")
        lines.append("bounds")
        for col in range(prob.n_columns):
            lines.append(f" x{col + 1} >= 0")
        lines.append("columns")
        for col, (f, t) in enumerate(prob.columns):
            lines.append(f" x{col + 1} = ({f[0]}, {f[1]}, {f[2]}) @ t={t}")
        lines.append("end")
        return "\n".join(lines) + "\n"
