import logging
import math
import time
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import Config
from models.instance import AssignmentRound, Instance
from models.lp import LpSolution
from models.policy import PolicyConfig
from models.results import ComponentDistribution, ExactEval, OracleMethod, OracleValue
from services.policy_service import PolicyService
from utils.bitmask import MaskTable
from utils.errors import ContractError, ParameterError, SizeBudgetError
from utils.rng import instance_generator
from utils.stats_utils import RunningMoments

logger = logging.getLogger(__name__)

# (agent bit, p, w) for one assignment available to the arriving type
Option = Tuple[int, float, float]


class OracleMode:
    AUTO = "auto"
    EXACT = "exact"
    SAMPLED = "sampled"

    ALL = (AUTO, EXACT, SAMPLED)


class OracleService:
    """Exact ground truth on small instances: OPT-OFF, OPT-ON and exact policy evaluation"""

    def __init__(self, policy_service: Optional[PolicyService] = None,
                 state_budget: Optional[int] = None, max_agents: Optional[int] = None,
                 max_sequences: Optional[int] = None, off_samples: Optional[int] = None):
        self.policy_service = policy_service or PolicyService()
        self.state_budget = Config.GIGMATCH_BUDGET if state_budget is None else state_budget
        self.max_agents = Config.GIGMATCH_MAX_AGENTS if max_agents is None else max_agents
        self.max_sequences = Config.GIGMATCH_MAX_SEQUENCES if max_sequences is None else max_sequences
        self.off_samples = Config.GIGMATCH_OFF_SAMPLES if off_samples is None else off_samples

    # ------------------------------------------------------------------
    # optimal benchmarks

    def opt_on(self, inst: Instance) -> OracleValue:
        """
        Online optimum by backward induction over (round, safe set).

        V_t(S) = sum_j q_{j,t} max(reject, best assignment) plus the
        no-arrival mass carrying V_{t+1}(S) over unchanged.
        """
        self._require_unit(inst)
        n_agents = len(inst.offline_types)
        states = (1 << n_agents) * inst.horizon * max(1, len(inst.assignments))
        if n_agents > 62 or states > self.state_budget:
            raise SizeBudgetError("online optimum", states, self.state_budget,
                                  hint="raise GIGMATCH_BUDGET or shrink the instance")

        started = time.perf_counter()
        table = MaskTable(n_agents)
        options = self._options(inst)
        value = np.zeros(table.size)
        for t in reversed(inst.rounds()):
            following = value
            arrived = 0.0
            value = np.zeros(table.size)
            for j in inst.arrival_support(t):
                q = inst.q(j, t)
                arrived += q
                value += q * self._bellman(table, following, options[(j, t)])
            value += max(0.0, 1.0 - arrived) * following

        result = float(value[table.full])
        logger.info(f"OPT-ON = {result:.9f} over {table.size} safe sets, {time.perf_counter() - started:.3f}s")
        return OracleValue(value=result, method=OracleMethod.EXACT)

    def opt_off(self, inst: Instance, mode: str = OracleMode.AUTO, seed: Optional[int] = None,
                n_samples: Optional[int] = None) -> OracleValue:
        """
        Clairvoyant optimum: the arrival sequence is known in advance, acceptance
        coins are not.

        Exact mode averages the per-sequence optimum over every arrival
        sequence; sequences sharing a suffix share their Bellman layers.
        Sampled mode averages over seeded draws of the sequence and reports
        the standard error. Auto picks exact when it fits the budget.
        """
        if mode not in OracleMode.ALL:
            raise ParameterError(f"Unknown oracle mode: {mode}")
        self._require_unit(inst)
        n_agents = len(inst.offline_types)
        if n_agents > 62:
            raise SizeBudgetError("clairvoyant optimum", 1 << n_agents, self.state_budget)

        supports = self._supports(inst)
        n_sequences = math.prod(len(s) for s in supports)
        states = n_sequences * (1 << n_agents)
        fits = n_sequences <= self.max_sequences and states <= self.state_budget

        if mode == OracleMode.EXACT and not fits:
            raise SizeBudgetError("exact clairvoyant optimum", states, self.state_budget,
                                  hint="use sampled mode")
        if mode == OracleMode.SAMPLED or not fits:
            if mode == OracleMode.AUTO:
                logger.warning(f"{n_sequences} arrival sequences x {1 << n_agents} safe sets exceed the budget; "
                               f"falling back to arrival sampling")
            if (1 << n_agents) * inst.horizon > self.state_budget:
                raise SizeBudgetError("sampled clairvoyant optimum", (1 << n_agents) * inst.horizon,
                                      self.state_budget)
            return self._opt_off_sampled(inst, supports, seed, n_samples)
        return self._opt_off_exact(inst, supports, n_sequences)

    def _opt_off_exact(self, inst: Instance, supports: List[List[Tuple[Optional[str], float]]],
                       n_sequences: int) -> OracleValue:
        started = time.perf_counter()
        table = MaskTable(len(inst.offline_types))
        options = self._options(inst)

        total = 0.0
        # depth-first from the last round; each node holds V_t for one arrival suffix
        stack = [(inst.horizon, np.zeros(table.size), 1.0)]
        while stack:
            t, following, weight = stack.pop()
            for j, q in supports[t - 1]:
                layer = following if j is None else self._bellman(table, following, options[(j, t)])
                if t == 1:
                    total += weight * q * layer[table.full]
                else:
                    stack.append((t - 1, layer, weight * q))

        logger.info(f"OPT-OFF = {total:.9f} over {n_sequences} arrival sequences, "
                    f"{time.perf_counter() - started:.3f}s")
        return OracleValue(value=float(total), method=OracleMethod.EXACT)

    def _opt_off_sampled(self, inst: Instance, supports: List[List[Tuple[Optional[str], float]]],
                         seed: Optional[int], n_samples: Optional[int]) -> OracleValue:
        seed = Config.GIGMATCH_DEFAULT_SEED if seed is None else seed
        n_samples = self.off_samples if n_samples is None else n_samples
        if n_samples < 1:
            raise ParameterError("Sampled clairvoyant optimum needs at least one sample")

        started = time.perf_counter()
        rng = instance_generator(seed)
        draws = rng.random((n_samples, inst.horizon))
        columns = []
        for t, support in enumerate(supports, start=1):
            cumulative = np.cumsum([q for _, q in support])
            picks = np.minimum(np.searchsorted(cumulative, draws[:, t - 1], side='right'), len(support) - 1)
            columns.append(picks)
        sequences = Counter(zip(*columns)) if columns else Counter({(): n_samples})

        table = MaskTable(len(inst.offline_types))
        options = self._options(inst)
        values, counts = [], []
        for sequence, count in sequences.items():
            layer = np.zeros(table.size)
            for t in reversed(inst.rounds()):
                j = supports[t - 1][sequence[t - 1]][0]
                if j is not None:
                    layer = self._bellman(table, layer, options[(j, t)])
            values.append(layer[table.full])
            counts.append(count)

        moments = RunningMoments()
        moments.update_batch(np.repeat(np.array(values), counts))
        logger.info(f"OPT-OFF ~ {moments.mean:.6f} +/- {moments.standard_error:.6f} from {n_samples} sampled "
                    f"sequences ({len(sequences)} distinct), {time.perf_counter() - started:.3f}s")
        return OracleValue(value=moments.mean, method=OracleMethod.SAMPLED,
                           standard_error=moments.standard_error, n_samples=n_samples)

    # ------------------------------------------------------------------
    # exact policy evaluation

    def exact_policy_eval(self, inst: Instance, sol: LpSolution, config: PolicyConfig) -> ExactEval:
        """
        Exact distribution of ATT / SAMP outcomes.

        Sampling masses of both policies do not depend on the safe set, so
        each agent loses its safety in round t with a fixed rate
        r_{i,t} = sum_j q_{j,t} sum_{f in F_i cap F_j} pi_{f,t} p_{f,t}
        whenever it is still safe. At most one agent is consumed per round,
        so agents that are never active in a common round evolve
        independently. The forward recursion over safe sets runs per group of
        linked agents and the distribution of H is the convolution of the
        per-group distributions.
        """
        self._require_unit(inst)
        started = time.perf_counter()
        state = self.policy_service.initial_state(inst, sol, config)

        agents = inst.offline_ids
        position = {i: a for a, i in enumerate(agents)}
        rates: List[Dict[int, float]] = []
        success: Dict[AssignmentRound, float] = {}
        parent = list(range(len(agents)))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for t in inst.rounds():
            round_rates: Dict[int, float] = {}
            for j in inst.arrival_support(t):
                q = inst.q(j, t)
                probs, _ = self.policy_service.sampling_distribution(state, j, t)
                for f, pi in probs.items():
                    rate = q * pi * inst.p(f, t)
                    if rate <= 0.0:
                        continue
                    success[(f, t)] = rate
                    a = position[f[0]]
                    round_rates[a] = round_rates.get(a, 0.0) + rate
            # at most one agent is consumed per round, so every agent active in t shares a group
            active = list(round_rates)
            for a in active[1:]:
                parent[find(a)] = find(active[0])
            rates.append(round_rates)

        groups: Dict[int, List[int]] = {}
        for a in range(len(agents)):
            groups.setdefault(find(a), []).append(a)

        alpha: Dict[Tuple[str, int], float] = {}
        components: List[ComponentDistribution] = []
        h_distribution = np.ones(1)
        max_covariance = 0.0 if len(groups) > 1 else -math.inf

        for members in groups.values():
            probs, component_alpha = self._component_forward(inst, members, rates)
            names = tuple(agents[a] for a in members)
            for bit, i in enumerate(names):
                for t in range(1, inst.horizon + 2):
                    alpha[(i, t)] = component_alpha[bit][t - 1]
            components.append(ComponentDistribution(agents=names, probs=probs))

            table = MaskTable(len(members))
            h_counts = np.bincount(len(members) - table.popcount, weights=probs, minlength=len(members) + 1)
            h_distribution = np.convolve(h_distribution, h_counts)
            max_covariance = max(max_covariance, self._max_pair_covariance(table, probs))

        total = float(h_distribution.sum())
        if abs(total - 1.0) > 1e-9:
            raise ContractError(f"Safe-set distribution sums to {total}, expected 1")

        chi = {(f, t): rate * alpha[(f[0], t)] for (f, t), rate in success.items()}
        expected_profit = sum(value * inst.w(f, t) for (f, t), value in chi.items())

        h_values = np.arange(h_distribution.size)
        expected_h = float(h_values @ h_distribution)
        var_h = max(0.0, float((h_values ** 2) @ h_distribution) - expected_h ** 2)
        agent_expected_h = {i: 1.0 - alpha[(i, inst.horizon + 1)] for i in agents}
        agent_var_sum = sum(e * (1.0 - e) for e in agent_expected_h.values())

        largest = max((len(c.agents) for c in components), default=0)
        logger.info(f"Exact evaluation of {config.label()}: E[profit]={expected_profit:.9f}, E[H]={expected_h:.9f}, "
                    f"Var[H]={var_h:.9f}, {len(components)} groups (largest {largest}), "
                    f"{time.perf_counter() - started:.3f}s")

        return ExactEval(
            expected_profit=float(expected_profit),
            chi=chi,
            alpha=alpha,
            components=tuple(components),
            h_distribution=h_distribution,
            expected_h=expected_h,
            var_h=var_h,
            agent_expected_h=agent_expected_h,
            agent_var_sum=float(agent_var_sum),
            max_pair_covariance=0.0 if max_covariance == -math.inf else float(max_covariance)
        )

    def _component_forward(self, inst: Instance, members: Sequence[int],
                           rates: List[Dict[int, float]]) -> Tuple[np.ndarray, List[List[float]]]:
        """Forward recursion over safe subsets of one group; returns final probs and alpha per round"""
        size = len(members)
        states = (1 << size) * inst.horizon
        if size > self.max_agents or states > self.state_budget:
            raise SizeBudgetError("exact policy evaluation", states, self.state_budget,
                                  hint=f"a group of {size} linked agents exceeds GIGMATCH_MAX_AGENTS={self.max_agents}")

        table = MaskTable(size)
        probs = np.zeros(table.size)
        probs[table.full] = 1.0
        alpha: List[List[float]] = [[] for _ in range(size)]

        for t in inst.rounds():
            for bit in range(size):
                alpha[bit].append(float(probs[table.has(bit)].sum()))
            moved = probs.copy()
            for bit, a in enumerate(members):
                rate = rates[t - 1].get(a, 0.0)
                if rate <= 0.0:
                    continue
                holders = np.flatnonzero(table.has(bit))
                flow = probs[holders] * rate
                moved[holders] -= flow
                moved[holders ^ (1 << bit)] += flow
            probs = moved

        for bit in range(size):
            alpha[bit].append(float(probs[table.has(bit)].sum()))
        return probs, alpha

    @staticmethod
    def _max_pair_covariance(table: MaskTable, probs: np.ndarray) -> float:
        """Largest Cov[H_a, H_b] over pairs inside one group (-inf for a single agent)"""
        best = -math.inf
        unsafe = [~table.has(bit) for bit in range(table.n)]
        means = [float(probs[u].sum()) for u in unsafe]
        for a in range(table.n):
            for b in range(a + 1, table.n):
                joint = float(probs[unsafe[a] & unsafe[b]].sum())
                best = max(best, joint - means[a] * means[b])
        return best

    # ------------------------------------------------------------------
    # helpers

    @staticmethod
    def _require_unit(inst: Instance) -> None:
        if not inst.is_unit_capacity:
            raise ContractError("Oracles need unit capacities; run expand_capacities first")

    @staticmethod
    def _supports(inst: Instance) -> List[List[Tuple[Optional[str], float]]]:
        """Per round: arriving types with their mass, plus None for the no-arrival remainder"""
        supports = []
        for t in inst.rounds():
            support: List[Tuple[Optional[str], float]] = [(j, inst.q(j, t)) for j in inst.arrival_support(t)]
            remainder = 1.0 - sum(q for _, q in support)
            if remainder > Config.GIGMATCH_PROB_TOL or not support:
                support.append((None, max(remainder, 0.0) if support else 1.0))
            supports.append(support)
        return supports

    @staticmethod
    def _options(inst: Instance) -> Dict[Tuple[str, int], List[Option]]:
        """Assignments worth offering per (j, t); zero-profit ones never beat rejecting"""
        position = {i: a for a, i in enumerate(inst.offline_ids)}
        options: Dict[Tuple[str, int], List[Option]] = {}
        for t in inst.rounds():
            for j in inst.arrival_support(t):
                options[(j, t)] = [
                    (position[f[0]], inst.p(f, t), inst.w(f, t))
                    for f in inst.assignments_for_online(j)
                    if inst.p(f, t) * inst.w(f, t) > 0.0
                ]
        return options

    @staticmethod
    def _bellman(table: MaskTable, following: np.ndarray, options: List[Option]) -> np.ndarray:
        """max over rejecting and every offered assignment whose agent is safe"""
        best = following.copy()
        for bit, p, w in options:
            candidate = p * (w + following[table.without(bit)]) + (1.0 - p) * following
            np.copyto(best, candidate, where=table.has(bit) & (candidate > best))
        return best
