import logging
from typing import Dict, List, Optional, Tuple

from models.instance import Assignment, Instance
from models.lp import LpSolution
from models.policy import AttenuationTable, PolicyConfig, PolicyKind, PolicyState, RoundOutcome
from services.lp_service import LpService
from utils.errors import ContractError, ParameterError

logger = logging.getLogger(__name__)


class PolicyService:
    """ATT(gamma) and SAMP(gamma) as per-round decision rules driven by an LP solution"""

    def __init__(self, lp_service: Optional[LpService] = None):
        self.lp_service = lp_service or LpService()

    def precompute_attenuation(self, inst: Instance, sol: LpSolution, gamma: float) -> AttenuationTable:
        """beta_{i,t} = 1 - gamma * sum_{t'<t} sum_{f in F_i} x_{f,t'} p_{f,t'}, in one forward pass"""
        if not 0.0 <= gamma <= PolicyKind.GAMMA_MAX[PolicyKind.ATT]:
            raise ParameterError(f"Attenuation needs gamma in [0, 1/2], got {gamma}")
        if not inst.is_unit_capacity:
            raise ContractError("Attenuation needs unit capacities; run expand_capacities first")

        report = self.lp_service.check_feasibility(inst, sol.x)
        if not report.ok:
            raise ContractError(f"LP solution is infeasible: {report.rules()}")

        usage_by_round: Dict[int, List[Tuple[str, float]]] = {}
        for (f, t), value in sol.x.items():
            if value != 0.0:
                usage_by_round.setdefault(t, []).append((f[0], value * inst.p(f, t)))

        used = {i: 0.0 for i in inst.offline_ids}
        beta: Dict[Tuple[str, int], float] = {}
        for t in inst.rounds():
            for i in inst.offline_ids:
                beta[(i, t)] = 1.0 - gamma * used[i]
            for i, amount in usage_by_round.get(t, []):
                used[i] += amount
        return AttenuationTable(gamma=gamma, beta=beta)

    def initial_state(self, inst: Instance, sol: LpSolution, config: PolicyConfig,
                      attenuation: Optional[AttenuationTable] = None) -> PolicyState:
        """Every agent safe, round 1; computes attenuation for ATT when not supplied"""
        if not inst.is_unit_capacity:
            raise ContractError("Policies run on unit capacities; run expand_capacities first")
        if config.kind == PolicyKind.ATT and attenuation is None:
            attenuation = self.precompute_attenuation(inst, sol, config.gamma)
        return PolicyState(
            instance=inst,
            solution=sol,
            config=config,
            attenuation=attenuation,
            safe=frozenset(inst.offline_ids),
            t=1
        )

    @staticmethod
    def sampling_distribution(state: PolicyState, j: str, t: int) -> Tuple[Dict[Assignment, float], float]:
        """
        Sampling probabilities over F_j in assignment order, plus the reject mass.

        ATT: (x_{f,t}/q_{j,t}) * (gamma/beta_{i,t}); SAMP: gamma * x_{f,t}/q_{j,t}.
        The masses do not depend on the safe set.
        """
        inst = state.instance
        q = inst.q(j, t)
        if q <= 0:
            raise ContractError(f"Online type {j} cannot arrive in round {t} (q = 0)")

        gamma = state.config.gamma
        probs: Dict[Assignment, float] = {}
        for f in inst.assignments_for_online(j):
            x = state.solution.value(f, t)
            if x <= 0.0 or gamma == 0.0:
                probs[f] = 0.0
            elif state.config.kind == PolicyKind.ATT:
                probs[f] = (x / q) * (gamma / state.attenuation.get(f[0], t))
            else:
                probs[f] = gamma * x / q

        total = sum(probs.values())
        return probs, max(0.0, 1.0 - total)

    @staticmethod
    def draw_assignment(probs: Dict[Assignment, float], u: float) -> Optional[Assignment]:
        """Pick by a single uniform against cumulative mass in assignment order"""
        cumulative = 0.0
        for f, prob in probs.items():
            cumulative += prob
            if u < cumulative:
                return f
        return None

    @staticmethod
    def step(state: PolicyState, t: int, j: Optional[str], sampled: Optional[Assignment],
             accept: bool) -> Tuple[PolicyState, RoundOutcome]:
        """
        Apply one round: a sampled assignment on a safe agent that is accepted
        consumes the agent. An unsafe sampled agent means the assignment is
        rejected; the round is still recorded with safe=False. The returned
        state's round counter is t + 1.
        """
        inst = state.instance
        if sampled is None:
            outcome = RoundOutcome(t=t, arrival=j, sampled=None, safe=False, accepted=False, profit=0.0)
            return PolicyState(inst, state.solution, state.config, state.attenuation, state.safe, t + 1), outcome

        if sampled not in inst.assignments_for_online(j):
            raise ContractError(f"Assignment {sampled} is not in F_{j}")

        i = sampled[0]
        safe = i in state.safe
        remaining = state.safe
        profit = 0.0
        if safe and accept:
            remaining = state.safe - {i}
            profit = inst.w(sampled, t)

        outcome = RoundOutcome(t=t, arrival=j, sampled=sampled, safe=safe, accepted=bool(accept), profit=profit)
        return PolicyState(inst, state.solution, state.config, state.attenuation, remaining, t + 1), outcome
