from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

import numpy as np

from models.instance import AssignmentRound
from models.policy import PolicyKind, RoundOutcome


class OracleMethod:
    EXACT = "exact-enumeration"
    SAMPLED = "arrival-sampled"


@dataclass(frozen=True)
class OracleValue:
    value: float
    method: str = OracleMethod.EXACT
    standard_error: float = 0.0
    n_samples: int = 0

    def to_dict(self) -> Dict:
        return {
            'value': self.value,
            'method': self.method,
            'standard_error': self.standard_error,
            'n_samples': self.n_samples
        }


@dataclass(frozen=True, eq=False)
class ComponentDistribution:
    """Distribution over safe subsets of one independent group of unit agents (bit a = agents[a])."""
    agents: Tuple[str, ...]
    probs: np.ndarray

    def total(self) -> float:
        return float(self.probs.sum())


@dataclass(frozen=True, eq=False)
class ExactEval:
    expected_profit: float
    chi: Mapping[AssignmentRound, float]
    # (i, t) -> Pr[i safe at the start of t]; t = T + 1 is the end of the horizon
    alpha: Mapping[Tuple[str, int], float]
    components: Tuple[ComponentDistribution, ...]
    h_distribution: np.ndarray
    expected_h: float
    var_h: float
    agent_expected_h: Mapping[str, float]
    agent_var_sum: float
    max_pair_covariance: float

    @property
    def agent_var_h(self) -> Dict[str, float]:
        """Var[H_i] of the Bernoulli indicator of agent i being matched"""
        return {i: e * (1.0 - e) for i, e in self.agent_expected_h.items()}

    def final_safe_set_distribution(self, max_agents: int = 16) -> Dict[FrozenSet[str], float]:
        """Materialise Pr[S_final = S] as the product of component distributions"""
        n_agents = sum(len(c.agents) for c in self.components)
        if n_agents > max_agents:
            raise ValueError(f"{n_agents} agents exceed the materialisation cap of {max_agents}")
        result: Dict[FrozenSet[str], float] = {frozenset(): 1.0}
        for component in self.components:
            merged: Dict[FrozenSet[str], float] = {}
            for mask, prob in enumerate(component.probs):
                if prob == 0.0:
                    continue
                members = frozenset(a for bit, a in enumerate(component.agents) if mask >> bit & 1)
                for prefix, prefix_prob in result.items():
                    merged[prefix | members] = merged.get(prefix | members, 0.0) + prefix_prob * prob
            result = merged
        return result

    def to_dict(self) -> Dict:
        return {
            'expected_profit': self.expected_profit,
            'expected_h': self.expected_h,
            'var_h': self.var_h,
            'agent_var_sum': self.agent_var_sum,
            'max_pair_covariance': self.max_pair_covariance,
            'h_distribution': [float(v) for v in self.h_distribution]
        }


@dataclass(frozen=True, eq=False)
class Trajectory:
    seed: int
    replication: int
    outcomes: Tuple[RoundOutcome, ...]
    total_profit: float
    total_matches: int
    matches_by_type: Mapping[str, int]

    def __post_init__(self):
        object.__setattr__(self, 'matches_by_type', MappingProxyType(dict(self.matches_by_type)))


@dataclass(frozen=True, eq=False)
class McSummary:
    n: int
    master_seed: int
    mean_profit: float
    mean_h: float
    se_profit: float
    se_h: float
    var_h: Optional[float]
    var_profit: Optional[float]
    se_var_h: Optional[float]
    mean_h_by_type: Mapping[str, float]
    profits: np.ndarray
    matches: np.ndarray

    @property
    def has_variance(self) -> bool:
        return self.var_h is not None

    def to_dict(self) -> Dict:
        return {
            'n': self.n,
            'master_seed': self.master_seed,
            'mean_profit': self.mean_profit,
            'se_profit': self.se_profit,
            'mean_h': self.mean_h,
            'se_h': self.se_h,
            'var_h': self.var_h,
            'se_var_h': self.se_var_h,
            'var_profit': self.var_profit,
            'mean_h_by_type': dict(self.mean_h_by_type)
        }


@dataclass
class RunSpec:
    policy: str
    gamma: float
    n: int
    master_seed: int
    instance_path: Optional[str] = None
    ref_kind: Optional[str] = None
    eps: Optional[float] = None
    m: Optional[int] = None
    ref_gamma: Optional[float] = None
    output_format: str = "csv"
    output_path: Optional[str] = None

    def validate(self) -> List[str]:
        """Return a list of problems; empty when the run can start"""
        problems = []
        if (self.instance_path is None) == (self.ref_kind is None):
            problems.append("exactly one of --instance and --ref is required")
        if self.output_format not in ('csv', 'json'):
            problems.append(f"unknown output format: {self.output_format}")
        if self.n < 1:
            problems.append("n must be at least 1")
        upper = PolicyKind.GAMMA_MAX.get(str(self.policy).lower())
        if upper is None:
            problems.append(f"unknown policy: {self.policy}")
        elif not 0.0 <= self.gamma <= upper:
            problems.append(f"gamma for {self.policy} must lie in [0, {upper}]")
        return problems
