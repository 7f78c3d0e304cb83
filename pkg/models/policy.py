from dataclasses import dataclass, field
from types import MappingProxyType
from typing import FrozenSet, Mapping, Optional, Tuple

from models.instance import Assignment, Instance
from models.lp import LpSolution
from utils.errors import ParameterError


class PolicyKind:
    ATT = "att"
    SAMP = "samp"

    ALL = (ATT, SAMP)

    # largest legal gamma per policy
    GAMMA_MAX = {ATT: 0.5, SAMP: 1.0}


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    gamma: float

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in PolicyKind.ALL:
            raise ParameterError(f"Unknown policy kind: {self.kind}")
        object.__setattr__(self, 'kind', kind)
        upper = PolicyKind.GAMMA_MAX[kind]
        if not 0.0 <= self.gamma <= upper:
            raise ParameterError(f"gamma for {kind} must lie in [0, {upper}], got {self.gamma}")

    @property
    def gamma_bar(self) -> float:
        return min(0.5, self.gamma)

    def label(self) -> str:
        return f"{self.kind.upper()}({self.gamma:g})"


@dataclass(frozen=True)
class AttenuationTable:
    """beta_{i,t} = 1 - gamma * sum_{t'<t} sum_{f in F_i} x_{f,t'} p_{f,t'}"""
    gamma: float
    beta: Mapping[Tuple[str, int], float]

    def __post_init__(self):
        object.__setattr__(self, 'beta', MappingProxyType(dict(self.beta)))

    def get(self, i: str, t: int) -> float:
        return self.beta[(i, t)]

    def minimum(self) -> float:
        return min(self.beta.values()) if self.beta else 1.0


@dataclass(frozen=True)
class PolicyState:
    """Safe set and round counter of one running policy; never shared between trajectories."""
    instance: Instance
    solution: LpSolution
    config: PolicyConfig
    attenuation: Optional[AttenuationTable]
    safe: FrozenSet[str]
    t: int = 1

    def is_safe(self, i: str) -> bool:
        return i in self.safe


@dataclass(frozen=True)
class RoundOutcome:
    t: int
    arrival: Optional[str]
    sampled: Optional[Assignment]
    safe: bool
    accepted: bool
    profit: float

    @property
    def chi(self) -> bool:
        """f was scheduled and accepted this round"""
        return self.sampled is not None and self.safe and self.accepted
