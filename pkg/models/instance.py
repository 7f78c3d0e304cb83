from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

# f = (offline id, online id, price index)
Assignment = Tuple[str, str, int]
# (assignment, round) key of an LP column / event indicator
AssignmentRound = Tuple[Assignment, int]


@dataclass(frozen=True)
class OfflineType:
    id: str
    capacity: int = 1


@dataclass(frozen=True)
class OnlineType:
    id: str


@dataclass(frozen=True)
class RoundTable:
    """
    Sparse per-(assignment, round) values.

    `constant` holds values that apply to every round, `by_round` holds
    round-specific overrides. Lookups fall back to `default`.
    """
    constant: Mapping[Assignment, float] = field(default_factory=dict)
    by_round: Mapping[AssignmentRound, float] = field(default_factory=dict)
    default: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'constant', MappingProxyType(dict(self.constant)))
        object.__setattr__(self, 'by_round', MappingProxyType(dict(self.by_round)))

    def get(self, f: Assignment, t: int) -> float:
        value = self.by_round.get((f, t))
        if value is not None:
            return value
        return self.constant.get(f, self.default)

    def entries(self) -> Iterator[Tuple[Assignment, Optional[int], float]]:
        """Yield (assignment, round or None for constant, value)"""
        for f, value in self.constant.items():
            yield f, None, value
        for (f, t), value in self.by_round.items():
            yield f, t, value

    def remap(self, mapping: Mapping[str, List[str]]) -> 'RoundTable':
        """Copy every entry onto the offline ids listed for its original offline id"""
        constant = {}
        by_round = {}
        for (i, j, k), value in self.constant.items():
            for copy_id in mapping.get(i, [i]):
                constant[(copy_id, j, k)] = value
        for ((i, j, k), t), value in self.by_round.items():
            for copy_id in mapping.get(i, [i]):
                by_round[((copy_id, j, k), t)] = value
        return RoundTable(constant=constant, by_round=by_round, default=self.default)


@dataclass(frozen=True)
class Instance:
    """
    One MP-KHD input: bipartite graph, prices, horizon, arrival rates,
    acceptance probabilities, profits and capacities.

    Rounds are 1-based. Missing arrival entries mean q = 0, missing acceptance
    probabilities mean p = 1 and missing profits mean w = 0. Instances are
    never mutated after construction.
    """
    offline_types: Tuple[OfflineType, ...]
    online_types: Tuple[OnlineType, ...]
    prices: Tuple[float, ...]
    edges: Tuple[Tuple[str, str], ...]
    horizon: int
    arrival: Mapping[Tuple[str, int], float]
    accept_prob: RoundTable = field(default_factory=lambda: RoundTable(default=1.0))
    profit: RoundTable = field(default_factory=lambda: RoundTable(default=0.0))
    # copy id -> original offline id; empty unless produced by capacity expansion
    origin: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'offline_types', tuple(self.offline_types))
        object.__setattr__(self, 'online_types', tuple(self.online_types))
        object.__setattr__(self, 'prices', tuple(self.prices))
        object.__setattr__(self, 'edges', tuple(tuple(e) for e in self.edges))
        object.__setattr__(self, 'arrival', MappingProxyType(dict(self.arrival)))
        object.__setattr__(self, 'origin', MappingProxyType(dict(self.origin)))

    @property
    def offline_ids(self) -> Tuple[str, ...]:
        return tuple(o.id for o in self.offline_types)

    @property
    def online_ids(self) -> Tuple[str, ...]:
        return tuple(o.id for o in self.online_types)

    @property
    def total_capacity(self) -> int:
        """B = sum of offline capacities"""
        return sum(o.capacity for o in self.offline_types)

    @property
    def is_unit_capacity(self) -> bool:
        return all(o.capacity == 1 for o in self.offline_types)

    def original_of(self, offline_id: str) -> str:
        return self.origin.get(offline_id, offline_id)

    def q(self, j: str, t: int) -> float:
        return self.arrival.get((j, t), 0.0)

    def p(self, f: Assignment, t: int) -> float:
        return self.accept_prob.get(f, t)

    def w(self, f: Assignment, t: int) -> float:
        return self.profit.get(f, t)

    @cached_property
    def assignments(self) -> Tuple[Assignment, ...]:
        """F in deterministic order: edge order, then price index"""
        return tuple((i, j, k) for (i, j) in self.edges for k in range(len(self.prices)))

    @cached_property
    def _by_online(self) -> Dict[str, Tuple[Assignment, ...]]:
        grouped: Dict[str, List[Assignment]] = {j: [] for j in self.online_ids}
        for f in self.assignments:
            grouped.setdefault(f[1], []).append(f)
        return {j: tuple(fs) for j, fs in grouped.items()}

    @cached_property
    def _by_offline(self) -> Dict[str, Tuple[Assignment, ...]]:
        grouped: Dict[str, List[Assignment]] = {i: [] for i in self.offline_ids}
        for f in self.assignments:
            grouped.setdefault(f[0], []).append(f)
        return {i: tuple(fs) for i, fs in grouped.items()}

    def assignments_for_online(self, j: str) -> Tuple[Assignment, ...]:
        """F_j"""
        return self._by_online.get(j, ())

    def assignments_for_offline(self, i: str) -> Tuple[Assignment, ...]:
        """F_i"""
        return self._by_offline.get(i, ())

    def rounds(self) -> range:
        return range(1, self.horizon + 1)

    def arrival_support(self, t: int) -> Tuple[str, ...]:
        """Online types with q_{j,t} > 0, in online-type order"""
        return tuple(j for j in self.online_ids if self.q(j, t) > 0)

    def __repr__(self):
        return (f"<Instance(|I|={len(self.offline_types)}, |J|={len(self.online_types)}, "
                f"K={len(self.prices)}, |E|={len(self.edges)}, T={self.horizon}, B={self.total_capacity})>")


@dataclass(frozen=True)
class Violation:
    rule: str
    location: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> List[str]:
        return sorted({v.rule for v in self.violations})

    def to_dict(self) -> Dict:
        return {
            'ok': self.ok,
            'violations': [
                {'rule': v.rule, 'location': v.location, 'message': v.message}
                for v in self.violations
            ]
        }
