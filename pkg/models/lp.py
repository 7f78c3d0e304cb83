from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, Mapping, Tuple

import numpy as np

from models.instance import AssignmentRound


class LpStatus:
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED_GUARD = "unbounded-guard"


@dataclass(frozen=True, eq=False)
class LpProblem:
    """
    Benchmark LP in inequality form: maximize c.x subject to A x <= rhs, x >= 0.

    Columns are (assignment, round) pairs with q_{j,t} > 0, ordered round-major,
    then edge order, then price index. Rows are the arrival rows (one per
    (j, t) with q_{j,t} > 0) followed by one capacity row per offline type.
    """
    columns: Tuple[AssignmentRound, ...]
    objective: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray
    row_labels: Tuple[str, ...]
    n_arrival_rows: int

    @property
    def n_rows(self) -> int:
        return len(self.row_labels)

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    @property
    def n_capacity_rows(self) -> int:
        return self.n_rows - self.n_arrival_rows


@dataclass(frozen=True)
class LpSolution:
    x: Mapping[AssignmentRound, float]
    objective: float
    status: str = LpStatus.OPTIMAL
    iterations: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'x', MappingProxyType(dict(self.x)))

    def value(self, f, t: int) -> float:
        return self.x.get((f, t), 0.0)

    def to_dict(self) -> Dict:
        return {
            'status': self.status,
            'objective': self.objective,
            'iterations': self.iterations,
            'x': [
                {'offline': f[0], 'online': f[1], 'price_index': f[2], 't': t, 'value': v}
                for (f, t), v in self.x.items() if v != 0.0
            ]
        }
