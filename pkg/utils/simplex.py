"""
Dense-tableau primal simplex for problems of the form

    maximize c.x  subject to  A x <= b,  x >= 0,  b >= 0.

The slack basis is feasible because b >= 0, so no phase one is needed.
Entering and leaving variables follow Bland's rule.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from utils.errors import ContractError, SolverError

logger = logging.getLogger(__name__)


@dataclass
class SimplexResult:
    status: str
    x: np.ndarray
    objective: float
    iterations: int


class DenseSimplex:
    """Bland's-rule tableau simplex with an explicit iteration cap"""

    def __init__(self, tol: float = 1e-9, iteration_factor: int = 50):
        self.tol = tol
        self.iteration_factor = iteration_factor

    def maximize(self, c: np.ndarray, A: np.ndarray, b: np.ndarray,
                 max_iterations: Optional[int] = None) -> SimplexResult:
        """
        Solve the LP from the slack basis.

        Args:
            c: Objective coefficients, shape (n,)
            A: Constraint matrix, shape (m, n)
            b: Non-negative right-hand sides, shape (m,)
            max_iterations: Pivot cap, default iteration_factor * (m + n)

        Returns:
            SimplexResult with status 'optimal' or 'unbounded'
        """
        c = np.asarray(c, dtype=float)
        A = np.asarray(A, dtype=float).reshape(len(b), len(c))
        b = np.asarray(b, dtype=float)
        m, n = A.shape

        if np.any(b < -self.tol):
            raise ContractError("Right-hand sides must be non-negative for a slack starting basis")

        if max_iterations is None:
            max_iterations = self.iteration_factor * (m + n)

        tableau = np.zeros((m + 1, n + m + 1))
        tableau[:m, :n] = A
        tableau[:m, n:n + m] = np.eye(m)
        tableau[:m, -1] = np.maximum(b, 0.0)
        tableau[m, :n] = -c
        basis = list(range(n, n + m))

        iterations = 0
        while True:
            reduced = tableau[m, :-1]
            entering_candidates = np.flatnonzero(reduced < -self.tol)
            if entering_candidates.size == 0:
                break

            if iterations >= max_iterations:
                raise SolverError(
                    f"Simplex exceeded {max_iterations} pivots",
                    diagnostics={
                        'rows': m,
                        'columns': n,
                        'iterations': iterations,
                        'objective': float(tableau[m, -1]),
                        'most_negative_reduced_cost': float(reduced.min())
                    }
                )

            entering = int(entering_candidates[0])
            column = tableau[:m, entering]
            eligible = np.flatnonzero(column > self.tol)
            if eligible.size == 0:
                logger.warning(f"Unbounded direction found at column {entering}")
                return SimplexResult('unbounded', np.zeros(n), float('inf'), iterations)

            ratios = tableau[eligible, -1] / column[eligible]
            best = ratios.min()
            # Bland: among minimum-ratio rows, leave with the smallest basic index
            tied = eligible[ratios <= best + self.tol]
            leaving_row = int(min(tied, key=lambda r: basis[r]))

            self._pivot(tableau, leaving_row, entering)
            basis[leaving_row] = entering
            iterations += 1

        x = np.zeros(n + m)
        for row, var in enumerate(basis):
            x[var] = tableau[row, -1]
        x = x[:n]
        x[np.abs(x) <= self.tol] = 0.0

        logger.debug(f"Simplex finished after {iterations} pivots ({m} rows, {n} columns)")
        return SimplexResult('optimal', x, float(tableau[m, -1]), iterations)

    @staticmethod
    def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
        tableau[row] /= tableau[row, col]
        factors = tableau[:, col].copy()
        factors[row] = 0.0
        tableau -= np.outer(factors, tableau[row])
