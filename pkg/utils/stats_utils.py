import math
from typing import Dict, Optional

import numpy as np

from models.policy import PolicyKind
from utils.errors import ParameterError


class RunningMoments:
    """
    One-pass central moments (up to the fourth) with batch merging.

    Single values use Welford's update; batches are reduced with numpy and
    merged with the pairwise combination formulas, so chunked and scalar
    accumulation agree to rounding.
    """

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.M2 = 0.0
        self.M3 = 0.0
        self.M4 = 0.0

    def update(self, x: float) -> None:
        """Add one value"""
        n1 = self.n
        self.n += 1
        delta = x - self.mean
        delta_n = delta / self.n
        delta_n2 = delta_n * delta_n
        term1 = delta * delta_n * n1
        self.mean += delta_n
        self.M4 += term1 * delta_n2 * (self.n * self.n - 3 * self.n + 3) + 6 * delta_n2 * self.M2 - 4 * delta_n * self.M3
        self.M3 += term1 * delta_n * (self.n - 2) - 3 * delta_n * self.M2
        self.M2 += term1

    def update_batch(self, values: np.ndarray) -> None:
        """Merge a whole array of values"""
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return
        other = RunningMoments()
        other.n = int(values.size)
        other.mean = float(values.mean())
        d = values - other.mean
        d2 = d * d
        other.M2 = float(d2.sum())
        other.M3 = float((d2 * d).sum())
        other.M4 = float((d2 * d2).sum())
        self.merge(other)

    def merge(self, other: 'RunningMoments') -> None:
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.M2, self.M3, self.M4 = other.n, other.mean, other.M2, other.M3, other.M4
            return
        na, nb = self.n, other.n
        n = na + nb
        delta = other.mean - self.mean
        delta2 = delta * delta
        mean = self.mean + delta * nb / n
        M2 = self.M2 + other.M2 + delta2 * na * nb / n
        M3 = (self.M3 + other.M3 + delta2 * delta * na * nb * (na - nb) / (n * n)
              + 3.0 * delta * (na * other.M2 - nb * self.M2) / n)
        M4 = (self.M4 + other.M4 + delta2 * delta2 * na * nb * (na * na - na * nb + nb * nb) / (n ** 3)
              + 6.0 * delta2 * (na * na * other.M2 + nb * nb * self.M2) / (n * n)
              + 4.0 * delta * (na * other.M3 - nb * self.M3) / n)
        self.n, self.mean, self.M2, self.M3, self.M4 = n, mean, M2, M3, M4

    @property
    def variance(self) -> Optional[float]:
        """Unbiased sample variance, None below two values"""
        if self.n < 2:
            return None
        return self.M2 / (self.n - 1)

    @property
    def standard_error(self) -> float:
        """Standard error of the mean (0 below two values)"""
        if self.n < 2:
            return 0.0
        return math.sqrt(self.variance / self.n)

    @property
    def variance_standard_error(self) -> Optional[float]:
        """Large-sample standard error of the sample variance"""
        if self.n < 2:
            return None
        s2 = self.variance
        mu4 = self.M4 / self.n
        value = (mu4 - (self.n - 3) / (self.n - 1) * s2 * s2) / self.n
        return math.sqrt(max(value, 0.0))


class BoundCalculator:
    """Guarantees proved for the two sampling policies"""

    @staticmethod
    def gamma_bar(gamma: float) -> float:
        return min(0.5, gamma)

    @staticmethod
    def competitive_ratio_bound(kind: str, gamma: float) -> float:
        """
        Guaranteed ratio E[ALG] / OPT-LP

        Args:
            kind: 'att' or 'samp'
            gamma: Policy parameter

        Returns:
            gamma for ATT, gamma * (1 - gamma) for SAMP
        """
        if kind == PolicyKind.ATT:
            return gamma
        if kind == PolicyKind.SAMP:
            return gamma * (1.0 - gamma)
        raise ParameterError(f"Unknown policy kind: {kind}")

    @staticmethod
    def variance_bound(kind: str, gamma: float, total_capacity: int) -> float:
        """
        Upper bound on Var[H], the variance of the number of successful assignments

        Args:
            kind: 'att' or 'samp'
            gamma: Policy parameter
            total_capacity: B

        Returns:
            gamma(1-gamma)B for ATT, gamma_bar(1-gamma_bar)B for SAMP
        """
        if kind == PolicyKind.ATT:
            return gamma * (1.0 - gamma) * total_capacity
        if kind == PolicyKind.SAMP:
            g = BoundCalculator.gamma_bar(gamma)
            return g * (1.0 - g) * total_capacity
        raise ParameterError(f"Unknown policy kind: {kind}")

    @staticmethod
    def chebyshev_risk(mean: float, variance: float, threshold: float) -> float:
        """
        Chebyshev upper bound on Pr[X <= threshold]

        Args:
            mean: E[X]
            variance: Var[X] or an upper bound on it
            threshold: Profit level strictly below the mean

        Returns:
            min(1, variance / (mean - threshold)^2)
        """
        if threshold >= mean:
            raise ParameterError(f"Threshold {threshold} must be below the mean {mean}; the bound is vacuous")
        if variance < 0:
            raise ParameterError(f"Variance must be non-negative, got {variance}")
        return min(1.0, variance / (mean - threshold) ** 2)


class ReferenceFormulas:
    """Closed-form values of the four tightness instances"""

    @staticmethod
    def att_cr(eps: float, gamma: float) -> Dict[str, float]:
        return {
            'opt_lp': 2.0 - eps,
            'opt_off': 2.0 - eps,
            'opt_on': 1.0,
            'expected_profit': gamma * (2.0 - eps),
            'ratio': gamma
        }

    @staticmethod
    def samp_cr(eps: float, gamma: float) -> Dict[str, float]:
        opt = 1.0 / eps + 1.0 - eps
        profit = gamma * (1.0 - eps) + (gamma / eps) * (1.0 - gamma + gamma * eps)
        return {
            'opt_lp': opt,
            'opt_off': opt,
            'expected_profit': profit,
            'ratio': profit / opt,
            'ratio_limit': gamma * (1.0 - gamma)
        }

    @staticmethod
    def att_var(m: int, gamma: float) -> Dict[str, float]:
        return {
            'opt_lp': float(m),
            'expected_h': gamma * m,
            'var_h': gamma * (1.0 - gamma) * m
        }

    @staticmethod
    def samp_var(m: int, gamma: float) -> Dict[str, float]:
        g = BoundCalculator.gamma_bar(gamma)
        return {
            'expected_h': g * m,
            'var_h': g * (1.0 - g) * m
        }
