from typing import Dict, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import gammaln, kolmogi
from scipy.stats import ks_2samp, poisson

from app.core.errors import InvalidArgumentError
import logging

logger = logging.getLogger(__name__)


class StatisticsService:
    @staticmethod
    def ks_distance(a: Sequence[int], b: Sequence[int]) -> float:
        """Two-sample Kolmogorov-Smirnov statistic: sup |F_a - F_b| over the integers"""
        a = np.asarray(a)
        b = np.asarray(b)
        if a.size == 0 or b.size == 0:
            raise InvalidArgumentError("ks_distance needs two nonempty samples")
        return float(ks_2samp(a, b).statistic)

    @staticmethod
    def ks_radius(n: int, m: int, alpha: float = 0.01) -> float:
        """Asymptotic two-sample KS critical value at level alpha"""
        if n < 1 or m < 1:
            raise InvalidArgumentError(f"sample sizes must be positive, got {n}, {m}")
        return float(kolmogi(alpha) * np.sqrt((n + m) / (n * m)))

    @staticmethod
    def binomial_radius(p: float, n: int, sigmas: float = 3.0) -> float:
        if n < 1:
            raise InvalidArgumentError(f"sample size must be positive, got {n}")
        p = min(max(p, 0.0), 1.0)
        return float(sigmas * np.sqrt(p * (1.0 - p) / n))

    @staticmethod
    def difference_radius(p: float, n: int, q: float, m: int, sigmas: float = 3.0) -> float:
        """sigmas standard deviations of the difference of two independent frequencies"""
        p = min(max(p, 0.0), 1.0)
        q = min(max(q, 0.0), 1.0)
        return float(sigmas * np.sqrt(p * (1.0 - p) / n + q * (1.0 - q) / m))

    @staticmethod
    def empirical_pmf(samples: Iterable[int]) -> Dict[int, float]:
        values, counts = np.unique(np.asarray(list(samples)), return_counts=True)
        total = counts.sum()
        return {int(v): float(c / total) for v, c in zip(values, counts)}

    @staticmethod
    def poisson_pmf(k: int, mean: float) -> float:
        return float(poisson.pmf(k, mean))

    @staticmethod
    def tail_bound(k: int, t: float, rate: float) -> float:
        """(t rate)^|k| / |k|!, the Poisson-type bound on a displacement of k"""
        k = abs(k)
        if t * rate <= 0:
            return float(k == 0)
        return float(np.exp(k * np.log(t * rate) - gammaln(k + 1)))

    @staticmethod
    def max_law_difference(a: Mapping, b: Mapping) -> float:
        """Largest absolute probability difference between two laws given as {outcome: probability}"""
        keys = set(a) | set(b)
        if not keys:
            return 0.0
        return max(abs(a.get(key, 0.0) - b.get(key, 0.0)) for key in keys)


statistics_service = StatisticsService()
