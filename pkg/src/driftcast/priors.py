"""Prior weights over a countably infinite expert pool.

The shipped prior puts mass proportional to 1/((i+1) ln^2(i+1)) on expert
i >= 1 and normalizes by the series constant c ~ 2.10974.  The series
starts at i = 1 because the i = 0 term would divide by ln^2(1) = 0.

Tail masses decay only logarithmically, so they are never small enough to
suffer catastrophic cancellation; partial sums are cached because the
weight updates query them every step.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

SERIES_CUTOFF = 10**6


def _series_terms(indices: np.ndarray) -> np.ndarray:
    return 1.0 / ((indices + 1.0) * np.log(indices + 1.0) ** 2)


@lru_cache(maxsize=1)
def prior_constant() -> float:
    """Normalizing constant c = sum_{i>=1} 1/((i+1) ln^2(i+1)).

    Explicit summation up to 10^6 plus the midpoint integral tail
    1/ln(N + 1.5).  The midpoint rule leaves an O(1/(N^2 ln^2 N)) error,
    so the absolute error is far below 1e-10.
    """
    idx = np.arange(1, SERIES_CUTOFF + 1, dtype=np.float64)
    partial = float(np.sum(_series_terms(idx)))
    return partial + 1.0 / math.log(SERIES_CUTOFF + 1.5)


def prior_weight(i):
    """Weight of expert i under the shipped prior, 1/(c (i+1) ln^2(i+1)).

    Accepts a scalar or an integer array; every index must be >= 1.
    """
    arr = np.asarray(i)
    if np.any(arr < 1):
        raise ValueError("expert indices start at 1 (index 0 divides by ln^2(1) = 0)")
    out = _series_terms(arr.astype(np.float64)) / prior_constant()
    return float(out) if np.isscalar(i) or arr.ndim == 0 else out


class PriorWeights:
    """Cached view of the prior: weights, log weights and tail masses.

    ``tail_mass(t)`` is the total prior mass of experts above index t.
    Cumulative sums are extended on demand and reused, which keeps the
    per-step bookkeeping of a growing expert pool O(1) amortized.
    """

    def __init__(self):
        self.normalizing_constant = prior_constant()
        self.start_index = 1
        self._cum = np.zeros(1)  # _cum[t] = sum of weights 1..t
        self._logs = np.zeros(0)  # _logs[i-1] = ln weight(i)

    def _extend(self, t: int) -> None:
        have = len(self._cum) - 1
        if t <= have:
            return
        grow_to = max(t, 2 * have, 64)
        idx = np.arange(have + 1, grow_to + 1, dtype=np.float64)
        new = self._cum[-1] + np.cumsum(
            _series_terms(idx) / self.normalizing_constant
        )
        self._cum = np.concatenate([self._cum, new])
        self._logs = np.concatenate([self._logs, self.log_weight(idx.astype(np.int64))])

    def weight(self, i):
        return prior_weight(i)

    def log_weight(self, i):
        arr = np.asarray(i)
        if np.any(arr < 1):
            raise ValueError("expert indices start at 1")
        x = arr.astype(np.float64)
        out = -(
            math.log(self.normalizing_constant)
            + np.log(x + 1.0)
            + 2.0 * np.log(np.log(x + 1.0))
        )
        return float(out) if np.isscalar(i) or arr.ndim == 0 else out

    def cumulative(self, t: int) -> float:
        """Total prior mass of experts 1..t (0 for t = 0)."""
        if t < 0:
            raise ValueError("t must be nonnegative")
        self._extend(t)
        return float(self._cum[t])

    def log_weights_upto(self, t: int) -> np.ndarray:
        """Cached read-only ln weight(i) for i = 1..t."""
        self._extend(t)
        return self._logs[:t]

    def tail_mass(self, t: int) -> float:
        """Total prior mass of experts above index t."""
        return 1.0 - self.cumulative(t)

    def index_bound(self, eps: float) -> int:
        """An index N whose tail mass is provably below eps.

        The tail above N is at most the integral bound 1/(c ln(N+1)), so
        exp(1/(c eps)) suffices; the bound grows exponentially in 1/eps
        and is returned without materializing any cache.
        """
        if not 0.0 < eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        return math.ceil(math.exp(1.0 / (self.normalizing_constant * eps)))
