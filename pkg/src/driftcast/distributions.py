"""Sparse distributions over the expert pool, with an analytic prior tail.

A ``Distribution`` stores explicit masses on a finite support plus a
single scalar ``tail_coefficient``: every index outside the support
carries ``tail_coefficient * prior.weight(i)``.  This is closed under
all the update rules used here, so the infinite pool never has to be
enumerated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from ._numutil import logsumexp

from .priors import PriorWeights


@dataclass(frozen=True)
class Distribution:
    """Probability masses on ``indices`` plus a prior-shaped tail.

    ``indices`` must be unique, sorted, and >= 1.  ``prior`` is required
    whenever ``tail_coefficient`` is positive.
    """

    indices: np.ndarray
    masses: np.ndarray
    tail_coefficient: float = 0.0
    prior: PriorWeights | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        mass = np.asarray(self.masses, dtype=np.float64)
        if idx.shape != mass.shape or idx.ndim != 1:
            raise ValueError("indices and masses must be 1-d arrays of equal length")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 1):
            raise ValueError("indices must be strictly increasing and >= 1")
        if np.any(mass < 0) or self.tail_coefficient < 0:
            raise ValueError("masses must be nonnegative")
        if self.tail_coefficient > 0 and self.prior is None:
            raise ValueError("a positive tail coefficient needs a prior")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "masses", mass)

    def prior_outside_mass(self) -> float:
        """Prior mass of all indices outside the support."""
        if self.prior is None:
            return 0.0
        n = self.indices.size
        if n and self.indices[0] == 1 and self.indices[-1] == n:
            return self.prior.tail_mass(n)  # contiguous 1..n support
        if n == 0:
            return 1.0
        return 1.0 - float(np.sum(self.prior.weight(self.indices)))

    def tail_mass(self) -> float:
        if self.tail_coefficient == 0.0:
            return 0.0
        return self.tail_coefficient * self.prior_outside_mass()

    def total_mass(self) -> float:
        return float(np.sum(self.masses)) + self.tail_mass()

    def mass_at(self, indices) -> np.ndarray:
        """Mass at arbitrary indices, explicit entries or tail."""
        query = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        if np.any(query < 1):
            raise ValueError("indices start at 1")
        out = np.zeros(query.shape, dtype=np.float64)
        if self.indices.size:
            pos = np.searchsorted(self.indices, query)
            safe = np.minimum(pos, self.indices.size - 1)
            hit = (pos < self.indices.size) & (self.indices[safe] == query)
            out[hit] = self.masses[pos[hit]]
        else:
            hit = np.zeros(query.shape, dtype=bool)
        if self.tail_coefficient > 0 and not np.all(hit):
            out[~hit] = self.tail_coefficient * self.prior.weight(query[~hit])
        return out


def relative_entropy(p: Distribution, q: Distribution) -> float:
    """Kullback-Leibler divergence sum_i p_i ln(p_i / q_i), with 0 ln 0 = 0.

    Returns ``math.inf`` when p puts mass where q has none, so callers
    can skip divergent pairs instead of handling an exception.
    """
    positive = p.masses > 0
    value = 0.0
    if np.any(positive):
        p_pos = p.masses[positive]
        q_pos = q.mass_at(p.indices[positive])
        if np.any(q_pos == 0):
            return math.inf
        value += float(np.sum(p_pos * np.log(p_pos / q_pos)))
    if p.tail_coefficient > 0:
        # The analytic tail term needs q to be prior-shaped everywhere
        # outside p's support, i.e. q's support within p's.
        if not np.all(np.isin(q.indices, p.indices)):
            raise ValueError("tail-vs-tail divergence needs q's support inside p's")
        if q.tail_coefficient == 0:
            return math.inf
        value += p.tail_mass() * math.log(p.tail_coefficient / q.tail_coefficient)
    return value


def log_mix(dist: Distribution, exponents, eta: float, tail_exponent: float | None = None) -> float:
    """Exponential mixture -(1/eta) ln sum_i w_i exp(-eta x_i).

    ``exponents`` supplies x_i on the support; a positive tail takes the
    single shared ``tail_exponent``.  Evaluated through a max-shifted
    log-sum-exp, so large exponents cannot underflow the sum.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    x = np.asarray(exponents, dtype=np.float64)
    if x.shape != dist.masses.shape:
        raise ValueError("exponents must match the support")
    terms = [-eta * x]
    weights = [dist.masses]
    if dist.tail_coefficient > 0:
        if tail_exponent is None:
            raise ValueError("a positive tail needs a shared tail exponent")
        terms.append(np.array([-eta * float(tail_exponent)]))
        weights.append(np.array([dist.tail_mass()]))
    a = np.concatenate(terms)
    b = np.concatenate(weights)
    if not np.any(b > 0):
        raise ValueError("all weights are zero")
    return float(-logsumexp(a, b=b) / eta)
