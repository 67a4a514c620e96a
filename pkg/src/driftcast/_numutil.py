"""Small numeric helpers shared across modules."""

from __future__ import annotations

import math

import numpy as np


def logsumexp(a, b=None, axis=None):
    """ln sum b exp(a), max-shifted; scalar for axis=None on 1-d input.

    ``b`` holds optional nonnegative weights.  Empty sums and all-zero
    weights give -inf.  Leaner than the scipy equivalent, whose wrapper
    overhead dominates per-step runtime here.
    """
    a = np.asarray(a, dtype=np.float64)
    if axis is not None:
        m = np.max(a, axis=axis, initial=-math.inf)
        safe = np.where(np.isfinite(m), m, 0.0)
        shifted = np.exp(a - np.expand_dims(safe, axis))
        s = np.sum(shifted if b is None else b * shifted, axis=axis)
        with np.errstate(divide="ignore"):
            out = safe + np.log(s)
        return np.where(np.isfinite(m), out, m)
    if a.size == 0:
        return -math.inf
    m = float(np.max(a))
    if m == -math.inf:
        return -math.inf
    shifted = np.exp(a - m)
    s = float(np.sum(shifted if b is None else b * shifted))
    if s <= 0.0:
        return -math.inf
    return m + math.log(s)
