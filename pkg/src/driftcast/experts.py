"""Windowed ridge-regression experts: frozen linear predictors.

An expert created at step t is fitted once, on the window of the h most
recent observations, and never refitted; tracking changing generators is
the aggregation layer's job, not the expert's.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg


def ridge_fit(signals, responses, sigma: float) -> np.ndarray:
    """Solve (sigma I + X'X) a = X'y for the coefficient vector a.

    Rows of X are the window observations.  sigma > 0 keeps the system
    symmetric positive definite, so a Cholesky-backed solve applies.
    """
    X = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    y = np.asarray(responses, dtype=np.float64).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} signals vs {y.shape[0]} responses")
    if X.shape[0] < 1:
        raise ValueError("window must hold at least one observation")
    if sigma <= 0:
        raise ValueError("ridge sigma must be positive")
    n = X.shape[1]
    gram = X.T @ X + sigma * np.eye(n)
    return linalg.solve(gram, X.T @ y, assume_a="pos")


@dataclass(frozen=True)
class LinearExpert:
    """Inner-product predictor f(x) = a . x, tagged with its creation step."""

    expert_id: int
    coef: np.ndarray

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.coef.shape:
            raise ValueError(f"signal shape {x.shape} vs coefficients {self.coef.shape}")
        return float(self.coef @ x)


def init_expert(
    signals,
    responses,
    step: int,
    window: int,
    sigma: float,
    fallback: np.ndarray | None = None,
) -> LinearExpert:
    """Create the expert for ``step`` from the observed history.

    History covers steps 1..step-1.  Once step > window, the expert is
    ridge-fitted on the most recent ``window`` pairs; earlier steps get
    the fallback coefficients (zero vector by default).
    """
    if step < 1:
        raise ValueError("steps start at 1")
    X = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    if step > window:
        if X.shape[0] < window:
            raise ValueError(
                f"step {step} needs {window} past observations, have {X.shape[0]}"
            )
        y = np.asarray(responses, dtype=np.float64).ravel()
        coef = ridge_fit(X[-window:], y[-window:], sigma)
    elif fallback is not None:
        coef = np.asarray(fallback, dtype=np.float64)
    else:
        coef = np.zeros(X.shape[1])
    return LinearExpert(step, coef)
