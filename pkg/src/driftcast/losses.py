"""Square loss, its mixability certificate, and the aggregating substitution.

For outcomes confined to [a, b] the square loss is eta-mixable for every
eta in (0, 2/(b-a)^2]: whatever the forecasts f_i and weights w_i, the
substitution rule below produces a single prediction gamma with

    (gamma - y)^2  <=  -(1/eta) ln sum_i w_i exp(-eta (f_i - y)^2)

for every y in [a, b].  The right-hand side is the superprediction value;
the inequality is what lets the aggregated forecaster's loss ride below
the mixloss at every step.

The loss interface is duck-typed: anything exposing ``loss``,
``superprediction``, ``substitute`` and ``max_eta`` can drive the engine.
Only the square loss ships.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from ._numutil import logsumexp

from .distributions import Distribution, log_mix


@dataclass(frozen=True)
class OutcomeRange:
    """Closed outcome interval [lower, upper], lower < upper."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("outcome range needs lower < upper")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def max_eta(self) -> float:
        """Largest learning rate with a mixability guarantee, 2/(b-a)^2."""
        return 2.0 / self.width**2

    def clamp(self, values):
        return np.clip(values, self.lower, self.upper)

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


class SquareLoss:
    """(gamma - y)^2 with the exact substitution rule for bounded outcomes."""

    def loss(self, gamma, y):
        return (np.asarray(gamma, dtype=np.float64) - y) ** 2

    def max_eta(self, outcome_range: OutcomeRange) -> float:
        return outcome_range.max_eta

    def superprediction(
        self,
        forecasts,
        weights: Distribution,
        eta: float,
        y: float,
        tail_forecast: float | None = None,
    ) -> float:
        """-(1/eta) ln sum_i w_i exp(-eta (f_i - y)^2) at outcome y."""
        f = np.asarray(forecasts, dtype=np.float64)
        tail_exponent = None
        if weights.tail_coefficient > 0:
            if tail_forecast is None:
                raise ValueError("a positive tail needs a shared tail forecast")
            tail_exponent = float(self.loss(tail_forecast, y))
        return log_mix(weights, self.loss(f, y), eta, tail_exponent=tail_exponent)

    def substitute(
        self,
        forecasts,
        weights: Distribution,
        eta: float,
        outcome_range: OutcomeRange,
        tail_forecast: float | None = None,
    ) -> float:
        """Prediction certifying eta-mixability of the square loss.

        Forecasts are clamped into the outcome range first; the returned
        gamma also lies in the range.  Valid only for eta in
        (0, 2/(b-a)^2]; larger eta has no such guarantee.
        """
        cap = outcome_range.max_eta
        if not 0.0 < eta <= cap * (1.0 + 1e-12):
            raise ValueError(
                f"eta={eta} outside the square-loss mixability range "
                f"(0, 2/(b-a)^2] = (0, {cap}]"
            )
        f = outcome_range.clamp(np.asarray(forecasts, dtype=np.float64))
        masses = [weights.masses]
        top = [-eta * (outcome_range.upper - f) ** 2]
        bot = [-eta * (outcome_range.lower - f) ** 2]
        if weights.tail_coefficient > 0:
            if tail_forecast is None:
                raise ValueError("a positive tail needs a shared tail forecast")
            tf = float(outcome_range.clamp(tail_forecast))
            masses.append(np.array([weights.tail_mass()]))
            top.append(np.array([-eta * (outcome_range.upper - tf) ** 2]))
            bot.append(np.array([-eta * (outcome_range.lower - tf) ** 2]))
        b = np.concatenate(masses)
        if not np.any(b > 0):
            raise ValueError("all weights are zero")
        log_top = logsumexp(np.concatenate(top), b=b)
        log_bot = logsumexp(np.concatenate(bot), b=b)
        mid = 0.5 * (outcome_range.lower + outcome_range.upper)
        gamma = mid + (log_top - log_bot) / (2.0 * eta * outcome_range.width)
        # Exact algebra keeps gamma inside the range; clipping only
        # removes last-bit rounding spill.
        return float(outcome_range.clamp(gamma))
