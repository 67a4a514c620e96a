"""Eagerly materialized reference forecaster.

Cross-checks the analytic-tail implementation on short horizons: the
first ``universe_size`` experts carry explicit linear-space weights and
are updated one by one with the naive textbook formulas; whatever prior
mass lies above the universe rides along as a single remainder scalar so
the comparison is not polluted by truncation error.  Exponents here are
bounded by eta * (b - a)^2 <= 2 per step, so linear space is safe.
"""

from __future__ import annotations

import numpy as np

from .engine import EngineConfig
from .distributions import Distribution
from .experts import init_expert
from .priors import PriorWeights
from .weights import DecayingShareMixing, ExponentialMixing, FixedShareMixing


class ReferenceForecaster:
    """Same protocol as Forecaster, dumb bookkeeping."""

    def __init__(
        self,
        config: EngineConfig,
        universe_size: int = 10_000,
        prior: PriorWeights | None = None,
    ):
        if isinstance(config.scheme, (ExponentialMixing, FixedShareMixing, DecayingShareMixing)):
            self.scheme = config.scheme
        else:
            raise ValueError("reference supports the shipped share schemes only")
        self.config = config
        self.eta = config.resolved_eta
        self.prior = prior or PriorWeights()
        self.n_universe = universe_size
        self.prior_weights = self.prior.weight(np.arange(1, universe_size + 1))
        self.prior_remainder = self.prior.tail_mass(universe_size)
        self.weights = self.prior_weights.copy()
        self.remainder = self.prior_remainder
        self.step = 0
        self.experts = []
        self.forecast_log = []
        self._signals = []
        self._responses = []
        self._pending = None

    def total_mass(self) -> float:
        return float(np.sum(self.weights)) + self.remainder

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=np.float64).ravel()
        t = self.step + 1
        feats = np.append(x, 1.0) if self.config.add_bias else x
        cap = self.config.max_experts
        if cap is None or t <= cap:
            expert = init_expert(
                np.asarray(self._signals) if self._signals else np.zeros((0, feats.size)),
                np.asarray(self._responses),
                t,
                self.config.window,
                self.config.ridge_sigma,
                fallback=np.zeros(feats.size),
            )
            self.experts.append(expert)
        m = len(self.experts)
        raw = np.array([e.predict(feats) for e in self.experts])
        forecasts = self.config.outcome_range.clamp(raw)
        active = self.weights[:m]
        pooled = Distribution(np.arange(1, m + 1, dtype=np.int64), active / np.sum(active))
        gamma = self.config.loss.substitute(
            forecasts, pooled, self.eta, self.config.outcome_range
        )
        self._pending = (feats, forecasts, gamma)
        self.step = t
        self.forecast_log.append(gamma)
        return gamma

    def observe(self, y) -> None:
        feats, forecasts, gamma = self._pending
        self._pending = None
        y = float(self.config.outcome_range.clamp(float(y)))
        h = float(self.config.loss.loss(gamma, y))
        m = len(self.experts)
        factors = np.empty(self.n_universe)
        factors[:m] = np.exp(-self.eta * np.asarray(self.config.loss.loss(forecasts, y)))
        factors[m:] = np.exp(-self.eta * h)
        scaled = self.weights * factors
        scaled_remainder = self.remainder * np.exp(-self.eta * h)
        z = np.sum(scaled) + scaled_remainder
        self.weights = scaled / z
        self.remainder = scaled_remainder / z
        alpha = self.scheme.alpha_at(self.step)
        self.weights = alpha * self.prior_weights + (1.0 - alpha) * self.weights
        self.remainder = alpha * self.prior_remainder + (1.0 - alpha) * self.remainder
        self._signals.append(feats)
        self._responses.append(y)
