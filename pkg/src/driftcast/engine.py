"""Per-step driver: spawn an expert, aggregate forecasts, update weights.

Each step runs the same eight actions: materialize the next expert index,
fit its model on the history window, read the signal, collect the
initialized experts' clamped forecasts, renormalize their weights,
substitute to a single prediction, score everything against the revealed
outcome, and run the two-stage weight update.

Experts not yet initialized count as virtual: they forecast exactly the
aggregated prediction.  Substituting over the initialized experts alone,
with their weights renormalized, solves the resulting fixed point over
the full infinite pool exactly, because extra mass placed at the
substitution's own output never moves that output.  The mixloss, in
contrast, is computed over the full pool, tail included.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import log_mix
from .experts import LinearExpert, init_expert
from .losses import OutcomeRange, SquareLoss
from .priors import PriorWeights
from .weights import (
    DecayingShareMixing,
    GeneralMixing,
    PosteriorHistory,
    WeightState,
    loss_update,
    materialize_expert,
    mixing_update,
    normalized_initialized,
)

MIXLOSS_SLACK = 1e-10
MASS_TOLERANCE = 1e-11


class ProtocolError(RuntimeError):
    """predict/observe called out of order."""


class InvariantViolation(RuntimeError):
    """A hard runtime invariant failed (loss domination or mass drift)."""


@dataclass
class EngineConfig:
    """Aggregation parameters; eta defaults to the mixability cap."""

    outcome_range: OutcomeRange
    eta: float | None = None
    window: int = 20
    ridge_sigma: float = 1.0
    scheme: object = field(default_factory=DecayingShareMixing)
    max_experts: int | None = None
    add_bias: bool = False
    track_posteriors: bool = False
    loss: SquareLoss = field(default_factory=SquareLoss)

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.ridge_sigma <= 0:
            raise ValueError("ridge sigma must be positive")
        if self.max_experts is not None and self.max_experts < 1:
            raise ValueError("max_experts must be at least 1 when set")
        cap = self.loss.max_eta(self.outcome_range)
        if self.eta is not None and not 0.0 < self.eta <= cap * (1.0 + 1e-12):
            raise ValueError(
                f"eta={self.eta} violates the mixability bound eta <= 2/(b-a)^2 = {cap}"
            )

    @property
    def resolved_eta(self) -> float:
        return self.eta if self.eta is not None else self.loss.max_eta(self.outcome_range)


@dataclass(frozen=True)
class StepRecord:
    """Everything observable about one completed step."""

    step: int
    forecast: float
    outcome: float
    outcome_raw: float
    clamped: bool
    predictor_loss: float
    mixloss: float
    expert_losses: np.ndarray  # losses of initialized experts 1..len
    top_expert: int
    top_weight: float
    tail_mass: float


class Forecaster:
    """Sequential state machine; predict and observe strictly alternate."""

    def __init__(self, config: EngineConfig, prior: PriorWeights | None = None):
        self.config = config
        self.eta = config.resolved_eta
        self.prior = prior or PriorWeights()
        self.state = WeightState.initial(self.prior)
        self.experts: list[LinearExpert] = []
        self.history = (
            PosteriorHistory()
            if config.track_posteriors or isinstance(config.scheme, GeneralMixing)
            else None
        )
        self.records: list[StepRecord] = []
        self.clamp_count = 0
        self.step = 0
        self._hist_X: np.ndarray | None = None  # grown geometrically
        self._hist_y = np.empty(64)
        self._hist_len = 0
        self._coef: np.ndarray | None = None
        self._pending = None

    def _features(self, x: np.ndarray) -> np.ndarray:
        return np.append(x, 1.0) if self.config.add_bias else x

    @staticmethod
    def _grow(buf: np.ndarray, used: int) -> np.ndarray:
        if used < buf.shape[0]:
            return buf
        bigger = np.empty((2 * buf.shape[0],) + buf.shape[1:])
        bigger[:used] = buf[:used]
        return bigger

    def predict(self, x) -> float:
        if self._pending is not None:
            raise ProtocolError("observe must be called before the next predict")
        x = np.asarray(x, dtype=np.float64).ravel()
        t = self.step + 1
        feats = self._features(x)
        if self._hist_X is None:
            self._hist_X = np.empty((64, feats.size))
            self._coef = np.empty((64, feats.size))
        cap = self.config.max_experts
        if cap is None or t <= cap:
            self.state = materialize_expert(self.state, t)
            expert = init_expert(
                self._hist_X[: self._hist_len],
                self._hist_y[: self._hist_len],
                t,
                self.config.window,
                self.config.ridge_sigma,
                fallback=np.zeros(feats.size),
            )
            self.experts.append(expert)
            self._coef = self._grow(self._coef, len(self.experts) - 1)
            self._coef[len(self.experts) - 1] = expert.coef
        raw = self._coef[: len(self.experts)] @ feats
        forecasts = self.config.outcome_range.clamp(raw)
        pooled = normalized_initialized(self.state)
        gamma = self.config.loss.substitute(
            forecasts, pooled, self.eta, self.config.outcome_range
        )
        self._pending = (x, forecasts, gamma)
        self.step = t
        return gamma

    def observe(self, y) -> StepRecord:
        if self._pending is None:
            raise ProtocolError("predict must be called before observe")
        x, forecasts, gamma = self._pending
        self._pending = None
        y_raw = float(y)
        y_clamped = float(self.config.outcome_range.clamp(y_raw))
        clamped = y_clamped != y_raw
        if clamped:
            self.clamp_count += 1
        h = float(self.config.loss.loss(gamma, y_clamped))
        losses = np.asarray(self.config.loss.loss(forecasts, y_clamped), dtype=np.float64)
        m = log_mix(self.state.as_distribution(), losses, self.eta, tail_exponent=h)
        if h > m + MIXLOSS_SLACK:
            raise InvariantViolation(
                f"step {self.step}: predictor loss {h} exceeds mixloss {m}"
            )
        posterior = loss_update(self.state, losses, h, self.eta)
        if self.history is not None:
            self.history.append(posterior)
        self.state = mixing_update(
            posterior, self.config.scheme, self.history, t=self.step
        )
        drift = abs(self.state.total_mass() - 1.0)
        if drift > MASS_TOLERANCE:
            raise InvariantViolation(f"step {self.step}: weight mass drifted by {drift}")
        w = self.state.weights
        top = int(np.argmax(w)) if w.size else 0
        record = StepRecord(
            step=self.step,
            forecast=gamma,
            outcome=y_clamped,
            outcome_raw=y_raw,
            clamped=clamped,
            predictor_loss=h,
            mixloss=m,
            expert_losses=losses,
            top_expert=top + 1,
            top_weight=float(w[top]) if w.size else 0.0,
            tail_mass=self.state.tail_mass(),
        )
        self.records.append(record)
        self._hist_X = self._grow(self._hist_X, self._hist_len)
        self._hist_y = self._grow(self._hist_y, self._hist_len)
        self._hist_X[self._hist_len] = self._features(x)
        self._hist_y[self._hist_len] = y_clamped
        self._hist_len += 1
        return record


def run(config: EngineConfig, signals, responses, prior: PriorWeights | None = None):
    """Drive predict/observe over a whole stream; deterministic."""
    X = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    y = np.asarray(responses, dtype=np.float64).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} signals vs {y.shape[0]} responses")
    if X.shape[0] == 0:
        raise ValueError("stream is empty")
    forecaster = Forecaster(config, prior=prior)
    for t in range(X.shape[0]):
        forecaster.predict(X[t])
        forecaster.observe(y[t])
    return forecaster
