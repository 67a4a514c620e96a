"""Two-stage weight updates over a growing expert pool.

State layout: experts 1..t carry explicit log weights, and every expert
above t keeps a weight exactly proportional to its prior weight, with a
single scalar log coefficient for the whole tail.  Both update stages
preserve that shape:

* loss update: multiply each weight by exp(-eta * loss) and renormalize;
  every tail expert incurs the aggregated forecaster's own loss, so the
  tail rescales by one common factor.
* mixing update: blend the posterior with the initial prior (share
  schemes), or with any convex combination of stored past posteriors.

Weights live in log space.  Per-step factors are bounded, but a
persistently losing expert decays geometrically without bound and would
underflow linear-space storage on long horizons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from ._numutil import logsumexp

from .distributions import Distribution
from .priors import PriorWeights


@dataclass
class WeightState:
    """Weights of experts 1..step plus the analytic tail coefficient."""

    prior: PriorWeights
    log_weights: np.ndarray
    log_tail: float

    @classmethod
    def initial(cls, prior: PriorWeights | None = None) -> "WeightState":
        """The prior itself: no initialized experts, tail coefficient 1."""
        return cls(prior or PriorWeights(), np.zeros(0), 0.0)

    @property
    def step(self) -> int:
        return len(self.log_weights)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def tail_coefficient(self) -> float:
        return math.exp(self.log_tail)

    def tail_mass(self) -> float:
        return self.tail_coefficient * self.prior.tail_mass(self.step)

    def total_mass(self) -> float:
        return float(np.sum(self.weights)) + self.tail_mass()

    def as_distribution(self) -> Distribution:
        return Distribution(
            np.arange(1, self.step + 1, dtype=np.int64),
            self.weights,
            self.tail_coefficient,
            self.prior,
        )

    def copy(self) -> "WeightState":
        return WeightState(self.prior, self.log_weights.copy(), self.log_tail)


@dataclass
class PosteriorHistory:
    """Stored post-loss-update states, one per step, starting at the prior.

    Only the general mixing scheme consults it; the shipped share schemes
    need nothing beyond the prior and the current posterior.
    """

    snapshots: list[WeightState] = field(default_factory=list)

    def append(self, state: WeightState) -> None:
        self.snapshots.append(state.copy())

    def __len__(self) -> int:
        return len(self.snapshots)


class ExponentialMixing:
    """No mixing: pure exponential weighting."""

    def alpha_at(self, t: int) -> float:
        return 0.0


@dataclass(frozen=True)
class FixedShareMixing:
    """Blend a constant share alpha of the initial prior back in each step."""

    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("fixed-share alpha must lie in [0, 1]")

    def alpha_at(self, t: int) -> float:
        return self.alpha


class DecayingShareMixing:
    """Share scheme whose mixing rate decays as 1/(t+1)."""

    def alpha_at(self, t: int) -> float:
        return 1.0 / (t + 1.0)


@dataclass(frozen=True)
class GeneralMixing:
    """Arbitrary convex combination of all past posteriors.

    ``coefficients(t)`` must return beta over s = 0..t (length t+1),
    nonnegative, summing to 1; entry s weights the posterior after step s
    (s = 0 is the prior).
    """

    coefficients: object  # Callable[[int], np.ndarray]


def materialize_expert(state: WeightState, i: int) -> WeightState:
    """Move expert i out of the tail into the explicit list.

    Experts are initialized in index order, so i must be step + 1.  The
    new explicit weight is exactly the weight the tail already assigned,
    so total mass is unchanged.
    """
    if i != state.step + 1:
        raise ValueError(f"experts materialize in order; expected {state.step + 1}, got {i}")
    new_log = state.log_tail + state.prior.log_weight(i)
    return WeightState(
        state.prior, np.append(state.log_weights, new_log), state.log_tail
    )


def loss_update(
    state: WeightState, losses, predictor_loss: float, eta: float
) -> WeightState:
    """Exponential reweighting by observed losses.

    ``losses`` covers the initialized experts 1..step; every tail expert
    implicitly incurs ``predictor_loss`` (virtual experts forecast
    exactly the aggregated prediction).
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    l = np.asarray(losses, dtype=np.float64)
    if l.shape != (state.step,):
        raise ValueError(
            f"need one loss per initialized expert: expected {(state.step,)}, got {l.shape}"
        )
    if np.any(l < 0) or predictor_loss < 0:
        raise ValueError("losses must be nonnegative")
    scaled = state.log_weights - eta * l
    tail_prior = state.prior.tail_mass(state.step)
    log_tail_term = state.log_tail + math.log(tail_prior) - eta * predictor_loss
    log_z = logsumexp(np.append(scaled, log_tail_term))
    return WeightState(
        state.prior,
        scaled - log_z,
        state.log_tail - eta * predictor_loss - log_z,
    )


def mixing_update(
    state: WeightState,
    scheme,
    history: PosteriorHistory | None = None,
    t: int | None = None,
) -> WeightState:
    """Second update stage: blend the posterior back toward older ones.

    ``t`` is the protocol step whose posterior ``state`` is; it defaults
    to ``state.step``, which is correct whenever one expert was
    materialized per step.
    """
    if t is None:
        t = state.step
    if isinstance(scheme, GeneralMixing):
        if history is None:
            raise ValueError("the general scheme needs the posterior history")
        return _mix_history(state, scheme, history, t)
    alpha = scheme.alpha_at(t)
    if alpha == 0.0:
        return state.copy()
    log_a = math.log(alpha)
    log_1a = math.log1p(-alpha) if alpha < 1.0 else -math.inf
    prior_logs = state.prior.log_weights_upto(state.step)
    return WeightState(
        state.prior,
        np.logaddexp(log_a + prior_logs, log_1a + state.log_weights),
        float(np.logaddexp(log_a, log_1a + state.log_tail)),
    )


def _mix_history(
    state: WeightState, scheme: GeneralMixing, history: PosteriorHistory, t: int
) -> WeightState:
    beta = np.asarray(scheme.coefficients(t), dtype=np.float64)
    snapshots = list(history.snapshots) + [state]
    if beta.shape != (len(snapshots),):
        raise ValueError(
            f"beta must weight posteriors 0..{len(snapshots) - 1}, got shape {beta.shape}"
        )
    if np.any(beta < 0) or abs(float(np.sum(beta)) - 1.0) > 1e-9:
        raise ValueError("beta must be a probability vector")
    n = state.step
    prior_logs = state.prior.log_weights_upto(n)
    # Each snapshot s assigns kappa_s * prior(i) to every i above its own
    # step, so expanding it to length n is exact.
    rows = []
    tails = []
    for snap in snapshots:
        row = prior_logs + snap.log_tail
        row[: snap.step] = snap.log_weights[:n]
        rows.append(row)
        tails.append(snap.log_tail)
    with np.errstate(divide="ignore"):
        log_beta = np.log(beta)
    stacked = np.vstack(rows) if n else np.zeros((len(snapshots), 0))
    new_log_w = logsumexp(stacked + log_beta[:, None], axis=0) if n else np.zeros(0)
    new_log_tail = float(logsumexp(np.asarray(tails) + log_beta))
    return WeightState(state.prior, new_log_w, new_log_tail)


def normalized_initialized(state: WeightState) -> Distribution:
    """Initialized weights renormalized to a probability vector."""
    if state.step < 1:
        raise ValueError("no experts initialized yet")
    log_w = state.log_weights
    log_total = logsumexp(log_w)
    if log_total == -math.inf:
        raise ValueError("initialized experts carry zero mass")
    return Distribution(
        np.arange(1, state.step + 1, dtype=np.int64), np.exp(log_w - log_total)
    )
