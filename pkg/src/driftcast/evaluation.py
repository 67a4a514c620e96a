"""Loss ledgers, hindsight composite experts, and tracking-bound evaluation.

An expert created at step i is charged the aggregated forecaster's own
loss for every step before i (virtual steps), and its real loss
afterwards; cumulative expert losses therefore always cover the whole
horizon.  A composite expert assigns one elementary expert per segment
of a partition of [1, T]; its loss is the hindsight comparator that the
tracking bounds are stated against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datagen import SegmentSchedule
from .engine import StepRecord
from .priors import PriorWeights

ELIGIBILITY_RULES = ("before_segment", "by_segment_end")


@dataclass
class RegretLedger:
    """Per-step and cumulative losses of one finished run."""

    predictor_losses: np.ndarray  # h_t
    mixlosses: np.ndarray  # m_t
    expert_losses: np.ndarray  # L_{i,T} for initialized experts, virtual steps included
    clamp_count: int

    @property
    def horizon(self) -> int:
        return len(self.predictor_losses)

    @property
    def total_predictor_loss(self) -> float:
        return float(np.sum(self.predictor_losses))

    @property
    def total_mixloss(self) -> float:
        return float(np.sum(self.mixlosses))

    def expert_loss(self, i: int) -> float:
        if not 1 <= i <= len(self.expert_losses):
            raise KeyError(f"expert {i} never initialized")
        return float(self.expert_losses[i - 1])

    def regret(self, i: int) -> float:
        """Aggregated loss minus expert i's cumulative loss."""
        return self.total_predictor_loss - self.expert_loss(i)


def build_ledger(records: list[StepRecord], clamp_count: int | None = None) -> RegretLedger:
    if not records:
        raise ValueError("no records")
    h = np.array([r.predictor_loss for r in records])
    m = np.array([r.mixloss for r in records])
    n_experts = max(len(r.expert_losses) for r in records)
    totals = np.zeros(n_experts)
    virtual_prefix = np.concatenate([[0.0], np.cumsum(h)])
    for r in records:
        k = len(r.expert_losses)
        totals[:k] += r.expert_losses
        # experts above k were virtual at this step; their h_t charges are
        # folded in below via the prefix sums
    for i in range(1, n_experts + 1):
        totals[i - 1] += virtual_prefix[i - 1]
    if clamp_count is None:
        clamp_count = sum(1 for r in records if r.clamped)
    return RegretLedger(h, m, totals, clamp_count)


@dataclass(frozen=True)
class CompositeExpert:
    """One elementary expert per schedule segment, plus its total loss."""

    segments: tuple  # ((start, end, expert_id), ...) with end exclusive
    total_loss: float
    eligibility: str
    fallback_used: bool

    @property
    def expert_ids(self) -> tuple:
        return tuple(seg[2] for seg in self.segments)

    @property
    def switch_steps(self) -> tuple:
        """Steps at which the assigned expert changes."""
        out = []
        for prev, cur in zip(self.segments, self.segments[1:]):
            if cur[2] != prev[2]:
                out.append(cur[0])
        return tuple(out)


def composite_oracle(
    records: list[StepRecord],
    schedule: SegmentSchedule,
    eligibility: str = "before_segment",
) -> CompositeExpert:
    """Best expert per segment in hindsight (ties to the smallest id).

    ``before_segment`` admits experts initialized no later than the
    segment's first step, so every in-segment forecast is real;
    ``by_segment_end`` also admits experts created inside the segment,
    whose earlier in-segment steps are charged the aggregated loss.
    """
    if eligibility not in ELIGIBILITY_RULES:
        raise ValueError(f"eligibility must be one of {ELIGIBILITY_RULES}")
    T = len(records)
    if schedule.horizon != T:
        raise ValueError(f"schedule horizon {schedule.horizon} vs {T} records")
    n_experts = max(len(r.expert_losses) for r in records)
    h = np.array([r.predictor_loss for r in records])
    chosen = []
    total = 0.0
    fallback_used = False
    for start, end, _gid in schedule.segments():
        seg_losses = np.zeros(n_experts)
        for t in range(start, end):
            rec = records[t - 1]
            k = len(rec.expert_losses)
            seg_losses[:k] += rec.expert_losses
            seg_losses[k:] += h[t - 1]  # virtual experts mirror the forecaster
        limit = start if eligibility == "before_segment" else min(end - 1, n_experts)
        limit = min(limit, n_experts)
        if limit < 1:
            fallback_used = True
            limit = n_experts
        best = int(np.argmin(seg_losses[:limit]))  # argmin takes the first minimum
        chosen.append((start, end, best + 1))
        total += float(seg_losses[best])
    return CompositeExpert(tuple(chosen), total, eligibility, fallback_used)


def composite_bound_rhs(T: int, k: int, eta: float, entropy_terms) -> float:
    """Closed-form ceiling on M_T - L_T(E) for the decaying-share scheme.

    ``entropy_terms`` are the divergences of the k switch-step comparison
    vectors from the prior, added verbatim (no 1/eta factor; the closed
    form is stated that way).
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if not 0 <= k < T:
        raise ValueError("need 0 <= k < T")
    if T - k - 1 <= 0:
        raise ValueError("bound needs T - k - 1 > 0")
    terms = np.asarray(list(entropy_terms), dtype=np.float64)
    c = PriorWeights().normalizing_constant
    log_t1 = math.log(T + 1.0)
    return float(
        np.sum(terms)
        + (k + 1) * math.log(c) / eta
        + (k + 1) * (log_t1 + 2.0 * math.log(log_t1) + math.log(c) + math.log(T)) / eta
        + math.log(T - k - 1.0) / eta
    )


def composite_bound_exact(
    T: int,
    eta: float,
    switch_steps,
    expert_ids,
    prior: PriorWeights | None = None,
) -> float:
    """Per-step accounting ceiling on M_T - L_T(E), decaying-share scheme.

    Sharper than the closed form: uses the exact prior weights of the
    composite's elementary experts and the actual switch steps.  Each
    switch at step s >= 2 costs ln(s) (the mixing put prior share 1/s on
    the books at step s-1); each stay step t costs ln(t/(t-1)); the
    per-segment telescopes leave one prior divergence per segment.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    prior = prior or PriorWeights()
    switches = sorted(int(s) for s in switch_steps)
    ids = list(expert_ids)
    if len(ids) != len(switches) + 1:
        raise ValueError("need one expert id per segment (switch count + 1)")
    if any(s < 2 or s > T for s in switches):
        raise ValueError("switch steps must lie in [2, T]")
    total = -float(np.sum(prior.log_weight(np.asarray(ids))))  # sum ln(1/w_i)
    total += sum(math.log(s) for s in switches)
    total += math.log(T) - sum(math.log(s / (s - 1.0)) for s in switches)
    return total / eta


def fixed_share_bound_rhs(T: int, k: int, eta: float, alpha: float) -> float:
    """Closed-form ceiling on M_T - L_T(E) for constant-share mixing."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0 <= k < T or T - k - 1 <= 0:
        raise ValueError("need 0 <= k < T and T - k - 1 > 0")
    c = PriorWeights().normalizing_constant
    log_t1 = math.log(T + 1.0)
    entropy_cap = log_t1 + 2.0 * math.log(log_t1) + math.log(c)
    return (
        (k + 1) * entropy_cap
        + (k + 1) * math.log(1.0 / alpha)
        + (T - k - 1) * math.log(1.0 / (1.0 - alpha))
    ) / eta


@dataclass(frozen=True)
class VanishingRegretReport:
    """Average-regret ratios across growing horizons."""

    horizons: tuple
    ratios: tuple
    inversions: tuple  # (index, relative increase) per adjacent increase
    ok: bool


def vanishing_regret_check(points, tolerance: float = 0.10) -> VanishingRegretReport:
    """Check (H_T - L_T(E)) / T is non-increasing across horizons.

    ``points`` is a sequence of (T, H_T, composite_loss) with strictly
    increasing T, at least three entries.  One adjacent increase is
    tolerated if it stays within ``tolerance`` relative.
    """
    pts = sorted((int(t), float(h), float(l)) for t, h, l in points)
    if len(pts) < 3:
        raise ValueError("need at least three horizons")
    if len({t for t, _, _ in pts}) != len(pts):
        raise ValueError("horizons must be distinct")
    horizons = tuple(t for t, _, _ in pts)
    ratios = tuple((h - l) / t for t, h, l in pts)
    inversions = []
    for j in range(len(ratios) - 1):
        if ratios[j + 1] > ratios[j]:
            scale = max(abs(ratios[j]), 1e-300)
            inversions.append((j, (ratios[j + 1] - ratios[j]) / scale))
    ok = len(inversions) == 0 or (
        len(inversions) == 1 and inversions[0][1] <= tolerance
    )
    return VanishingRegretReport(horizons, ratios, tuple(inversions), ok)
