"""Piecewise-stationary synthetic streams.

The horizon splits into consecutive segments, each driven by one linear
generator from a small pool; the response is the generator's inner
product with the signal plus scaled standard normal noise.  All sampling
is counter-based: the pair at step t depends only on (seed, t), so random
access and sequential access produce identical streams.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .losses import OutcomeRange

_POOL_KEY = 1
_SCHEDULE_KEY = 2
_PAIR_KEY = 3

SIGNAL_LAWS = ("uniform", "gaussian")


@dataclass(frozen=True)
class SegmentSchedule:
    """Segment boundaries 1 = b_0 < b_1 < ... < b_k = T+1 and generator ids."""

    boundaries: np.ndarray
    generator_ids: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=np.int64)
        g = np.asarray(self.generator_ids, dtype=np.int64)
        if b[0] != 1 or np.any(np.diff(b) <= 0):
            raise ValueError("boundaries must start at 1 and increase")
        if g.shape != (b.size - 1,):
            raise ValueError("one generator id per segment")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "generator_ids", g)

    @property
    def horizon(self) -> int:
        return int(self.boundaries[-1] - 1)

    @property
    def segment_count(self) -> int:
        return len(self.generator_ids)

    @property
    def switch_count(self) -> int:
        return int(np.sum(np.diff(self.generator_ids) != 0))

    def segment_of(self, t: int) -> int:
        """0-based segment index holding step t."""
        if not 1 <= t <= self.horizon:
            raise ValueError(f"step {t} outside [1, {self.horizon}]")
        return int(np.searchsorted(self.boundaries, t, side="right") - 1)

    def generator_of(self, t: int) -> int:
        return int(self.generator_ids[self.segment_of(t)])

    def segments(self):
        """Iterate (start, end, generator_id) with end exclusive."""
        for j in range(self.segment_count):
            yield int(self.boundaries[j]), int(self.boundaries[j + 1]), int(
                self.generator_ids[j]
            )


@dataclass(frozen=True)
class GeneratorPool:
    """Linear response generators: one coefficient row per generator."""

    vectors: np.ndarray
    noise_std: float

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        if v.shape[0] < 1:
            raise ValueError("need at least one generator")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        object.__setattr__(self, "vectors", v)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dims(self) -> int:
        return self.vectors.shape[1]


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def make_pool(pool_size: int, dims: int, seed: int, noise_std: float) -> GeneratorPool:
    """Generator vectors drawn once per seed, coordinates uniform on [-1, 1]."""
    rng = _rng(seed, _POOL_KEY)
    return GeneratorPool(rng.uniform(-1.0, 1.0, size=(pool_size, dims)), noise_std)


def make_schedule(
    T: int, segments: int, pool_size: int, seed: int, allow_repeats: bool = False
) -> SegmentSchedule:
    """Equal-length segments (remainder spread over the first ones).

    Adjacent segments draw different generators unless repeats are allowed
    or the pool has a single generator.
    """
    if segments < 1 or segments > T:
        raise ValueError(f"need 1 <= segments <= T, got segments={segments}, T={T}")
    if pool_size < 1:
        raise ValueError("pool_size must be at least 1")
    base, extra = divmod(T, segments)
    lengths = np.full(segments, base, dtype=np.int64)
    lengths[:extra] += 1
    boundaries = np.concatenate([[1], 1 + np.cumsum(lengths)])
    rng = _rng(seed, _SCHEDULE_KEY)
    ids = np.empty(segments, dtype=np.int64)
    ids[0] = rng.integers(pool_size)
    for j in range(1, segments):
        if allow_repeats or pool_size == 1:
            ids[j] = rng.integers(pool_size)
        else:
            draw = rng.integers(pool_size - 1)
            ids[j] = draw + (draw >= ids[j - 1])  # skip the previous id
    return SegmentSchedule(boundaries, ids)


def sample_pair(
    pool: GeneratorPool,
    schedule: SegmentSchedule,
    t: int,
    seed: int,
    signal_law: str = "uniform",
):
    """Signal and response at step t, fully determined by (seed, t)."""
    if signal_law not in SIGNAL_LAWS:
        raise ValueError(f"signal_law must be one of {SIGNAL_LAWS}")
    rng = _rng(seed, _PAIR_KEY, t)
    if signal_law == "uniform":
        x = rng.uniform(-1.0, 1.0, size=pool.dims)
    else:
        x = rng.standard_normal(pool.dims)
    eps = rng.standard_normal()
    a = pool.vectors[schedule.generator_of(t)]
    return x, float(a @ x + pool.noise_std * eps)


def make_stream(
    pool: GeneratorPool, schedule: SegmentSchedule, seed: int, signal_law: str = "uniform"
):
    """All T pairs of the schedule as arrays (X of shape (T, n), y of shape (T,))."""
    T = schedule.horizon
    X = np.empty((T, pool.dims))
    y = np.empty(T)
    for t in range(1, T + 1):
        X[t - 1], y[t - 1] = sample_pair(pool, schedule, t, seed, signal_law)
    return X, y


def default_outcome_range(pool: GeneratorPool) -> OutcomeRange:
    """[-R, R] with R = max_s ||a_s||_1 + 4 * noise_std.

    Under the uniform signal law |a . x| never exceeds ||a||_1, so with
    4-sigma headroom clamping stays a rare, counted event.
    """
    reach = float(np.max(np.sum(np.abs(pool.vectors), axis=1)))
    r = reach + 4.0 * pool.noise_std
    return OutcomeRange(-r, r)


def write_stream_csv(path, X, y) -> None:
    """Header t,x_1..x_n,y; values via repr for exact round-trips."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x_{j}" for j in range(1, X.shape[1] + 1)] + ["y"])
        for t in range(X.shape[0]):
            writer.writerow([t + 1] + [repr(float(v)) for v in X[t]] + [repr(float(y[t]))])


def read_stream_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "t" or header[-1] != "y" or len(header) < 3:
            raise ValueError(f"{path}: expected header t,x_1..x_n,y")
        rows = [row for row in reader if row]
    X = np.array([[float(v) for v in row[1:-1]] for row in rows])
    y = np.array([float(row[-1]) for row in rows])
    return X, y
