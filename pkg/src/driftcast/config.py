"""Flat key=value run configuration, validated fail-closed.

Unknown keys, duplicates, and out-of-range values are all rejected
before any computation starts, so an invalid config never leaves
partial output behind.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Unusable configuration or config file."""


_BOOLS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}

#: key -> (parser, default); None defaults mean "derived or unset".
_SCHEMA = {
    "T": ("int", None),
    "dims": ("int", 3),
    "segments": ("int", 10),
    "pool_size": ("int", 4),
    "noise_std": ("float", 0.1),
    "signal_law": ("str", "uniform"),
    "seed": ("int", 0),
    "window": ("int", 20),
    "ridge_sigma": ("float", 1.0),
    "add_bias": ("bool", False),
    "scheme": ("str", "decaying_share"),
    "fixed_share_alpha": ("float", 0.1),
    "eta": ("float", None),
    "range_a": ("float", None),
    "range_b": ("float", None),
    "max_experts": ("int", None),
    "oracle_eligibility": ("str", "before_segment"),
    "out_dir": ("str", "."),
    "horizons": ("int_list", None),
    "stream_csv": ("str", None),
    "tamper_hook": ("bool", False),
}

_SCHEMES = ("exponential", "fixed_share", "decaying_share")


@dataclass
class RunConfig:
    T: int | None = None
    dims: int = 3
    segments: int = 10
    pool_size: int = 4
    noise_std: float = 0.1
    signal_law: str = "uniform"
    seed: int = 0
    window: int = 20
    ridge_sigma: float = 1.0
    add_bias: bool = False
    scheme: str = "decaying_share"
    fixed_share_alpha: float = 0.1
    eta: float | None = None
    range_a: float | None = None
    range_b: float | None = None
    max_experts: int | None = None
    oracle_eligibility: str = "before_segment"
    out_dir: str = "."
    horizons: list = field(default_factory=list)
    stream_csv: str | None = None
    tamper_hook: bool = False

    def validate(self, require_T: bool = True, require_horizons: bool = False) -> None:
        if require_T and self.T is None:
            raise ConfigError("T is required")
        if self.T is not None and self.T < 1:
            raise ConfigError("T must be at least 1")
        if require_horizons and not self.horizons:
            raise ConfigError("horizons is required for sweep")
        if any(h < 1 for h in self.horizons):
            raise ConfigError("horizons must be positive")
        if self.dims < 1:
            raise ConfigError("dims must be at least 1")
        if self.T is not None and not 1 <= self.segments <= self.T:
            raise ConfigError("need 1 <= segments <= T")
        if self.pool_size < 1:
            raise ConfigError("pool_size must be at least 1")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be nonnegative")
        if self.signal_law not in ("uniform", "gaussian"):
            raise ConfigError("signal_law must be uniform or gaussian")
        if self.window < 1:
            raise ConfigError("window must be at least 1")
        if self.ridge_sigma <= 0:
            raise ConfigError("ridge_sigma must be positive")
        if self.scheme not in _SCHEMES:
            raise ConfigError(f"scheme must be one of {_SCHEMES}")
        if self.scheme == "fixed_share" and not 0.0 <= self.fixed_share_alpha <= 1.0:
            raise ConfigError("fixed_share_alpha must lie in [0, 1]")
        if self.eta is not None and self.eta <= 0:
            raise ConfigError("eta must be positive")
        if (self.range_a is None) != (self.range_b is None):
            raise ConfigError("set both range_a and range_b or neither")
        if self.range_a is not None and not self.range_a < self.range_b:
            raise ConfigError("need range_a < range_b")
        if self.max_experts is not None and self.max_experts < 1:
            raise ConfigError("max_experts must be at least 1")
        if self.oracle_eligibility not in ("before_segment", "by_segment_end"):
            raise ConfigError("oracle_eligibility must be before_segment or by_segment_end")


def _parse_value(key: str, kind: str, raw: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() not in _BOOLS:
                raise ValueError(raw)
            return _BOOLS[raw.lower()]
        if kind == "int_list":
            return [int(v) for v in raw.split(",") if v.strip()]
        return raw
    except ValueError as exc:
        raise ConfigError(f"key {key}: cannot parse {raw!r} as {kind}") from exc


def parse_config(path: str) -> RunConfig:
    """Read a key=value file; blank lines and #-comments are skipped."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, _SCHEMA[key][0], raw)
    cfg = RunConfig()
    for key, val in values.items():
        if key == "horizons":
            cfg.horizons = val
        else:
            setattr(cfg, key, val)
    return cfg
