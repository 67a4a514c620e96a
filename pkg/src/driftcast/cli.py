"""Experiment runner: run, verify, and sweep subcommands.

All randomness flows from the config seed, output files are written
atomically, and reruns with the same config are byte-identical.  Exit
codes: 0 success, 1 usage/config/I-O problem, 2 violated invariant.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .datagen import (
    SegmentSchedule,
    default_outcome_range,
    make_pool,
    make_schedule,
    make_stream,
    read_stream_csv,
)
from .engine import EngineConfig, Forecaster, InvariantViolation
from .evaluation import (
    build_ledger,
    composite_bound_exact,
    composite_bound_rhs,
    composite_oracle,
    fixed_share_bound_rhs,
)
from .losses import OutcomeRange
from .priors import PriorWeights
from .reference import ReferenceForecaster
from .weights import DecayingShareMixing, ExponentialMixing, FixedShareMixing

TRACE_COLUMNS = (
    "t,segment_id,generator_id,y,gamma,h_t,m_t,H_t,M_t,"
    "tail_mass,top1_expert,top1_weight,clamped_flag"
)
SUMMARY_COLUMNS = "T,H_T,M_T,L_E,bound_rhs,avg_regret"
VERIFY_HORIZON_CAP = 100
WEIGHT_DEVIATION_CAP = 1e-9
BOUND_TOLERANCE = 1e-8


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _scheme_for(cfg: RunConfig):
    if cfg.scheme == "exponential":
        return ExponentialMixing()
    if cfg.scheme == "fixed_share":
        return FixedShareMixing(cfg.fixed_share_alpha)
    return DecayingShareMixing()


def _build_task(cfg: RunConfig, horizon: int):
    """Stream, schedule, and engine config for one horizon."""
    if cfg.stream_csv:
        X, y = read_stream_csv(cfg.stream_csv)
        if horizon and horizon != len(y):
            raise ConfigError(
                f"T={horizon} conflicts with {len(y)} rows in {cfg.stream_csv}"
            )
        if cfg.range_a is None:
            raise ConfigError("external streams need explicit range_a and range_b")
        pool = None
        schedule = None
    else:
        pool = make_pool(cfg.pool_size, cfg.dims, cfg.seed, cfg.noise_std)
        schedule = make_schedule(horizon, cfg.segments, cfg.pool_size, cfg.seed)
        X, y = make_stream(pool, schedule, cfg.seed, cfg.signal_law)
    if cfg.range_a is not None:
        outcome_range = OutcomeRange(cfg.range_a, cfg.range_b)
    else:
        outcome_range = default_outcome_range(pool)
    try:
        engine_cfg = EngineConfig(
            outcome_range=outcome_range,
            eta=cfg.eta,
            window=cfg.window,
            ridge_sigma=cfg.ridge_sigma,
            scheme=_scheme_for(cfg),
            max_experts=cfg.max_experts,
            add_bias=cfg.add_bias,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return X, y, schedule, engine_cfg


def _oracle_report(cfg, forecaster, ledger, schedule, T):
    """Composite-oracle results and bound comparisons per eligibility rule."""
    eta = forecaster.eta
    prior = forecaster.prior
    H = ledger.total_predictor_loss
    M = ledger.total_mixloss
    out = {}
    oracle_schedule = schedule or SegmentSchedule([1, T + 1], [0])
    for rule in ("before_segment", "by_segment_end"):
        comp = composite_oracle(forecaster.records, oracle_schedule, rule)
        run_ids = [comp.segments[0][2]] + [
            comp.segments[j][2]
            for j in range(1, len(comp.segments))
            if comp.segments[j][2] != comp.segments[j - 1][2]
        ]
        k = len(comp.switch_steps)
        bounds = {}
        if cfg.scheme == "decaying_share" and T - k - 1 > 0:
            switch_ids = run_ids[1:]
            exact_entropies = [
                -float(prior.log_weight(i)) for i in switch_ids
            ]
            bounds["closed_form"] = composite_bound_rhs(T, k, eta, exact_entropies)
            c = prior.normalizing_constant
            capped = (math.log(T + 1.0) + 2.0 * math.log(math.log(T + 1.0)) + math.log(c))
            bounds["closed_form_capped_entropy"] = composite_bound_rhs(
                T, k, eta, [capped] * k
            )
            bounds["exact_terms"] = composite_bound_exact(
                T, eta, comp.switch_steps, run_ids, prior
            )
        elif cfg.scheme == "fixed_share" and 0.0 < cfg.fixed_share_alpha < 1.0 and T - k - 1 > 0:
            bounds["closed_form"] = fixed_share_bound_rhs(T, k, eta, cfg.fixed_share_alpha)
        elif cfg.scheme == "exponential":
            # No tracking: the tightest static ceiling over single experts.
            ids = np.arange(1, len(ledger.expert_losses) + 1)
            ceilings = ledger.expert_losses - prior.log_weight(ids) / eta
            bounds["closed_form"] = float(np.min(ceilings)) - comp.total_loss
        mix_regret = M - comp.total_loss
        out[rule] = {
            "expert_ids": [seg[2] for seg in comp.segments],
            "switch_steps": list(comp.switch_steps),
            "segment_count": len(comp.segments),
            "fallback_used": comp.fallback_used,
            "total_loss": comp.total_loss,
            "regret": H - comp.total_loss,
            "mixloss_regret": mix_regret,
            "bounds": bounds,
            "bounds_hold": all(mix_regret <= b + BOUND_TOLERANCE for b in bounds.values()),
        }
    return out


def _static_expert_report(forecaster, ledger):
    eta = forecaster.eta
    ids = np.arange(1, len(ledger.expert_losses) + 1)
    ceilings = ledger.expert_losses - forecaster.prior.log_weight(ids) / eta
    gap = ledger.total_mixloss - float(np.min(ceilings))
    return {"max_violation": gap, "ok": bool(gap <= BOUND_TOLERANCE)}


def _trace_text(records, schedule) -> str:
    lines = [TRACE_COLUMNS]
    H = 0.0
    M = 0.0
    for rec in records:
        H += rec.predictor_loss
        M += rec.mixloss
        if schedule is not None:
            seg = schedule.segment_of(rec.step)
            gid = int(schedule.generator_ids[seg])
        else:
            seg, gid = -1, -1
        lines.append(
            ",".join(
                [
                    str(rec.step),
                    str(seg),
                    str(gid),
                    repr(rec.outcome_raw),
                    repr(rec.forecast),
                    repr(rec.predictor_loss),
                    repr(rec.mixloss),
                    repr(H),
                    repr(M),
                    repr(rec.tail_mass),
                    str(rec.top_expert),
                    repr(rec.top_weight),
                    "1" if rec.clamped else "0",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _execute_run(cfg: RunConfig, horizon: int):
    X, y, schedule, engine_cfg = _build_task(cfg, horizon)
    forecaster = Forecaster(engine_cfg)
    for t in range(len(y)):
        forecaster.predict(X[t])
        forecaster.observe(y[t])
    ledger = build_ledger(forecaster.records, forecaster.clamp_count)
    return forecaster, ledger, schedule


def _report_payload(cfg, forecaster, ledger, schedule, T):
    gaps = ledger.predictor_losses - ledger.mixlosses
    payload = {
        "config": dataclasses.asdict(cfg),
        "horizon": T,
        "eta": forecaster.eta,
        "outcome_range": [
            forecaster.config.outcome_range.lower,
            forecaster.config.outcome_range.upper,
        ],
        "clamp_count": ledger.clamp_count,
        "totals": {
            "predictor_loss": ledger.total_predictor_loss,
            "mixloss": ledger.total_mixloss,
        },
        "invariants": {
            "loss_never_above_mixloss": bool(np.all(gaps <= 1e-10)),
            "max_loss_gap": float(np.max(gaps)),
            "final_mass_drift": abs(forecaster.state.total_mass() - 1.0),
        },
        "oracle": _oracle_report(cfg, forecaster, ledger, schedule, T),
    }
    if cfg.scheme == "exponential":
        payload["static_expert_bound"] = _static_expert_report(forecaster, ledger)
    return payload


def cmd_run(cfg: RunConfig, out_dir: Path) -> int:
    cfg.validate(require_T=cfg.stream_csv is None)
    if cfg.stream_csv:
        _, y_probe = read_stream_csv(cfg.stream_csv)
        T = len(y_probe)
        if cfg.T is not None and cfg.T != T:
            raise ConfigError(f"T={cfg.T} conflicts with {T} rows in {cfg.stream_csv}")
    else:
        T = cfg.T
    forecaster, ledger, schedule = _execute_run(cfg, T)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_atomic(out_dir / "trace.csv", _trace_text(forecaster.records, schedule))
    payload = _report_payload(cfg, forecaster, ledger, schedule, T)
    _write_atomic(out_dir / "report.json", json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_sweep(cfg: RunConfig, out_dir: Path) -> int:
    cfg.validate(require_T=False, require_horizons=True)
    if cfg.stream_csv:
        raise ConfigError("sweep generates its streams; drop stream_csv")
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [SUMMARY_COLUMNS]
    for T in cfg.horizons:
        if not 1 <= cfg.segments <= T:
            raise ConfigError(f"horizon {T} smaller than {cfg.segments} segments")
        forecaster, ledger, schedule = _execute_run(cfg, T)
        _write_atomic(out_dir / f"trace_T{T}.csv", _trace_text(forecaster.records, schedule))
        payload = _report_payload(cfg, forecaster, ledger, schedule, T)
        _write_atomic(
            out_dir / f"report_T{T}.json",
            json.dumps(payload, sort_keys=True, indent=2) + "\n",
        )
        oracle = payload["oracle"][cfg.oracle_eligibility]
        bound = oracle["bounds"].get("closed_form", math.inf)
        H = ledger.total_predictor_loss
        rows.append(
            ",".join(
                [
                    str(T),
                    repr(H),
                    repr(ledger.total_mixloss),
                    repr(oracle["total_loss"]),
                    repr(bound),
                    repr((H - oracle["total_loss"]) / T),
                ]
            )
        )
    _write_atomic(out_dir / "summary.csv", "\n".join(rows) + "\n")
    return 0


def cmd_verify(cfg: RunConfig, out_dir: Path) -> int:
    """Run the eager reference next to the analytic engine and check bounds."""
    cfg.validate(require_T=True)
    if cfg.stream_csv:
        raise ConfigError("verify generates its stream; drop stream_csv")
    T = min(cfg.T, VERIFY_HORIZON_CAP)
    X, y, schedule, engine_cfg = _build_task(cfg, T)
    prior = PriorWeights()
    engine = Forecaster(engine_cfg, prior=prior)
    reference = ReferenceForecaster(engine_cfg, prior=prior)
    n_universe = reference.n_universe
    upper_ids = np.arange(1, n_universe + 1)
    prior_w = prior.weight(upper_ids)
    weight_dev = 0.0
    forecast_dev = 0.0
    checks = []
    try:
        for t in range(T):
            g_engine = engine.predict(X[t])
            g_reference = reference.predict(X[t])
            forecast_dev = max(forecast_dev, abs(g_engine - g_reference))
            engine.observe(y[t])
            reference.observe(y[t])
            if cfg.tamper_hook and t == T // 2:
                engine.state.log_weights[0] += 1e-6  # falsifiability hook
            expanded = engine.state.tail_coefficient * prior_w
            expanded[: engine.state.step] = engine.state.weights
            weight_dev = max(weight_dev, float(np.max(np.abs(expanded - reference.weights))))
            weight_dev = max(
                weight_dev,
                abs(
                    engine.state.tail_coefficient * prior.tail_mass(n_universe)
                    - reference.remainder
                ),
            )
    except InvariantViolation as exc:
        checks.append(("engine_invariants", math.inf, False, str(exc)))
    if not checks:
        ledger = build_ledger(engine.records, engine.clamp_count)
        gaps = ledger.predictor_losses - ledger.mixlosses
        checks.append(("weight_deviation", weight_dev, weight_dev <= WEIGHT_DEVIATION_CAP, ""))
        checks.append(("forecast_deviation", forecast_dev, forecast_dev <= WEIGHT_DEVIATION_CAP, ""))
        checks.append(
            ("loss_dominated_by_mixloss", float(np.max(gaps)), bool(np.max(gaps) <= 1e-10), "")
        )
        drift = abs(engine.state.total_mass() - 1.0)
        checks.append(("mass_normalization", drift, drift <= 1e-9, ""))
        ref_drift = abs(reference.total_mass() - 1.0)
        checks.append(("reference_mass_normalization", ref_drift, ref_drift <= 1e-9, ""))
        if cfg.scheme == "exponential":
            static = _static_expert_report(engine, ledger)
            checks.append(
                ("static_expert_bound", static["max_violation"], static["ok"], "")
            )
        oracle = _oracle_report(cfg, engine, ledger, schedule, T)
        for rule, info in oracle.items():
            for name, value in info["bounds"].items():
                slack = info["mixloss_regret"] - value
                checks.append(
                    (f"composite_{name}[{rule}]", slack, slack <= BOUND_TOLERANCE, "")
                )
    all_ok = all(ok for _, _, ok, _ in checks)
    width = max(len(name) for name, _, _, _ in checks)
    for name, value, ok, note in checks:
        status = "PASS" if ok else "FAIL"
        extra = f"  {note}" if note else ""
        print(f"{status}  {name:<{width}}  {value:.3e}{extra}")
    print(f"verify: {'all checks passed' if all_ok else 'CHECKS FAILED'} (T={T})")
    return 0 if all_ok else 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="driftcast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "generate or load a stream, run the forecaster, write trace and report"),
        ("verify", "cross-check the engine against the eager reference and the bounds"),
        ("sweep", "run every configured horizon and write a summary table"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="key=value config file")
        p.add_argument("--out", help="output directory (overrides out_dir)")
        p.add_argument("--seed", type=int, help="seed override")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
        if args.command == "run":
            return cmd_run(cfg, out_dir)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir)
        return cmd_verify(cfg, out_dir)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
