"""Command-line front end: corpus ingest, experiment orchestration, reports.

Subcommands map one-to-one onto the evaluation suite: ``run`` (convergence,
time-to-optimize, lifespan), ``sweep`` (update-method and update-frequency
grids), ``stress`` (adversarial-prior self-correction), ``baseline-compare``
(click gain and sub-optimal exposure against the test-rollout baseline).

Every run writes ``report.json`` (deterministic for a given config+seed: keys
sorted, no timestamps), histogram CSVs, and ``manifest.json`` (the one place
a timestamp lives, alongside config, seed, package version, code fingerprint,
and kernel backend).

Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal error.
The output directory may be set with the BATCHBANDIT_OUT environment
variable; an explicit --out wins.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import run_baselines
from .core import UpdateMethod
from .corpus import CorpusParams, generate_synthetic_corpus, parse_corpus
from .errors import ConfigurationError, ValidationError
from .evaluation import (
    bootstrap_first_hour_ci,
    calibrate_adversarial_prior,
    click_gain,
    compare_frequencies,
    compare_update_methods,
    false_convergence_rate,
    histogram_minutes,
    percentile_minutes,
    self_correction_experiment,
    suboptimal_impressions,
    time_to_optimize,
    write_histogram_csv,
)
from .kernel import KERNEL_BACKEND
from .rng import derive_rng
from .simulate import SimConfig, active_lifespan, run_corpus


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Everything one invocation needs; the manifest serializes this."""

    command: str
    corpus_path: str | None
    synthetic_spec: str | None
    interval: int
    method: UpdateMethod
    horizon_hours: int
    seed: int
    sweep_intervals: tuple[int, ...]
    out_dir: Path

    def __post_init__(self) -> None:
        if (self.corpus_path is None) == (self.synthetic_spec is None):
            raise ConfigurationError("exactly one corpus source required: --corpus or --synthetic")
        if self.horizon_hours < 1:
            raise ConfigurationError(f"--horizon-hours must be >= 1, got {self.horizon_hours}")

    @property
    def horizon_minutes(self) -> int:
        return self.horizon_hours * 60

    def sim_config(self) -> SimConfig:
        return SimConfig(
            update_interval=self.interval,
            horizon=self.horizon_minutes,
            update_method=self.method,
            master_seed=self.seed,
        )

    def corpus_source(self) -> str:
        if self.corpus_path is not None:
            return f"file:{self.corpus_path}"
        return f"synthetic:{self.synthetic_spec}"


_SYNTHETIC_KEYS = {
    "articles": ("n_articles", int, False),
    "arms": ("arm_counts", int, True),
    "theta": ("best_rate", float, True),
    "gap": ("relative_gap", float, True),
    "impressions": ("impressions", int, True),
    "first-hour-share": ("first_hour_share", float, False),
    "tail-share": ("tail_share", float, False),
    "tail-exponent": ("tail_exponent", float, False),
    "trace-minutes": ("trace_minutes", int, False),
}


def parse_synthetic_spec(spec: str) -> CorpusParams:
    """Parse `key=value,...` corpus parameters; ranges are written lo:hi."""
    overrides: dict = {}
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ConfigurationError(f"synthetic spec entry {item!r} is not key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in _SYNTHETIC_KEYS:
            raise ConfigurationError(
                f"unknown synthetic parameter {key!r} (known: {', '.join(sorted(_SYNTHETIC_KEYS))})"
            )
        field, cast, ranged = _SYNTHETIC_KEYS[key]
        try:
            if ranged:
                lo, sep, hi = raw.partition(":")
                value = (cast(lo), cast(hi)) if sep else (cast(raw), cast(raw))
            else:
                value = cast(raw)
        except ValueError as exc:
            raise ConfigurationError(f"synthetic parameter {key!r}: bad value {raw!r}") from exc
        overrides[field] = value
    return CorpusParams(**overrides)


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so errors map to exit code 1."""

    def error(self, message: str):
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--corpus", metavar="PATH", help="JSON Lines corpus file")
    source.add_argument(
        "--synthetic",
        metavar="SPEC",
        help="synthetic corpus parameters, e.g. articles=200,arms=3,theta=0.03:0.12",
    )
    common.add_argument("--interval", metavar="MIN", type=int, default=5,
                        help="update interval in minutes (default 5)")
    common.add_argument("--method", choices=["sum", "norm"], default="sum",
                        help="batch update rule (default sum)")
    common.add_argument("--horizon-hours", metavar="N", type=int, default=48,
                        help="simulation horizon in hours (default 48)")
    common.add_argument("--seed", metavar="N", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out", metavar="DIR", default=None,
                        help="output directory (default: $BATCHBANDIT_OUT or ./reports)")

    parser = _Parser(prog="batchbandit",
                     description="Batched Thompson Sampling simulation harness")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common],
                   help="convergence, time-to-optimize, and lifespan metrics")
    sweep = sub.add_parser("sweep", parents=[common],
                           help="update-method and update-frequency sweeps")
    sweep.add_argument("--sweep-intervals", metavar="LIST", default="1,3,5,10,30,60",
                       help="comma-separated minutes, ascending (default 1,3,5,10,30,60)")
    sub.add_parser("stress", parents=[common],
                   help="self-correction from an adversarial prior")
    sub.add_parser("baseline-compare", parents=[common],
                   help="click gain and sub-optimal exposure versus test-rollout")
    return parser


def parse_args(argv: list[str]) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    sweep_intervals: tuple[int, ...] = ()
    if args.command == "sweep":
        try:
            sweep_intervals = tuple(int(x) for x in args.sweep_intervals.split(","))
        except ValueError:
            raise ConfigurationError(
                f"--sweep-intervals: expected comma-separated integers, got {args.sweep_intervals!r}"
            ) from None
        if not sweep_intervals:
            raise ConfigurationError("--sweep-intervals must list at least one interval")
        if any(i < 1 for i in sweep_intervals):
            raise ConfigurationError("--sweep-intervals entries must be >= 1 minute")
        if list(sweep_intervals) != sorted(sweep_intervals):
            raise ConfigurationError("--sweep-intervals must be sorted ascending")
    out_dir = args.out or os.environ.get("BATCHBANDIT_OUT") or "reports"
    return ExperimentConfig(
        command=args.command,
        corpus_path=args.corpus,
        synthetic_spec=args.synthetic,
        interval=args.interval,
        method=UpdateMethod.parse(args.method),
        horizon_hours=args.horizon_hours,
        seed=args.seed,
        sweep_intervals=sweep_intervals,
        out_dir=Path(out_dir),
    )


def load_articles(config: ExperimentConfig):
    if config.corpus_path is not None:
        articles = parse_corpus(config.corpus_path)
    else:
        params = parse_synthetic_spec(config.synthetic_spec)
        articles = generate_synthetic_corpus(params, seed=config.seed)
    return sorted(articles, key=lambda a: a.article_id)


def code_fingerprint() -> str:
    """SHA-256 over the package's source files, for the manifest."""
    digest = hashlib.sha256()
    root = Path(__file__).parent
    for path in sorted(root.rglob("*")):
        if path.suffix in (".py", ".pyx") and path.is_file():
            digest.update(path.relative_to(root).as_posix().encode())
            digest.update(b"\x00")
            digest.update(path.read_bytes())
    return digest.hexdigest()


def _command_run(articles, config: ExperimentConfig, out: Path) -> dict:
    sim_config = config.sim_config()
    results = run_corpus(articles, sim_config)
    rate = false_convergence_rate(results, articles, window_batches=12)
    tto = [time_to_optimize(result, spec) for result, spec in zip(results, articles)]
    lifespans = [float(active_lifespan(spec.trace)) for spec in articles]

    tto_hist = histogram_minutes(tto, bin_width=5, overflow_at=60)
    write_histogram_csv(out / "time_to_optimize_hist.csv", tto_hist)
    # horizons are whole hours; drop to hourly bins when 2-hour bins don't divide
    lifespan_bin = 120 if config.horizon_minutes % 120 == 0 else 60
    lifespan_hist = histogram_minutes(
        lifespans, bin_width=lifespan_bin, overflow_at=config.horizon_minutes
    )
    write_histogram_csv(out / "active_lifespan_hist.csv", lifespan_hist)

    achieved = sum(1 for t in tto if t is not None)
    p80 = percentile_minutes(tto, 0.80)
    return {
        "false_convergence": {
            "rate": rate,
            "window_batches": 12,
            "articles": len(articles),
            "misallocated": round(rate * len(articles)),
        },
        "time_to_optimize": {
            "percentile_80_minutes": p80 if math.isfinite(p80) else None,
            "achieved": achieved,
            "not_achieved": len(tto) - achieved,
            "histogram_csv": "time_to_optimize_hist.csv",
        },
        "active_lifespan": {
            "percentile_95_minutes": percentile_minutes(lifespans, 0.95),
            "histogram_csv": "active_lifespan_hist.csv",
        },
    }


def _command_baseline_compare(articles, config: ExperimentConfig, out: Path) -> dict:
    sim_config = config.sim_config()
    bts = run_corpus(articles, sim_config)
    base = run_baselines(articles, sim_config, testing_minutes=60)
    gain = click_gain(bts, base, cut_minute=60)
    ci_lo, ci_hi = bootstrap_first_hour_ci(bts, base, cut_minute=60, seed=config.seed)
    subopt = suboptimal_impressions(bts, base, articles)
    return {
        "click_gain": {
            "articles": gain.articles,
            "cut_minutes": gain.cut_minute,
            "first_hour_pct": gain.first_hour_pct,
            "remaining_pct": gain.remaining_pct,
            "total_pct": gain.total_pct,
            "first_hour_ci95_pct": [ci_lo, ci_hi],
            "bts_clicks": [gain.bts_first_hour, gain.bts_remaining, gain.bts_total],
            "baseline_clicks": [
                gain.baseline_first_hour,
                gain.baseline_remaining,
                gain.baseline_total,
            ],
            "pairing": "per-article streams keyed by (seed, article_id)",
        },
        "suboptimal_impressions": {
            "articles": subopt.articles,
            "bts": subopt.bts_suboptimal,
            "baseline_best_case": subopt.baseline_suboptimal,
            "decrease_pct": subopt.decrease_pct,
        },
    }


def _command_sweep(articles, config: ExperimentConfig, out: Path) -> dict:
    sim_config = config.sim_config()
    intervals = list(config.sweep_intervals)
    methods = compare_update_methods(articles, intervals, sim_config, config.seed)
    frequencies = compare_frequencies(articles, intervals, sim_config, config.seed)
    return {
        "update_methods": methods.to_dict(),
        "update_frequencies": frequencies.to_dict(),
        "pairing": "all cells share per-article streams keyed by (seed, article_id)",
    }


def _command_stress(articles, config: ExperimentConfig, out: Path) -> dict:
    sim_config = config.sim_config()
    calibrations: dict = {}
    minutes = []
    for spec in articles:
        worst = int(np.argmin(spec.theta_hat))
        key = (spec.arm_count, worst)
        if key not in calibrations:
            calibrations[key] = calibrate_adversarial_prior(
                spec.arm_count, worst, target_share=0.90, seed=config.seed
            )
        calibrated = calibrations[key]
        rng = derive_rng(config.seed, "stress", spec.article_id)
        minutes.append(
            self_correction_experiment(spec, calibrated.priors, sim_config, rng)
        )
    hist = histogram_minutes(minutes, bin_width=5, overflow_at=65)
    write_histogram_csv(out / "self_correction_hist.csv", hist)
    achieved = sum(1 for m in minutes if m is not None)
    p80 = percentile_minutes(minutes, 0.80)
    return {
        "self_correction": {
            "articles": len(articles),
            "achieved": achieved,
            "not_achieved": len(minutes) - achieved,
            "percentile_80_minutes": p80 if math.isfinite(p80) else None,
            "within_60_minutes": sum(1 for m in minutes if m is not None and m <= 60),
            "histogram_csv": "self_correction_hist.csv",
        },
        "calibration": {
            "target_share": 0.90,
            "share_band": [0.88, 0.92],
            "priors": [
                {
                    "arm_count": key[0],
                    "favored_arm": key[1],
                    "strength": cal.strength,
                    "expected_share": cal.expected_share,
                    "priors": [list(p) for p in cal.priors],
                }
                for key, cal in sorted(calibrations.items())
            ],
        },
    }


_COMMANDS = {
    "run": _command_run,
    "sweep": _command_sweep,
    "stress": _command_stress,
    "baseline-compare": _command_baseline_compare,
}


def run_experiment(config: ExperimentConfig) -> int:
    """Execute one configured experiment and write its artifacts."""
    articles = load_articles(config)
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)

    metrics = _COMMANDS[config.command](articles, config, out)
    report = {
        "command": config.command,
        "config": {
            "corpus": config.corpus_source(),
            "interval_minutes": config.interval,
            "method": config.method.value,
            "horizon_minutes": config.horizon_minutes,
            "seed": config.seed,
            "sweep_intervals": list(config.sweep_intervals),
        },
        "corpus_summary": {
            "articles": len(articles),
            "total_impressions": sum(a.trace.total_impressions for a in articles),
            "arm_counts": sorted({a.arm_count for a in articles}),
        },
        "metrics": metrics,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

    manifest = {
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "command": config.command,
        "options": {
            "corpus": config.corpus_path,
            "synthetic": config.synthetic_spec,
            "interval": config.interval,
            "method": config.method.value,
            "horizon_hours": config.horizon_hours,
            "seed": config.seed,
            "sweep_intervals": list(config.sweep_intervals),
            "out": str(config.out_dir),
        },
        "package_version": __version__,
        "code_fingerprint": code_fingerprint(),
        "kernel_backend": KERNEL_BACKEND,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0


def main(argv: "list[str] | None" = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        config = parse_args(argv)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return run_experiment(config)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        _partial_artifacts_note(config)
        return 1
    except ValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        _partial_artifacts_note(config)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        _partial_artifacts_note(config)
        return 3


def _partial_artifacts_note(config: ExperimentConfig) -> None:
    if config.out_dir.exists():
        print(f"note: partial artifacts may remain in {config.out_dir}", file=sys.stderr)


if __name__ == "__main__":
    raise SystemExit(main())
