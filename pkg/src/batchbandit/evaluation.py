"""Corpus-level metrics, the self-correction stress test, and tuning sweeps.

Everything here is a pure function of simulation results (plus an explicit
seed where new randomness is needed), so metrics recompute identically on the
same inputs. Comparisons between configurations are paired: per-article
response streams depend only on (seed, article_id), never on the update
method or interval under comparison.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .baseline import BaselineResult
from .core import BanditState
from .errors import ConfigurationError, ValidationError
from .rng import derive_rng
from .simulate import (
    ArticleResult,
    ArticleSpec,
    SimConfig,
    UpdateMethod,
    run_article,
    run_corpus,
)

# ---------------------------------------------------------------------------
# convergence


@dataclass(frozen=True)
class ConvergenceVerdict:
    """Where an article's traffic settled over its final stable window."""

    converged_correctly: bool
    stable_window_start: int
    plurality_arm: int | None
    optimal_arm: int


def convergence_verdict(
    result: ArticleResult,
    spec: ArticleSpec,
    window_batches: int = 12,
) -> ConvergenceVerdict:
    """Judge stable-state allocation over the final ``window_batches`` batches.

    The plurality arm is the one with strictly the most impressions summed
    over the window; a tie (including an all-empty window) means no plurality
    and therefore no correct convergence.
    """
    if window_batches < 1:
        raise ConfigurationError(f"window_batches must be >= 1, got {window_batches}")
    _check_article_match(result, spec)
    window = min(window_batches, result.n_batches)
    start_idx = result.n_batches - window
    totals = result.impressions[start_idx:].sum(axis=0)
    top = int(np.argmax(totals))
    strict = (totals > totals[top]).sum() == 0 and (totals == totals[top]).sum() == 1
    plurality_arm = top if strict else None
    optimal = spec.optimal_arm
    return ConvergenceVerdict(
        converged_correctly=plurality_arm == optimal,
        stable_window_start=start_idx + 1,
        plurality_arm=plurality_arm,
        optimal_arm=optimal,
    )


def false_convergence_rate(
    results: list[ArticleResult],
    specs: list[ArticleSpec],
    window_batches: int = 12,
) -> float:
    """Fraction of articles whose stable-window plurality arm is not the best arm."""
    _check_paired(results, specs)
    misallocated = sum(
        not convergence_verdict(result, spec, window_batches).converged_correctly
        for result, spec in zip(results, specs)
    )
    return misallocated / len(results)


# ---------------------------------------------------------------------------
# optimization speed


def time_to_optimize(result: ArticleResult, spec: ArticleSpec) -> float | None:
    """Minute from which the optimal arm keeps the strict traffic plurality.

    Checked per batch on realized impressions, over batches that carried
    traffic (an empty batch allocates nothing so it neither confirms nor
    breaks "constantly"); the plurality run must start no later than the last
    batch with traffic. Returns the closing minute of the first batch of the
    run, or None when the condition is never met.
    """
    _check_article_match(result, spec)
    optimal = spec.optimal_arm
    sizes = result.batch_sizes
    nonzero = sizes > 0
    if not nonzero.any():
        return None
    best = result.impressions[:, optimal]
    others = np.delete(result.impressions, optimal, axis=1).max(axis=1)
    violated = nonzero & ~(best > others)
    last_traffic = int(np.nonzero(nonzero)[0][-1])
    if not violated.any():
        start = 0
    else:
        start = int(np.nonzero(violated)[0][-1]) + 1
        if start > last_traffic:
            return None
    return float(result.end_minutes[start])


# ---------------------------------------------------------------------------
# self-correction stress test


@dataclass(frozen=True)
class CalibratedPrior:
    """An adversarial prior plus the Monte Carlo share it actually achieves."""

    priors: tuple[tuple[float, float], ...]
    favored_arm: int
    expected_share: float
    strength: float


def calibrate_adversarial_prior(
    arm_count: int,
    favored_arm: int,
    target_share: float = 0.90,
    tolerance: float = 0.01,
    draws: int = 200_000,
    seed: int = 0,
) -> CalibratedPrior:
    """Find a prior that steers ~``target_share`` of first-batch traffic to one arm.

    The favored arm gets Beta(1+s, 1) and every other arm Beta(1, 1+s); the
    strength s is bisected until the favored arm's Monte Carlo selection share
    under frozen posteriors lands within ``tolerance`` of the target.
    """
    if arm_count < 2:
        raise ConfigurationError(f"arm_count must be >= 2, got {arm_count}")
    if not 0 <= favored_arm < arm_count:
        raise ConfigurationError(f"favored_arm {favored_arm} out of range for {arm_count} arms")
    if not 1.0 / arm_count < target_share < 1.0:
        raise ConfigurationError(
            f"target_share must be within (1/{arm_count}, 1), got {target_share}"
        )
    rng = derive_rng(seed, "calibrate", arm_count, favored_arm)

    def montecarlo_share(strength: float) -> float:
        shapes = np.empty((draws, arm_count, 2))
        shapes[..., 0] = 1.0
        shapes[..., 1] = 1.0 + strength
        shapes[:, favored_arm, 0] = 1.0 + strength
        shapes[:, favored_arm, 1] = 1.0
        g = rng.standard_gamma(shapes)
        winners = (g[..., 0] / (g[..., 0] + g[..., 1])).argmax(axis=1)
        return float((winners == favored_arm).mean())

    lo, hi = 0.0, 4.0
    while montecarlo_share(hi) < target_share:
        hi *= 2.0
        if hi > 1e9:
            raise ConfigurationError("cannot reach the target share with this prior family")
    strength, share = hi, montecarlo_share(hi)
    for _ in range(60):
        mid = (lo + hi) / 2.0
        mid_share = montecarlo_share(mid)
        if abs(mid_share - target_share) < abs(share - target_share):
            strength, share = mid, mid_share
        if abs(mid_share - target_share) <= tolerance / 2.0:
            break
        if mid_share < target_share:
            lo = mid
        else:
            hi = mid
    priors = tuple(
        (1.0 + strength, 1.0) if k == favored_arm else (1.0, 1.0 + strength)
        for k in range(arm_count)
    )
    return CalibratedPrior(
        priors=priors,
        favored_arm=favored_arm,
        expected_share=share,
        strength=strength,
    )


def self_correction_experiment(
    spec: ArticleSpec,
    adversarial_prior: "list[tuple[float, float]] | tuple[tuple[float, float], ...]",
    config: SimConfig,
    rng: np.random.Generator,
    required_streak: int = 5,
) -> float | None:
    """Run bTS from a hostile prior; time until the best arm's mean leads.

    Returns the closing minute of the batch at which the optimal arm has held
    the strictly highest posterior mean for ``required_streak`` consecutive
    batch updates (batches without traffic don't update, so they don't
    count), or None if it never recovers within the horizon.
    """
    state = BanditState.from_priors(adversarial_prior)
    result = run_article(spec, config, rng, initial_state=state)
    optimal = spec.optimal_arm
    means = result.posterior_means()
    best = means[:, optimal]
    others = np.delete(means, optimal, axis=1).max(axis=1)
    leads = best > others
    streak = 0
    for t in range(result.n_batches):
        if result.batch_sizes[t] == 0:
            continue
        streak = streak + 1 if leads[t] else 0
        if streak >= required_streak:
            return float(result.end_minutes[t])
    return None


# ---------------------------------------------------------------------------
# click gain


def relative_gain(value: float, reference: float) -> float:
    """(value - reference) / reference as a fraction; 0/0 counts as no gain."""
    if reference == 0:
        if value == 0:
            return 0.0
        raise ValidationError("relative gain is undefined against a zero reference")
    return (value - reference) / reference


@dataclass(frozen=True)
class ClickGainReport:
    """Paired percentage click increase of bTS over the test-rollout baseline."""

    articles: int
    cut_minute: int
    bts_first_hour: int
    bts_remaining: int
    baseline_first_hour: int
    baseline_remaining: int
    first_hour_pct: float
    remaining_pct: float
    total_pct: float

    @property
    def bts_total(self) -> int:
        return self.bts_first_hour + self.bts_remaining

    @property
    def baseline_total(self) -> int:
        return self.baseline_first_hour + self.baseline_remaining


def _split_pair(
    bts_result: ArticleResult,
    baseline_result: BaselineResult,
    cut_minute: int,
) -> tuple[int, int, int, int]:
    if baseline_result.testing_minutes != cut_minute:
        raise ValidationError(
            f"baseline testing window is {baseline_result.testing_minutes} minutes "
            f"but the first-hour cut is {cut_minute}"
        )
    bts_first, bts_rest = bts_result.clicks_split_at(cut_minute)
    return bts_first, bts_rest, sum(baseline_result.testing_clicks), baseline_result.post_clicks


def click_gain(
    bts: list[ArticleResult],
    base: list[BaselineResult],
    cut_minute: int = 60,
) -> ClickGainReport:
    """Corpus-aggregate click increase, split at each article's first hour."""
    _check_paired(bts, base)
    bts_first = bts_rest = base_first = base_rest = 0
    for bts_result, baseline_result in zip(bts, base):
        b1, b2, t1, t2 = _split_pair(bts_result, baseline_result, cut_minute)
        bts_first += b1
        bts_rest += b2
        base_first += t1
        base_rest += t2
    return ClickGainReport(
        articles=len(bts),
        cut_minute=cut_minute,
        bts_first_hour=bts_first,
        bts_remaining=bts_rest,
        baseline_first_hour=base_first,
        baseline_remaining=base_rest,
        first_hour_pct=100.0 * relative_gain(bts_first, base_first),
        remaining_pct=100.0 * relative_gain(bts_rest, base_rest),
        total_pct=100.0 * relative_gain(bts_first + bts_rest, base_first + base_rest),
    )


def bootstrap_first_hour_ci(
    bts: list[ArticleResult],
    base: list[BaselineResult],
    cut_minute: int = 60,
    n_boot: int = 2000,
    confidence: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap CI (over articles) for the first-hour gain percent."""
    _check_paired(bts, base)
    if not 0.0 < confidence < 1.0:
        raise ConfigurationError(f"confidence must be within (0, 1), got {confidence}")
    splits = [_split_pair(b, t, cut_minute) for b, t in zip(bts, base)]
    pairs = np.array([(s[0], s[2]) for s in splits], dtype=np.float64)
    rng = derive_rng(seed, "bootstrap", "first-hour-gain")
    n = pairs.shape[0]
    idx = rng.integers(0, n, size=(n_boot, n))
    bts_sums = pairs[idx, 0].sum(axis=1)
    base_sums = pairs[idx, 1].sum(axis=1)
    valid = base_sums > 0
    if not valid.any():
        raise ValidationError("bootstrap failed: baseline first-hour clicks are all zero")
    gains = 100.0 * (bts_sums[valid] - base_sums[valid]) / base_sums[valid]
    tail = (1.0 - confidence) / 2.0
    return float(np.quantile(gains, tail)), float(np.quantile(gains, 1.0 - tail))


# ---------------------------------------------------------------------------
# sub-optimal exposure


@dataclass(frozen=True)
class SubOptimalReport:
    """Sub-optimal (non-best-arm) impression exposure, bTS versus baseline."""

    articles: int
    bts_suboptimal: int
    baseline_suboptimal: float
    decrease_pct: float


def suboptimal_impressions(
    bts: list[ArticleResult],
    base: list[BaselineResult],
    specs: list[ArticleSpec],
) -> SubOptimalReport:
    """Percentage decrease in impressions served by non-optimal arms.

    The baseline is given best-case accounting: only its testing period shows
    sub-optimal arms, (K-1)/K of M_test per article, as if the rollout winner
    were always the best arm.
    """
    _check_paired(bts, base)
    _check_paired(bts, specs)
    bts_count = 0
    base_count = 0.0
    for bts_result, baseline_result, spec in zip(bts, base, specs):
        bts_count += bts_result.suboptimal_impressions(spec.optimal_arm)
        k = spec.arm_count
        base_count += baseline_result.testing_impressions * (k - 1) / k
    if base_count == 0:
        raise ValidationError(
            "sub-optimal decrease is undefined: baseline sub-optimal impressions are zero"
        )
    return SubOptimalReport(
        articles=len(bts),
        bts_suboptimal=bts_count,
        baseline_suboptimal=base_count,
        decrease_pct=100.0 * (1.0 - bts_count / base_count),
    )


# ---------------------------------------------------------------------------
# tuning sweeps


@dataclass(frozen=True)
class SweepCell:
    """Total corpus clicks for one (update method, update interval) setting."""

    method: str
    interval: int
    total_clicks: int


@dataclass(frozen=True)
class SweepReport:
    """Grid of sweep cells plus percentage deltas against a stated reference."""

    cells: tuple[SweepCell, ...]
    deltas: dict[int, float]
    reference: str
    seed: int

    def cell(self, method: str, interval: int) -> SweepCell:
        for cell in self.cells:
            if cell.method == method and cell.interval == interval:
                return cell
        raise KeyError(f"no sweep cell for method={method!r} interval={interval}")

    def to_dict(self) -> dict:
        return {
            "reference": self.reference,
            "seed": self.seed,
            "cells": [
                {
                    "method": cell.method,
                    "interval_minutes": cell.interval,
                    "total_clicks": cell.total_clicks,
                }
                for cell in self.cells
            ],
            "delta_pct_by_interval": {str(k): v for k, v in sorted(self.deltas.items())},
        }


def _corpus_clicks(
    corpus: list[ArticleSpec],
    config: SimConfig,
    interval: int,
    method: UpdateMethod,
    seed: int,
) -> int:
    cell_config = replace(
        config, update_interval=interval, update_method=method, master_seed=seed
    )
    return sum(result.total_clicks for result in run_corpus(corpus, cell_config))


def compare_update_methods(
    corpus: list[ArticleSpec],
    intervals: list[int],
    config: SimConfig,
    seed: int,
) -> SweepReport:
    """Summation versus normalization total clicks, paired per interval.

    All cells replay the same per-article response streams (keyed by seed and
    article id only), so cells differ only through posterior feedback.
    """
    if not intervals:
        raise ConfigurationError("intervals must be non-empty")
    if not corpus:
        raise ValidationError("corpus must be non-empty")
    cells = []
    deltas: dict[int, float] = {}
    for interval in intervals:
        by_method = {}
        for method in (UpdateMethod.SUMMATION, UpdateMethod.NORMALIZATION):
            clicks = _corpus_clicks(corpus, config, interval, method, seed)
            cells.append(SweepCell(method=method.value, interval=interval, total_clicks=clicks))
            by_method[method] = clicks
        deltas[interval] = 100.0 * relative_gain(
            by_method[UpdateMethod.SUMMATION], by_method[UpdateMethod.NORMALIZATION]
        )
    return SweepReport(
        cells=tuple(cells),
        deltas=deltas,
        reference="normalization update at the same interval",
        seed=seed,
    )


def compare_frequencies(
    corpus: list[ArticleSpec],
    intervals: list[int],
    config: SimConfig,
    seed: int,
) -> SweepReport:
    """Summation-update total clicks per interval, gap to the best interval."""
    if not intervals:
        raise ConfigurationError("intervals must be non-empty")
    if list(intervals) != sorted(intervals):
        raise ConfigurationError("intervals must be sorted ascending")
    if not corpus:
        raise ValidationError("corpus must be non-empty")
    cells = tuple(
        SweepCell(
            method=UpdateMethod.SUMMATION.value,
            interval=interval,
            total_clicks=_corpus_clicks(corpus, config, interval, UpdateMethod.SUMMATION, seed),
        )
        for interval in intervals
    )
    best = max(cells, key=lambda cell: cell.total_clicks)
    deltas = {
        cell.interval: 100.0 * relative_gain(cell.total_clicks, best.total_clicks)
        for cell in cells
    }
    return SweepReport(
        cells=cells,
        deltas=deltas,
        reference=f"best-performing interval ({best.interval} min)",
        seed=seed,
    )


def sign_test_p_value(wins: int, losses: int) -> float:
    """One-sided exact sign test: P(>= wins | n = wins+losses, p = 1/2)."""
    if wins < 0 or losses < 0:
        raise ConfigurationError("wins and losses must be non-negative")
    n = wins + losses
    if n == 0:
        return 1.0
    total = sum(math.comb(n, i) for i in range(wins, n + 1))
    return total / 2.0**n


# ---------------------------------------------------------------------------
# percentiles and histograms


def percentile_minutes(values: "list[float | None]", q: float) -> float:
    """Nearest-rank percentile where not-achieved (None) sorts as infinity."""
    if not values:
        raise ValidationError("cannot take a percentile of no values")
    if not 0.0 < q <= 1.0:
        raise ConfigurationError(f"q must be within (0, 1], got {q}")
    data = sorted(math.inf if v is None else float(v) for v in values)
    rank = max(1, math.ceil(q * len(data)))
    return data[rank - 1]


def histogram_minutes(
    values: "list[float | None]",
    bin_width: int,
    overflow_at: int,
) -> list[tuple[int, int]]:
    """Bin minute values into (bin_start, count) rows with a trailing overflow bin.

    Regular bins are right-closed, (start, start + width], except the first,
    which also includes 0. The final row, labeled ``overflow_at``, counts
    everything beyond ``overflow_at`` including not-achieved (None) values.
    """
    if bin_width < 1:
        raise ConfigurationError(f"bin_width must be >= 1, got {bin_width}")
    if overflow_at < bin_width or overflow_at % bin_width != 0:
        raise ConfigurationError(
            f"overflow_at must be a positive multiple of bin_width, got {overflow_at}"
        )
    n_bins = overflow_at // bin_width
    counts = [0] * (n_bins + 1)
    for value in values:
        if value is None or value > overflow_at:
            counts[n_bins] += 1
            continue
        if value < 0:
            raise ValidationError(f"minute values must be >= 0, got {value}")
        counts[max(0, math.ceil(value / bin_width) - 1)] += 1
    return [(i * bin_width, counts[i]) for i in range(n_bins)] + [(overflow_at, counts[n_bins])]


def write_histogram_csv(path: str | Path, rows: list[tuple[int, int]]) -> None:
    """Write histogram rows with the `bin_start_minutes,count` header."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_start_minutes", "count"])
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# pairing checks


def _article_id_of(item) -> str:
    return item.article_id


def _check_paired(left: list, right: list) -> None:
    if not left or not right:
        raise ValidationError("metric inputs must be non-empty")
    if len(left) != len(right):
        raise ValidationError(
            f"paired inputs differ in length: {len(left)} versus {len(right)}"
        )
    for a, b in zip(left, right):
        if _article_id_of(a) != _article_id_of(b):
            raise ValidationError(
                f"paired inputs misaligned: {_article_id_of(a)!r} versus {_article_id_of(b)!r}"
            )


def _check_article_match(result: ArticleResult, spec: ArticleSpec) -> None:
    if result.article_id != spec.article_id:
        raise ValidationError(
            f"result is for {result.article_id!r} but spec is for {spec.article_id!r}"
        )
    if result.arm_count != spec.arm_count:
        raise ValidationError(
            f"result has {result.arm_count} arms but spec has {spec.arm_count}"
        )
