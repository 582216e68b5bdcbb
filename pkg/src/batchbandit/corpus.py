"""Synthetic article corpus generation and the JSON Lines interchange format.

Traces follow a two-component minute-weight profile: an exponential decay
calibrated so the first hour carries a target share of lifetime traffic
(news traffic is strongly front-loaded), mixed with a slowly decaying
power-law tail so late batches are not starved. Per-article impressions are
assigned to minutes by a single multinomial draw over those weights.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ValidationError
from .rng import derive_rng
from .simulate import ArticleSpec, ImpressionTrace


def _check_range(name: str, lo, hi, bound_lo=None, bound_hi=None) -> None:
    if lo > hi:
        raise ConfigurationError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
    if bound_lo is not None and lo < bound_lo:
        raise ConfigurationError(f"{name}: bounds must be >= {bound_lo}, got {lo}")
    if bound_hi is not None and hi > bound_hi:
        raise ConfigurationError(f"{name}: bounds must be <= {bound_hi}, got {hi}")


@dataclass(frozen=True)
class CorpusParams:
    """Knobs for the synthetic corpus generator.

    Ranged parameters are (low, high) bounds sampled per article; a degenerate
    range like (0.05, 0.05) pins the value. ``best_rate`` is the best
    headline's CTR; the other headlines sit ``relative_gap`` below it
    (rate = best * (1 - gap)), with arm positions shuffled per article.
    """

    n_articles: int = 200
    arm_counts: tuple[int, int] = (3, 3)
    best_rate: tuple[float, float] = (0.03, 0.12)
    relative_gap: tuple[float, float] = (0.2, 0.5)
    impressions: tuple[int, int] = (100_000, 250_000)
    first_hour_share: float = 0.24
    tail_share: float = 0.2
    tail_exponent: float = 0.8
    trace_minutes: int = 2880

    def __post_init__(self) -> None:
        if self.n_articles < 1:
            raise ConfigurationError(f"n_articles must be >= 1, got {self.n_articles}")
        _check_range("arm_counts", *self.arm_counts, bound_lo=2)
        _check_range("best_rate", *self.best_rate, bound_lo=0.0, bound_hi=1.0)
        _check_range("relative_gap", *self.relative_gap, bound_lo=0.0, bound_hi=1.0)
        _check_range("impressions", *self.impressions, bound_lo=1)
        if self.trace_minutes < 120:
            raise ConfigurationError(f"trace_minutes must be >= 120, got {self.trace_minutes}")
        if not 0.0 < self.first_hour_share < 1.0:
            raise ConfigurationError("first_hour_share must be within (0, 1)")
        if not 0.0 <= self.tail_share < 1.0:
            raise ConfigurationError("tail_share must be within [0, 1)")
        if self.tail_exponent <= 0.0:
            raise ConfigurationError("tail_exponent must be positive")


def _minute_weights(params: CorpusParams) -> np.ndarray:
    """Expected share of traffic per minute, summing to 1 over the trace window."""
    minutes = np.arange(params.trace_minutes, dtype=np.float64)
    tail = (minutes + 60.0) ** -params.tail_exponent
    tail /= tail.sum()
    head_target = params.first_hour_share - params.tail_share * tail[:60].sum()
    head_budget = 1.0 - params.tail_share
    if not 0.0 < head_target < head_budget:
        raise ConfigurationError(
            "first_hour_share is unreachable with the given tail_share/tail_exponent"
        )
    decay = _calibrate_decay(head_target / head_budget, params.trace_minutes)
    head = np.exp(-decay * minutes)
    head /= head.sum()
    return head_budget * head + params.tail_share * tail


def _calibrate_decay(first_hour_fraction: float, trace_minutes: int) -> float:
    """Bisect the exponential rate so minutes [0, 60) carry the given fraction."""

    def share(rate: float) -> float:
        weights = np.exp(-rate * np.arange(trace_minutes))
        return float(weights[:60].sum() / weights.sum())

    lo, hi = 0.0, 1.0
    while share(hi) < first_hour_fraction:
        hi *= 2.0
        if hi > 1e6:
            raise ConfigurationError("cannot calibrate decay for the requested first-hour share")
    for _ in range(100):
        mid = (lo + hi) / 2.0
        if share(mid) < first_hour_fraction:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def generate_synthetic_corpus(params: CorpusParams, seed: int = 0) -> list[ArticleSpec]:
    """Generate ``params.n_articles`` articles, deterministically in ``seed``."""
    weights = _minute_weights(params)
    articles = []
    for i in range(params.n_articles):
        rng = derive_rng(seed, "corpus", i)
        n_arms = int(rng.integers(params.arm_counts[0], params.arm_counts[1] + 1))
        best = float(rng.uniform(*params.best_rate))
        gaps = rng.uniform(*params.relative_gap, size=n_arms - 1)
        rates = np.concatenate([[best], best * (1.0 - gaps)])
        rates = rates[rng.permutation(n_arms)]
        log_lo, log_hi = math.log(params.impressions[0]), math.log(params.impressions[1])
        total = int(round(math.exp(rng.uniform(log_lo, log_hi))))
        total = min(max(total, params.impressions[0]), params.impressions[1])
        counts = rng.multinomial(total, weights)
        entries = tuple(
            (int(minute), int(count)) for minute, count in enumerate(counts) if count > 0
        )
        articles.append(
            ArticleSpec(
                article_id=f"a{i:05d}",
                theta_hat=tuple(float(r) for r in rates),
                trace=ImpressionTrace(entries),
            )
        )
    return articles


def save_corpus(path: str | Path, articles: list[ArticleSpec]) -> None:
    """Write articles as JSON Lines, one object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for article in articles:
            record = {
                "article_id": article.article_id,
                "theta_hat": list(article.theta_hat),
                "trace": [[minute, count] for minute, count in article.trace.entries],
            }
            fh.write(json.dumps(record) + "\n")


def parse_corpus(path: str | Path) -> list[ArticleSpec]:
    """Read a JSON Lines corpus; errors name the offending line and field."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ValidationError(f"cannot read corpus file {path}: {exc}") from exc

    articles = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise ValidationError(f"line {lineno}: expected a JSON object")
        for key in ("article_id", "theta_hat", "trace"):
            if key not in record:
                raise ValidationError(f"line {lineno}: missing field {key!r}")
        theta_hat = record["theta_hat"]
        trace = record["trace"]
        if not isinstance(theta_hat, list):
            raise ValidationError(f"line {lineno}: theta_hat must be a list")
        if not isinstance(trace, list):
            raise ValidationError(f"line {lineno}: trace must be a list")
        try:
            article = ArticleSpec(
                article_id=record["article_id"],
                theta_hat=tuple(theta_hat),
                trace=ImpressionTrace(tuple(tuple(e) if isinstance(e, list) else e for e in trace)),
            )
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from exc
        if article.article_id in seen_ids:
            raise ValidationError(f"line {lineno}: duplicate article_id {article.article_id!r}")
        seen_ids.add(article.article_id)
        articles.append(article)
    if not articles:
        warnings.warn(f"corpus file {path} contains no articles", stacklevel=2)
    return articles
