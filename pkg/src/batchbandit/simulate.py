"""Trace-driven simulation: batch windows, simulated responses, full runs.

An article's impression trace (minute offsets and counts from its real or
synthetic lifetime) is replayed against the batched sampler: traffic is cut
into fixed update-interval windows, every impression inside a window is
served under the posteriors frozen at the window's start, responses are
drawn as Bernoulli(theta_hat[arm]), and the posterior update runs once at the
window boundary. Impression counts are conserved exactly; traffic past the
simulation horizon is reported but not simulated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    BanditState,
    BatchCounters,
    UpdateMethod,
    init_arms,
    normalization_update,
    summation_update,
)
from .errors import ConfigurationError, ValidationError
from .kernel import simulate_batch
from .rng import derive_rng


@dataclass(frozen=True)
class ImpressionTrace:
    """Sparse time series of (minute_offset, impressions) pairs.

    Offsets are minutes since publication, strictly increasing; at least one
    entry must carry traffic.
    """

    entries: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        last_minute = -1
        total = 0
        for i, entry in enumerate(self.entries):
            if not isinstance(entry, (tuple, list)) or len(entry) != 2:
                raise ValidationError(f"trace[{i}]: expected a (minute, impressions) pair")
            minute, count = entry
            if not isinstance(minute, int) or isinstance(minute, bool):
                raise ValidationError(f"trace[{i}]: minute_offset must be an integer")
            if not isinstance(count, int) or isinstance(count, bool):
                raise ValidationError(f"trace[{i}]: impressions must be an integer")
            if minute < 0:
                raise ValidationError(f"trace[{i}]: minute_offset must be >= 0")
            if minute <= last_minute:
                raise ValidationError(f"trace[{i}]: minute_offsets must be strictly increasing")
            if count < 0:
                raise ValidationError(f"trace[{i}]: impressions must be >= 0")
            last_minute = minute
            total += count
        if total == 0:
            raise ValidationError("trace must contain at least one impression")

    @property
    def total_impressions(self) -> int:
        return sum(count for _, count in self.entries)

    def impressions_before(self, minute: int) -> int:
        """Total impressions with offset strictly below ``minute``."""
        return sum(count for m, count in self.entries if m < minute)


def active_lifespan(trace: ImpressionTrace) -> int:
    """Minute offset by which a trace has accumulated 95% of its impressions."""
    target = 0.95 * trace.total_impressions
    running = 0
    for minute, count in trace.entries:
        running += count
        if running >= target:
            return minute
    return trace.entries[-1][0]


@dataclass(frozen=True)
class ArticleSpec:
    """One article: id, per-headline estimated CTRs, and its impression trace."""

    article_id: str
    theta_hat: tuple[float, ...]
    trace: ImpressionTrace

    def __post_init__(self) -> None:
        if not isinstance(self.article_id, str) or not self.article_id:
            raise ValidationError("article_id must be a non-empty string")
        if len(self.theta_hat) < 2:
            raise ValidationError("theta_hat must list at least 2 headline CTRs")
        for i, value in enumerate(self.theta_hat):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValidationError(f"theta_hat[{i}]: must be a number")
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"theta_hat[{i}]: must be within [0, 1], got {value}")

    @property
    def arm_count(self) -> int:
        return len(self.theta_hat)

    @property
    def optimal_arm(self) -> int:
        """Index of the largest theta_hat (lowest index on ties)."""
        return int(np.argmax(self.theta_hat))


@dataclass(frozen=True)
class Batch:
    """One update window: 1-based index, event count, [start, end) minutes."""

    index: int
    size: int
    start_minute: int
    end_minute: int


@dataclass(frozen=True)
class SimConfig:
    """Batched-sampling run parameters (all times in minutes)."""

    update_interval: int
    horizon: int = 2880
    update_method: UpdateMethod = UpdateMethod.SUMMATION
    master_seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.update_interval, int) or self.update_interval < 1:
            raise ConfigurationError(
                f"update_interval must be a positive integer, got {self.update_interval!r}"
            )
        if not isinstance(self.horizon, int) or self.horizon < 1:
            raise ConfigurationError(f"horizon must be a positive integer, got {self.horizon!r}")
        if self.update_interval > self.horizon:
            raise ConfigurationError(
                f"update_interval {self.update_interval} exceeds horizon {self.horizon}"
            )
        if not isinstance(self.update_method, UpdateMethod):
            raise ConfigurationError("update_method must be an UpdateMethod")


def build_batches(trace: ImpressionTrace, config: SimConfig) -> list[Batch]:
    """Cut the trace into update-interval windows up to the horizon.

    Windows are [start, start + interval) except possibly the last, which is
    clipped at the horizon. Empty windows are kept (size 0) so batch indices
    map directly to wall-clock time.
    """
    interval = config.update_interval
    n_batches = -(-config.horizon // interval)
    sizes = [0] * n_batches
    for minute, count in trace.entries:
        if minute < config.horizon:
            sizes[minute // interval] += count
    return [
        Batch(
            index=i + 1,
            size=sizes[i],
            start_minute=i * interval,
            end_minute=min((i + 1) * interval, config.horizon),
        )
        for i in range(n_batches)
    ]


def simulate_response(theta_hat: float, rng: np.random.Generator) -> int:
    """Draw one Bernoulli(theta_hat) click, consuming one uniform."""
    if not 0.0 <= theta_hat <= 1.0:
        raise ValidationError(f"theta_hat must be within [0, 1], got {theta_hat}")
    return int(rng.random() < theta_hat)


@dataclass
class ArticleResult:
    """Full per-batch record of one simulated article.

    ``impressions``/``clicks`` are (n_batches, K) int64 allocations per batch;
    ``alpha``/``beta`` are the posterior parameters after each batch boundary
    update (batches without traffic keep the previous values).
    """

    article_id: str
    batch_sizes: np.ndarray
    end_minutes: np.ndarray
    impressions: np.ndarray
    clicks: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    post_horizon_impressions: int
    final_state: BanditState = field(repr=False)

    @property
    def n_batches(self) -> int:
        return int(self.batch_sizes.shape[0])

    @property
    def arm_count(self) -> int:
        return int(self.impressions.shape[1])

    @property
    def total_clicks(self) -> int:
        return int(self.clicks.sum())

    @property
    def total_impressions(self) -> int:
        return int(self.impressions.sum())

    def posterior_means(self) -> np.ndarray:
        """(n_batches, K) posterior means after each batch."""
        return self.alpha / (self.alpha + self.beta)

    def clicks_split_at(self, cut_minute: int) -> tuple[int, int]:
        """(clicks in batches closing at or before the cut, clicks after)."""
        early = self.end_minutes <= cut_minute
        first = int(self.clicks[early].sum())
        return first, self.total_clicks - first

    def suboptimal_impressions(self, optimal_arm: int) -> int:
        """Impressions served by any arm other than ``optimal_arm``."""
        if not 0 <= optimal_arm < self.arm_count:
            raise IndexError(f"arm {optimal_arm} out of range for {self.arm_count} arms")
        return int(self.impressions.sum() - self.impressions[:, optimal_arm].sum())


def run_article(
    article: ArticleSpec,
    config: SimConfig,
    rng: np.random.Generator,
    initial_state: BanditState | None = None,
) -> ArticleResult:
    """Replay one article's trace through the batched sampler."""
    n_arms = article.arm_count
    if initial_state is None:
        state = init_arms(n_arms)
    else:
        if initial_state.arm_count != n_arms:
            raise ValidationError(
                f"initial state has {initial_state.arm_count} arms, article has {n_arms}"
            )
        state = initial_state
    theta = np.ascontiguousarray(article.theta_hat, dtype=np.float64)

    batches = build_batches(article.trace, config)
    n_batches = len(batches)
    impressions = np.zeros((n_batches, n_arms), dtype=np.int64)
    clicks = np.zeros((n_batches, n_arms), dtype=np.int64)
    alpha = np.empty((n_batches, n_arms))
    beta = np.empty((n_batches, n_arms))

    for t, batch in enumerate(batches):
        if batch.size > 0:
            batch_imps, batch_clicks = simulate_batch(rng, state.alpha, state.beta, theta, batch.size)
            counters = BatchCounters(batch_clicks, batch_imps - batch_clicks)
            if config.update_method is UpdateMethod.SUMMATION:
                state = summation_update(state, counters)
            else:
                state = normalization_update(state, counters, batch.size)
            impressions[t] = batch_imps
            clicks[t] = batch_clicks
        alpha[t] = state.alpha
        beta[t] = state.beta

    simulated = int(sum(b.size for b in batches))
    return ArticleResult(
        article_id=article.article_id,
        batch_sizes=np.array([b.size for b in batches], dtype=np.int64),
        end_minutes=np.array([b.end_minute for b in batches], dtype=np.int64),
        impressions=impressions,
        clicks=clicks,
        alpha=alpha,
        beta=beta,
        post_horizon_impressions=article.trace.total_impressions - simulated,
        final_state=state,
    )


def run_corpus(
    articles: list[ArticleSpec],
    config: SimConfig,
) -> list[ArticleResult]:
    """Run every article under its own seed-derived stream.

    Streams are keyed by (master_seed, "sim", article_id) only, never by the
    update method or interval, so runs with different configs on the same
    corpus share response randomness article by article.
    """
    results = []
    for article in articles:
        rng = derive_rng(config.master_seed, "sim", article.article_id)
        results.append(run_article(article, config, rng))
    return results
