"""Test-then-rollout baseline, simulated at the aggregate level.

The first ``testing_minutes`` of traffic (M_test impressions) are split
evenly across the K headlines; each headline's testing clicks are one
Binomial(M_test / K, theta_hat_k) draw. The headline with the most testing
clicks wins (lowest index on ties) and serves all remaining traffic up to the
horizon, earning Binomial(M_post, theta_hat_winner) clicks. Total clicks are
the testing clicks plus the rollout clicks, so the identity
C = sum_k C_test,k + C_post holds exactly by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .rng import derive_rng
from .simulate import ArticleSpec, SimConfig


@dataclass(frozen=True)
class BaselineResult:
    """Outcome of one test-then-rollout run."""

    article_id: str
    testing_minutes: int
    testing_impressions: int
    post_impressions: int
    testing_clicks: tuple[int, ...]
    winner: int
    post_clicks: int

    @property
    def total_clicks(self) -> int:
        return sum(self.testing_clicks) + self.post_clicks


def split_testing_traffic(m_test: int, arm_count: int) -> tuple[int, ...]:
    """Even split of M_test over K arms; the remainder goes round-robin from arm 0."""
    base, extra = divmod(m_test, arm_count)
    return tuple(base + (1 if k < extra else 0) for k in range(arm_count))


def run_test_rollout(
    article: ArticleSpec,
    config: SimConfig,
    rng: np.random.Generator,
    testing_minutes: int = 60,
) -> BaselineResult:
    """Simulate the test-then-rollout policy on one article's trace."""
    if testing_minutes < 1:
        raise ConfigurationError(f"testing_minutes must be >= 1, got {testing_minutes}")
    if testing_minutes > config.horizon:
        raise ConfigurationError(
            f"testing_minutes {testing_minutes} exceeds horizon {config.horizon}"
        )
    m_test = article.trace.impressions_before(testing_minutes)
    m_post = article.trace.impressions_before(config.horizon) - m_test

    allocation = split_testing_traffic(m_test, article.arm_count)
    testing_clicks = tuple(
        int(rng.binomial(n, theta)) for n, theta in zip(allocation, article.theta_hat)
    )
    winner = int(np.argmax(testing_clicks))
    post_clicks = int(rng.binomial(m_post, article.theta_hat[winner]))
    return BaselineResult(
        article_id=article.article_id,
        testing_minutes=testing_minutes,
        testing_impressions=m_test,
        post_impressions=m_post,
        testing_clicks=testing_clicks,
        winner=winner,
        post_clicks=post_clicks,
    )


def run_baselines(
    articles: list[ArticleSpec],
    config: SimConfig,
    testing_minutes: int = 60,
) -> list[BaselineResult]:
    """Run the baseline on every article under its own seed-derived stream."""
    return [
        run_test_rollout(
            article,
            config,
            derive_rng(config.master_seed, "baseline", article.article_id),
            testing_minutes,
        )
        for article in articles
    ]
