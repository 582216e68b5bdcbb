"""Test-then-rollout baseline: split arithmetic, identities, expectations."""

import numpy as np
import pytest

from batchbandit.baseline import run_baselines, run_test_rollout, split_testing_traffic
from batchbandit.errors import ConfigurationError
from batchbandit.rng import derive_rng
from batchbandit.simulate import ArticleSpec, ImpressionTrace, SimConfig

CONFIG = SimConfig(update_interval=5, horizon=2880)


def two_phase_article(theta, m_test, m_post, article_id="base"):
    """m_test impressions in the first hour, m_post afterwards."""
    return ArticleSpec(article_id, theta, ImpressionTrace(((0, m_test), (60, m_post))))


class TestSplit:
    def test_remainder_round_robin(self):
        assert split_testing_traffic(10, 3) == (4, 3, 3)
        assert split_testing_traffic(11, 3) == (4, 4, 3)
        assert split_testing_traffic(9, 3) == (3, 3, 3)

    def test_tiny_traffic(self):
        assert split_testing_traffic(1, 2) == (1, 0)
        assert split_testing_traffic(0, 4) == (0, 0, 0, 0)


class TestRunTestRollout:
    def test_all_zero_ctr_yields_zero_clicks(self, rng):
        article = two_phase_article((0.0, 0.0), 100, 900)
        result = run_test_rollout(article, CONFIG, rng)
        assert result.total_clicks == 0
        assert result.testing_clicks == (0, 0)
        assert result.winner == 0  # ties resolve to the lowest index

    def test_degenerate_probabilities_force_everything(self, rng):
        article = two_phase_article((1.0, 0.0), 100, 900)
        result = run_test_rollout(article, CONFIG, rng)
        assert result.testing_clicks == (50, 0)
        assert result.winner == 0
        assert result.post_clicks == 900
        assert result.total_clicks == 950

    def test_click_identity_holds_exactly(self):
        article = two_phase_article((0.07, 0.11, 0.02), 5_000, 20_000)
        for seed in range(25):
            result = run_test_rollout(article, CONFIG, derive_rng(seed, "b"))
            assert result.total_clicks == sum(result.testing_clicks) + result.post_clicks
            assert result.winner == int(np.argmax(result.testing_clicks))

    def test_impression_split(self, rng):
        article = ArticleSpec(
            "split", (0.1, 0.1), ImpressionTrace(((0, 300), (59, 700), (60, 400), (2900, 50)))
        )
        result = run_test_rollout(article, CONFIG, rng)
        assert result.testing_impressions == 1000
        assert result.post_impressions == 400  # post-horizon traffic is out of scope
        assert result.testing_minutes == 60

    def test_expected_total_matches_binomial_arithmetic(self):
        """theta (0.06, 0.04), 10k test, 90k post: E[total] = 5900."""
        article = two_phase_article((0.06, 0.04), 10_000, 90_000)
        totals = [
            run_test_rollout(article, CONFIG, derive_rng(seed, "exp")).total_clicks
            for seed in range(1000)
        ]
        assert abs(np.mean(totals) - 5900) / 5900 < 0.01

    def test_equal_ctrs_expected_clicks(self):
        article = two_phase_article((0.05, 0.05), 20_000, 30_000)
        totals = [
            run_test_rollout(article, CONFIG, derive_rng(seed, "eq")).total_clicks
            for seed in range(400)
        ]
        assert abs(np.mean(totals) - 0.05 * 50_000) / 2500 < 0.02

    def test_winner_accuracy_with_separated_ctrs(self):
        """Well-separated arms and a large test volume pick the best arm nearly always."""
        article = two_phase_article((0.10, 0.08, 0.05), 30_000, 100_000)
        wins = sum(
            run_test_rollout(article, CONFIG, derive_rng(seed, "acc")).winner == 0
            for seed in range(200)
        )
        assert wins >= 190

    def test_testing_window_validation(self, rng):
        article = two_phase_article((0.1, 0.1), 100, 100)
        with pytest.raises(ConfigurationError):
            run_test_rollout(article, CONFIG, rng, testing_minutes=0)
        with pytest.raises(ConfigurationError):
            run_test_rollout(article, SimConfig(update_interval=5, horizon=30), rng)


def test_run_baselines_streams_keyed_by_article_id():
    articles = [two_phase_article((0.06, 0.04), 2000, 3000, article_id=f"a{i}") for i in range(3)]
    config = SimConfig(update_interval=5, horizon=2880, master_seed=5)
    forward = run_baselines(articles, config)
    backward = run_baselines(list(reversed(articles)), config)
    by_id = {r.article_id: r for r in backward}
    for result in forward:
        assert result == by_id[result.article_id]
