"""Metric functions checked against hand-computed cases and fabricated results."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from batchbandit.baseline import BaselineResult, run_baselines
from batchbandit.errors import ConfigurationError, ValidationError
from batchbandit.evaluation import (
    bootstrap_first_hour_ci,
    calibrate_adversarial_prior,
    click_gain,
    compare_frequencies,
    compare_update_methods,
    convergence_verdict,
    false_convergence_rate,
    histogram_minutes,
    percentile_minutes,
    relative_gain,
    self_correction_experiment,
    sign_test_p_value,
    suboptimal_impressions,
    time_to_optimize,
    write_histogram_csv,
)
from batchbandit.rng import derive_rng
from batchbandit.simulate import ArticleSpec, ImpressionTrace, SimConfig, run_corpus

from _helpers import make_result, make_spec


class TestConvergenceVerdict:
    def test_correct_convergence_over_final_window(self):
        rows = [[10, 90]] * 3 + [[80, 20]] * 12
        verdict = convergence_verdict(make_result(rows), make_spec((0.1, 0.05)))
        assert verdict.converged_correctly
        assert verdict.plurality_arm == 0
        assert verdict.optimal_arm == 0
        assert verdict.stable_window_start == 4

    def test_window_sums_decide_not_batch_wins(self):
        # arm 1 wins most batches, arm 0 wins the window on volume
        rows = [[500, 0]] + [[0, 40]] * 11
        verdict = convergence_verdict(make_result(rows), make_spec((0.1, 0.05)))
        assert verdict.plurality_arm == 0
        assert verdict.converged_correctly

    def test_settling_on_the_wrong_arm(self):
        verdict = convergence_verdict(make_result([[5, 95]] * 12), make_spec((0.1, 0.05)))
        assert not verdict.converged_correctly
        assert verdict.plurality_arm == 1
        assert verdict.optimal_arm == 0

    def test_tied_window_has_no_plurality(self):
        verdict = convergence_verdict(make_result([[50, 50]] * 12), make_spec((0.1, 0.05)))
        assert verdict.plurality_arm is None
        assert not verdict.converged_correctly

    def test_short_history_uses_all_batches(self):
        verdict = convergence_verdict(make_result([[9, 1]] * 4), make_spec((0.1, 0.05)))
        assert verdict.stable_window_start == 1
        assert verdict.converged_correctly

    def test_window_validation(self):
        with pytest.raises(ConfigurationError):
            convergence_verdict(make_result([[1, 2]]), make_spec((0.1, 0.05)), window_batches=0)

    def test_article_mismatch(self):
        with pytest.raises(ValidationError):
            convergence_verdict(
                make_result([[1, 2]], article_id="x"), make_spec((0.1, 0.05), article_id="y")
            )
        with pytest.raises(ValidationError):
            convergence_verdict(make_result([[1, 2]]), make_spec((0.1, 0.05, 0.01)))

    @given(
        st.lists(
            st.lists(st.integers(min_value=0, max_value=50), min_size=2, max_size=4),
            min_size=1,
            max_size=6,
        ).filter(lambda rows: len({len(r) for r in rows}) == 1)
    )
    def test_correctness_iff_plurality_is_optimal(self, rows):
        theta = tuple(0.1 - 0.01 * k for k in range(len(rows[0])))
        verdict = convergence_verdict(make_result(rows), make_spec(theta))
        assert verdict.converged_correctly == (verdict.plurality_arm == verdict.optimal_arm)


class TestFalseConvergenceRate:
    def test_zero_when_every_article_settles_correctly(self):
        results = [make_result([[90, 10]] * 12, article_id=f"a{i}") for i in range(4)]
        specs = [make_spec((0.1, 0.05), article_id=f"a{i}") for i in range(4)]
        assert false_convergence_rate(results, specs) == 0.0

    def test_one_of_four_misallocated(self):
        results = [make_result([[90, 10]] * 12, article_id=f"a{i}") for i in range(3)]
        results.append(make_result([[10, 90]] * 12, article_id="a3"))
        specs = [make_spec((0.1, 0.05), article_id=f"a{i}") for i in range(4)]
        assert false_convergence_rate(results, specs) == 0.25

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValidationError):
            false_convergence_rate([], [])

    def test_misaligned_pairing_rejected(self):
        results = [make_result([[1, 2]], article_id="a0"), make_result([[1, 2]], article_id="a1")]
        specs = [make_spec((0.1, 0.05), article_id="a1"), make_spec((0.1, 0.05), article_id="a0")]
        with pytest.raises(ValidationError):
            false_convergence_rate(results, specs)


class TestTimeToOptimize:
    def test_immediate_plurality(self):
        result = make_result([[60, 40], [70, 30], [80, 20]])
        assert time_to_optimize(result, make_spec((0.1, 0.05))) == 5.0

    def test_plurality_reached_after_violations(self):
        rows = [[10, 90], [50, 50], [30, 70], [60, 40], [70, 30]]
        # last violation at batch index 2, so the run starts at batch 4 of 5
        assert time_to_optimize(make_result(rows), make_spec((0.1, 0.05))) == 20.0

    def test_violation_in_final_traffic_batch_means_never(self):
        rows = [[60, 40], [60, 40], [40, 60]]
        assert time_to_optimize(make_result(rows), make_spec((0.1, 0.05))) is None

    def test_trailing_empty_batches_cannot_satisfy_the_condition(self):
        rows = [[60, 40], [40, 60], [0, 0], [0, 0]]
        assert time_to_optimize(make_result(rows), make_spec((0.1, 0.05))) is None

    def test_empty_batches_inside_a_run_are_skipped(self):
        rows = [[60, 40], [0, 0], [70, 30]]
        assert time_to_optimize(make_result(rows), make_spec((0.1, 0.05))) == 5.0

    def test_ties_violate_strict_plurality(self):
        rows = [[50, 50], [60, 40]]
        assert time_to_optimize(make_result(rows), make_spec((0.1, 0.05))) == 10.0

    def test_no_traffic_at_all(self):
        assert time_to_optimize(make_result([[0, 0]] * 3), make_spec((0.1, 0.05))) is None

    def test_three_arms_compare_against_the_runner_up(self):
        rows = [[40, 35, 25], [40, 39, 40]]
        assert time_to_optimize(make_result(rows), make_spec((0.1, 0.08, 0.05))) is None
        rows = [[40, 35, 25], [41, 39, 40]]
        assert time_to_optimize(make_result(rows), make_spec((0.1, 0.08, 0.05))) == 5.0


class TestSelfCorrection:
    SPREAD_TRACE = tuple((m, 100) for m in range(0, 30, 5))
    CONFIG = SimConfig(update_interval=5, horizon=30)

    def test_prior_already_favoring_the_best_arm(self):
        spec = make_spec((0.9, 0.05), trace_entries=self.SPREAD_TRACE)
        minutes = self_correction_experiment(
            spec, ((100.0, 1.0), (1.0, 100.0)), self.CONFIG, derive_rng(0, "sc")
        )
        assert minutes == 25.0  # fifth traffic batch closes the streak

    def test_streak_counts_only_batches_with_traffic(self):
        entries = ((0, 100), (10, 100), (15, 100), (20, 100), (25, 100))
        spec = make_spec((0.9, 0.05), trace_entries=entries)
        minutes = self_correction_experiment(
            spec, ((100.0, 1.0), (1.0, 100.0)), self.CONFIG, derive_rng(0, "sc")
        )
        assert minutes == 30.0

    def test_indistinguishable_arms_never_recover(self):
        spec = make_spec((0.05, 0.05), trace_entries=self.SPREAD_TRACE)
        hostile = ((1.0, 50.0), (50.0, 1.0))
        outcomes = [
            self_correction_experiment(spec, hostile, self.CONFIG, derive_rng(s, "sc"))
            for s in range(10)
        ]
        assert all(minutes is None for minutes in outcomes)

    def test_prior_shape_must_match_the_article(self):
        spec = make_spec((0.9, 0.05), trace_entries=self.SPREAD_TRACE)
        with pytest.raises(ValidationError):
            self_correction_experiment(
                spec, ((5.0, 1.0), (1.0, 5.0), (1.0, 5.0)), self.CONFIG, derive_rng(0, "sc")
            )


class TestCalibrateAdversarialPrior:
    def test_three_arm_calibration_hits_the_band(self):
        calibrated = calibrate_adversarial_prior(3, favored_arm=2)
        assert 0.88 <= calibrated.expected_share <= 0.92
        assert calibrated.favored_arm == 2
        assert calibrated.strength > 0
        favored = calibrated.priors[2]
        assert favored == (1.0 + calibrated.strength, 1.0)
        for arm in (0, 1):
            assert calibrated.priors[arm] == (1.0, 1.0 + calibrated.strength)

    def test_two_arm_calibration_hits_the_band(self):
        calibrated = calibrate_adversarial_prior(2, favored_arm=0, draws=50_000)
        assert 0.88 <= calibrated.expected_share <= 0.92
        assert calibrated.priors[0][0] > calibrated.priors[0][1]

    def test_deterministic_for_a_fixed_seed(self):
        first = calibrate_adversarial_prior(3, favored_arm=1, draws=20_000, seed=7)
        second = calibrate_adversarial_prior(3, favored_arm=1, draws=20_000, seed=7)
        assert first == second

    def test_parameter_validation(self):
        with pytest.raises(ConfigurationError):
            calibrate_adversarial_prior(1, favored_arm=0)
        with pytest.raises(ConfigurationError):
            calibrate_adversarial_prior(3, favored_arm=3)
        with pytest.raises(ConfigurationError):
            calibrate_adversarial_prior(3, favored_arm=0, target_share=0.2)
        with pytest.raises(ConfigurationError):
            calibrate_adversarial_prior(3, favored_arm=0, target_share=1.0)


class TestRelativeGain:
    def test_basic_fractions(self):
        assert relative_gain(110.0, 100.0) == pytest.approx(0.10)
        assert relative_gain(90.0, 100.0) == pytest.approx(-0.10)
        assert relative_gain(0.0, 0.0) == 0.0

    def test_zero_reference_with_nonzero_value(self):
        with pytest.raises(ValidationError):
            relative_gain(5.0, 0.0)

    @pytest.mark.parametrize("a,b", [(120.0, 100.0), (75.0, 300.0), (1.0, 1.0)])
    def test_reversal_identity(self, a, b):
        g = relative_gain(a, b)
        assert relative_gain(b, a) == pytest.approx(-g / (1.0 + g))


def flat_baseline(article_id="a0", testing_clicks=(25, 15), post_clicks=10,
                  testing_impressions=100, testing_minutes=60):
    return BaselineResult(
        article_id=article_id,
        testing_minutes=testing_minutes,
        testing_impressions=testing_impressions,
        post_impressions=300,
        testing_clicks=testing_clicks,
        winner=int(np.argmax(testing_clicks)),
        post_clicks=post_clicks,
    )


class TestClickGain:
    def bts_fixture(self, article_id="a0"):
        imps = [[100, 0]] * 4
        clicks = [[30, 0], [20, 0], [10, 0], [5, 0]]
        return make_result(imps, clicks, interval=30, article_id=article_id)

    def test_exact_percentages_from_fabricated_counts(self):
        # bts splits 50/15 at minute 60, baseline 40/10
        report = click_gain([self.bts_fixture()], [flat_baseline()])
        assert report.bts_first_hour == 50
        assert report.bts_remaining == 15
        assert report.baseline_first_hour == 40
        assert report.baseline_remaining == 10
        assert report.first_hour_pct == pytest.approx(25.0)
        assert report.remaining_pct == pytest.approx(50.0)
        assert report.total_pct == pytest.approx(30.0)
        assert report.bts_total == 65
        assert report.baseline_total == 50
        assert report.articles == 1
        assert report.cut_minute == 60

    def test_testing_window_must_match_the_cut(self):
        with pytest.raises(ValidationError):
            click_gain([self.bts_fixture()], [flat_baseline(testing_minutes=30)])

    def test_pairing_is_enforced(self):
        with pytest.raises(ValidationError):
            click_gain([self.bts_fixture()], [flat_baseline(article_id="other")])
        with pytest.raises(ValidationError):
            click_gain([], [])

    def test_equal_arms_give_near_zero_total_gain(self):
        corpus = [
            ArticleSpec(f"a{i}", (0.05, 0.05), ImpressionTrace(((0, 2000), (60, 8000))))
            for i in range(10)
        ]
        config = SimConfig(update_interval=5, horizon=120, master_seed=11)
        report = click_gain(run_corpus(corpus, config), run_baselines(corpus, config))
        assert abs(report.total_pct) < 5.0

    def test_degenerate_arms_show_the_dilution_structure(self):
        # first-hour traffic spans 12 batches, so bTS converges mid-hour
        entries = tuple((m, 200) for m in range(0, 60, 5)) + ((60, 8000),)
        corpus = [ArticleSpec("a0", (1.0, 0.0), ImpressionTrace(entries))]
        config = SimConfig(update_interval=5, horizon=120, master_seed=3)
        bts = run_corpus(corpus, config)
        base = run_baselines(corpus, config)
        report = click_gain(bts, base)
        assert report.baseline_first_hour == 1200  # the even split clicks on one arm only
        assert report.first_hour_pct > 0
        assert report.bts_remaining <= report.baseline_remaining
        assert report.remaining_pct <= 0


class TestBootstrapFirstHourCI:
    def test_identical_articles_collapse_the_interval(self):
        bts = [
            make_result([[100, 0]] * 4, [[30, 0], [20, 0], [10, 0], [5, 0]],
                        interval=30, article_id=f"a{i}")
            for i in range(8)
        ]
        base = [flat_baseline(article_id=f"a{i}") for i in range(8)]
        lo, hi = bootstrap_first_hour_ci(bts, base, n_boot=200)
        assert lo == pytest.approx(25.0)
        assert hi == pytest.approx(25.0)

    def test_zero_baseline_clicks_everywhere(self):
        bts = [make_result([[100, 0]], [[5, 0]], interval=60, article_id="a0")]
        base = [flat_baseline(testing_clicks=(0, 0), post_clicks=0)]
        with pytest.raises(ValidationError):
            bootstrap_first_hour_ci(bts, base, n_boot=50)

    def test_confidence_validation(self):
        bts = [make_result([[1, 0]], interval=60)]
        with pytest.raises(ConfigurationError):
            bootstrap_first_hour_ci(bts, [flat_baseline()], confidence=1.0)


class TestSubOptimalImpressions:
    def test_full_decrease_when_bts_never_errs(self):
        bts = [make_result([[100, 0]] * 3)]
        base = [flat_baseline(testing_impressions=3000)]
        specs = [make_spec((0.1, 0.05))]
        report = suboptimal_impressions(bts, base, specs)
        assert report.bts_suboptimal == 0
        assert report.baseline_suboptimal == pytest.approx(1500.0)
        assert report.decrease_pct == pytest.approx(100.0)

    def test_negative_decrease_when_bts_explores_forever(self):
        bts = [make_result([[500, 500]] * 2)]
        base = [flat_baseline(testing_impressions=1000)]
        specs = [make_spec((0.1, 0.05))]
        report = suboptimal_impressions(bts, base, specs)
        assert report.bts_suboptimal == 1000
        assert report.decrease_pct == pytest.approx(100.0 * (1.0 - 1000.0 / 500.0))

    def test_mixed_arm_counts_aggregate_exactly(self):
        bts = [
            make_result([[70, 80, 50]], article_id="a0"),
            make_result([[30, 70]], article_id="a1"),
        ]
        base = [
            flat_baseline(article_id="a0", testing_impressions=900, testing_clicks=(1, 2, 3)),
            flat_baseline(article_id="a1", testing_impressions=100),
        ]
        specs = [make_spec((0.1, 0.2, 0.05), article_id="a0"), make_spec((0.1, 0.05), article_id="a1")]
        report = suboptimal_impressions(bts, base, specs)
        assert report.bts_suboptimal == (70 + 50) + 70
        assert report.baseline_suboptimal == pytest.approx(600.0 + 50.0)
        assert report.decrease_pct == pytest.approx(100.0 * (1.0 - 190.0 / 650.0))

    def test_zero_baseline_testing_traffic(self):
        bts = [make_result([[10, 0]])]
        base = [flat_baseline(testing_impressions=0)]
        specs = [make_spec((0.1, 0.05))]
        with pytest.raises(ValidationError):
            suboptimal_impressions(bts, base, specs)


def tiny_corpus(n=4, theta=(0.05, 0.05)):
    trace = ImpressionTrace(((0, 1500), (60, 1500)))
    return [ArticleSpec(f"a{i}", theta, trace) for i in range(n)]


class TestCompareUpdateMethods:
    CONFIG = SimConfig(update_interval=5, horizon=120)

    def test_grid_shape_and_lookup(self):
        report = compare_update_methods(tiny_corpus(), [5, 30], self.CONFIG, seed=0)
        assert len(report.cells) == 4
        assert sorted(report.deltas) == [5, 30]
        assert "normalization" in report.reference
        cell = report.cell("summation", 30)
        assert cell.interval == 30 and cell.method == "summation"
        with pytest.raises(KeyError):
            report.cell("summation", 99)

    def test_identical_arms_keep_methods_close(self):
        report = compare_update_methods(tiny_corpus(), [5, 30], self.CONFIG, seed=0)
        for interval, delta in report.deltas.items():
            assert abs(delta) < 5.0, f"interval {interval} drifted: {delta}"

    def test_delta_matches_cell_totals(self):
        report = compare_update_methods(tiny_corpus(n=2), [10], self.CONFIG, seed=1)
        s = report.cell("summation", 10).total_clicks
        n = report.cell("normalization", 10).total_clicks
        assert report.deltas[10] == pytest.approx(100.0 * (s - n) / n)

    def test_to_dict_round_trips_the_grid(self):
        report = compare_update_methods(tiny_corpus(n=2), [10], self.CONFIG, seed=1)
        payload = report.to_dict()
        assert payload["reference"] == report.reference
        assert payload["delta_pct_by_interval"] == {"10": report.deltas[10]}
        assert len(payload["cells"]) == 2

    def test_input_validation(self):
        with pytest.raises(ConfigurationError):
            compare_update_methods(tiny_corpus(), [], self.CONFIG, seed=0)
        with pytest.raises(ValidationError):
            compare_update_methods([], [5], self.CONFIG, seed=0)


class TestCompareFrequencies:
    CONFIG = SimConfig(update_interval=5, horizon=120)

    def test_single_interval_is_its_own_reference(self):
        report = compare_frequencies(tiny_corpus(n=2), [15], self.CONFIG, seed=0)
        assert report.deltas == {15: 0.0}
        assert "15" in report.reference

    def test_deltas_are_relative_to_the_best_cell(self):
        report = compare_frequencies(tiny_corpus(), [5, 30, 60], self.CONFIG, seed=0)
        assert len(report.cells) == 3
        assert all(cell.method == "summation" for cell in report.cells)
        assert max(report.deltas.values()) == 0.0
        assert all(delta <= 0.0 for delta in report.deltas.values())

    def test_unsorted_intervals_rejected(self):
        with pytest.raises(ConfigurationError):
            compare_frequencies(tiny_corpus(n=1), [30, 5], self.CONFIG, seed=0)


class TestSignTest:
    def test_fifteen_of_twenty(self):
        # sum of C(20, i) for i in 15..20 is 21700
        assert sign_test_p_value(15, 5) == pytest.approx(21700 / 2**20)

    def test_boundaries(self):
        assert sign_test_p_value(0, 0) == 1.0
        assert sign_test_p_value(0, 5) == 1.0
        assert sign_test_p_value(3, 0) == pytest.approx(0.125)
        assert sign_test_p_value(20, 0) == pytest.approx(2.0**-20)

    def test_negative_counts(self):
        with pytest.raises(ConfigurationError):
            sign_test_p_value(-1, 3)


class TestPercentileMinutes:
    def test_nearest_rank(self):
        values = [10.0, 20.0, 30.0, 40.0]
        assert percentile_minutes(values, 0.5) == 20.0
        assert percentile_minutes(values, 0.8) == 40.0
        assert percentile_minutes(values, 1.0) == 40.0
        assert percentile_minutes(values, 0.01) == 10.0

    def test_not_achieved_sorts_last(self):
        assert percentile_minutes([10.0, None], 0.5) == 10.0
        assert percentile_minutes([10.0, None], 1.0) == math.inf

    def test_validation(self):
        with pytest.raises(ValidationError):
            percentile_minutes([], 0.5)
        with pytest.raises(ConfigurationError):
            percentile_minutes([1.0], 0.0)
        with pytest.raises(ConfigurationError):
            percentile_minutes([1.0], 1.2)


class TestHistogramMinutes:
    def test_right_closed_bins_with_overflow(self):
        values = [0.0, 3.0, 5.0, 5.1, 60.0, 61.0, None]
        rows = histogram_minutes(values, bin_width=5, overflow_at=60)
        assert rows[0] == (0, 3)  # 0, 3, and the right edge 5
        assert rows[1] == (5, 1)
        assert rows[11] == (55, 1)
        assert rows[12] == (60, 2)
        assert sum(count for _, count in rows) == len(values)
        assert [start for start, _ in rows] == list(range(0, 61, 5))

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            histogram_minutes([1.0], bin_width=0, overflow_at=60)
        with pytest.raises(ConfigurationError):
            histogram_minutes([1.0], bin_width=5, overflow_at=62)
        with pytest.raises(ValidationError):
            histogram_minutes([-1.0], bin_width=5, overflow_at=60)

    def test_csv_layout(self, tmp_path):
        out = tmp_path / "hist.csv"
        write_histogram_csv(out, [(0, 2), (5, 0), (10, 1)])
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines == ["bin_start_minutes,count", "0,2", "5,0", "10,1"]
