import logging
from itertools import combinations

import numba
import numpy as np
import pytest
from scipy import stats as scipy_stats

from floodbench import bootstrap
from floodbench.bootstrap import (
    BootstrapSettings,
    ModelConfig,
    ablation_study,
    bootstrap_ci,
    paired_differences,
    preference_ci,
    standard_ablation_grid,
    technique_pairs,
    trimmed_mean,
)
from floodbench.errors import EmptyDatasetError
from floodbench.metrics import MetricRecord

import studygen


class TestTrimmedMean:
    def test_outlier_example(self):
        values = [1, 2, 3, 4, 5, 6, 7, 8, 9, 100]
        assert trimmed_mean(values, 0.2) == 5.5

    def test_constant_list(self):
        assert trimmed_mean([4.2] * 7, 0.2) == 4.2

    def test_zero_trim_is_plain_mean(self):
        rng = np.random.default_rng(0)
        xs = rng.normal(size=31)
        assert trimmed_mean(xs, 0.0) == pytest.approx(float(np.mean(xs)), abs=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        xs = rng.normal(size=25)
        assert trimmed_mean(xs, 0.2) == trimmed_mean(rng.permutation(xs), 0.2)

    def test_shift_equivariance(self):
        rng = np.random.default_rng(2)
        xs = rng.normal(size=20)
        assert trimmed_mean(xs + 3.5, 0.2) == pytest.approx(trimmed_mean(xs, 0.2) + 3.5, abs=1e-12)

    @pytest.mark.parametrize("n", [5, 10, 17, 100])
    def test_matches_scipy(self, n):
        rng = np.random.default_rng(n)
        xs = rng.normal(size=n)
        assert trimmed_mean(xs, 0.2) == pytest.approx(
            float(scipy_stats.trim_mean(xs, 0.2)), abs=1e-12
        )

    def test_empty_rejected(self):
        with pytest.raises(EmptyDatasetError):
            trimmed_mean([], 0.2)


class TestTechniquePairs:
    def test_pseudo_pairs_on_reference_grid(self):
        pairs = technique_pairs(standard_ablation_grid(), "pseudo")
        assert pairs == [(str(k), str(k + 9)) for k in range(1, 10)]

    def test_bruteforce_agreement_on_reference_grid(self):
        configs = standard_ablation_grid()
        for technique in bootstrap.TECHNIQUES:
            expected = set()
            for a in configs:
                for b in configs:
                    if technique in a.flags and a.flags - {technique} == b.flags:
                        expected.add((a.model_id, b.model_id))
            got = technique_pairs(configs, technique)
            assert len(got) == len(set(got))
            assert set(got) == expected

    def test_single_config_yields_nothing(self):
        assert technique_pairs([ModelConfig("1", {"depth"})], "depth") == []

    def test_two_flag_difference_is_not_a_pair(self):
        configs = [ModelConfig("a", {"depth", "seg"}), ModelConfig("b", frozenset())]
        assert technique_pairs(configs, "depth") == []
        assert technique_pairs(configs, "seg") == []

    def test_duplicate_ids_rejected(self):
        configs = [ModelConfig("a", frozenset()), ModelConfig("a", {"depth"})]
        with pytest.raises(ValueError):
            technique_pairs(configs, "depth")


def _records(rows):
    return [MetricRecord(m, i, e, f, c) for (m, i, e, f, c) in rows]


class TestPairedDifferences:
    def test_identical_models_give_zeros(self):
        records = _records(
            [("w", "a", 0.3, 0.5, 0.9), ("w", "b", 0.1, 0.6, 0.8),
             ("o", "a", 0.3, 0.5, 0.9), ("o", "b", 0.1, 0.6, 0.8)]
        )
        diffs = paired_differences(records, [("w", "o")], "error")
        assert diffs.tolist() == [0.0, 0.0]

    def test_uniform_shift(self):
        records = _records(
            [("w", "a", 0.4, None, None), ("w", "b", 0.2, None, None),
             ("o", "a", 0.3, None, None), ("o", "b", 0.1, None, None)]
        )
        diffs = paired_differences(records, [("w", "o")], "error")
        assert np.allclose(diffs, 0.1)

    def test_three_pairs_four_images_fixture(self):
        pairs = [("w1", "o1"), ("w2", "o2"), ("w3", "o3")]
        rows = []
        expected = []
        for p, (with_id, without_id) in enumerate(pairs):
            for i in range(4):
                image = f"img{i}"
                with_value = 0.1 * (p + 1) + 0.01 * i
                without_value = 0.05 * (p + 1) + 0.02 * i
                rows.append((with_id, image, with_value, None, None))
                rows.append((without_id, image, without_value, None, None))
                expected.append(with_value - without_value)
        diffs = paired_differences(_records(rows), pairs, "error")
        assert diffs.tolist() == pytest.approx(expected, abs=1e-15)

    def test_missing_values_dropped_pairwise(self):
        records = _records(
            [("w", "a", 0.4, 0.9, None), ("w", "b", 0.2, None, None),
             ("o", "a", 0.3, 0.7, None), ("o", "b", 0.1, 0.5, None)]
        )
        diffs = paired_differences(records, [("w", "o")], "f05")
        assert diffs.tolist() == pytest.approx([0.2])

    def test_no_overlap_rejected(self):
        records = _records([("w", "a", 0.4, None, None), ("o", "b", 0.1, None, None)])
        with pytest.raises(EmptyDatasetError):
            paired_differences(records, [("w", "o")], "error")


class TestBootstrapCi:
    def test_degenerate_constant_sample(self):
        estimate, lo, hi, p = bootstrap_ci(np.full(50, 0.07), n_resamples=5000, seed=3)
        assert (estimate, lo, hi) == (0.07, 0.07, 0.07)
        assert p == 0.0

    def test_estimate_is_trimmed_mean_of_original(self):
        rng = np.random.default_rng(4)
        diffs = rng.normal(0.02, 0.1, 400)
        estimate, lo, hi, _ = bootstrap_ci(diffs, n_resamples=2000, seed=1)
        assert estimate == trimmed_mean(diffs, 0.2)
        assert lo <= estimate <= hi

    def test_bit_identical_across_runs_and_thread_counts(self):
        rng = np.random.default_rng(5)
        diffs = rng.normal(0.0, 1.0, 333)
        first = bootstrap_ci(diffs, n_resamples=20000, seed=99)
        second = bootstrap_ci(diffs, n_resamples=20000, seed=99)
        assert first == second
        before = numba.get_num_threads()
        try:
            numba.set_num_threads(1)
            single = bootstrap_ci(diffs, n_resamples=20000, seed=99)
        finally:
            numba.set_num_threads(before)
        assert single == first

    def test_seed_changes_resamples(self):
        rng = np.random.default_rng(6)
        diffs = rng.normal(0.0, 1.0, 100)
        a = bootstrap.bootstrap_statistics(diffs, 1000, 0.2, seed=1)
        b = bootstrap.bootstrap_statistics(diffs, 1000, 0.2, seed=2)
        assert not np.array_equal(a, b)

    def test_two_point_sample_matches_binomial(self):
        # Resampling two values {a, b} gives statistics {a, (a+b)/2, b}
        # with probabilities {1/4, 1/2, 1/4}; the 99 % nearest-rank
        # interval must therefore hit both extremes, and the outcome
        # frequencies must match the binomial law.
        a, b = 1.0, 3.0
        n_resamples = 40000
        stats = bootstrap.bootstrap_statistics([a, b], n_resamples, trim=0.2, seed=123)
        estimate, lo, hi, _ = bootstrap_ci([a, b], n_resamples=n_resamples, trim=0.2, seed=123)
        assert (lo, hi) == (a, b)
        freq_a = np.mean(stats == a)
        freq_mid = np.mean(stats == (a + b) / 2)
        freq_b = np.mean(stats == b)
        sigma = np.sqrt(0.25 * 0.75 / n_resamples)
        assert abs(freq_a - 0.25) < 5 * sigma
        assert abs(freq_b - 0.25) < 5 * sigma
        assert abs(freq_mid - 0.5) < 5 * np.sqrt(0.5 * 0.5 / n_resamples)

    def test_empty_rejected(self):
        with pytest.raises(EmptyDatasetError):
            bootstrap_ci([], n_resamples=10)

    def test_p_value_detects_clear_shift(self):
        rng = np.random.default_rng(7)
        diffs = rng.normal(0.5, 0.05, 200)
        _, _, _, p = bootstrap_ci(diffs, n_resamples=5000, seed=0)
        assert p == 0.0


class TestPreferenceCi:
    def test_unanimous_votes(self):
        est = preference_ci([True] * 12, n_resamples=2000, seed=0)
        assert est.rate == 1.0
        assert (est.ci_low, est.ci_high) == (1.0, 1.0)

    def test_even_split_straddles_half(self):
        votes = [True, False] * 150
        est = preference_ci(votes, n_resamples=20000, seed=1)
        assert est.rate == 0.5
        assert est.ci_low < 0.5 < est.ci_high
        assert est.n_votes == 300

    def test_accepts_mappings(self):
        est = preference_ci([{"chose_candidate": True}, {"chose_candidate": False}],
                            n_resamples=100, seed=0)
        assert est.rate == 0.5

    def test_empty_rejected(self):
        with pytest.raises(EmptyDatasetError):
            preference_ci([])


PLANTED_EFFECTS = {
    "error": {"pseudo": -0.02, "depth": -0.015, "seg": -0.015, "spade": -0.012,
              "dada_s": -0.015, "dada_m": 0.03},
    "f05": {"pseudo": 0.02, "depth": -0.012, "seg": 0.015, "spade": 0.012,
            "dada_s": 0.015, "dada_m": -0.03},
    "edge_coherence": {"pseudo": 0.015, "depth": -0.02, "seg": 0.012, "spade": -0.015,
                       "dada_s": -0.012, "dada_m": 0.02},
}


class TestAblationStudy:
    def test_planted_signs_recovered(self):
        configs = standard_ablation_grid()
        records = studygen.synthetic_records(configs, PLANTED_EFFECTS, n_images=40, seed=11)
        settings = BootstrapSettings(n_resamples=4000, seed=17)
        results = ablation_study(records, configs, settings)
        assert len(results) == 18
        for result in results:
            planted = PLANTED_EFFECTS[result.metric][result.technique]
            assert np.sign(result.estimate) == np.sign(planted)
            if planted < 0:
                assert result.ci_high < 0.0
            else:
                assert result.ci_low > 0.0
            assert result.p_value <= 0.01

    def test_zero_effect_mostly_straddles_zero(self):
        configs = standard_ablation_grid()
        straddles = 0
        total = 0
        for seed in range(6):
            records = studygen.synthetic_records(configs, {}, n_images=30, seed=100 + seed)
            results = ablation_study(records, configs, BootstrapSettings(n_resamples=3000, seed=seed))
            for result in results:
                total += 1
                straddles += result.ci_low < 0.0 < result.ci_high
        assert total == 6 * 18
        assert straddles / total >= 0.9

    def test_absent_technique_is_skipped_with_warning(self, caplog):
        configs = [ModelConfig("1", {"pseudo"}), ModelConfig("10", frozenset())]
        records = studygen.synthetic_records(configs, {}, n_images=8, seed=0)
        with caplog.at_level(logging.WARNING):
            results = ablation_study(records, configs, BootstrapSettings(n_resamples=500, seed=0))
        assert {r.technique for r in results} == {"pseudo"}
        skipped = {t for t in bootstrap.TECHNIQUES if t != "pseudo"}
        for technique in skipped:
            assert any(technique in message for message in caplog.messages)

    def test_deterministic_given_seed(self):
        configs = standard_ablation_grid()
        records = studygen.synthetic_records(configs, PLANTED_EFFECTS, n_images=10, seed=3)
        settings = BootstrapSettings(n_resamples=1000, seed=5)
        assert ablation_study(records, configs, settings) == ablation_study(records, configs, settings)


class TestReferenceGrid:
    def test_eighteen_unique_models(self):
        configs = standard_ablation_grid()
        assert len(configs) == 18
        assert len({c.model_id for c in configs}) == 18
        assert len({c.flags for c in configs}) == 18

    def test_flag_structure(self):
        by_id = {c.model_id: c.flags for c in standard_ablation_grid()}
        # models 1-9 use pseudo labels, their 10-18 twins do not
        for k in range(1, 10):
            assert "pseudo" in by_id[str(k)]
            assert by_id[str(k)] - {"pseudo"} == by_id[str(k + 9)]


class TestImproves:
    def test_sign_conventions(self):
        def result(metric, lo, hi):
            return bootstrap.BootstrapResult(
                technique="depth", metric=metric, estimate=(lo + hi) / 2,
                ci_low=lo, ci_high=hi, p_value=0.0, n_pairs=1, n_images=1,
            )

        assert bootstrap.improves(result("error", -0.3, -0.1))
        assert not bootstrap.improves(result("error", -0.1, 0.1))
        assert bootstrap.improves(result("f05", 0.1, 0.3))
        assert not bootstrap.improves(result("f05", -0.1, 0.1))
        assert bootstrap.improves(result("edge_coherence", 0.05, 0.2))
