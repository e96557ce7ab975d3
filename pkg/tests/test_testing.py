import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autocal import core, testing
from autocal.asymptotics import TestId
from autocal.core import NullModel, Sample
from autocal.errors import DegenerateLevel, ValidationError
from autocal.simulation import Contamination, simulate_sample
from autocal.testing import MCConfig, TestFailure, TestOutcome

MC = MCConfig(draws=100_000, seed=2024)


@pytest.fixture(scope="module")
def null_sample(table1_gamma):
    return simulate_sample(table1_gamma, 1000, seed=5)


class TestRunAll:
    def test_perfect_calibration(self, table1_model):
        levels = np.repeat(table1_model.levels, 10)
        results = testing.run_all(Sample(levels, levels), table1_model, 0.05, MC)
        assert len(results) == 7
        for r in results:
            assert r.statistic == 0.0
            assert not r.reject
            assert r.p_value == 1.0

    def test_order_and_types(self, null_sample, table1_model):
        results = testing.run_all(null_sample, table1_model, 0.05, MC)
        assert [r.test_id for r in results] == list(TestId)
        assert all(isinstance(r, TestOutcome) for r in results)
        assert all(r.model_digest == table1_model.digest() for r in results)

    def test_deterministic(self, null_sample, table1_model):
        a = testing.run_all(null_sample, table1_model, 0.05, MC)
        b = testing.run_all(null_sample, table1_model, 0.05, MC)
        assert [r.to_dict() for r in a] == [r.to_dict() for r in b]

    def test_mc_metadata(self, null_sample, table1_model):
        for r in testing.run_all(null_sample, table1_model, 0.05, MC):
            if r.test_id.is_monte_carlo:
                assert r.mc_metadata["draws"] == MC.draws
                assert r.mc_metadata["root_seed"] == MC.seed
                assert r.mc_metadata["seed"] == MC.seed_for(r.test_id)
            else:
                assert r.mc_metadata is None

    def test_zero_variance_model(self, null_sample):
        model = NullModel.from_arrays((10, 11, 12, 13, 14, 15),
                                      (0.1, 0.15, 0.25, 0.25, 0.15, 0.1), (0.0,) * 6)
        results = testing.run_all(null_sample, model, 0.05, MC)
        assert len(results) == 7
        for tid in (TestId.T1A, TestId.T1B, TestId.T3C):
            failure = results[list(TestId).index(tid)]
            assert isinstance(failure, TestFailure)
            assert failure.error == "DegenerateLevel"
            assert not failure.reject

    def test_partial_degenerate_model(self, null_sample):
        model = NullModel.from_arrays((10, 11, 12, 13, 14, 15),
                                      (0.1, 0.15, 0.25, 0.25, 0.15, 0.1),
                                      (1.0, 1.0, 0.0, 1.0, 1.0, 1.0))
        kinds = {r.test_id: type(r) for r in testing.run_all(null_sample, model, 0.05, MC)}
        assert kinds[TestId.T1B] is TestFailure
        assert kinds[TestId.T2A] is TestOutcome and kinds[TestId.T3B] is TestOutcome

    def test_global_shift_rejects_everything(self, table1_gamma, table1_model):
        sample = simulate_sample(table1_gamma, 1000, Contamination.global_shift(1.0), seed=7)
        results = testing.run_all(sample, table1_model, 0.05, MC)
        assert all(r.reject for r in results)

    def test_unknown_level(self, table1_model):
        with pytest.raises(core.UnknownLevel):
            testing.run_all(Sample([1.0], [9.0]), table1_model)


class TestStatistics:
    def test_scaling(self, null_sample, table1_model):
        inc = core.increments(null_sample, table1_model.partition)
        n = null_sample.n
        got = {t: testing.statistic_for(t, inc, table1_model) for t in TestId}
        assert got[TestId.T1A] == math.sqrt(n) * max(abs(s) for s in inc.values)
        assert got[TestId.T2A] == pytest.approx(
            math.sqrt(n) * max(abs(t) for t in core.prefix_sums(inc.values)), rel=1e-15)
        assert got[TestId.T3B] == pytest.approx(n * sum(s * s for s in inc.values), rel=1e-14)
        assert got[TestId.T3C] == pytest.approx(core.chi2_statistic(inc, table1_model, n),
                                                rel=1e-15)

    def test_batch_matches_scalar(self, table1_gamma, table1_model):
        part = table1_model.partition
        incs = [core.increments(simulate_sample(table1_gamma, 300, seed=s), part)
                for s in range(20)]
        S = np.array([i.values for i in incs])
        batch = testing.batch_statistics(S, table1_model, 300)
        for row, inc in enumerate(incs):
            for t in TestId:
                assert batch[t][row] == pytest.approx(
                    testing.statistic_for(t, inc, table1_model), rel=1e-12)

    def test_batch_shape_check(self, table1_model):
        with pytest.raises(ValidationError):
            testing.batch_statistics(np.zeros((3, 2)), table1_model, 10)

    def test_single_level_coincidences(self):
        model = NullModel.from_arrays((4.0,), (1.0,), (2.0,))
        sample = Sample([3.0, 6.5, 4.25], [4.0, 4.0, 4.0])
        inc = core.increments(sample, model.partition)
        stat = {t: testing.statistic_for(t, inc, model) for t in TestId}
        assert stat[TestId.T1A] == stat[TestId.T2A] == stat[TestId.T2B]
        assert stat[TestId.T3A] == stat[TestId.T3B]
        out = {r.test_id: r for r in testing.run_all(sample, model, 0.05, MC)}
        assert out[TestId.T1A].reject == out[TestId.T2A].reject == out[TestId.T2B].reject
        assert out[TestId.T3A].reject == out[TestId.T3B].reject

    def test_tie_does_not_reject(self):
        model = NullModel.from_arrays((1.0,), (1.0,), (1.0,))
        crit = testing.null_quantiles(model, 0.05, MC, [TestId.T1B])[TestId.T1B].critical_value
        # n = 1 and S = crit reproduces the critical value exactly
        outcome = testing.run_test(TestId.T1B, Sample([1.0 + crit], [1.0]), model, 0.05, MC)
        assert outcome.statistic == crit
        assert not outcome.reject


_shift = st.floats(-0.5, 0.5, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(_shift, min_size=6, max_size=6), st.integers(0, 2**32))
def test_reject_iff_statistic_exceeds_critical(table1_gamma, shifts, seed):
    gamma = table1_gamma
    base = simulate_sample(gamma, 400, seed=seed)
    idx = np.searchsorted(gamma.levels, base.pi)
    sample = Sample(np.maximum(base.y + np.asarray(shifts)[idx], 1e-3), base.pi)
    for r in testing.run_all(sample, gamma.null_model(), 0.05, MC):
        assert r.reject == (r.statistic > r.critical_value)
        if r.reject:
            # nearest-rank quantile: at most m - ceil(0.95 m) draws lie above it
            assert r.p_value <= r.level + 2.0 / MC.draws


class TestAssess:
    def test_supplied(self, null_sample, table1_model):
        report = testing.assess(null_sample, model=table1_model, mc=MC)
        assert report.model_source == "supplied" and report.warnings == []
        assert report.model is table1_model and report.n == 1000

    def test_reference(self, table1_gamma, null_sample):
        reference = simulate_sample(table1_gamma, 5000, seed=99)
        report = testing.assess(null_sample, reference=reference, mc=MC)
        assert report.model_source == "reference" and report.warnings == []
        assert report.model.levels == table1_gamma.levels
        assert len(report.outcomes) == 7

    def test_reference_missing_test_level(self, table1_gamma):
        reference = simulate_sample(table1_gamma, 2000, seed=1)
        with pytest.raises(core.LevelUnderpopulated):
            testing.assess(Sample([1.0], [99.0]), reference=reference, mc=MC)

    def test_self_estimated_warns(self, null_sample):
        report = testing.assess(null_sample, mc=MC)
        assert report.model_source == "test_sample"
        assert len(report.warnings) == 1

    def test_degenerate_reference(self):
        sample = Sample([2.0, 2.0, 3.0, 3.0], [2.0, 2.0, 3.0, 3.0])
        report = testing.assess(sample, mc=MC)
        assert isinstance(report.outcomes[0], TestFailure)
        with pytest.raises(DegenerateLevel):
            testing.run_test("T1b", sample, report.model, 0.05, MC)


def test_seed_for_is_distinct_per_test():
    seeds = {MC.seed_for(t) for t in TestId}
    assert len(seeds) == 7
    assert MCConfig(seed=1).seed_for("T2a") != MCConfig(seed=2).seed_for("T2a")
