"""Run the seven auto-calibration tests on a sample.

The statistics and their scaling:

====  ==========================================  ===========================
T1a   max_k sqrt(n) |S_k|                         product of two-sided normals
T1b   max_k sqrt(n) |S_k| / (sqrt(p_k) tau_k)     (2 Phi(s) - 1)^K
T2a   max_k sqrt(n) |T_k|   (prefix sums)         max of Gaussian random walk
T2b   max_k sqrt(n) |T~_k|  (suffix sums)         mirrored random walk
T3a   n sum (1 - alpha_{k-1}) S_k^2               weighted chi-square(1) sum
T3b   n sum S_k^2                                 weighted chi-square(1) sum
T3c   n sum S_k^2 / (p_k tau_k^2)                 chi-square(K)
====  ==========================================  ===========================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from . import rng as _rng
from .asymptotics import (
    DEFAULT_MC_DRAWS,
    TEST_TAGS,
    QuantileResult,
    TestId,
    critical_value,
    p_value,
)
from .core import IncrementVector, NullModel, Sample
from .errors import AutocalError, NumericalError, ValidationError

ALL_TESTS = tuple(TestId)


@dataclass(frozen=True)
class MCConfig:
    draws: int = DEFAULT_MC_DRAWS
    seed: int = 0
    threads: int = 1

    def seed_for(self, test_id: TestId) -> int:
        """Per-test substream of the root seed."""
        return _rng.derive_seed(self.seed, TEST_TAGS[TestId.parse(test_id)])


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    test_id: TestId
    statistic: float
    critical_value: float
    p_value: float
    reject: bool
    level: float
    model_digest: str
    mc_metadata: dict | None = None

    def to_dict(self) -> dict:
        return {
            "test_id": self.test_id.value,
            "statistic": self.statistic,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "reject": self.reject,
            "level": self.level,
            "model_digest": self.model_digest,
            "mc": self.mc_metadata,
            "error": None,
        }


@dataclass(frozen=True)
class TestFailure:
    """Placeholder for a test whose preconditions failed inside run_all."""

    __test__ = False

    test_id: TestId
    error: str
    message: str

    reject = False

    def to_dict(self) -> dict:
        return {"test_id": self.test_id.value, "error": self.error, "message": self.message}


def statistic_for(test_id, inc: IncrementVector, model: NullModel) -> float:
    """The statistic of one test on its limiting scale."""
    tid = TestId.parse(test_id)
    n = inc.n
    root_n = math.sqrt(n)
    if tid is TestId.T1A:
        return root_n * max(abs(s) for s in inc.values)
    if tid is TestId.T1B:
        return root_n * max(abs(z) for z in core.normalized_increments(inc, model))
    if tid is TestId.T2A:
        return root_n * max(abs(t) for t in core.prefix_sums(inc.values))
    if tid is TestId.T2B:
        return root_n * max(abs(t) for t in core.suffix_sums(inc.values))
    if tid is TestId.T3A:
        return n * core.v2_weighted(inc, model)
    if tid is TestId.T3B:
        return n * core.v2_unweighted(inc)
    return core.chi2_statistic(inc, model, n)


def batch_statistics(S: np.ndarray, model: NullModel, n: int, tests=ALL_TESTS) -> dict:
    """Vectorized statistics for a (replications, K) array of increments."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[1] != model.K:
        raise ValidationError(f"expected increments of shape (R, {model.K}), got {S.shape}")
    root_n = math.sqrt(n)
    sv = model.step_variances
    alpha = np.asarray(model.cum_probs[:-1])
    out = {}
    for tid in map(TestId.parse, tests):
        if tid is TestId.T1A:
            out[tid] = root_n * np.max(np.abs(S), axis=1)
        elif tid is TestId.T1B:
            out[tid] = root_n * np.max(np.abs(S) / np.sqrt(sv), axis=1)
        elif tid is TestId.T2A:
            out[tid] = root_n * np.max(np.abs(np.cumsum(S, axis=1)), axis=1)
        elif tid is TestId.T2B:
            out[tid] = root_n * np.max(np.abs(np.cumsum(S[:, ::-1], axis=1)), axis=1)
        elif tid is TestId.T3A:
            out[tid] = n * (S * S) @ (1.0 - alpha)
        elif tid is TestId.T3B:
            out[tid] = n * np.sum(S * S, axis=1)
        else:
            out[tid] = n * (S * S) @ (1.0 / sv)
    return out


def null_quantiles(model: NullModel, level: float, mc: MCConfig = MCConfig(),
                   tests=ALL_TESTS) -> dict:
    """Critical values of each test, with per-test Monte Carlo substreams."""
    return {
        tid: critical_value(tid, model, level, mc.draws, mc.seed_for(tid), mc.threads)
        for tid in map(TestId.parse, tests)
    }


def _outcome(tid: TestId, stat: float, q: QuantileResult, model: NullModel,
             mc: MCConfig) -> TestOutcome:
    seed = mc.seed_for(tid)
    pval = p_value(tid, stat, model, mc.draws, seed, mc.threads)
    meta = None
    if tid.is_monte_carlo:
        meta = {"draws": q.mc_draws, "seed": seed, "root_seed": mc.seed,
                "standard_error": q.mc_standard_error, "rng": q.rng}
    return TestOutcome(tid, float(stat), q.critical_value, pval, bool(stat > q.critical_value),
                       q.level, model.digest(), meta)


def run_test(test_id, sample: Sample, model: NullModel, level: float = 0.05,
             mc: MCConfig = MCConfig()) -> TestOutcome:
    tid = TestId.parse(test_id)
    inc = core.increments(sample, model.partition)
    stat = statistic_for(tid, inc, model)
    q = critical_value(tid, model, level, mc.draws, mc.seed_for(tid), mc.threads)
    return _outcome(tid, stat, q, model, mc)


def run_all(sample: Sample, model: NullModel, level: float = 0.05,
            mc: MCConfig = MCConfig()) -> list:
    """All seven tests in TestId order; failed preconditions become TestFailure."""
    inc = core.increments(sample, model.partition)
    results = []
    for tid in ALL_TESTS:
        try:
            stat = statistic_for(tid, inc, model)
            q = critical_value(tid, model, level, mc.draws, mc.seed_for(tid), mc.threads)
            results.append(_outcome(tid, stat, q, model, mc))
        except AutocalError as exc:
            results.append(TestFailure(tid, type(exc).__name__, str(exc)))
    _cross_check(inc, model, results)
    return results


def _cross_check(inc: IncrementVector, model: NullModel, results) -> None:
    ok = [r for r in results if isinstance(r, TestOutcome)]
    if not ok:
        return
    tests = [r.test_id for r in ok]
    batch = batch_statistics(inc.as_array()[None, :], model, inc.n, tests)
    for r in ok:
        other = float(batch[r.test_id][0])
        if not math.isclose(r.statistic, other, rel_tol=1e-9, abs_tol=1e-12):
            raise NumericalError(
                f"{r.test_id.value}: statistic {r.statistic!r} disagrees with the "
                f"vectorized path ({other!r})"
            )


@dataclass(frozen=True)
class CalibrationReport:
    outcomes: list
    model: NullModel
    model_source: str  # supplied | reference | test_sample
    level: float
    mc: MCConfig
    n: int
    warnings: list = field(default_factory=list)


def assess(sample: Sample, *, model: NullModel | None = None, reference: Sample | None = None,
           level: float = 0.05, mc: MCConfig = MCConfig()) -> CalibrationReport:
    """Pick the null model (supplied, reference data, or the sample itself) and run all tests."""
    warnings = []
    if model is not None:
        source = "supplied"
    elif reference is not None:
        partition, _ = core.build_partition(sample)
        ref_partition, _ = core.build_partition(reference)
        merged = core.LevelPartition(tuple(sorted(set(partition.levels) | set(ref_partition.levels))))
        model = core.estimate_null_model(reference, merged)
        source = "reference"
    else:
        model = core.estimate_null_model(sample)
        source = "test_sample"
        warnings.append(
            "null model estimated from the test sample itself; the limit laws assume "
            "parameters independent of the tested data"
        )
    return CalibrationReport(run_all(sample, model, level, mc), model, source, level, mc,
                             sample.n, warnings)
