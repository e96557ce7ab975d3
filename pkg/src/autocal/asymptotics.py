"""Null distributions, critical values and p-values for the seven tests.

Tests 1a, 1b and 3c have explicit limits (a product of two-sided normal
probabilities, its equal-scale special case, and chi-square with K degrees
of freedom).  Tests 2a/2b (maximum of a Gaussian random walk, forward or
mirrored) and 3a/3b (weighted sums of chi-square(1) variables) are handled
by Monte Carlo over independent Gaussian innovations.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from . import rng as _rng
from .core import NullModel
from .errors import DegenerateLevel, DegenerateModel, DomainError, ValidationError
from .special import chi2_quantile, chi2_sf, normal_quantile

DEFAULT_MC_DRAWS = 1_000_000
MIN_MC_DRAWS = 10_000
MC_CHUNK = 1 << 16

_SQRT2 = math.sqrt(2.0)
_TINY = np.finfo(np.float64).tiny


class TestId(str, Enum):
    __test__ = False

    T1A = "T1a"
    T1B = "T1b"
    T2A = "T2a"
    T2B = "T2b"
    T3A = "T3a"
    T3B = "T3b"
    T3C = "T3c"

    @property
    def is_monte_carlo(self) -> bool:
        return self in _MC_TESTS

    @classmethod
    def parse(cls, value) -> "TestId":
        if isinstance(value, cls):
            return value
        text = str(value).strip()
        for member in cls:
            if text.lower() in (member.value.lower(), member.value[1:].lower()):
                return member
        raise ValidationError(f"unknown test id {value!r}")


_MC_TESTS = frozenset({TestId.T2A, TestId.T2B, TestId.T3A, TestId.T3B})
# stable per-test substream tags
TEST_TAGS = {tid: i + 1 for i, tid in enumerate(TestId)}


@dataclass(frozen=True)
class QuantileResult:
    critical_value: float
    level: float
    method: str  # closed_form | root_search | monte_carlo
    mc_standard_error: float | None = None
    mc_draws: int | None = None
    seed: int | None = None
    rng: str | None = None

    def to_dict(self) -> dict:
        out = {"critical_value": self.critical_value, "level": self.level, "method": self.method}
        if self.method == "monte_carlo":
            out.update(mc_standard_error=self.mc_standard_error, mc_draws=self.mc_draws,
                       seed=self.seed, rng=self.rng)
        return out


def _check_level(level: float) -> float:
    level = float(level)
    if not 0.0 < level < 1.0:
        raise DomainError(f"significance level must lie in (0, 1), got {level!r}")
    return level


def _check_draws(mc_draws: int) -> int:
    if isinstance(mc_draws, bool) or int(mc_draws) != mc_draws:
        raise DomainError(f"mc_draws must be an integer, got {mc_draws!r}")
    if mc_draws < MIN_MC_DRAWS:
        raise DomainError(f"mc_draws must be at least {MIN_MC_DRAWS}, got {mc_draws}")
    return int(mc_draws)


def _step_scales(model: NullModel, strict: bool) -> tuple:
    sv = model.step_variances
    if strict:
        zero = np.flatnonzero(sv <= 0.0)
        if zero.size:
            k = int(zero[0])
            raise DegenerateLevel(f"level {k + 1} has p_k * tau_k^2 = 0", level=k + 1)
    elif not np.any(sv > 0.0):
        raise DegenerateModel("all conditional variances are zero")
    return tuple(np.sqrt(sv).tolist())


# -- closed forms ---------------------------------------------------------

def _max_abs_survival(s: float, scales) -> float:
    """P(max_k |sigma_k eps_k| > s) for independent centred normals."""
    if s <= 0.0:
        return 1.0
    log_cdf = 0.0
    for sigma in scales:
        tail = math.erfc(s / (sigma * _SQRT2))
        if tail >= 1.0:
            return 1.0
        log_cdf += math.log1p(-tail)
    return -math.expm1(log_cdf)


def quantile_test1a(model: NullModel, level: float) -> QuantileResult:
    """Critical value of max_k sqrt(n)|S_n^(k)| by bisection on the product law."""
    level = _check_level(level)
    scales = _step_scales(model, strict=True)
    lo, hi = 0.0, 1.0
    while _max_abs_survival(hi, scales) > level:
        lo, hi = hi, 2.0 * hi
    # bisect down to adjacent doubles (far below the 1e-8 requirement)
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _max_abs_survival(mid, scales) > level:
            lo = mid
        else:
            hi = mid
    return QuantileResult(hi, level, "root_search")


def quantile_test1b(K: int, level: float) -> QuantileResult:
    """Critical value of the maximum of K independent |N(0,1)|."""
    if isinstance(K, bool) or int(K) != K or K < 1:
        raise DomainError(f"K must be a positive integer, got {K!r}")
    level = _check_level(level)
    # per-component two-sided tail: 1 - (1 - level)^(1/K)
    tail = -math.expm1(math.log1p(-level) / int(K))
    return QuantileResult(-normal_quantile(0.5 * tail), level, "closed_form")


def quantile_test3c(K: int, level: float) -> QuantileResult:
    level = _check_level(level)
    return QuantileResult(chi2_quantile(K, 1.0 - level), level, "closed_form")


# -- Monte Carlo ----------------------------------------------------------

def _draw_chunk(kind: str, scales: np.ndarray, seed: int, chunk: int, size: int) -> np.ndarray:
    eps = _rng.stream(seed, chunk).standard_normal((size, scales.size))
    if kind == "wchisq":
        return (eps * eps) @ scales
    steps = eps * scales
    if kind == "rw_mirrored":
        steps = steps[:, ::-1]
    return np.max(np.abs(np.cumsum(steps, axis=1)), axis=1)


@lru_cache(maxsize=16)
def _null_draws(kind: str, scales: tuple, mc_draws: int, seed: int, threads: int) -> np.ndarray:
    scales_arr = np.asarray(scales, dtype=np.float64)
    sizes = [min(MC_CHUNK, mc_draws - start) for start in range(0, mc_draws, MC_CHUNK)]

    def work(chunk):
        return _draw_chunk(kind, scales_arr, seed, chunk, sizes[chunk])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(c) for c in range(len(sizes))]
    draws = np.sort(np.concatenate(parts))
    draws.setflags(write=False)
    return draws


def _nearest_rank(m: int, level: float) -> int:
    # 1-based rank ceil((1 - level) m), guarded against 0.95 * 1e6 = 950000.0000000001
    return min(m, max(1, math.ceil((1.0 - level) * m - 1e-9)))


def _mc_quantile(draws: np.ndarray, level: float, seed: int) -> QuantileResult:
    m = draws.size
    j = _nearest_rank(m, level)
    spread = math.sqrt(m * level * (1.0 - level))
    lo = min(m, max(1, math.floor(m * (1.0 - level) - spread)))
    hi = min(m, max(1, math.ceil(m * (1.0 - level) + spread)))
    se = 0.5 * float(draws[hi - 1] - draws[lo - 1])
    return QuantileResult(float(draws[j - 1]), level, "monte_carlo", se, m, seed,
                          _rng.BIT_GENERATOR)


def _mc_p_value(draws: np.ndarray, statistic: float) -> float:
    exceed = draws.size - int(np.searchsorted(draws, statistic, side="left"))
    return (1.0 + exceed) / (draws.size + 1.0)


def rw_max_draws(model: NullModel, mirrored: bool, mc_draws: int, seed: int,
                 threads: int = 1) -> np.ndarray:
    """Sorted Monte Carlo draws of max_k |Z_k| (or of the mirrored walk)."""
    scales = _step_scales(model, strict=False)
    kind = "rw_mirrored" if mirrored else "rw_forward"
    return _null_draws(kind, scales, _check_draws(mc_draws), _rng.check_seed(seed), int(threads))


def weighted_chisq_draws(weights, mc_draws: int, seed: int, threads: int = 1) -> np.ndarray:
    w = tuple(float(x) for x in weights)
    if not w or any(not (math.isfinite(x) and x >= 0.0) for x in w):
        raise ValidationError(f"weights must be finite and nonnegative: {w}")
    if not any(x > 0.0 for x in w):
        raise DegenerateModel("all chi-square weights are zero")
    return _null_draws("wchisq", w, _check_draws(mc_draws), _rng.check_seed(seed), int(threads))


def rw_max_quantile(model: NullModel, level: float, mirrored: bool = False,
                    mc_draws: int = DEFAULT_MC_DRAWS, seed: int = 0,
                    threads: int = 1) -> QuantileResult:
    level = _check_level(level)
    return _mc_quantile(rw_max_draws(model, mirrored, mc_draws, seed, threads), level, seed)


def weighted_chisq_quantile(weights, level: float, mc_draws: int = DEFAULT_MC_DRAWS,
                            seed: int = 0, threads: int = 1) -> QuantileResult:
    level = _check_level(level)
    return _mc_quantile(weighted_chisq_draws(weights, mc_draws, seed, threads), level, seed)


def abc_weights(model: NullModel) -> tuple:
    """(1 - alpha_{k-1}) p_k tau_k^2, the chi-square weights of Test 3a."""
    alpha = model.cum_probs
    sv = model.step_variances
    return tuple(float((1.0 - alpha[k]) * sv[k]) for k in range(model.K))


def l2_weights(model: NullModel) -> tuple:
    return tuple(model.step_variances.tolist())


# -- covariance -----------------------------------------------------------

def asymptotic_cov(model: NullModel, kind: str = "increments") -> np.ndarray:
    """Limit covariance of sqrt(n) S (diagonal) or sqrt(n) T (random walk)."""
    sv = model.step_variances
    if kind == "increments":
        return np.diag(sv)
    if kind == "random_walk":
        cum = np.cumsum(sv)
        idx = np.arange(model.K)
        return cum[np.minimum.outer(idx, idx)]
    raise ValidationError(f"unknown covariance kind {kind!r}")


# -- dispatch -------------------------------------------------------------

def critical_value(test_id, model: NullModel, level: float,
                   mc_draws: int = DEFAULT_MC_DRAWS, seed: int = 0,
                   threads: int = 1) -> QuantileResult:
    tid = TestId.parse(test_id)
    if tid is TestId.T1A:
        return quantile_test1a(model, level)
    if tid is TestId.T1B:
        _step_scales(model, strict=True)
        return quantile_test1b(model.K, level)
    if tid is TestId.T3C:
        _step_scales(model, strict=True)
        return quantile_test3c(model.K, level)
    if tid in (TestId.T2A, TestId.T2B):
        return rw_max_quantile(model, level, tid is TestId.T2B, mc_draws, seed, threads)
    weights = abc_weights(model) if tid is TestId.T3A else l2_weights(model)
    return weighted_chisq_quantile(weights, level, mc_draws, seed, threads)


def p_value(test_id, statistic: float, model: NullModel,
            mc_draws: int = DEFAULT_MC_DRAWS, seed: int = 0, threads: int = 1) -> float:
    """Tail probability of ``statistic`` under the test's limit law.

    Closed-form tests return the exact tail; Monte Carlo tests use the
    add-one estimator (1 + #{draws >= statistic}) / (draws + 1).
    """
    tid = TestId.parse(test_id)
    statistic = float(statistic)
    if tid is TestId.T1A:
        p = _max_abs_survival(statistic, _step_scales(model, strict=True))
    elif tid is TestId.T1B:
        _step_scales(model, strict=True)
        p = _max_abs_survival(statistic, (1.0,) * model.K)
    elif tid is TestId.T3C:
        _step_scales(model, strict=True)
        p = chi2_sf(statistic, model.K)
    elif tid in (TestId.T2A, TestId.T2B):
        return _mc_p_value(rw_max_draws(model, tid is TestId.T2B, mc_draws, seed, threads),
                           statistic)
    else:
        weights = abc_weights(model) if tid is TestId.T3A else l2_weights(model)
        return _mc_p_value(weighted_chisq_draws(weights, mc_draws, seed, threads), statistic)
    return max(p, _TINY)


@dataclass(frozen=True)
class NullDistributionSpec:
    """Everything that pins down the null law of one test."""

    test_id: TestId
    model: NullModel
    mc_draws: int = DEFAULT_MC_DRAWS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "test_id", TestId.parse(self.test_id))
        if self.test_id.is_monte_carlo:
            _check_draws(self.mc_draws)
        _rng.check_seed(self.seed)

    def quantile(self, level: float, threads: int = 1) -> QuantileResult:
        return critical_value(self.test_id, self.model, level, self.mc_draws, self.seed, threads)

    def p_value(self, statistic: float, threads: int = 1) -> float:
        return p_value(self.test_id, statistic, self.model, self.mc_draws, self.seed, threads)
