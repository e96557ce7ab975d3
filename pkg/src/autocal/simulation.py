"""Gamma-model replication harness and power study.

Responses at level pi_k are Gamma(shape = rate * pi_k, rate), so the
conditional mean is pi_k and the conditional variance pi_k / rate.  The
reference example uses rate 3.  (It is sometimes described with a "scale"
of 3; only the rate reading reproduces mean pi_k and variance pi_k / 3.)

Replication r always draws from the stream ``(seed, 0, r)``, which makes
every summary independent of the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import core
from . import rng as _rng
from .asymptotics import DEFAULT_MC_DRAWS, MIN_MC_DRAWS, TestId
from .core import LevelPartition, NullModel, Sample
from .errors import ValidationError
from .testing import ALL_TESTS, MCConfig, batch_statistics, null_quantiles

GAMMA_METHOD = "marsaglia-tsang-2000"

_NS_REPLICATION = 0
_NS_REFERENCE = 2

TABLE1_LEVELS = (10.0, 11.0, 12.0, 13.0, 14.0, 15.0)
TABLE1_PROBS = (0.10, 0.15, 0.25, 0.25, 0.15, 0.10)
TABLE1_RATE = 3.0


# -- gamma sampling -------------------------------------------------------

def standard_gamma(shape, rng: np.random.Generator) -> np.ndarray:
    """Unit-rate gamma variates by Marsaglia-Tsang squeeze/rejection.

    Shapes below 1 are boosted: G(a) = G(a + 1) * U**(1/a).
    """
    shape = np.asarray(shape, dtype=np.float64)
    flat = shape.reshape(-1)
    if np.any(~(flat > 0.0)):
        raise ValidationError("gamma shape must be positive")
    small = flat < 1.0
    a = np.where(small, flat + 1.0, flat)
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty_like(a)
    pending = np.arange(a.size)
    while pending.size:
        dp, cp = d[pending], c[pending]
        x = rng.standard_normal(pending.size)
        v = 1.0 + cp * x
        v = v * v * v
        u = rng.random(pending.size)
        pos = v > 0.0
        x2 = x * x
        log_v = np.log(np.where(pos, v, 1.0))
        accept = pos & ((u < 1.0 - 0.0331 * x2 * x2)
                        | (np.log(u) < 0.5 * x2 + dp * (1.0 - v + log_v)))
        out[pending[accept]] = dp[accept] * v[accept]
        pending = pending[~accept]
    if np.any(small):
        idx = np.flatnonzero(small)
        out[idx] *= rng.random(idx.size) ** (1.0 / flat[idx])
    return out.reshape(shape.shape)


def sample_gamma(shape: float, rate: float, rng: np.random.Generator) -> float:
    """One Gamma(shape, rate) draw (mean shape / rate)."""
    if not (shape > 0.0 and rate > 0.0):
        raise ValidationError(f"gamma needs positive shape and rate, got {shape!r}, {rate!r}")
    return float(standard_gamma(np.array([shape]), rng)[0] / rate)


# -- model and contamination ----------------------------------------------

@dataclass(frozen=True)
class GammaLevelModel:
    levels: tuple
    probs: tuple
    rate: float = TABLE1_RATE

    def __post_init__(self):
        partition = LevelPartition(tuple(self.levels))
        if partition.levels[0] <= 0.0:
            raise ValidationError("gamma levels must be positive")
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise ValidationError(f"rate must be positive, got {self.rate!r}")
        object.__setattr__(self, "levels", partition.levels)
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        object.__setattr__(self, "rate", float(self.rate))
        self.null_model()  # validates probabilities

    @classmethod
    def table1(cls) -> "GammaLevelModel":
        return cls(TABLE1_LEVELS, TABLE1_PROBS, TABLE1_RATE)

    @property
    def K(self) -> int:
        return len(self.levels)

    @property
    def shapes(self) -> np.ndarray:
        return self.rate * np.asarray(self.levels)

    @property
    def variances(self) -> tuple:
        return tuple(lv / self.rate for lv in self.levels)

    def null_model(self) -> NullModel:
        return NullModel.from_arrays(self.levels, self.probs, self.variances)

    def to_dict(self) -> dict:
        return {"levels": list(self.levels), "probs": list(self.probs), "rate": self.rate,
                "family": "gamma", "sampler": GAMMA_METHOD}


@dataclass(frozen=True)
class Contamination:
    kind: str = "none"  # none | global | local
    delta: float = 0.0
    level: int | None = None  # 1-based, local only

    def __post_init__(self):
        if self.kind not in ("none", "global", "local"):
            raise ValidationError(f"unknown contamination kind {self.kind!r}")
        if not (self.delta >= 0.0 and math.isfinite(self.delta)):
            raise ValidationError(f"contamination delta must be >= 0, got {self.delta!r}")
        if self.kind == "local" and (self.level is None or self.level < 1):
            raise ValidationError("local contamination needs a level index >= 1")

    @classmethod
    def global_shift(cls, delta: float) -> "Contamination":
        return cls("global", delta)

    @classmethod
    def local_shift(cls, level: int, delta: float) -> "Contamination":
        return cls("local", delta, level)

    def mask(self, K: int) -> np.ndarray:
        """1 on the levels whose responses are shifted."""
        if self.kind == "none":
            return np.zeros(K)
        if self.kind == "global":
            return np.ones(K)
        if self.level > K:
            raise ValidationError(f"contaminated level {self.level} exceeds K = {K}")
        m = np.zeros(K)
        m[self.level - 1] = 1.0
        return m

    def shifts(self, K: int) -> np.ndarray:
        return self.delta * self.mask(K)


# -- sampling -------------------------------------------------------------

def _draw(model: GammaLevelModel, n: int, rng: np.random.Generator):
    interior = np.asarray(model.null_model().cum_probs[1:-1])
    idx = np.searchsorted(interior, rng.random(n), side="right")
    y = standard_gamma(model.shapes[idx], rng) / model.rate
    return idx, y


def simulate_sample(model: GammaLevelModel, n: int,
                    contamination: Contamination = Contamination(), seed: int = 0) -> Sample:
    """Replication 0 of ``seed``: levels from p_k, gamma responses, then the shift."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    idx, y = _draw(model, n, _rng.stream(seed, _NS_REPLICATION, 0))
    y = y + contamination.shifts(model.K)[idx]
    return Sample(y, np.asarray(model.levels)[idx])


@dataclass
class _Batch:
    S: np.ndarray  # (reps, K) increments, uncontaminated
    counts: np.ndarray  # (reps, K)
    resid_sum: np.ndarray  # (reps, K) sum of y - pi_k
    resid_sq: np.ndarray  # (reps, K) sum of (y - pi_k)^2


def _replicate(model: GammaLevelModel, n: int, reps: int, seed: int, threads: int = 1,
               namespace: int = _NS_REPLICATION) -> _Batch:
    K = model.K
    levels = np.asarray(model.levels)
    batch = _Batch(*(np.empty((reps, K)) for _ in range(4)))

    def run(block):
        for r in block:
            idx, y = _draw(model, n, _rng.stream(seed, namespace, r))
            resid = y - levels[idx]
            batch.counts[r] = np.bincount(idx, minlength=K)
            batch.resid_sum[r] = np.bincount(idx, weights=resid, minlength=K)
            batch.resid_sq[r] = np.bincount(idx, weights=resid * resid, minlength=K)
        return None

    blocks = np.array_split(np.arange(reps), max(1, threads))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, blocks))
    else:
        run(blocks[0])
    batch.S = batch.resid_sum / n
    return batch


def _check_reps(reps: int, minimum: int) -> int:
    if isinstance(reps, bool) or int(reps) != reps or reps < minimum:
        raise ValidationError(f"reps must be an integer >= {minimum}, got {reps!r}")
    return int(reps)


# -- replication summary --------------------------------------------------

@dataclass
class ReplicationSummary:
    reps: int
    n: int
    seed: int
    mean_S: np.ndarray  # of sqrt(n) S
    mean_T: np.ndarray  # of sqrt(n) T
    cov_S: np.ndarray
    cov_T: np.ndarray
    level_counts: np.ndarray  # pooled over replications
    level_means: np.ndarray
    level_variances: np.ndarray
    rejections: dict = field(default_factory=dict)  # TestId -> count
    critical_values: dict = field(default_factory=dict)
    alpha: float | None = None
    mc_draws: int | None = None
    histograms: dict = field(default_factory=dict)  # name -> (edges, counts)


def histogram(values: np.ndarray, bin_width: float) -> tuple[np.ndarray, np.ndarray]:
    """Raw counts on a grid of multiples of ``bin_width`` covering the data."""
    if not bin_width > 0.0:
        raise ValidationError(f"bin width must be positive, got {bin_width!r}")
    values = np.asarray(values, dtype=np.float64)
    lo = math.floor(values.min() / bin_width)
    hi = max(math.ceil(values.max() / bin_width), lo + 1)
    edges = np.arange(lo, hi + 1) * bin_width
    counts, _ = np.histogram(values, bins=edges)
    return edges, counts


def replicate_stats(model: GammaLevelModel, n: int, reps: int, seed: int, *,
                    threads: int = 1, alpha: float | None = 0.05,
                    mc_draws: int = DEFAULT_MC_DRAWS,
                    bin_width: float | None = None) -> ReplicationSummary:
    """Repeat the uncontaminated experiment ``reps`` times.

    With ``alpha`` set, each replication is also tested against the null
    model's critical values and the rejections are counted per test.
    """
    reps = _check_reps(reps, 2)
    if n < 1:
        raise ValidationError("n must be at least 1")
    batch = _replicate(model, n, reps, seed, threads)
    root_n = math.sqrt(n)
    S = root_n * batch.S
    T = np.cumsum(S, axis=1)
    N = batch.counts.sum(axis=0)
    rsum = batch.resid_sum.sum(axis=0)
    rsq = batch.resid_sq.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.asarray(model.levels) + rsum / N
        variances = (rsq - rsum * rsum / N) / (N - 1)
    summary = ReplicationSummary(
        reps=reps, n=n, seed=seed,
        mean_S=S.mean(axis=0), mean_T=T.mean(axis=0),
        cov_S=np.atleast_2d(np.cov(S, rowvar=False)),
        cov_T=np.atleast_2d(np.cov(T, rowvar=False)),
        level_counts=N.astype(np.int64), level_means=means, level_variances=variances,
    )
    null = model.null_model()
    stats = batch_statistics(batch.S, null, n)
    if alpha is not None:
        crit = null_quantiles(null, alpha, MCConfig(mc_draws, seed, threads))
        summary.alpha = alpha
        summary.mc_draws = mc_draws
        summary.critical_values = {t: q.critical_value for t, q in crit.items()}
        summary.rejections = {t: int(np.sum(stats[t] > crit[t].critical_value)) for t in ALL_TESTS}
    if bin_width is not None:
        norm = S / np.sqrt(null.step_variances)
        for k in range(model.K):
            summary.histograms[f"S_norm_{k + 1}"] = histogram(norm[:, k], bin_width)
            summary.histograms[f"T_{k + 1}"] = histogram(T[:, k], bin_width)
        summary.histograms["nV2"] = histogram(stats[TestId.T3A], bin_width)
    return summary


# -- power ----------------------------------------------------------------

@dataclass(frozen=True)
class PowerCurve:
    test_id: TestId
    deltas: tuple
    rates: tuple
    rejections: tuple
    reps: int
    kind: str
    contaminated_level: int | None
    critical_value: float | None  # None when re-estimated per replication

    def rate_at(self, delta: float) -> float:
        return self.rates[self.deltas.index(delta)]


def default_grid() -> tuple:
    return tuple(j / 20 for j in range(21))


def _check_grid(grid) -> tuple:
    grid = tuple(float(d) for d in grid)
    if not grid:
        raise ValidationError("contamination grid is empty")
    if any(not (d >= 0.0 and math.isfinite(d)) for d in grid):
        raise ValidationError("contamination grid values must be finite and >= 0")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError("contamination grid must be strictly increasing")
    return grid


def power_study(model: GammaLevelModel, n: int, reps: int, grid=None,
                contamination_kind: str = "global", level_index: int | None = None,
                alpha: float = 0.05, seed: int = 0, *, mc_draws: int = DEFAULT_MC_DRAWS,
                threads: int = 1, estimate_model: bool = False,
                refit_mc_draws: int = MIN_MC_DRAWS) -> list[PowerCurve]:
    """Empirical rejection rate of every test over a grid of shifts.

    The uncontaminated samples are drawn once; a shift delta adds
    ``delta * n_k / n`` to the affected increments, which is exactly what
    shifting the responses does.  Critical values come from the true null
    model unless ``estimate_model`` is set, in which case each replication
    estimates (p_k, tau_k^2) from its own independent reference sample of
    size ``n`` and recomputes every critical value with ``refit_mc_draws``
    Monte Carlo draws.
    """
    reps = _check_reps(reps, 100)
    grid = _check_grid(default_grid() if grid is None else grid)
    if contamination_kind not in ("global", "local"):
        raise ValidationError("power study contamination must be 'global' or 'local'")
    mask = Contamination(contamination_kind, 0.0, level_index).mask(model.K)
    batch = _replicate(model, n, reps, seed, threads)
    deltas = np.asarray(grid)
    G, K = deltas.size, model.K
    # (reps, G, K) contaminated increments
    S = batch.S[:, None, :] + deltas[None, :, None] * (batch.counts / n)[:, None, :] * mask
    rejections = {t: np.zeros(G, dtype=np.int64) for t in ALL_TESTS}
    crit_values = {t: None for t in ALL_TESTS}
    null = model.null_model()
    if not estimate_model:
        crit = null_quantiles(null, alpha, MCConfig(mc_draws, seed, threads))
        stats = batch_statistics(S.reshape(reps * G, K), null, n)
        for t in ALL_TESTS:
            crit_values[t] = crit[t].critical_value
            rejections[t] = np.sum((stats[t] > crit_values[t]).reshape(reps, G), axis=0)
    else:
        partition = null.partition
        for r in range(reps):
            idx, y = _draw(model, n, _rng.stream(seed, _NS_REFERENCE, r))
            ref = Sample(y, np.asarray(model.levels)[idx])
            est = core.estimate_null_model(ref, partition)
            crit = null_quantiles(est, alpha, MCConfig(refit_mc_draws, _rng.derive_seed(seed, 3, r)))
            stats = batch_statistics(S[r], est, n)
            for t in ALL_TESTS:
                rejections[t] += stats[t] > crit[t].critical_value
    level = level_index if contamination_kind == "local" else None
    return [
        PowerCurve(t, grid, tuple((rejections[t] / reps).tolist()),
                   tuple(int(c) for c in rejections[t]), reps, contamination_kind, level,
                   crit_values[t])
        for t in ALL_TESTS
    ]
