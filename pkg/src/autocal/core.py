"""Empirical statistics for auto-calibration of finite-valued predictors.

Everything here works on per-observation scale: the sqrt(n) and n factors
that put statistics on their limiting scale are applied in
:mod:`autocal.testing`.

Level sums use :func:`math.fsum`, so the algebraic identities between the
statistics (balance, prefix/suffix duality, the two forms of the ABC
statistic) hold to a few ulps.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from itertools import chain
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateLevel,
    EmptyLevel,
    LevelUnderpopulated,
    UnknownLevel,
    ValidationError,
    ZeroMean,
)

PROB_TOL = 1e-12


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValidationError(f"{name}[{bad}] is not finite: {arr[bad]!r}")
    arr.setflags(write=False)
    return arr


class Observation(NamedTuple):
    response: float
    prediction: float


@dataclass(frozen=True, eq=False)
class Sample:
    """Paired positive responses ``y`` and finite predictions ``pi``."""

    y: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        y = _frozen_array(self.y, "response")
        pi = _frozen_array(self.pi, "prediction")
        if y.shape != pi.shape:
            raise ValidationError(
                f"responses and predictions differ in length ({y.size} vs {pi.size})"
            )
        if y.size == 0:
            raise ValidationError("sample is empty")
        nonpos = np.flatnonzero(y <= 0.0)
        if nonpos.size:
            i = int(nonpos[0])
            raise ValidationError(f"response[{i}] = {y[i]!r} is not positive")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "pi", pi)

    @classmethod
    def from_observations(cls, observations: Iterable[Observation]) -> "Sample":
        obs = list(observations)
        return cls([o[0] for o in obs], [o[1] for o in obs])

    @property
    def n(self) -> int:
        return int(self.y.size)

    def __len__(self) -> int:
        return self.n

    def __iter__(self):
        for yi, pii in zip(self.y.tolist(), self.pi.tolist()):
            yield Observation(yi, pii)

    def with_predictions(self, predictions) -> "Sample":
        return Sample(self.y, predictions)


@dataclass(frozen=True)
class LevelPartition:
    """Strictly increasing prediction levels pi_1 < ... < pi_K."""

    levels: tuple

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        if not levels:
            raise ValidationError("a partition needs at least one level")
        if not all(math.isfinite(v) for v in levels):
            raise ValidationError("partition levels must be finite")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValidationError(f"partition levels must be strictly increasing: {levels}")
        object.__setattr__(self, "levels", levels)

    @property
    def K(self) -> int:
        return len(self.levels)

    def index(self, predictions) -> np.ndarray:
        """Level index of each prediction; raises UnknownLevel on any mismatch."""
        pred = np.asarray(predictions, dtype=np.float64)
        lv = np.asarray(self.levels)
        idx = np.searchsorted(lv, pred)
        safe = np.minimum(idx, lv.size - 1)
        bad = np.flatnonzero(lv[safe] != pred)
        if bad.size:
            i = int(bad[0])
            value = float(pred[i])
            # rows are 1-based, as in ParseError
            raise UnknownLevel(
                f"prediction {value!r} at row {i + 1} matches no partition level",
                row=i + 1,
                value=value,
            )
        return safe


@dataclass(frozen=True)
class NullModel:
    """Level probabilities and conditional response variances.

    ``cum_probs`` has K + 1 entries, starting with alpha_0 = 0.
    """

    partition: LevelPartition
    probs: tuple
    variances: tuple
    cum_probs: tuple = field(init=False, repr=False)

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        variances = tuple(float(v) for v in self.variances)
        K = self.partition.K
        if len(probs) != K or len(variances) != K:
            raise ValidationError(
                f"model has {K} levels but {len(probs)} probabilities and {len(variances)} variances"
            )
        for k, p in enumerate(probs):
            if not (math.isfinite(p) and p > 0.0):
                raise ValidationError(f"probability of level {k + 1} must be positive, got {p!r}")
        for k, v in enumerate(variances):
            if not (math.isfinite(v) and v >= 0.0):
                raise ValidationError(f"variance of level {k + 1} must be nonnegative, got {v!r}")
        total = math.fsum(probs)
        if abs(total - 1.0) > PROB_TOL:
            raise ValidationError(f"probabilities sum to {total!r}, not 1")
        cum = [0.0]
        for k in range(1, K + 1):
            cum.append(math.fsum(probs[:k]))
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "cum_probs", tuple(cum))

    @classmethod
    def from_arrays(cls, levels, probs, variances) -> "NullModel":
        return cls(LevelPartition(tuple(levels)), tuple(probs), tuple(variances))

    @property
    def K(self) -> int:
        return self.partition.K

    @property
    def levels(self) -> tuple:
        return self.partition.levels

    @property
    def step_variances(self) -> np.ndarray:
        """p_k * tau_k^2, the variance of each random-walk step."""
        return np.asarray(self.probs) * np.asarray(self.variances)

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "probs": list(self.probs),
            "variances": list(self.variances),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NullModel":
        missing = [key for key in ("levels", "probs", "variances") if key not in data]
        if missing:
            raise ValidationError(f"model is missing {', '.join(missing)}")
        return cls.from_arrays(data["levels"], data["probs"], data["variances"])

    def digest(self) -> str:
        blob = json.dumps(
            [[float(v).hex() for v in part] for part in (self.levels, self.probs, self.variances)]
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class IncrementVector:
    values: tuple
    counts: tuple
    n: int

    @property
    def K(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


@dataclass(frozen=True)
class CurveStats:
    t: tuple
    t_mirrored: tuple
    u: tuple | None
    abc_unscaled: float | None
    response_mean: float
    prediction_mean: float


def _groups(idx: np.ndarray, K: int) -> list[np.ndarray]:
    order = np.argsort(idx, kind="stable")
    counts = np.bincount(idx, minlength=K)
    return np.split(order, np.cumsum(counts)[:-1])


def _check_K(inc: IncrementVector, model: NullModel) -> None:
    if inc.K != model.K:
        raise ValidationError(f"increments have {inc.K} levels, model has {model.K}")


def _check_nondegenerate(model: NullModel) -> np.ndarray:
    sv = model.step_variances
    zero = np.flatnonzero(sv <= 0.0)
    if zero.size:
        k = int(zero[0])
        raise DegenerateLevel(
            f"level {k + 1} (pi = {model.levels[k]!r}) has p_k * tau_k^2 = 0", level=k + 1
        )
    return sv


def build_partition(sample: Sample) -> tuple[LevelPartition, tuple]:
    levels, counts = np.unique(sample.pi, return_counts=True)
    return LevelPartition(tuple(levels.tolist())), tuple(int(c) for c in counts)


def estimate_null_model(reference: Sample, partition: LevelPartition | None = None) -> NullModel:
    """Empirical level frequencies and unbiased within-level variances."""
    if partition is None:
        partition, _ = build_partition(reference)
    idx = partition.index(reference.pi)
    n = reference.n
    probs, variances = [], []
    for k, members in enumerate(_groups(idx, partition.K)):
        nk = members.size
        if nk < 2:
            raise LevelUnderpopulated(
                f"level {k + 1} (pi = {partition.levels[k]!r}) has {nk} reference "
                "observation(s); at least 2 are needed",
                level=k + 1,
                count=nk,
            )
        yk = reference.y[members]
        mean = math.fsum(yk) / nk
        variances.append(math.fsum((yk - mean) ** 2) / (nk - 1))
        probs.append(nk / n)
    return NullModel(partition, tuple(probs), tuple(variances))


def increments(sample: Sample, partition: LevelPartition) -> IncrementVector:
    """Per-level average prediction error S_n^(k)."""
    idx = partition.index(sample.pi)
    n = sample.n
    values, counts = [], []
    for members in _groups(idx, partition.K):
        # exact sum of y_i - pi_i, rounded once
        total = math.fsum(chain(sample.y[members].tolist(), (-sample.pi[members]).tolist()))
        values.append(total / n)
        counts.append(int(members.size))
    return IncrementVector(tuple(values), tuple(counts), n)


def normalized_increments(inc: IncrementVector, model: NullModel) -> tuple:
    """S_n^(k) / (sqrt(p_k) tau_k), without the sqrt(n) factor."""
    _check_K(inc, model)
    sv = _check_nondegenerate(model)
    return tuple(s / math.sqrt(v) for s, v in zip(inc.values, sv.tolist()))


def prefix_sums(values: Sequence[float]) -> tuple:
    return tuple(math.fsum(values[: k + 1]) for k in range(len(values)))


def suffix_sums(values: Sequence[float]) -> tuple:
    return tuple(math.fsum(values[k:]) for k in range(len(values)))


def curve_stats(inc: IncrementVector, sample: Sample, model: NullModel) -> CurveStats:
    _check_K(inc, model)
    t = prefix_sums(inc.values)
    t_mirrored = suffix_sums(inc.values)
    n = sample.n
    y_sum = math.fsum(sample.y.tolist())
    pi_sum = math.fsum(sample.pi.tolist())
    y_bar, pi_bar = y_sum / n, pi_sum / n
    if not y_bar > 0.0 or pi_bar == 0.0:
        partial = CurveStats(t, t_mirrored, None, None, y_bar, pi_bar)
        raise ZeroMean(
            f"U statistics need a positive response mean and nonzero prediction mean "
            f"(got {y_bar!r}, {pi_bar!r})",
            partial=partial,
        )
    groups = _groups(model.partition.index(sample.pi), model.K)
    y_lvl = [math.fsum(sample.y[g].tolist()) for g in groups]
    pi_lvl = [math.fsum(sample.pi[g].tolist()) for g in groups]
    cum_y, cum_pi = prefix_sums(y_lvl), prefix_sums(pi_lvl)
    # both concentration and Lorenz ordinates reach exactly 1 at the top level
    u = tuple(cy / cum_y[-1] - cp / cum_pi[-1] for cy, cp in zip(cum_y, cum_pi))
    alpha = model.cum_probs
    abc = math.fsum((1.0 - alpha[k + 1]) * inc.values[k] for k in range(model.K - 1))
    return CurveStats(t, t_mirrored, u, abc, y_bar, pi_bar)


def abc_from_walk(t: Sequence[float], model: NullModel) -> float:
    """The ABC statistic in its integrated-random-walk form, sum p_{k+1} T_k."""
    return math.fsum(model.probs[k + 1] * t[k] for k in range(model.K - 1))


def v2_weighted(inc: IncrementVector, model: NullModel) -> float:
    """Sum of (1 - alpha_{k-1}) (S_n^(k))^2."""
    _check_K(inc, model)
    alpha = model.cum_probs
    return math.fsum((1.0 - alpha[k]) * s * s for k, s in enumerate(inc.values))


def v2_unweighted(inc: IncrementVector) -> float:
    return math.fsum(s * s for s in inc.values)


def chi2_statistic(inc: IncrementVector, model: NullModel, n: int) -> float:
    _check_K(inc, model)
    sv = _check_nondegenerate(model)
    return n * math.fsum(s * s / v for s, v in zip(inc.values, sv.tolist()))


def bin_by_quantiles(sample: Sample, K: int) -> tuple[Sample, LevelPartition]:
    """Discretize predictions into at most K empirical-quantile bins.

    Bin j collects predictions in (b_{j-1}, b_j], where b_j is the
    nearest-rank quantile of order j/K.  Coinciding boundaries merge, empty
    bins are dropped, and each prediction is replaced by its bin's mean.
    """
    if isinstance(K, bool) or int(K) != K or K < 1:
        raise ValidationError(f"number of bins must be a positive integer, got {K!r}")
    K = int(K)
    n = sample.n
    if n < K:
        raise ValidationError(f"cannot form {K} bins from {n} observations")
    sorted_pi = np.sort(sample.pi)
    ranks = [-(-j * n // K) for j in range(1, K)]  # ceil(j n / K), 1-based
    bounds = np.unique(sorted_pi[np.asarray(ranks, dtype=np.intp) - 1]) if ranks else np.empty(0)
    bin_of = np.searchsorted(bounds, sample.pi, side="left")
    used = np.unique(bin_of)
    relabel = np.searchsorted(used, bin_of)
    means = [math.fsum(sample.pi[relabel == j].tolist()) / int(np.sum(relabel == j))
             for j in range(used.size)]
    partition = LevelPartition(tuple(means))
    discretized = np.asarray(means)[relabel]
    return sample.with_predictions(discretized), partition


def lift_points(sample: Sample, partition: LevelPartition) -> list[tuple[float, float]]:
    """(pi_k, mean response at level k) for every level."""
    groups = _groups(partition.index(sample.pi), partition.K)
    points = []
    for k, members in enumerate(groups):
        if members.size == 0:
            raise EmptyLevel(
                f"level {k + 1} (pi = {partition.levels[k]!r}) has no observations",
                level=k + 1,
            )
        points.append((partition.levels[k], math.fsum(sample.y[members].tolist()) / members.size))
    return points
