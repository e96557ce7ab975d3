"""Normal and chi-square distribution kernels.

The normal CDF is evaluated through ``math.erfc`` with reflection so that
both tails keep full relative precision.  The normal quantile starts from
Acklam's rational approximation and is polished by Halley steps against that
CDF.  The chi-square quantile inverts the regularized incomplete gamma
function (taken from :mod:`scipy.special`) by safeguarded Newton iteration.
"""

from __future__ import annotations

import math

from scipy import special as _sp

from .errors import DomainError

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)

# Acklam (2003) coefficients for the lower-tail inverse normal.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549671010228830e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_cdf(x: float) -> float:
    """Standard normal distribution function."""
    x = float(x)
    if math.isnan(x):
        raise DomainError("normal_cdf argument is NaN")
    if x < 0.0:
        return 0.5 * math.erfc(-x / _SQRT2)
    return 1.0 - 0.5 * math.erfc(x / _SQRT2)


def normal_sf(x: float) -> float:
    """Upper tail ``1 - Phi(x)`` without cancellation for large ``x``."""
    return normal_cdf(-x)


def two_sided_mass(x: float) -> float:
    """``P(|N(0,1)| <= x) = 2 Phi(x) - 1`` for ``x >= 0``."""
    if x <= 0.0:
        return 0.0
    return math.erf(x / _SQRT2)


def two_sided_tail(x: float) -> float:
    """``P(|N(0,1)| > x) = 2 (1 - Phi(x))`` for ``x >= 0``."""
    if x <= 0.0:
        return 1.0
    return math.erfc(x / _SQRT2)


def _acklam_lower(p: float) -> float:
    # valid for 0 < p <= 0.5
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        return num / den
    q = p - 0.5
    r = q * q
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    return num / den


def _lower_quantile(p: float) -> float:
    x = _acklam_lower(p)
    for _ in range(3):
        err = 0.5 * math.erfc(-x / _SQRT2) - p
        u = err * _SQRT2PI * math.exp(0.5 * x * x)
        step = u / (1.0 + 0.5 * x * u)
        x -= step
        if abs(step) <= 1e-16 * max(1.0, abs(x)):
            break
    return x


def normal_quantile(p: float) -> float:
    """Inverse of :func:`normal_cdf` on the open unit interval."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"normal_quantile requires 0 < p < 1, got {p!r}")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return _lower_quantile(p)
    # 1 - p is exact for p in [0.5, 1)
    return -_lower_quantile(1.0 - p)


def chi2_cdf(x: float, dof: float) -> float:
    if x <= 0.0:
        return 0.0
    return float(_sp.gammainc(0.5 * dof, 0.5 * x))


def chi2_sf(x: float, dof: float) -> float:
    if x <= 0.0:
        return 1.0
    return float(_sp.gammaincc(0.5 * dof, 0.5 * x))


def _chi2_logpdf(x: float, dof: float) -> float:
    a = 0.5 * dof
    return (a - 1.0) * math.log(x) - 0.5 * x - a * math.log(2.0) - math.lgamma(a)


def chi2_quantile(dof: int, p: float) -> float:
    """Quantile of the chi-square law with ``dof`` degrees of freedom.

    Newton steps on the incomplete-gamma equation, falling back to
    bisection whenever a step leaves the current bracket.  The upper tail
    is matched through ``gammaincc`` when ``p > 0.5``.
    """
    if isinstance(dof, bool) or int(dof) != dof or dof < 1:
        raise DomainError(f"chi2_quantile requires an integer dof >= 1, got {dof!r}")
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"chi2_quantile requires 0 < p < 1, got {p!r}")
    dof = int(dof)
    upper = p > 0.5
    target = 1.0 - p if upper else p

    def resid(x):
        # increasing in x in both branches
        if upper:
            return target - chi2_sf(x, dof)
        return chi2_cdf(x, dof) - target

    # Wilson-Hilferty start
    z = normal_quantile(p)
    h = 2.0 / (9.0 * dof)
    x = dof * max(1.0 - h + z * math.sqrt(h), 0.05) ** 3
    lo, hi = 0.0, max(x, 1.0)
    while resid(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
    if not lo < x < hi:
        x = 0.5 * (lo + hi)
    for _ in range(200):
        f = resid(x)
        if f == 0.0:
            return x
        if f < 0.0:
            lo = x
        else:
            hi = x
        dens = math.exp(_chi2_logpdf(x, dof)) if x > 0.0 else 0.0
        nxt = x - f / dens if dens > 0.0 else 0.5 * (lo + hi)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= 1e-15 * x or hi - lo <= 1e-15 * hi:
            return nxt
        x = nxt
    return x
