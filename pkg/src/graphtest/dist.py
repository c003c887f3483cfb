"""Normal, chi-squared and Tracy-Widom (beta = 1) distribution functions.

The Tracy-Widom CDF is read from a precomputed table (``data/tw1_table.csv``,
regenerated by ``scripts/make_tw1_table.py``) and interpolated with a
monotone cubic.  The table spans x in [-8, 4]; beyond the right end the CDF
saturates at F(4) ~= 0.99978, so the smallest two-sided p-value it can
produce is ``2 * (1 - F(4)) ~= 4.4e-4`` (-ln p ~= 7.727).
"""
from __future__ import annotations

import hashlib
import math
import os
import warnings
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import gammainc, gammaincc

TW1_TABLE_SHA256 = "c2f2b3444a0a7dff22a0eb0186ee57aa3b4ec09f05f756ae88c80695a47a914d"
TW1_TABLE_ENV = "GRAPHTEST_TW1_TABLE"


class TableChecksumError(RuntimeError):
    pass


class SaturationError(ValueError):
    """Probability outside the range representable by a tabulated CDF."""


_SQRT2 = math.sqrt(2.0)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_sf(x: float) -> float:
    """Upper tail ``1 - Phi(x)`` without cancellation."""
    return 0.5 * math.erfc(x / _SQRT2)


# Acklam's rational approximation to the normal quantile (rel. error ~1e-9)
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _acklam(q: float) -> float:
    if q < _P_LOW:
        t = math.sqrt(-2.0 * math.log(q))
        return (((((_C[0] * t + _C[1]) * t + _C[2]) * t + _C[3]) * t + _C[4]) * t + _C[5]) / \
               ((((_D[0] * t + _D[1]) * t + _D[2]) * t + _D[3]) * t + 1.0)
    if q > 1.0 - _P_LOW:
        t = math.sqrt(-2.0 * math.log1p(-q))
        return -(((((_C[0] * t + _C[1]) * t + _C[2]) * t + _C[3]) * t + _C[4]) * t + _C[5]) / \
                ((((_D[0] * t + _D[1]) * t + _D[2]) * t + _D[3]) * t + 1.0)
    u = q - 0.5
    t = u * u
    return (((((_A[0] * t + _A[1]) * t + _A[2]) * t + _A[3]) * t + _A[4]) * t + _A[5]) * u / \
           (((((_B[0] * t + _B[1]) * t + _B[2]) * t + _B[3]) * t + _B[4]) * t + 1.0)


def normal_quantile(q: float) -> float:
    """Inverse of :func:`normal_cdf` on (0, 1)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    if q > 0.5:
        # 1 - q is exact here, and the lower tail is refined without cancellation
        return -normal_quantile(1.0 - q)
    x = _acklam(q)
    # one Halley step
    err = normal_cdf(x) - q
    u = err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def chi2_cdf(x: float, dof: int) -> float:
    """Regularized lower incomplete gamma ``P(dof/2, x/2)``."""
    if dof < 1:
        raise ValueError(f"degrees of freedom must be positive, got {dof}")
    if x <= 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    return float(gammainc(0.5 * dof, 0.5 * x))


def chi2_sf(x: float, dof: int) -> float:
    """Upper tail ``1 - chi2_cdf(x, dof)`` computed directly."""
    if dof < 1:
        raise ValueError(f"degrees of freedom must be positive, got {dof}")
    if x <= 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return float(gammaincc(0.5 * dof, 0.5 * x))


@dataclass(frozen=True, eq=False)
class Tw1Table:
    x: np.ndarray
    F: np.ndarray
    sha256: str

    @property
    def x_min(self) -> float:
        return float(self.x[0])

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    @property
    def f_min(self) -> float:
        return float(self.F[0])

    @property
    def f_max(self) -> float:
        return float(self.F[-1])

    @property
    def min_two_sided_p(self) -> float:
        return 2.0 * (1.0 - self.f_max)


def _parse_table(raw: bytes, origin: str) -> Tw1Table:
    rows = raw.decode("utf-8").strip().splitlines()
    if not rows or rows[0].strip() != "x,F":
        raise ValueError(f"{origin}: expected header 'x,F'")
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    x, f = data[:, 0], data[:, 1]
    if np.any(np.diff(x) <= 0) or np.any(np.diff(f) <= 0):
        raise ValueError(f"{origin}: table must be strictly increasing in x and F")
    if f[0] <= 0.0 or f[-1] >= 1.0:
        raise ValueError(f"{origin}: CDF values must lie strictly inside (0, 1)")
    return Tw1Table(x, f, hashlib.sha256(raw).hexdigest())


@lru_cache(maxsize=None)
def _load(override: str | None) -> Tw1Table:
    if override:
        raw = Path(override).read_bytes()
        table = _parse_table(raw, override)
        if table.sha256 != TW1_TABLE_SHA256:
            warnings.warn(f"using non-default Tracy-Widom table {override} (sha256 {table.sha256[:12]}...)")
        return table
    raw = resources.files("graphtest").joinpath("data/tw1_table.csv").read_bytes()
    table = _parse_table(raw, "tw1_table.csv")
    if table.sha256 != TW1_TABLE_SHA256:
        raise TableChecksumError(f"tw1_table.csv checksum mismatch: {table.sha256}")
    return table


def tw1_table() -> Tw1Table:
    """The active table; ``$GRAPHTEST_TW1_TABLE`` may point to a replacement CSV."""
    return _load(os.environ.get(TW1_TABLE_ENV) or None)


@lru_cache(maxsize=4)
def _interp(table: Tw1Table) -> PchipInterpolator:
    return PchipInterpolator(table.x, table.F, extrapolate=False)


def tw1_cdf(x: float) -> float:
    """Tracy-Widom (GOE) CDF, clamped to the table's end values outside its range."""
    t = tw1_table()
    if x <= t.x_min:
        return t.f_min
    if x >= t.x_max:
        return t.f_max
    return float(_interp(t)(x))


def tw1_quantile(q: float) -> float:
    t = tw1_table()
    if not t.f_min <= q <= t.f_max:
        raise SaturationError(
            f"level {q} outside tabulated range [{t.f_min:.6g}, {t.f_max:.6g}]"
            + (f"; upper bound is F({t.x_max:g})" if q > t.f_max else f"; lower bound is F({t.x_min:g})"))
    k = int(np.searchsorted(t.F, q))
    if k < t.F.size and t.F[k] == q:
        return float(t.x[k])
    lo, hi = t.x[k - 1], t.x[k]
    f = _interp(t)
    return brentq(lambda s: float(f(s)) - q, lo, hi, xtol=1e-14, rtol=1e-15)
