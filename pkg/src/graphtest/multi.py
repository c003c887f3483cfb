"""Two-sample tests for populations of m > 1 graphs.

Statistics
----------
``stat_chi2``  entrywise chi-square sum over vertex pairs
``stat_fro``   split-sample Frobenius cross product, normalized
``stat_spec``  spectral norm of the summed difference, normalized by the
               square root of the maximum summed degree

Tests
-----
``test_asymp_chi2``   chi-square(n(n-1)/2) reference law, for m >> n
``test_asymp_normal`` two-sided normal reference for ``stat_fro``
``test_boot``         label-permutation bootstrap for ``stat_spec`` or ``stat_fro``
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dist import chi2_sf, normal_quantile, normal_sf
from .graph import GraphPopulation, TestOutcome
from .linalg import spectral_norm
from .models import derive_rng


@dataclass(frozen=True)
class BootstrapConfig:
    b: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.b < 1:
            raise ValueError(f"bootstrap count must be at least 1, got {self.b}")


def check_populations(pop_g: GraphPopulation, pop_h: GraphPopulation, min_m: int = 2) -> int:
    """Validate a pair of populations; returns the common sample size."""
    if pop_g.n != pop_h.n:
        raise ValueError(f"populations live on different vertex counts: {pop_g.n} != {pop_h.n}")
    if pop_g.m != pop_h.m:
        raise ValueError(f"unequal population sizes are not supported: {pop_g.m} != {pop_h.m}")
    if pop_g.m < min_m:
        raise ValueError(f"this statistic needs at least {min_m} graphs per population, got {pop_g.m}")
    return pop_g.m


def _uppers(pop: GraphPopulation) -> np.ndarray:
    return np.stack([g.upper() for g in pop]).astype(np.int64)


def stat_chi2(pop_g: GraphPopulation, pop_h: GraphPopulation) -> tuple[float, int]:
    """Sum over pairs of squared mean difference over its estimated variance.

    Pairs where both the mean difference and the variance estimate vanish
    are skipped.  A pair with zero variance estimate but a nonzero mean
    difference makes the statistic ``inf``.  The returned degrees of
    freedom are always ``n(n-1)/2``.
    """
    m = check_populations(pop_g, pop_h)
    sg = _uppers(pop_g).sum(axis=0)
    sh = _uppers(pop_h).sum(axis=0)
    # for 0/1 data sum_k (a_k - mean)^2 = s (m - s) / m, so each term is
    # (m-1) (sg - sh)^2 / (sg (m - sg) + sh (m - sh))
    num = (m - 1) * (sg - sh) ** 2
    den = sg * (m - sg) + sh * (m - sh)
    dof = pop_g.n * (pop_g.n - 1) // 2
    if np.any((den == 0) & (num != 0)):
        return math.inf, dof
    keep = den != 0
    return float(np.sum(num[keep] / den[keep])), dof


def _fro_parts(dg: np.ndarray, dh: np.ndarray, half: int) -> tuple[int, int]:
    d1 = (dg[:half] - dh[:half]).sum(axis=0)
    d2 = (dg[half:] - dh[half:]).sum(axis=0)
    s1 = (dg[:half] + dh[:half]).sum(axis=0)
    s2 = (dg[half:] + dh[half:]).sum(axis=0)
    return int(d1 @ d2), int(s1 @ s2)


def _fro_value(num: float, den2: float) -> float:
    return 0.0 if den2 == 0 else num / math.sqrt(den2)


def stat_fro(pop_g: GraphPopulation, pop_h: GraphPopulation) -> float:
    """Cross product of the difference sums over the first ``m//2`` and the
    remaining graphs, over the square root of the same product of sums.

    Returns 0 when the denominator vanishes (no pair is an edge in both halves).
    """
    m = check_populations(pop_g, pop_h)
    num, den2 = _fro_parts(_uppers(pop_g), _uppers(pop_h), m // 2)
    return _fro_value(num, den2)


def _spec_denominator(stack_sum: np.ndarray) -> float:
    return math.sqrt(float(stack_sum.sum(axis=1).max(initial=0)))


def stat_spec(pop_g: GraphPopulation, pop_h: GraphPopulation) -> float:
    """Spectral norm of ``sum_k A_Gk - A_Hk`` over ``sqrt(max_i sum_j sum_k A_Gk + A_Hk)``.

    Returns 0 when neither population has an edge.
    """
    check_populations(pop_g, pop_h, min_m=1)
    g, h = pop_g.stack(), pop_h.stack()
    den = _spec_denominator((g + h).sum(axis=0))
    if den == 0.0:
        return 0.0
    return spectral_norm(g.sum(axis=0) - h.sum(axis=0)) / den


def test_asymp_chi2(pop_g: GraphPopulation, pop_h: GraphPopulation, alpha: float = 0.05) -> TestOutcome:
    t, dof = stat_chi2(pop_g, pop_h)
    return TestOutcome("asymp-chi2", t, chi2_sf(t, dof), alpha, {"dof": dof, "m": pop_g.m, "n": pop_g.n})


def test_asymp_normal(pop_g: GraphPopulation, pop_h: GraphPopulation, alpha: float = 0.05) -> TestOutcome:
    """Reject when ``|T_fro|`` exceeds the two-sided normal threshold."""
    m = check_populations(pop_g, pop_h)
    num, den2 = _fro_parts(_uppers(pop_g), _uppers(pop_h), m // 2)
    t = _fro_value(num, den2)
    p = min(1.0, 2.0 * normal_sf(abs(t)))
    return TestOutcome("asymp-normal", t, p, alpha, {
        "threshold": normal_quantile(1.0 - alpha / 2.0),
        "degenerate": den2 == 0,
        "m": m, "n": pop_g.n,
    })


def boot_pvalue(replicates, observed: float) -> float:
    """``(#{T_i >= T} + 0.5) / b``, capped at 1."""
    reps = np.asarray(replicates, dtype=float)
    return min(1.0, (np.count_nonzero(reps >= observed) + 0.5) / reps.size)


class _FroSplitter:
    """T_fro for any regrouping of the pooled graphs, from their Gram matrix."""

    def __init__(self, pooled: np.ndarray, m: int):
        u = pooled.astype(float)
        self.gram = u @ u.T
        self.m = m
        self.half = m // 2

    def __call__(self, order: np.ndarray) -> float:
        m, h = self.m, self.half
        c1 = np.zeros(2 * m)
        c2 = np.zeros(2 * m)
        c1[order[:h]] = 1.0
        c1[order[m:m + h]] = -1.0
        c2[order[h:m]] = 1.0
        c2[order[m + h:]] = -1.0
        num = c1 @ self.gram @ c2
        den2 = np.abs(c1) @ self.gram @ np.abs(c2)
        return _fro_value(round(num), round(den2))


class _SpecSplitter:
    """T_spec for any regrouping; the denominator is the same for every split,
    and the numerator depends only on the sign pattern up to a global flip."""

    def __init__(self, pooled: np.ndarray, m: int):
        self.pooled = pooled
        self.m = m
        self.den = _spec_denominator(pooled.sum(axis=0))
        self._cache: dict[bytes, float] = {}

    def __call__(self, order: np.ndarray) -> float:
        if self.den == 0.0:
            return 0.0
        signs = np.empty(2 * self.m, dtype=np.int64)
        signs[order[:self.m]] = 1
        signs[order[self.m:]] = -1
        if signs[0] < 0:
            signs = -signs
        key = signs.tobytes()
        if key not in self._cache:
            diff = np.tensordot(signs, self.pooled, axes=1)
            self._cache[key] = spectral_norm(diff) / self.den
        return self._cache[key]


def test_boot(pop_g: GraphPopulation, pop_h: GraphPopulation, which: str = "frobenius",
              alpha: float = 0.05, cfg: BootstrapConfig | None = None) -> TestOutcome:
    """Permutation bootstrap: pool the 2m graphs, regroup them uniformly at
    random ``b`` times into two populations of ``m`` and compare the observed
    statistic with the regrouped ones.

    Iteration ``i`` draws its permutation from the stream ``(seed, i)``.
    """
    cfg = cfg or BootstrapConfig()
    m = check_populations(pop_g, pop_h)
    if which == "frobenius":
        pooled = np.concatenate([_uppers(pop_g), _uppers(pop_h)])
        stat = _FroSplitter(pooled, m)
    elif which == "spectral":
        stat = _SpecSplitter(np.concatenate([pop_g.stack(), pop_h.stack()]), m)
    else:
        raise ValueError(f"unknown bootstrap statistic {which!r}; expected 'spectral' or 'frobenius'")
    observed = stat(np.arange(2 * m))
    reps = np.array([stat(derive_rng(cfg.seed, i).permutation(2 * m)) for i in range(cfg.b)])
    p = boot_pvalue(reps, observed)
    return TestOutcome(f"boot-{which}", observed, p, alpha, {
        "b": cfg.b, "seed": cfg.seed, "exceedances": int(np.count_nonzero(reps >= observed)),
        "m": m, "n": pop_g.n,
    })
