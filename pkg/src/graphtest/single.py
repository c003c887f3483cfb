"""Two-sample tests for a single pair of graphs (m = 1).

Low-rank bootstrap tests compare the adjacency spectral embeddings
(``stat_ase``) or the rank-r probability estimates (``stat_epa``) of the two
graphs against replicates drawn from each graph's own estimate.

The Tracy-Widom test normalizes the entrywise difference of the adjacency
matrices by block-model estimates of the edge variances and compares the
scaled spectral norm with the GOE edge law.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ClusteringConfig, spectral_partition
from .dist import SaturationError, tw1_cdf, tw1_quantile, tw1_table
from .graph import CommunityPartition, Graph, TestOutcome
from .linalg import extreme_eigenvalues, procrustes_distance, spectral_norm, truncated_svd
from .models import derive_rng, sample_ier
from .multi import BootstrapConfig, boot_pvalue

MIN_TW_VERTICES = 20


def _check_pair(g: Graph, h: Graph) -> int:
    if g.n != h.n:
        raise ValueError(f"vertex counts differ: {g.n} != {h.n}")
    return g.n


@dataclass(frozen=True)
class AseEmbedding:
    x: np.ndarray
    sigma: np.ndarray

    @property
    def r(self) -> int:
        return self.x.shape[1]


def ase(g: Graph, r: int) -> AseEmbedding:
    """Adjacency spectral embedding ``U diag(sqrt(sigma))`` of rank ``r``."""
    svd = truncated_svd(g.adj, r)
    return AseEmbedding(svd.u * np.sqrt(svd.sigma)[None, :], svd.sigma)


def epa(g: Graph, r: int) -> np.ndarray:
    """Rank-``r`` estimate ``X X^T`` of the edge-probability matrix.

    Entries are not clipped and may leave [0, 1].
    """
    x = ase(g, r).x
    return x @ x.T


def stat_ase(g: Graph, h: Graph, r: int) -> float:
    _check_pair(g, h)
    return procrustes_distance(ase(g, r).x, ase(h, r).x)


def stat_epa(g: Graph, h: Graph, r: int) -> float:
    _check_pair(g, h)
    return float(np.linalg.norm(epa(g, r) - epa(h, r)))


_SINGLE_STATS = {"ase": stat_ase, "epa": stat_epa}


def test_boot_single(g: Graph, h: Graph, which: str = "epa", r: int = 2, alpha: float = 0.05,
                     cfg: BootstrapConfig | None = None) -> TestOutcome:
    """Low-rank bootstrap.

    For each of the two estimates (side 0 from ``g``, side 1 from ``h``)
    draw ``b`` independent graph pairs from the estimate clipped to [0, 1]
    and compute the statistic on each pair.  The p-value is the larger of
    the two continuity-corrected exceedance fractions.  Pair ``i`` of side
    ``s`` uses the random stream ``(seed, s, i)``.
    """
    cfg = cfg or BootstrapConfig()
    _check_pair(g, h)
    try:
        stat = _SINGLE_STATS[which]
    except KeyError:
        raise ValueError(f"unknown statistic {which!r}; expected 'ase' or 'epa'") from None
    observed = stat(g, h, r)
    sides = []
    for s, src in enumerate((g, h)):
        probs = np.clip(epa(src, r), 0.0, 1.0)
        reps = []
        for i in range(cfg.b):
            rng = derive_rng(cfg.seed, s, i)
            reps.append(stat(sample_ier(probs, rng), sample_ier(probs, rng), r))
        sides.append(boot_pvalue(reps, observed))
    return TestOutcome(f"boot-{which}", observed, max(sides), alpha, {
        "b": cfg.b, "seed": cfg.seed, "r": r, "p_g": sides[0], "p_h": sides[1], "n": g.n,
    })


@dataclass(frozen=True)
class BlockApproxPair:
    """Block-constant estimates of both edge-probability matrices.

    ``block_g``/``block_h`` are the r x r block means; ``p_tilde``/``q_tilde``
    expand them to n x n (diagonal included).  ``singletons`` lists blocks of
    size one, whose within-block mean is undefined and set to 0.
    """

    p_tilde: np.ndarray
    q_tilde: np.ndarray
    block_g: np.ndarray
    block_h: np.ndarray
    partition: CommunityPartition
    singletons: tuple[int, ...]


def _block_means(a: np.ndarray, z: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    sums = z.T @ a @ z
    pairs = np.outer(sizes, sizes).astype(float)
    # within a block: ordered pairs i != j, each unordered edge counted twice
    np.fill_diagonal(pairs, sizes * (sizes - 1.0))
    out = np.zeros_like(sums)
    np.divide(sums, pairs, out=out, where=pairs > 0)
    return out


def block_approx(g: Graph, h: Graph, partition: CommunityPartition) -> BlockApproxPair:
    n = _check_pair(g, h)
    if partition.n != n:
        raise ValueError(f"partition covers {partition.n} vertices, graphs have {n}")
    lab = partition.labels
    z = np.zeros((n, partition.r))
    z[np.arange(n), lab] = 1.0
    sizes = partition.sizes()
    bg = _block_means(g.adj.astype(float), z, sizes)
    bh = _block_means(h.adj.astype(float), z, sizes)
    idx = np.ix_(lab, lab)
    return BlockApproxPair(bg[idx], bh[idx], bg, bh, partition,
                           tuple(int(k) for k in np.flatnonzero(sizes == 1)))


def normalized_difference(g: Graph, h: Graph, p, q) -> tuple[np.ndarray, int]:
    """``(A_G - A_H) / sqrt((n-1)(p(1-p) + q(1-q)))`` with zero diagonal.

    Entries whose variance term is zero are set to 0.  The second return
    value counts pairs ``i < j`` among those where the adjacency differs
    (the 0/0 case is not counted).
    """
    n = _check_pair(g, h)
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    var = (n - 1) * (p * (1.0 - p) + q * (1.0 - q))
    diff = g.adj.astype(float) - h.adj
    c = np.zeros((n, n))
    ok = var > 0
    np.divide(diff, np.sqrt(np.where(ok, var, 1.0)), out=c, where=ok)
    np.fill_diagonal(c, 0.0)
    flagged = int(np.count_nonzero(~ok & (diff != 0))) // 2
    return c, flagged


def _scale(n: int, value: float) -> float:
    return n ** (2.0 / 3.0) * (value - 2.0)


def stat_tw(g: Graph, h: Graph, approx: BlockApproxPair) -> float:
    """``n^(2/3) (||C~||_2 - 2)`` for the block-normalized difference ``C~``."""
    c, _ = normalized_difference(g, h, approx.p_tilde, approx.q_tilde)
    return _scale(g.n, spectral_norm(c))


def tw_edge_statistics(g: Graph, h: Graph, p, q) -> tuple[float, float]:
    """``n^(2/3)(lambda_1(C) - 2)`` and ``n^(2/3)(-lambda_n(C) - 2)`` for the
    difference matrix normalized by the given (e.g. true) probabilities."""
    c, _ = normalized_difference(g, h, p, q)
    e = extreme_eigenvalues(c)
    return _scale(g.n, e.lambda_max), _scale(g.n, -e.lambda_min)


def test_asymp_tw(g: Graph, h: Graph, r: int | CommunityPartition = 2, alpha: float = 0.05, *,
                  seed: int = 0, kmeans_restarts: int = 20, min_n: int = MIN_TW_VERTICES) -> TestOutcome:
    """Tracy-Widom test on a block-model normalization.

    ``r`` is either the number of blocks for spectral clustering of the
    averaged graph or a ready partition.  The p-value ``2 (1 - F_TW1(T))``
    bottoms out at the table's saturation floor (see :mod:`graphtest.dist`).
    """
    n = _check_pair(g, h)
    if n < min_n:
        raise ValueError(f"Tracy-Widom test needs at least {min_n} vertices, got {n}")
    if isinstance(r, CommunityPartition):
        partition, source = r, "external"
    else:
        partition = spectral_partition(g, h, ClusteringConfig(int(r), kmeans_restarts=kmeans_restarts, seed=seed))
        source = "spectral"
    approx = block_approx(g, h, partition)
    c, flagged = normalized_difference(g, h, approx.p_tilde, approx.q_tilde)
    t = _scale(n, spectral_norm(c))
    table = tw1_table()
    p = min(1.0, 2.0 * (1.0 - tw1_cdf(t)))
    try:
        threshold = tw1_quantile(1.0 - alpha / 2.0)
    except SaturationError:
        threshold = None
    return TestOutcome("asymp-tw", t, p, alpha, {
        "r": partition.r, "partition": source, "seed": seed, "n": n,
        "threshold": threshold,
        "p_floor": table.min_two_sided_p,
        "saturated": t >= table.x_max,
        "zero_variance_entries": flagged,
        "singleton_blocks": list(approx.singletons),
    })
