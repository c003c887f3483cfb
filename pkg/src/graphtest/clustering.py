"""Normalized spectral clustering of the averaged adjacency, and community
file I/O."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import CommunityPartition, Graph, GraphFormatError
from .linalg import truncated_svd
from .models import derive_rng

DEGREE_FLOOR = 1e-9


@dataclass(frozen=True)
class ClusteringConfig:
    r: int
    kmeans_restarts: int = 20
    kmeans_iters: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"number of blocks must be at least 1, got {self.r}")
        if self.kmeans_restarts < 1 or self.kmeans_iters < 1:
            raise ValueError("k-means needs at least one restart and one iteration")


def _sq_dist(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] - 2.0 * x @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = _sq_dist(x, centers[0][None, :])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(x[idx])
        d2 = np.minimum(d2, _sq_dist(x, x[idx][None, :])[:, 0])
    return np.array(centers)


def _repair_empty(x, labels, dist, k):
    # move the point farthest from its center in the largest cluster into each empty one
    for c in range(k):
        counts = np.bincount(labels, minlength=k)
        if counts[c]:
            continue
        big = int(np.argmax(counts))
        members = np.flatnonzero(labels == big)
        far = members[np.argmax(dist[members, big])]
        labels[far] = c
    return labels


def _lloyd(x: np.ndarray, k: int, iters: int, rng: np.random.Generator):
    centers = _kmeanspp(x, k, rng)
    labels = None
    for _ in range(iters):
        dist = _sq_dist(x, centers)
        new = _repair_empty(x, np.argmin(dist, axis=1), dist, k)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.array([x[labels == c].mean(axis=0) for c in range(k)])
    inertia = float(_sq_dist(x, centers)[np.arange(x.shape[0]), labels].sum())
    return labels, inertia


def kmeans(x, k: int, *, restarts: int = 20, iters: int = 100, seed: int = 0) -> tuple[np.ndarray, float]:
    """Best-of-``restarts`` Lloyd k-means with k-means++ seeding.

    Restart ``i`` uses the random stream ``(seed, i)``; ties in the objective
    go to the lowest restart index.  Every returned cluster is nonempty
    provided ``len(x) >= k``.
    """
    x = np.asarray(x, dtype=float)
    if not 1 <= k <= x.shape[0]:
        raise ValueError(f"k must lie in [1, {x.shape[0]}], got {k}")
    best = None
    for i in range(restarts):
        labels, inertia = _lloyd(x, k, iters, derive_rng(seed, i))
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    return best


def _merge_singletons(x: np.ndarray, labels: np.ndarray) -> np.ndarray:
    # a one-vertex block has no within-block pairs; move it to the nearest other centroid
    labels = labels.copy()
    while True:
        counts = np.bincount(labels)
        live = np.flatnonzero(counts)
        single = [c for c in live if counts[c] == 1]
        if not single or live.size <= 1:
            return labels
        c = single[0]
        v = int(np.flatnonzero(labels == c)[0])
        others = [k for k in live if k != c]
        centers = np.array([x[labels == k].mean(axis=0) for k in others])
        labels[v] = others[int(np.argmin(_sq_dist(x[v][None, :], centers)[0]))]


def spectral_embedding(g: Graph, h: Graph, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalized top-``r`` left singular vectors of ``D^-1/2 M D^-1/2``,
    ``M`` the mean adjacency.  Also returns the mask of isolated vertices."""
    if g.n != h.n:
        raise ValueError(f"vertex counts differ: {g.n} != {h.n}")
    m = (g.adj.astype(float) + h.adj) / 2.0
    deg = m.sum(axis=1)
    isolated = deg == 0
    s = 1.0 / np.sqrt(np.maximum(deg, DEGREE_FLOOR))
    u = truncated_svd(m * s[:, None] * s[None, :], r).u
    norms = np.linalg.norm(u, axis=1)
    nz = norms > 0
    u[nz] /= norms[nz, None]
    return u, isolated


def spectral_partition(g: Graph, h: Graph, cfg: ClusteringConfig) -> CommunityPartition:
    """Partition the common vertex set into at most ``cfg.r`` blocks.

    Isolated vertices of the averaged graph carry no spectral information;
    they are clustered out and then put into the largest block.  A block
    left with a single vertex is merged into the nearest other block, so
    fewer than ``cfg.r`` blocks may be returned.
    """
    n = g.n
    if cfg.r > n:
        raise ValueError(f"cannot form {cfg.r} blocks from {n} vertices")
    if cfg.r == 1:
        return CommunityPartition(np.zeros(n, dtype=np.int64), 1)
    u, isolated = spectral_embedding(g, h, cfg.r)
    active = np.flatnonzero(~isolated)
    labels = np.zeros(n, dtype=np.int64)
    if active.size:
        k = min(cfg.r, active.size)
        lab, _ = kmeans(u[active], k, restarts=cfg.kmeans_restarts, iters=cfg.kmeans_iters, seed=cfg.seed)
        lab = _merge_singletons(u[active], lab)
        labels[active] = lab
        labels[isolated] = np.argmax(np.bincount(lab, minlength=k))
    return CommunityPartition.compact(labels)


def load_partition(path, n: int) -> CommunityPartition:
    """Read one integer block id per line (line i is vertex i); ids are
    compacted to 0..r-1 preserving their order."""
    path = Path(path)
    ids = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            ids.append(int(line))
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: expected an integer block id, got {line!r}") from None
    if len(ids) != n:
        raise GraphFormatError(f"{path}: expected {n} block ids, found {len(ids)}")
    return CommunityPartition.compact(ids)


def save_partition(part: CommunityPartition, path) -> None:
    Path(path).write_text("".join(f"{k}\n" for k in part.labels), encoding="utf-8")
