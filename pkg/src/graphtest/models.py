"""Random graph models and perturbation operators.

Randomness comes from numpy's PCG64 generator.  A seed is a 64-bit
unsigned integer; independent streams are derived by hashing the seed
together with integer keys through :class:`numpy.random.SeedSequence`
(``derive_rng(seed, cell, trial)``), so a Monte-Carlo trial draws the same
numbers no matter which worker runs it or in what order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .graph import Graph, GraphPopulation, PopulationAdjacency, triu_pairs

SeedLike = Union[int, np.random.Generator, None]

_SEED_MASK = (1 << 64) - 1


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, *keys)``."""
    entropy = [int(seed) & _SEED_MASK] + [int(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return derive_rng(0 if seed is None else seed)


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 64-bit seed from ``rng`` for handing to a sub-computation."""
    return int(rng.integers(0, 1 << 63))


@dataclass(frozen=True)
class SbmSpec:
    """Stochastic block model: consecutive blocks of the given sizes with
    block-pair edge probabilities ``B``."""

    block_sizes: tuple[int, ...]
    B: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        b = np.asarray(self.B, dtype=float)
        if not sizes or min(sizes) < 1:
            raise ValueError("block sizes must be positive")
        if b.shape != (len(sizes), len(sizes)):
            raise ValueError(f"B must be {len(sizes)}x{len(sizes)}, got {b.shape}")
        if not np.array_equal(b, b.T):
            raise ValueError("B must be symmetric")
        if b.min() < 0.0 or b.max() > 1.0:
            raise ValueError("B entries must lie in [0, 1]")
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "B", tuple(tuple(float(x) for x in row) for row in b))

    @classmethod
    def two_block(cls, n: int, p: float, q: float, eps: float = 0.0, rho: float = 1.0) -> "SbmSpec":
        """Two blocks of sizes ``n//2`` and ``n - n//2``: within probability
        ``rho*(p+eps)``, across ``rho*q``."""
        w, a = rho * (p + eps), rho * q
        return cls((n // 2, n - n // 2), ((w, a), (a, w)))

    @classmethod
    def erdos_renyi(cls, n: int, p: float) -> "SbmSpec":
        return cls((n,), ((p,),))

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    @property
    def r(self) -> int:
        return len(self.block_sizes)

    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.r), self.block_sizes)

    def to_json(self) -> str:
        return json.dumps({"block_sizes": list(self.block_sizes), "B": [list(r) for r in self.B]})

    @classmethod
    def from_json(cls, text: str) -> "SbmSpec":
        d = json.loads(text)
        return cls(tuple(d["block_sizes"]), tuple(tuple(r) for r in d["B"]))


def sbm_population_adjacency(spec: SbmSpec) -> PopulationAdjacency:
    lab = spec.labels()
    p = np.asarray(spec.B)[np.ix_(lab, lab)]
    np.fill_diagonal(p, 0.0)
    return PopulationAdjacency(p)


def scale_density(p: PopulationAdjacency, rho: float, *, return_clamped: bool = False):
    """Multiply every edge probability by ``rho``, clamping at 1."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    scaled = p.p * rho
    clamped = int(np.count_nonzero(scaled > 1.0)) // 2
    out = PopulationAdjacency(np.minimum(scaled, 1.0))
    return (out, clamped) if return_clamped else out


def _bernoulli_upper(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Symmetric 0/1 matrix with independent Bernoulli(probs[i, j]) above the diagonal."""
    n = probs.shape[0]
    iu = triu_pairs(n)
    draws = rng.random(iu[0].size) < probs[iu]
    a = np.zeros((n, n), dtype=np.uint8)
    a[iu] = draws
    a |= a.T
    return a


def sample_ier(p: PopulationAdjacency | np.ndarray, seed: SeedLike = None) -> Graph:
    """Draw one graph from the inhomogeneous Erdos-Renyi model ``p``.

    Entries of a raw array are clipped to [0, 1] before sampling, which lets
    callers pass unconstrained estimates such as a low-rank ``XX^T``.
    """
    rng = as_rng(seed)
    probs = p.p if isinstance(p, PopulationAdjacency) else np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    return Graph(_bernoulli_upper(probs, rng), validate=False)


def sample_population(p, m: int, seed: SeedLike = None) -> GraphPopulation:
    rng = as_rng(seed)
    return GraphPopulation(sample_ier(p, rng) for _ in range(m))


def plant_er_subgraph(g: Graph, k: int, p_er: float, seed: SeedLike = None,
                      *, return_vertices: bool = False):
    """Replace the subgraph on ``k`` uniformly chosen vertices by a fresh
    Erdos-Renyi(``p_er``) graph; all other pairs are left untouched."""
    if not 1 <= k <= g.n:
        raise ValueError(f"k must lie in [1, {g.n}], got {k}")
    if not 0.0 <= p_er <= 1.0:
        raise ValueError(f"p_er must lie in [0, 1], got {p_er}")
    rng = as_rng(seed)
    verts = np.sort(rng.choice(g.n, size=k, replace=False))
    a = g.adj.copy()
    a[np.ix_(verts, verts)] = _bernoulli_upper(np.full((k, k), p_er), rng)
    out = Graph(a, validate=False)
    return (out, verts) if return_vertices else out


def _pair_from_index(idx: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    # row-major enumeration of pairs i < j
    i = (n - 2 - np.floor(np.sqrt(-8.0 * idx + 4.0 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
    j = idx + i + 1 - n * (n - 1) // 2 + (n - i) * ((n - i) - 1) // 2
    return i, j.astype(np.int64)


def toggle_edges(g: Graph, count: int, seed: SeedLike = None, *, return_pairs: bool = False):
    """Flip the adjacency of ``count`` distinct uniformly chosen vertex pairs."""
    total = g.n * (g.n - 1) // 2
    if not 0 <= count <= total:
        raise ValueError(f"count must lie in [0, {total}], got {count}")
    rng = as_rng(seed)
    idx = np.sort(rng.choice(total, size=count, replace=False)) if count else np.zeros(0, np.int64)
    i, j = _pair_from_index(idx, g.n)
    a = g.adj.copy()
    a[i, j] ^= 1
    a[j, i] ^= 1
    out = Graph(a, validate=False)
    return (out, np.column_stack([i, j])) if return_pairs else out


def flip_pairs(g: Graph, pairs: Sequence[tuple[int, int]]) -> Graph:
    pr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    a = g.adj.copy()
    a[pr[:, 0], pr[:, 1]] ^= 1
    a[pr[:, 1], pr[:, 0]] ^= 1
    return Graph(a, validate=False)
