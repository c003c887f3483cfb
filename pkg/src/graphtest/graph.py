"""Core value types: graphs on a shared vertex set, populations, probability
matrices, partitions and test outcomes, plus edge-list I/O.

Vertices are dense 0-based integers; "the same vertex" across graphs means
the same index.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


class GraphFormatError(ValueError):
    """Malformed edge-list, manifest or community file."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=8)
def triu_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major index arrays of the pairs ``i < j`` (cached, read-only)."""
    return tuple(_frozen(a) for a in np.triu_indices(n, 1))


class Graph:
    """Undirected simple graph stored as a dense 0/1 adjacency matrix.

    The dense view (``adj``, uint8) backs the O(n^2) kernels; ``edges`` is
    the sorted ``(k, 2)`` array of pairs ``i < j`` for O(|E|) traversal.
    Instances are immutable.
    """

    __slots__ = ("_adj", "_edges")

    def __init__(self, adj, *, validate: bool = True):
        a = np.array(adj, dtype=np.uint8, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"adjacency must be a non-empty square matrix, got shape {a.shape}")
        if validate:
            if a.max(initial=0) > 1:
                raise ValueError("adjacency entries must be 0 or 1")
            if np.any(np.diagonal(a)):
                raise ValueError("adjacency must have a zero diagonal")
            if not np.array_equal(a, a.T):
                raise ValueError("adjacency must be symmetric")
        self._adj = _frozen(a)
        self._edges = None

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        a = np.zeros((n, n), dtype=np.uint8)
        e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if e.size:
            if e.min() < 0 or e.max() >= n:
                raise ValueError(f"vertex id out of range [0, {n})")
            e = e[e[:, 0] != e[:, 1]]
            a[e[:, 0], e[:, 1]] = 1
            a[e[:, 1], e[:, 0]] = 1
        return cls(a, validate=False)

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(np.zeros((n, n), dtype=np.uint8), validate=False)

    @classmethod
    def complete(cls, n: int) -> "Graph":
        a = np.ones((n, n), dtype=np.uint8)
        np.fill_diagonal(a, 0)
        return cls(a, validate=False)

    @property
    def n(self) -> int:
        return self._adj.shape[0]

    @property
    def adj(self) -> np.ndarray:
        return self._adj

    @property
    def edges(self) -> np.ndarray:
        if self._edges is None:
            i, j = np.nonzero(np.triu(self._adj, 1))
            self._edges = _frozen(np.column_stack([i, j]).astype(np.int64))
        return self._edges

    @property
    def num_edges(self) -> int:
        return int(self._adj.sum(dtype=np.int64)) // 2

    def upper(self) -> np.ndarray:
        """Entries above the diagonal in row-major order."""
        return self._adj[triu_pairs(self.n)]

    def permute(self, perm: Sequence[int]) -> "Graph":
        """Relabel so that new vertex ``v`` is old vertex ``perm[v]``."""
        p = np.asarray(perm)
        return Graph(self._adj[np.ix_(p, p)], validate=False)

    def __eq__(self, other):
        return isinstance(other, Graph) and np.array_equal(self._adj, other._adj)

    def __hash__(self):
        return hash((self.n, self._adj.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.num_edges})"


class GraphPopulation(Sequence):
    """Ordered list of graphs on one vertex set."""

    def __init__(self, graphs: Iterable[Graph]):
        graphs = tuple(graphs)
        if not graphs:
            raise ValueError("a population needs at least one graph")
        n = graphs[0].n
        if any(g.n != n for g in graphs):
            raise ValueError("all graphs in a population must have the same vertex count")
        self._graphs = graphs

    @property
    def n(self) -> int:
        return self._graphs[0].n

    @property
    def m(self) -> int:
        return len(self._graphs)

    def stack(self, dtype=np.int64) -> np.ndarray:
        """``(m, n, n)`` array of adjacency matrices."""
        return np.stack([g.adj for g in self._graphs]).astype(dtype, copy=False)

    def __getitem__(self, k):
        return self._graphs[k]

    def __len__(self):
        return len(self._graphs)

    def __repr__(self):
        return f"GraphPopulation(n={self.n}, m={self.m})"


class PopulationAdjacency:
    """Edge-probability matrix of an inhomogeneous Erdos-Renyi model."""

    __slots__ = ("_p",)

    def __init__(self, p, *, atol: float = 0.0):
        p = np.array(p, dtype=float, copy=True)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"probability matrix must be square, got shape {p.shape}")
        if np.any(np.isnan(p)) or p.min(initial=0.0) < 0.0 or p.max(initial=0.0) > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        if np.any(np.diagonal(p) != 0.0):
            raise ValueError("probability matrix must have a zero diagonal")
        if not np.allclose(p, p.T, rtol=0.0, atol=atol):
            raise ValueError("probability matrix must be symmetric")
        self._p = _frozen(p)

    @property
    def n(self) -> int:
        return self._p.shape[0]

    @property
    def p(self) -> np.ndarray:
        return self._p

    def __repr__(self):
        return f"PopulationAdjacency(n={self.n})"


class CommunityPartition:
    """Assignment of each vertex to one of ``r`` nonempty blocks."""

    __slots__ = ("_labels", "_r")

    def __init__(self, labels, r: int | None = None):
        lab = np.array(labels, dtype=np.int64, copy=True).ravel()
        if lab.size == 0:
            raise ValueError("partition must cover at least one vertex")
        if lab.min() < 0:
            raise ValueError("block labels must be nonnegative")
        if r is None:
            r = int(lab.max()) + 1
        if lab.max() >= r:
            raise ValueError(f"label {lab.max()} not below block count {r}")
        sizes = np.bincount(lab, minlength=r)
        if np.any(sizes == 0):
            raise ValueError(f"empty blocks: {np.flatnonzero(sizes == 0).tolist()}")
        self._labels = _frozen(lab)
        self._r = int(r)

    @classmethod
    def compact(cls, labels) -> "CommunityPartition":
        """Relabel arbitrary integer ids to 0..r-1 in increasing id order."""
        _, inv = np.unique(np.asarray(labels), return_inverse=True)
        return cls(inv.ravel())

    @property
    def n(self) -> int:
        return self._labels.size

    @property
    def r(self) -> int:
        return self._r

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    def sizes(self) -> np.ndarray:
        return np.bincount(self._labels, minlength=self._r)

    def blocks(self) -> list[np.ndarray]:
        return [np.flatnonzero(self._labels == k) for k in range(self._r)]

    def permute(self, perm: Sequence[int]) -> "CommunityPartition":
        return CommunityPartition(self._labels[np.asarray(perm)], self._r)

    def __eq__(self, other):
        return (isinstance(other, CommunityPartition) and self._r == other._r
                and np.array_equal(self._labels, other._labels))

    def __repr__(self):
        return f"CommunityPartition(n={self.n}, r={self.r})"


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, np.generic):
        return _json_safe(v.item())
    if isinstance(v, dict):
        return {str(k): _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


@dataclass(frozen=True)
class TestOutcome:
    """Result of one two-sample test.

    ``reject`` is always ``p_value <= alpha``.  Non-finite floats are
    serialized as the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
    """

    __test__ = False  # not a pytest class

    test_name: str
    statistic: float
    p_value: float
    alpha: float
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value must lie in [0, 1], got {self.p_value}")

    @property
    def reject(self) -> bool:
        return self.p_value <= self.alpha

    @property
    def neglog_p(self) -> float:
        return math.inf if self.p_value == 0.0 else -math.log(self.p_value)

    def to_dict(self) -> dict[str, Any]:
        return _json_safe({
            "test": self.test_name,
            "statistic": float(self.statistic),
            "p_value": float(self.p_value),
            "neglog_p": self.neglog_p,
            "reject": self.reject,
            "alpha": self.alpha,
            "details": dict(self.details),
        })

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _parse_pairs(lines: Iterable[str], source: str):
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise GraphFormatError(f"{source}:{lineno}: expected two vertex ids, got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"{source}:{lineno}: non-integer vertex id in {line!r}") from None
        yield lineno, u, v


def load_edge_list(path, n: int, *, return_loops: bool = False):
    """Read a whitespace-separated ``u v`` edge list into a :class:`Graph`.

    Lines starting with ``#`` are comments.  Duplicates and reversed pairs
    collapse into one undirected edge.  Self-loops are dropped and counted;
    a warning is emitted when any are found.

    Raises
    ------
    GraphFormatError
        A line does not hold two integers.
    IndexError
        A vertex id is outside ``[0, n)``.
    """
    path = Path(path)
    us, vs = [], []
    loops = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, u, v in _parse_pairs(fh, str(path)):
            if not (0 <= u < n and 0 <= v < n):
                raise IndexError(f"{path}:{lineno}: vertex id out of range [0, {n}): {u} {v}")
            if u == v:
                loops += 1
                continue
            us.append(u)
            vs.append(v)
    if loops:
        warnings.warn(f"{path}: dropped {loops} self-loop(s)", stacklevel=2)
    g = Graph.from_edges(n, zip(us, vs))
    return (g, loops) if return_loops else g


def save_edge_list(g: Graph, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"# n={g.n} edges={g.num_edges}\n")
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")


def load_population(manifest) -> GraphPopulation:
    """Load ``{"n": int, "graphs": [paths...]}``; paths are relative to the manifest."""
    manifest = Path(manifest)
    try:
        spec = json.loads(manifest.read_text(encoding="utf-8"))
        n = int(spec["n"])
        paths = list(spec["graphs"])
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFormatError(f"{manifest}: invalid population manifest ({exc})") from None
    base = manifest.parent
    return GraphPopulation(load_edge_list(base / p, n) for p in paths)


def save_population(pop: GraphPopulation, manifest, stem: str = "graph") -> None:
    manifest = Path(manifest)
    names = []
    for k, g in enumerate(pop):
        name = f"{stem}_{k:03d}.txt"
        save_edge_list(g, manifest.parent / name)
        names.append(name)
    manifest.write_text(json.dumps({"n": pop.n, "graphs": names}, indent=2) + "\n", encoding="utf-8")


def symmetric_difference_count(g: Graph, h: Graph) -> int:
    """Number of vertex pairs ``i < j`` that are an edge in exactly one graph."""
    if g.n != h.n:
        raise ValueError(f"vertex counts differ: {g.n} != {h.n}")
    return int(np.count_nonzero(g.adj != h.adj)) // 2
