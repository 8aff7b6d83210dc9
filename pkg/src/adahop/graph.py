"""Undirected simple graphs: construction, distance layers, generators.

Nodes are dense integers ``0..n-1``. Graphs are immutable after
construction, so they can be shared freely between workers; the distance
layers computed for a given depth are cached on the instance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .rng import stream

__all__ = [
    "Graph",
    "DistanceLayers",
    "load_graph",
    "bfs_layers",
    "generate_lattice",
    "generate_erdos_renyi",
]


@dataclass(frozen=True)
class DistanceLayers:
    """Flattened per-node BFS layers up to ``max_depth``.

    ``reach[i]`` is the number of nonempty layers of node i, i.e.
    min(eccentricity(i), max_depth); layers past it are empty.
    """

    max_depth: int
    indptr: np.ndarray
    nodes: np.ndarray
    reach: np.ndarray

    def layer(self, ego: int, depth: int) -> np.ndarray:
        """Nodes at distance exactly ``depth`` from ``ego`` (sorted)."""
        base = ego * self.max_depth
        return self.nodes[self.indptr[base + depth - 1]:self.indptr[base + depth]]

    def ball_slice(self, ego: int, depth: int) -> np.ndarray:
        """All nodes at distance 1..depth from ``ego`` (ego excluded)."""
        base = ego * self.max_depth
        return self.nodes[self.indptr[base]:self.indptr[base + depth]]


class Graph:
    """Immutable undirected simple graph stored as sorted CSR adjacency."""

    __slots__ = ("n", "indptr", "indices", "_layer_cache")

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray):
        # assumes a validated, symmetrized, deduplicated, sorted CSR
        self.n = int(n)
        self.indptr = indptr
        self.indices = indices
        self._layer_cache: dict[int, DistanceLayers] = {}

    def __getstate__(self):
        # the layer cache can be large and is cheap to rebuild
        return (self.n, self.indptr, self.indices)

    def __setstate__(self, state):
        self.n, self.indptr, self.indices = state
        self._layer_cache = {}

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.num_edges})"

    @property
    def num_edges(self) -> int:
        return int(self.indices.size) // 2

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degree(self, i: int) -> int:
        return int(self.indptr[i + 1] - self.indptr[i])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edge_list(self) -> list[tuple[int, int]]:
        """Canonical (u < v) edge list, sorted."""
        out = []
        for u in range(self.n):
            for v in self.neighbors(u):
                if u < v:
                    out.append((u, int(v)))
        return out

    def distance_layers(self, max_depth: int) -> DistanceLayers:
        """BFS layers for every node up to ``max_depth`` (cached)."""
        if max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        got = self._layer_cache.get(max_depth)
        if got is None:
            if max_depth == 0:
                got = DistanceLayers(
                    0,
                    np.zeros(1, dtype=np.int64),
                    np.empty(0, dtype=np.int32),
                    np.zeros(self.n, dtype=np.int32),
                )
            else:
                indptr, nodes, reach = kernels.all_distance_layers(
                    self.indptr, self.indices, self.n, max_depth
                )
                got = DistanceLayers(max_depth, indptr, nodes, reach)
            self._layer_cache[max_depth] = got
        return got

    def effective_depth_cap(self, cap: int = 10) -> int:
        """min(diameter, cap): the deepest informative layer depth."""
        reach = self.distance_layers(cap).reach
        return int(reach.max()) if self.n else 0


def load_graph(edges, n: int) -> Graph:
    """Build a graph from an iterable of (u, v) pairs.

    Edges are deduplicated and symmetrized; neighbor lists come out sorted.
    Out-of-range ids and self-loops are rejected.
    """
    n = int(n)
    if n < 0:
        raise ValueError("n must be >= 0")
    us, vs = [], []
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u},{v}) out of range for n={n}")
        if u == v:
            raise ValueError(f"self-loop at node {u} not allowed")
        us.append(u)
        vs.append(v)
    if us:
        a = np.array(us + vs, dtype=np.int64)
        b = np.array(vs + us, dtype=np.int64)
        codes = np.unique(a * n + b)
        src = (codes // n).astype(np.int64)
        dst = (codes % n).astype(np.int32)
    else:
        src = np.empty(0, dtype=np.int64)
        dst = np.empty(0, dtype=np.int32)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return Graph(n, indptr, dst)


def bfs_layers(g: Graph, ego: int, max_depth: int) -> list[np.ndarray]:
    """Exact-distance layers L_1..L_max_depth from ``ego``.

    Always returns ``max_depth`` arrays; layers beyond the eccentricity of
    ``ego`` are empty. The ego itself appears in no layer.
    """
    if not 0 <= ego < g.n:
        raise ValueError(f"ego {ego} out of range")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    layers: list[np.ndarray] = []
    seen = {ego}
    frontier = [ego]
    for _ in range(max_depth):
        nxt = set()
        for u in frontier:
            for v in g.neighbors(u):
                v = int(v)
                if v not in seen:
                    nxt.add(v)
        seen |= nxt
        frontier = sorted(nxt)
        layers.append(np.array(frontier, dtype=np.int64))
    return layers


def generate_lattice(rows: int, cols: int, torus: bool = False) -> Graph:
    """Two-dimensional 4-neighbor grid, optionally with wraparound.

    On a torus every node has degree 4 except where wraparound edges
    coincide (a 2x2 torus collapses to degree 2: the graph stays simple).
    """
    if rows < 2 or cols < 2:
        raise ValueError("rows and cols must be >= 2")
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1))
            elif torus:
                edges.append((i, r * cols))
            if r + 1 < rows:
                edges.append((i, i + cols))
            elif torus:
                edges.append((i, c))
    return load_graph(edges, rows * cols)


def generate_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """G(n, p) with one uniform variate per unordered pair.

    Pair (u, v), u < v, reads position ``u*n - u*(u+1)/2 + (v - u - 1)`` of
    the (seed, "er-graph") stream, so the edge set is reproducible and
    independent of iteration or worker order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    n_pairs = n * (n - 1) // 2
    if n_pairs == 0 or p == 0.0:
        return load_graph([], n)
    u = stream(seed, "er-graph").random(n_pairs)
    iu, iv = np.triu_indices(n, k=1)
    keep = u < p
    return load_graph(zip(iu[keep].tolist(), iv[keep].tolist()), n)
