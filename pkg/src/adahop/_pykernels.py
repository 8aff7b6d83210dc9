"""Pure-Python/numpy implementations of the hot per-node kernels.

Same contracts as the compiled ``_speedups`` module; used as the fallback
when the extension is not built. See ``adahop.kernels`` for the dispatch.
"""

from __future__ import annotations

import numpy as np

__all__ = ["all_distance_layers", "treated_counts", "overlap_counts"]


def all_distance_layers(indptr, indices, n, max_depth):
    """BFS distance layers for every node, flattened CSR-style.

    Returns ``(lay_indptr, lay_nodes, reach)`` where the nodes at distance
    exactly k (1 <= k <= max_depth) from ego i occupy
    ``lay_nodes[lay_indptr[i*max_depth + k - 1]:lay_indptr[i*max_depth + k]]``
    in ascending order, and ``reach[i]`` is the number of nonempty layers,
    i.e. min(eccentricity(i), max_depth).
    """
    adj = [indices[indptr[i]:indptr[i + 1]].tolist() for i in range(n)]
    lay_indptr = np.zeros(n * max_depth + 1, dtype=np.int64)
    chunks = []
    reach = np.zeros(n, dtype=np.int32)
    total = 0
    dist = np.full(n, -1, dtype=np.int32)
    for ego in range(n):
        dist[ego] = 0
        frontier = [ego]
        touched = [ego]
        depth = 0
        while frontier and depth < max_depth:
            depth += 1
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if dist[v] < 0:
                        dist[v] = depth
                        nxt.append(v)
            nxt.sort()
            if nxt:
                reach[ego] = depth
                chunks.append(np.asarray(nxt, dtype=np.int32))
                total += len(nxt)
            lay_indptr[ego * max_depth + depth] = total
            frontier = nxt
            touched.extend(nxt)
        for k in range(depth + 1, max_depth + 1):
            lay_indptr[ego * max_depth + k] = total
        for u in touched:
            dist[u] = -1
    lay_nodes = (
        np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int32)
    )
    return lay_indptr, lay_nodes, reach


def treated_counts(lay_indptr, lay_nodes, z, n, max_depth):
    """Per-layer treated counts: T[i, k-1] = #treated at distance exactly k."""
    if lay_nodes.size == 0:
        return np.zeros((n, max_depth), dtype=np.int32)
    gathered = np.asarray(z, dtype=np.int32)[lay_nodes]
    sums = np.add.reduceat(gathered, lay_indptr[:-1])
    # reduceat yields a[start] for empty segments; zero those out
    widths = np.diff(lay_indptr)
    sums[widths == 0] = 0
    return sums.astype(np.int32).reshape(n, max_depth)


def overlap_counts(lay_indptr, lay_nodes, depths, n, max_depth):
    """For each node, the number of egos whose depths[ego]-hop ball contains it.

    Every ego's ball contains the ego itself (depth 0).
    """
    parts = []
    for ego in range(n):
        start = lay_indptr[ego * max_depth]
        stop = lay_indptr[ego * max_depth + depths[ego]]
        if stop > start:
            parts.append(lay_nodes[start:stop])
    counts = np.ones(n, dtype=np.int64)
    if parts:
        counts += np.bincount(np.concatenate(parts), minlength=n)
    return counts
