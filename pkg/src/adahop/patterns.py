"""Treated-count pattern keys and the pattern trees built from them.

A pattern key is the sequence of treated counts per distance layer around
an ego, ``(t_1, ..., t_m)``; the empty tuple is the root and matches every
node. Keys of a node at increasing depths are nested by prefix, so the set
of observed keys forms a tree. ``PatternIndex`` stores, for every key, the
control nodes and all nodes whose signature matches it, plus cached control
outcome sums.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .graph import Graph, bfs_layers

__all__ = [
    "ROOT",
    "PatternKey",
    "parent",
    "descends_from",
    "signature",
    "PatternEntry",
    "PatternIndex",
    "build_pattern_index",
    "build_synthetic_pattern_set",
    "build_decoupled_index",
]

PatternKey = tuple
ROOT: PatternKey = ()


def parent(key: PatternKey) -> PatternKey:
    """Drop the deepest layer count. The root has no parent."""
    if not key:
        raise ValueError("root pattern has no parent")
    return key[:-1]


def descends_from(key: PatternKey, ancestor: PatternKey) -> bool:
    """Prefix test; every key descends from itself and from the root."""
    return key[: len(ancestor)] == ancestor


def signature(g: Graph, z, ego: int, depth: int) -> PatternKey:
    """Treated counts of ego's layers 1..depth.

    The ego's own label never contributes (it sits in no layer). Layers
    past the ego's eccentricity count zero; note that the pattern *trees*
    stop at the eccentricity instead of padding (see build_pattern_index).
    """
    z = np.asarray(z)
    return tuple(int(z[lay].sum()) for lay in bfs_layers(g, ego, depth))


class PatternEntry:
    """Membership sets and cached control-outcome sum for one key."""

    __slots__ = ("counts", "controls", "members", "control_sum")

    def __init__(self, counts: PatternKey):
        self.counts = counts
        self.controls: list[int] = []
        self.members: list[int] = []
        self.control_sum = 0.0

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    @property
    def n_members(self) -> int:
        return len(self.members)

    def control_mean(self) -> float:
        if not self.controls:
            raise ValueError(f"unestimable key {self.counts}: no control members")
        return self.control_sum / len(self.controls)


class PatternIndex:
    """Tree of pattern keys with membership sets, ordered by prefix."""

    def __init__(self, max_depth: int, n: int, n_controls: int, entries, member_rows, member_reach):
        self.max_depth = max_depth
        self.n = n
        self.n_controls = n_controls
        self.entries: dict[PatternKey, PatternEntry] = entries
        self.children: dict[PatternKey, list[PatternKey]] = {ROOT: []}
        for key in entries:
            if key != ROOT:
                self.children.setdefault(parent(key), []).append(key)
                self.children.setdefault(key, [])
        for kids in self.children.values():
            kids.sort()
        # per-node signature rows under the labels that drive Step-3 selection
        self.member_rows = member_rows
        self.member_reach = member_reach

    def __contains__(self, key: PatternKey) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, key: PatternKey) -> PatternEntry:
        return self.entries[key]

    def keys(self):
        return self.entries.keys()

    def subtree(self, key: PatternKey):
        """Preorder iteration over ``key`` and all its descendants."""
        stack = [key]
        while stack:
            k = stack.pop()
            yield k
            stack.extend(reversed(self.children[k]))

    def node_key(self, i: int, depth: int) -> PatternKey:
        """Node i's key at ``depth`` (must be <= the node's reach)."""
        return tuple(int(c) for c in self.member_rows[i, :depth])

    def dump_lines(self) -> list[str]:
        """Depth-first dump: ``depth<TAB>counts<TAB>|V|<TAB>|Vbar|`` per key."""
        out = []
        for key in self.subtree(ROOT):
            e = self.entries[key]
            out.append(
                f"{len(key)}\t{','.join(map(str, key))}\t{e.n_controls}\t{e.n_members}"
            )
        return out

    def to_tree_dict(self, key: PatternKey = ROOT) -> dict:
        """JSON-friendly nested mirror of the tree."""
        e = self.entries[key]
        return {
            "counts": list(key),
            "n_controls": e.n_controls,
            "n_members": e.n_members,
            "children": [self.to_tree_dict(k) for k in self.children[key]],
        }


def _count_rows(g: Graph, labels, max_depth: int):
    lay = g.distance_layers(max_depth)
    rows = kernels.treated_counts(lay.indptr, lay.nodes, labels, g.n, max_depth)
    return rows, lay.reach


def _collect_keys(rows, reach, contributors, record_members=False):
    keys = set()
    members: dict[PatternKey, list[int]] = {ROOT: []}
    for i in contributors:
        i = int(i)
        members[ROOT].append(i)
        key = ROOT
        row = rows[i]
        for m in range(reach[i]):
            key = key + (int(row[m]),)
            keys.add(key)
            if record_members:
                members.setdefault(key, []).append(i)
    return (keys, members) if record_members else keys


def _fill_members(entries, rows, reach, z, y):
    n = len(z)
    have_y = y is not None
    for i in range(n):
        zi = z[i]
        yi = float(y[i]) if have_y else 0.0
        key = ROOT
        row = rows[i]
        depth = 0
        while True:
            entry = entries.get(key)
            if entry is None:
                break
            entry.members.append(i)
            if zi == 0:
                entry.controls.append(i)
                entry.control_sum += yi
            if depth == reach[i]:
                break
            key = key + (int(row[depth]),)
            depth += 1


def build_pattern_index(g: Graph, z, max_depth: int, y=None) -> PatternIndex:
    """Pattern tree of the observed control signatures.

    Keys are all depth 1..reach signatures of control nodes plus the root.
    Membership (controls and all-node members) is computed for every key;
    treated nodes whose signature matches no key at some depth simply stop
    contributing there.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    z = np.asarray(z)
    if z.shape[0] != g.n:
        raise ValueError("labels length must equal node count")
    controls = np.flatnonzero(z == 0)
    if controls.size == 0:
        raise ValueError("no controls")
    rows, reach = _count_rows(g, z, max_depth)
    keys = _collect_keys(rows, reach, controls)
    entries = {ROOT: PatternEntry(ROOT)}
    for key in keys:
        entries[key] = PatternEntry(key)
    _fill_members(entries, rows, reach, z, y)
    return PatternIndex(max_depth, g.n, int(controls.size), entries, rows, reach)


def build_synthetic_pattern_set(g: Graph, synthetic_labels, max_depth: int) -> set:
    """Key set generated by *all* nodes under synthetic labels (plus root).

    Unlike the observed tree there is no control restriction: the labels are
    synthetic, so every node contributes its signatures.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    labels = np.asarray(synthetic_labels)
    if labels.shape[0] != g.n:
        raise ValueError("labels length must equal node count")
    rows, reach = _count_rows(g, labels, max_depth)
    keys = _collect_keys(rows, reach, range(g.n))
    keys.add(ROOT)
    return keys


def build_decoupled_index(g: Graph, z, synthetic_labels, max_depth: int, y=None):
    """Pattern tree with synthetic keys and real membership.

    Keys come from all nodes' signatures under ``synthetic_labels``;
    membership sets are evaluated under the real labels ``z``. Keys with no
    real control member are unestimable and dropped (their descendants
    necessarily drop with them).

    Returns ``(index, n_dropped, synthetic_members)`` where
    ``synthetic_members`` maps each retained key to the nodes whose
    *synthetic* signature matches it.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    z = np.asarray(z)
    syn = np.asarray(synthetic_labels)
    if z.shape[0] != g.n or syn.shape[0] != g.n:
        raise ValueError("labels length must equal node count")
    controls = np.flatnonzero(z == 0)
    if controls.size == 0:
        raise ValueError("no controls")
    syn_rows, syn_reach = _count_rows(g, syn, max_depth)
    keys, syn_members = _collect_keys(syn_rows, syn_reach, range(g.n), record_members=True)
    entries = {ROOT: PatternEntry(ROOT)}
    for key in keys:
        entries[key] = PatternEntry(key)
    rows, reach = _count_rows(g, z, max_depth)
    _fill_members(entries, rows, reach, z, y)
    dropped = [k for k, e in entries.items() if k != ROOT and not e.controls]
    for k in dropped:
        del entries[k]
        syn_members.pop(k, None)
    syn_members = {k: v for k, v in syn_members.items() if k in entries}
    syn_members[ROOT] = list(range(g.n))
    index = PatternIndex(max_depth, g.n, int(controls.size), entries, rows, reach)
    return index, len(dropped), syn_members
