"""Per-node observations and the flat-file formats used by the CLI.

Edge-list CSV: one ``u,v`` pair per line, 0-based integer ids, optional
header. Node table CSV: columns ``id,z,y,x`` with ``x`` optional
(defaults to stratum 0).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NodeObservation",
    "Observations",
    "read_edge_csv",
    "read_node_table_csv",
    "read_propensity_csv",
]


@dataclass(frozen=True)
class NodeObservation:
    """One node's treatment (0/1), outcome, and covariate stratum."""

    z: int
    y: float
    x: int = 0


class Observations:
    """Column view of per-node observations.

    z must be 0/1, y finite, x small nonnegative stratum ids.
    """

    __slots__ = ("z", "y", "x", "n")

    def __init__(self, z, y, x=None):
        self.z = np.ascontiguousarray(z, dtype=np.int8)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self.n = self.z.shape[0]
        if x is None:
            self.x = np.zeros(self.n, dtype=np.int64)
        else:
            self.x = np.ascontiguousarray(x, dtype=np.int64)
        if self.y.shape[0] != self.n or self.x.shape[0] != self.n:
            raise ValueError("z, y, x must have equal length")
        if not np.all((self.z == 0) | (self.z == 1)):
            raise ValueError("treatments must be 0 or 1")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("outcomes must be finite")
        if np.any(self.x < 0):
            raise ValueError("strata must be nonnegative")

    @classmethod
    def from_nodes(cls, nodes) -> "Observations":
        rows = list(nodes)
        return cls(
            [r.z for r in rows], [r.y for r in rows], [r.x for r in rows]
        )

    def node(self, i: int) -> NodeObservation:
        return NodeObservation(int(self.z[i]), float(self.y[i]), int(self.x[i]))

    @property
    def n_treated(self) -> int:
        return int(self.z.sum())

    @property
    def n_controls(self) -> int:
        return self.n - self.n_treated


def _rows(path, header: bool):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if header and lineno == 1:
                continue
            yield lineno, [c.strip() for c in row]


def _parse(path, lineno, text, kind, caster):
    try:
        return caster(text)
    except ValueError:
        raise ValueError(f"{path}:{lineno}: expected {kind}, got {text!r}") from None


def read_edge_csv(path, header: bool = False) -> list[tuple[int, int]]:
    """Read ``u,v`` integer pairs; malformed rows fail with line numbers."""
    edges = []
    for lineno, row in _rows(path, header):
        if len(row) < 2:
            raise ValueError(f"{path}:{lineno}: expected 'u,v'")
        u = _parse(path, lineno, row[0], "integer id", int)
        v = _parse(path, lineno, row[1], "integer id", int)
        edges.append((u, v))
    return edges


def read_node_table_csv(path, header: bool = False) -> Observations:
    """Read ``id,z,y[,x]`` rows; ids must be exactly 0..n-1."""
    seen: dict[int, NodeObservation] = {}
    for lineno, row in _rows(path, header):
        if len(row) < 3:
            raise ValueError(f"{path}:{lineno}: expected 'id,z,y[,x]'")
        i = _parse(path, lineno, row[0], "integer id", int)
        z = _parse(path, lineno, row[1], "0/1 treatment", int)
        y = _parse(path, lineno, row[2], "numeric outcome", float)
        x = _parse(path, lineno, row[3], "integer stratum", int) if len(row) > 3 else 0
        if z not in (0, 1):
            raise ValueError(f"{path}:{lineno}: treatment must be 0 or 1")
        if i in seen:
            raise ValueError(f"{path}:{lineno}: duplicate node id {i}")
        seen[i] = NodeObservation(z, y, x)
    n = len(seen)
    if sorted(seen) != list(range(n)):
        raise ValueError(f"{path}: node ids must be exactly 0..{n - 1}")
    return Observations.from_nodes(seen[i] for i in range(n))


def read_propensity_csv(path, n: int, header: bool = False) -> np.ndarray:
    """Read per-node ``id,e`` propensities covering ids 0..n-1."""
    values = np.full(n, np.nan)
    for lineno, row in _rows(path, header):
        if len(row) < 2:
            raise ValueError(f"{path}:{lineno}: expected 'id,e'")
        i = _parse(path, lineno, row[0], "integer id", int)
        e = _parse(path, lineno, row[1], "numeric propensity", float)
        if not 0 <= i < n:
            raise ValueError(f"{path}:{lineno}: node id {i} out of range")
        values[i] = e
    if np.isnan(values).any():
        missing = int(np.flatnonzero(np.isnan(values))[0])
        raise ValueError(f"{path}: missing propensity for node {missing}")
    return values
