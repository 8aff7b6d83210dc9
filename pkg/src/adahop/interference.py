"""Adaptive estimation of the interference function.

Builds the pattern tree from control outcomes, prunes it so that only
depths needed to keep bias small relative to noise survive, and assigns
every node the deepest surviving pattern on its signature path. Nodes whose
signatures match nothing deeper than the root fall back to the grand
control mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import Observations
from .graph import Graph
from .patterns import (
    ROOT,
    PatternIndex,
    build_decoupled_index,
    build_pattern_index,
    parent,
)

__all__ = [
    "InterferenceConfig",
    "KeyStats",
    "PrunedTree",
    "InterferenceFit",
    "noise_radius",
    "leaf_mean",
    "prune",
    "fit",
    "fit_decoupled",
    "max_neighborhood_overlap",
    "fit_report",
]

DEFAULT_DEPTH_CAP = 10


@dataclass(frozen=True)
class InterferenceConfig:
    """Tuning constants for the pruning rule.

    lam is the threshold multiplier (strictly > 1), delta the confidence
    parameter, sigma_bar the sub-Gaussian noise scale. With
    sigma_mode="pooled", sigma_bar is left unset and estimated as the
    sample standard deviation of all control outcomes. max_depth=None
    resolves to min(graph diameter, 10).
    """

    lam: float = 2.0
    delta: float = 0.05
    sigma_bar: float | None = None
    max_depth: int | None = None
    pattern_source: str = "observed"
    sigma_mode: str = "supplied"

    def __post_init__(self):
        if not self.lam > 1.0:
            raise ValueError("lambda must be strictly > 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if self.pattern_source not in ("observed", "synthetic"):
            raise ValueError(f"unknown pattern_source {self.pattern_source!r}")
        if self.sigma_mode not in ("supplied", "pooled"):
            raise ValueError(f"unknown sigma_mode {self.sigma_mode!r}")
        if self.sigma_mode == "supplied":
            if self.sigma_bar is None or not self.sigma_bar > 0.0:
                raise ValueError("supplied sigma_mode requires sigma_bar > 0")
        elif self.sigma_bar is not None:
            raise ValueError("sigma_bar must be unset when sigma_mode='pooled'")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


@dataclass(frozen=True)
class KeyStats:
    """Control count, control mean, and noise radius of a kept pattern."""

    n_controls: int
    f_hat: float
    radius: float


class PrunedTree:
    """Ancestor-closed set of surviving patterns with their statistics."""

    def __init__(self, kept: dict):
        self.kept = kept
        for key in kept:
            if key != ROOT and parent(key) not in kept:
                raise RuntimeError(f"pruned tree lost ancestor closure at {key}")

    def __contains__(self, key) -> bool:
        return key in self.kept

    def __getitem__(self, key) -> KeyStats:
        return self.kept[key]

    def __len__(self) -> int:
        return len(self.kept)

    def keys(self):
        return self.kept.keys()


@dataclass
class InterferenceFit:
    """Per-node selected depths and interference values plus diagnostics."""

    graph: Graph
    config: InterferenceConfig
    pattern_source: str
    sigma_bar: float
    max_depth: int
    index: PatternIndex
    tree: PrunedTree
    m_hat: np.ndarray
    g_hat: list
    f_hat: np.ndarray
    n: int
    n_controls: int
    max_overlap: int
    n_fallback: int
    n_dropped_keys: int = 0
    synthetic_labels: np.ndarray | None = None
    synthetic_members: dict | None = None


def noise_radius(n_controls: int, sigma_bar: float, delta: float, n: int) -> float:
    """High-probability half-width for a pattern mean over its controls."""
    if n_controls < 1:
        raise ValueError("unestimable key: no control members")
    return sigma_bar * math.sqrt(2.0 * math.log(2.0 * n * n / delta) / n_controls)


def leaf_mean(index: PatternIndex, key) -> float:
    """Arithmetic mean of control outcomes matching ``key``."""
    return index.get(key).control_mean()


def _key_stats(index: PatternIndex, lam: float, delta: float, sigma_bar: float):
    """Per-key mean, radius, and the [mean - lam*r, mean + lam*r] band."""
    stats, lo, hi = {}, {}, {}
    n = index.n
    for key, entry in index.entries.items():
        f = entry.control_mean()
        r = noise_radius(entry.n_controls, sigma_bar, delta, n)
        stats[key] = KeyStats(entry.n_controls, f, r)
        lo[key] = f - lam * r
        hi[key] = f + lam * r
    return stats, lo, hi


def prune(index: PatternIndex, config: InterferenceConfig, sigma_bar: float | None = None,
          method: str = "envelope") -> PrunedTree:
    """Keep the patterns witnessed by a significant split.

    A pattern g survives when some pair (g', g'') with g' in g's subtree
    and g'' in the subtree of g's parent has means further apart than
    lam * (radius(g') + radius(g'')); the comparison is strict. The root
    always survives. ``method="scan"`` checks all pairs literally;
    ``method="envelope"`` uses per-subtree extremes of the mean +/- lam*r
    bands and is output-equivalent.
    """
    sigma = config.sigma_bar if sigma_bar is None else sigma_bar
    if sigma is None:
        raise ValueError("sigma_bar is unresolved; pooled mode needs outcomes")
    if method not in ("envelope", "scan"):
        raise ValueError(f"unknown prune method {method!r}")
    stats, lo, hi = _key_stats(index, config.lam, config.delta, sigma)
    kept = {ROOT: stats[ROOT]}
    if method == "envelope":
        sub_lo, sub_hi = {}, {}
        for key in sorted(index.keys(), key=len, reverse=True):
            ml, mh = lo[key], hi[key]
            for child in index.children[key]:
                if sub_lo[child] > ml:
                    ml = sub_lo[child]
                if sub_hi[child] < mh:
                    mh = sub_hi[child]
            sub_lo[key], sub_hi[key] = ml, mh
        for key in index.keys():
            if key == ROOT:
                continue
            par = parent(key)
            if sub_lo[key] > sub_hi[par] or sub_lo[par] > sub_hi[key]:
                kept[key] = stats[key]
    else:
        for key in index.keys():
            if key == ROOT:
                continue
            par = parent(key)
            witnessed = False
            for g1 in index.subtree(key):
                l1, h1 = lo[g1], hi[g1]
                for g2 in index.subtree(par):
                    if l1 > hi[g2] or lo[g2] > h1:
                        witnessed = True
                        break
                if witnessed:
                    break
            if witnessed:
                kept[key] = stats[key]
    return PrunedTree(kept)


def _select(index: PatternIndex, tree: PrunedTree):
    """Deepest surviving pattern per node; root (depth 0) as fallback."""
    n = index.n
    m_hat = np.zeros(n, dtype=np.int32)
    f_hat = np.empty(n, dtype=np.float64)
    g_hat: list = [ROOT] * n
    rows, reach = index.member_rows, index.member_reach
    kept = tree.kept
    for i in range(n):
        key = ROOT
        best = ROOT
        depth = 0
        row = rows[i]
        for m in range(reach[i]):
            key = key + (int(row[m]),)
            if key in kept:
                best = key
                depth = m + 1
            else:
                break  # ancestor closure: nothing deeper can survive
        m_hat[i] = depth
        g_hat[i] = best
        f_hat[i] = kept[best].f_hat
    return m_hat, g_hat, f_hat


def _as_observations(observations) -> Observations:
    if isinstance(observations, Observations):
        return observations
    return Observations.from_nodes(observations)


def _pooled_sigma(z, y) -> float:
    """Sample SD of all control outcomes (conservative sigma_bar estimate)."""
    total = 0.0
    count = 0
    for i in range(len(z)):
        if z[i] == 0:
            total += float(y[i])
            count += 1
    if count < 2:
        raise ValueError("pooled sigma_mode needs at least 2 control outcomes")
    mean = total / count
    ssq = 0.0
    for i in range(len(z)):
        if z[i] == 0:
            d = float(y[i]) - mean
            ssq += d * d
    return math.sqrt(ssq / (count - 1))


def _resolve(g: Graph, obs: Observations, config: InterferenceConfig):
    if obs.n != g.n:
        raise ValueError("observations length must equal node count")
    if obs.n_controls == 0:
        raise ValueError("no controls")
    depth = config.max_depth
    if depth is None:
        depth = max(1, g.effective_depth_cap(DEFAULT_DEPTH_CAP))
    if config.sigma_mode == "pooled":
        sigma = _pooled_sigma(obs.z, obs.y)
    else:
        sigma = float(config.sigma_bar)
    return depth, sigma


def _finish(g, config, source, sigma, depth, index, dropped=0,
            synthetic_labels=None, synthetic_members=None) -> InterferenceFit:
    tree = prune(index, config, sigma_bar=sigma)
    m_hat, g_hat, f_hat = _select(index, tree)
    fit_obj = InterferenceFit(
        graph=g,
        config=config,
        pattern_source=source,
        sigma_bar=sigma,
        max_depth=depth,
        index=index,
        tree=tree,
        m_hat=m_hat,
        g_hat=g_hat,
        f_hat=f_hat,
        n=g.n,
        n_controls=index.n_controls,
        max_overlap=0,
        n_fallback=int((m_hat == 0).sum()),
        n_dropped_keys=dropped,
        synthetic_labels=synthetic_labels,
        synthetic_members=synthetic_members,
    )
    fit_obj.max_overlap = max_neighborhood_overlap(fit_obj)
    return fit_obj


def fit(g: Graph, observations, config: InterferenceConfig) -> InterferenceFit:
    """Fit from the observed pattern tree (control signatures)."""
    obs = _as_observations(observations)
    if config.pattern_source != "observed":
        raise ValueError("pattern_source='synthetic' requires fit_decoupled")
    depth, sigma = _resolve(g, obs, config)
    index = build_pattern_index(g, obs.z, depth, y=obs.y)
    return _finish(g, config, "observed", sigma, depth, index)


def fit_decoupled(g: Graph, observations, synthetic_labels,
                  config: InterferenceConfig) -> InterferenceFit:
    """Fit with the key set generated under synthetic labels.

    Keys come from all nodes' signatures under ``synthetic_labels`` (drawn
    independently of outcomes and real treatments); means, memberships, and
    the selection step all use the real labels. Synthetic keys without real
    control members are dropped before pruning and counted in diagnostics.
    """
    obs = _as_observations(observations)
    syn = np.ascontiguousarray(synthetic_labels, dtype=np.int8)
    if syn.shape[0] != g.n:
        raise ValueError("synthetic labels length must equal node count")
    if not np.all((syn == 0) | (syn == 1)):
        raise ValueError("synthetic labels must be 0 or 1")
    depth, sigma = _resolve(g, obs, config)
    index, dropped, syn_members = build_decoupled_index(g, obs.z, syn, depth, y=obs.y)
    return _finish(
        g, config, "synthetic", sigma, depth, index,
        dropped=dropped, synthetic_labels=syn, synthetic_members=syn_members,
    )


def max_neighborhood_overlap(fit_result: InterferenceFit) -> int:
    """Largest number of selected neighborhoods any single node belongs to.

    Every ego's selected neighborhood contains the ego itself, so the value
    is at least 1.
    """
    g = fit_result.graph
    lay = g.distance_layers(fit_result.max_depth)
    counts = kernels.overlap_counts(
        lay.indptr, lay.nodes, fit_result.m_hat, g.n, fit_result.max_depth
    )
    return int(counts.max())


def fit_report(fit_result: InterferenceFit, z=None) -> dict:
    """JSON-ready report: config echo, kept-key table, per-node table."""
    kept_rows = []
    for key in sorted(fit_result.tree.keys(), key=lambda k: (len(k), k)):
        s = fit_result.tree[key]
        entry = fit_result.index.get(key)
        kept_rows.append(
            {
                "counts": list(key),
                "depth": len(key),
                "n_controls": s.n_controls,
                "n_members": entry.n_members,
                "f_hat": s.f_hat,
                "noise_radius": s.radius,
            }
        )
    nodes = []
    for i in range(fit_result.n):
        row = {"id": i, "m_hat": int(fit_result.m_hat[i]), "f_hat": float(fit_result.f_hat[i])}
        if z is not None:
            row["z"] = int(z[i])
        nodes.append(row)
    cfg = fit_result.config
    return {
        "schema_version": 1,
        "config": {
            "lambda": cfg.lam,
            "delta": cfg.delta,
            "sigma_bar": fit_result.sigma_bar,
            "sigma_mode": cfg.sigma_mode,
            "max_depth": fit_result.max_depth,
            "pattern_source": fit_result.pattern_source,
        },
        "n": fit_result.n,
        "n_controls": fit_result.n_controls,
        "kept_keys": kept_rows,
        "nodes": nodes,
        "diagnostics": {
            "max_overlap": fit_result.max_overlap,
            "n_fallback": fit_result.n_fallback,
            "n_dropped_keys": fit_result.n_dropped_keys,
        },
    }
