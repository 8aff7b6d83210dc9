"""Data-generating processes, oracle quantities, and the Monte-Carlo harness.

Outcomes follow y = z * tau + f(pattern) + noise with the interference f
driven by per-layer treated counts (threshold lookup, layered-linear,
sub-Gaussian decay) or by the peer-effects linear system. Truth (f, tau,
noise) is stored with every draw so oracle error budgets, the oracle
variance, and coverage can be evaluated exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from . import kernels
from .data import Observations
from .estimators import (
    PropensityModel,
    estimate_adte,
    estimate_dr,
    estimate_or,
    estimate_propensity,
    estimate_tau_of_x,
)
from .graph import Graph, generate_erdos_renyi, generate_lattice
from .interference import (
    InterferenceConfig,
    InterferenceFit,
    PrunedTree,
    KeyStats,
    fit as fit_interference,
    fit_decoupled,
    noise_radius,
)
from .patterns import ROOT
from .rng import stream

__all__ = [
    "DGPSpec",
    "SimulatedData",
    "MonteCarloConfig",
    "MCReport",
    "simulate",
    "true_propensities",
    "true_approx_error",
    "oracle_variance",
    "adaptive_error_budget",
    "brute_force_fit",
    "monte_carlo",
    "ks_distance_to_normal",
]

BRUTE_FORCE_MAX_NODES = 12


# ---------------------------------------------------------------------------
# DGP specification


def _key_to_str(key) -> str:
    return ",".join(str(int(c)) for c in key)


def _key_from_str(text: str):
    text = text.strip()
    if not text:
        return ()
    return tuple(int(part) for part in text.split(","))


@dataclass(frozen=True)
class DGPSpec:
    """Complete description of one data-generating process.

    graph: {"kind": "lattice", rows, cols, torus} or {"kind": "erdos-renyi", n, p}
    propensity: {"kind": "constant", e0} or {"kind": "stratified", probs, e}
    interference:
        {"kind": "threshold", depth, values: {counts-string: f}, default}
        {"kind": "layered-linear", mu: [...]}
        {"kind": "decay", scale, depth (optional)}
        {"kind": "linear-in-means", intercept, peer_outcome, peer_treatment}
    tau: {"kind": "constant", value} or {"kind": "stratified", values: [...]}
    noise: {"kind": "gaussian", sd} or {"kind": "uniform", half_width}
    """

    graph: dict
    propensity: dict
    interference: dict
    tau: dict
    noise: dict
    seed: int = 0

    def __post_init__(self):
        g, p, f, t, e = self.graph, self.propensity, self.interference, self.tau, self.noise
        if g["kind"] == "lattice":
            if g["rows"] < 2 or g["cols"] < 2:
                raise ValueError("lattice needs rows, cols >= 2")
        elif g["kind"] == "erdos-renyi":
            if g["n"] < 1 or not 0.0 <= g["p"] <= 1.0:
                raise ValueError("erdos-renyi needs n >= 1 and p in [0, 1]")
        else:
            raise ValueError(f"unknown graph kind {g['kind']!r}")
        if p["kind"] == "constant":
            if not 0.0 <= p["e0"] <= 1.0:
                raise ValueError("e0 must be in [0, 1]")
        elif p["kind"] == "stratified":
            probs, es = p["probs"], p["e"]
            if len(probs) != len(es) or not probs:
                raise ValueError("stratified propensity needs matching probs and e")
            if abs(sum(probs) - 1.0) > 1e-9 or min(probs) < 0:
                raise ValueError("stratum probabilities must sum to 1")
            if min(es) < 0.0 or max(es) > 1.0:
                raise ValueError("stratum propensities must be in [0, 1]")
        else:
            raise ValueError(f"unknown propensity kind {p['kind']!r}")
        kind = f["kind"]
        if kind == "threshold":
            if f["depth"] < 0:
                raise ValueError("threshold depth must be >= 0")
            for key in f.get("values", {}):
                if len(_key_from_str(key)) != f["depth"]:
                    raise ValueError(f"threshold key {key!r} does not match depth {f['depth']}")
        elif kind == "layered-linear":
            if not f.get("mu"):
                raise ValueError("layered-linear needs nonempty mu")
        elif kind == "decay":
            if f["scale"] < 0:
                raise ValueError("decay scale must be >= 0")
        elif kind == "linear-in-means":
            if not abs(f["peer_outcome"]) < 1.0:
                raise ValueError("linear-in-means needs |peer_outcome| < 1")
        else:
            raise ValueError(f"unknown interference kind {kind!r}")
        if t["kind"] == "constant":
            float(t["value"])
        elif t["kind"] == "stratified":
            if not t.get("values"):
                raise ValueError("stratified tau needs values")
        else:
            raise ValueError(f"unknown tau kind {t['kind']!r}")
        if e["kind"] == "gaussian":
            if e["sd"] < 0:
                raise ValueError("gaussian sd must be >= 0")
        elif e["kind"] == "uniform":
            if e["half_width"] < 0:
                raise ValueError("uniform half_width must be >= 0")
        else:
            raise ValueError(f"unknown noise kind {e['kind']!r}")

    def build_graph(self) -> Graph:
        g = self.graph
        if g["kind"] == "lattice":
            return generate_lattice(g["rows"], g["cols"], torus=g.get("torus", True))
        return generate_erdos_renyi(g["n"], g["p"], self.seed)

    def noise_scale(self) -> float | None:
        """Sub-Gaussian scale of the per-node noise (None for peer effects)."""
        if self.interference["kind"] == "linear-in-means":
            return None
        if self.noise["kind"] == "gaussian":
            return float(self.noise["sd"])
        return float(self.noise["half_width"])

    def to_dict(self) -> dict:
        return {
            "graph": dict(self.graph),
            "propensity": dict(self.propensity),
            "interference": dict(self.interference),
            "tau": dict(self.tau),
            "noise": dict(self.noise),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DGPSpec":
        required = {"graph", "propensity", "interference", "tau", "noise"}
        missing = required - set(d)
        if missing:
            raise ValueError(f"DGP spec missing sections: {sorted(missing)}")
        return cls(
            graph=dict(d["graph"]),
            propensity=dict(d["propensity"]),
            interference=dict(d["interference"]),
            tau=dict(d["tau"]),
            noise=dict(d["noise"]),
            seed=int(d.get("seed", 0)),
        )


@dataclass
class SimulatedData:
    """One draw plus its stored truth; y == z*tau + f + eps holds exactly."""

    spec: DGPSpec
    rep: int
    graph: Graph
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    f: np.ndarray
    tau: np.ndarray
    eps: np.ndarray
    adtt: float
    adte: float

    @property
    def observations(self) -> Observations:
        return Observations(self.z, self.y, self.x)


def true_propensities(spec: DGPSpec, x) -> np.ndarray:
    p = spec.propensity
    x = np.asarray(x)
    if p["kind"] == "constant":
        return np.full(x.shape[0], float(p["e0"]))
    return np.asarray(p["e"], dtype=np.float64)[x]


def _draw_strata(spec: DGPSpec, n: int, rep: int) -> np.ndarray:
    p = spec.propensity
    if p["kind"] == "constant":
        return np.zeros(n, dtype=np.int64)
    cum = np.cumsum(np.asarray(p["probs"], dtype=np.float64))
    u = stream(spec.seed, "strata", rep).random(n)
    return np.searchsorted(cum, u, side="right").clip(0, len(cum) - 1).astype(np.int64)


def _interference_depth(spec: DGPSpec, g: Graph) -> int:
    f = spec.interference
    kind = f["kind"]
    if kind == "threshold":
        return int(f["depth"])
    if kind == "layered-linear":
        return len(f["mu"])
    if kind == "decay":
        depth = f.get("depth")
        return int(depth) if depth else max(1, g.effective_depth_cap(10))
    return 0


def decay_coefficients(scale: float, depth: int) -> np.ndarray:
    """Layer weights scale * exp(-4 k^2), k = 1..depth."""
    ks = np.arange(1, depth + 1, dtype=np.float64)
    return scale * np.exp(-4.0 * ks * ks)


def _row_normalized_adjacency(g: Graph) -> np.ndarray:
    a = np.zeros((g.n, g.n))
    for u in range(g.n):
        nbrs = g.neighbors(u)
        if nbrs.size:
            a[u, nbrs] = 1.0 / nbrs.size
    return a


def simulate(spec: DGPSpec, rep: int = 0, graph: Graph | None = None) -> SimulatedData:
    """Draw strata, treatments, interference, and noise for one replicate.

    All randomness flows through (seed, purpose, rep)-keyed streams, so a
    draw is reproducible from the spec alone regardless of scheduling.
    """
    g = graph if graph is not None else spec.build_graph()
    n = g.n
    x = _draw_strata(spec, n, rep)
    e_true = true_propensities(spec, x)
    z = (stream(spec.seed, "treat", rep).random(n) < e_true).astype(np.int8)

    t = spec.tau
    if t["kind"] == "constant":
        tau = np.full(n, float(t["value"]))
    else:
        values = np.asarray(t["values"], dtype=np.float64)
        if x.max(initial=0) >= len(values):
            raise ValueError("stratified tau does not cover all strata")
        tau = values[x]

    spec_f = spec.interference
    kind = spec_f["kind"]
    if kind == "linear-in-means":
        f, tau, eps = _linear_in_means(spec, g, z, rep)
    else:
        depth = _interference_depth(spec, g)
        if depth > 0:
            lay = g.distance_layers(depth)
            rows = kernels.treated_counts(lay.indptr, lay.nodes, z, n, depth)
        if kind == "threshold":
            if depth == 0:
                f = np.full(n, float(spec_f.get("values", {}).get("", spec_f.get("default", 0.0))))
            else:
                values = {(_key_from_str(k)): float(v) for k, v in spec_f.get("values", {}).items()}
                default = float(spec_f.get("default", 0.0))
                f = np.array(
                    [values.get(tuple(int(c) for c in rows[i]), default) for i in range(n)]
                )
        else:
            if kind == "layered-linear":
                mu = np.asarray(spec_f["mu"], dtype=np.float64)
            else:
                mu = decay_coefficients(float(spec_f["scale"]), depth)
            f = rows.astype(np.float64) @ mu
        noise = spec.noise
        gen = stream(spec.seed, "noise", rep)
        if noise["kind"] == "gaussian":
            eps = gen.normal(0.0, float(noise["sd"]), n)
        else:
            w = float(noise["half_width"])
            eps = gen.uniform(-w, w, n)

    y = z * tau + f + eps
    n1 = int(z.sum())
    adtt = float(np.sum(z * tau) / n1) if n1 else float("nan")
    adte = float(np.mean(tau))
    return SimulatedData(spec, rep, g, x, z, y, f, tau, eps, adtt, adte)


def _linear_in_means(spec: DGPSpec, g: Graph, z, rep: int):
    """Solve y = a + b*An*y + c*An*z + xi and split off the own-treatment part.

    The interference component keeps the baseline a/(1-b) and everything
    driven by others' treatments; tau_i is the own-treatment coefficient.
    The transformed shocks are cross-node correlated by construction.
    """
    p = spec.interference
    a, b, c = float(p["intercept"]), float(p["peer_outcome"]), float(p["peer_treatment"])
    n = g.n
    an = _row_normalized_adjacency(g)
    system = np.eye(n) - b * an
    try:
        solver = np.linalg.inv(system)
    except np.linalg.LinAlgError as exc:  # unreachable for |b| < 1; guarded anyway
        raise ValueError("singular peer-effects system") from exc
    influence = c * (solver @ an)
    tau = np.diag(influence).copy()
    zf = z.astype(np.float64)
    baseline = a / (1.0 - b) if abs(an.sum()) > 0 else a  # edgeless graph: y = a + xi
    if not np.any(g.degrees > 0):
        baseline = a
    f = baseline + influence @ zf - zf * tau
    noise = spec.noise
    gen = stream(spec.seed, "noise", rep)
    if noise["kind"] == "gaussian":
        xi = gen.normal(0.0, float(noise["sd"]), n)
    else:
        w = float(noise["half_width"])
        xi = gen.uniform(-w, w, n)
    eps = solver @ xi
    return f, tau, eps


# ---------------------------------------------------------------------------
# Oracle quantities


def true_approx_error(data: SimulatedData, key, labels=None) -> float:
    """Worst spread of the true interference over nodes matching ``key``.

    Membership is evaluated under ``labels`` (default: the draw's real
    treatments; pass synthetic labels to measure the decoupled analogue).
    """
    g = data.graph
    lbl = data.z if labels is None else np.asarray(labels)
    depth = len(key)
    if depth == 0:
        members = np.arange(g.n)
    else:
        lay = g.distance_layers(depth)
        rows = kernels.treated_counts(lay.indptr, lay.nodes, lbl, g.n, depth)
        mask = lay.reach >= depth
        key_arr = np.asarray(key, dtype=np.int32)
        mask &= np.all(rows[:, :depth] == key_arr, axis=1)
        members = np.flatnonzero(mask)
    if members.size == 0:
        raise ValueError(f"no nodes match pattern {key}")
    vals = data.f[members]
    return float(vals.max() - vals.min())


def oracle_variance(data: SimulatedData, propensities) -> float:
    """Closed-form score variance using the stored noise scale.

    Treated terms contribute the noise variance; control terms the noise
    variance times squared propensity odds. Undefined for the peer-effects
    DGP, whose shocks are cross-node correlated.
    """
    noise = data.spec.noise
    if data.spec.interference["kind"] == "linear-in-means":
        raise ValueError("oracle variance undefined for correlated-noise linear-in-means")
    if noise["kind"] == "gaussian":
        s2 = float(noise["sd"]) ** 2
    else:
        s2 = float(noise["half_width"]) ** 2 / 3.0
    z = data.z
    n1 = int(z.sum())
    if n1 == 0:
        raise ValueError("no treated units")
    e = np.asarray(propensities, dtype=np.float64)
    if np.any((z == 0) & (e >= 1.0)):
        raise ValueError("propensity 1 on a control node leaves its weight undefined")
    odds = np.where(z == 0, e / np.where(z == 0, 1.0 - e, 1.0), 0.0)
    return float(np.sum(z * s2 + (1 - z) * s2 * odds * odds) / n1)


def adaptive_error_budget(fit_result: InterferenceFit, true_f) -> np.ndarray:
    """Per-node error budget the adaptive fit is expected to satisfy.

    For each node, the minimum over candidate depths on its signature path
    of bias term lam/(lam-1) * spread(pattern) plus 3*lam*noise_radius.
    Candidates follow the real signatures for observed fits and the
    synthetic signatures for decoupled fits (with spreads over synthetic
    membership), matching how each tree was generated.
    """
    true_f = np.asarray(true_f, dtype=np.float64)
    cfg = fit_result.config
    lam, delta = cfg.lam, cfg.delta
    sigma = fit_result.sigma_bar
    n = fit_result.n
    index = fit_result.index
    if fit_result.pattern_source == "observed":
        rows, reach = index.member_rows, index.member_reach

        def members_of(key):
            return index.get(key).members

    else:
        lay = fit_result.graph.distance_layers(fit_result.max_depth)
        rows = kernels.treated_counts(
            lay.indptr, lay.nodes, fit_result.synthetic_labels, n, fit_result.max_depth
        )
        reach = lay.reach
        syn_members = fit_result.synthetic_members

        def members_of(key):
            return syn_members[key]

    bias_mult = lam / (lam - 1.0)
    spread_cache: dict = {}

    def budget_term(key) -> float:
        got = spread_cache.get(key)
        if got is None:
            vals = true_f[members_of(key)]
            spread = float(vals.max() - vals.min())
            entry = index.get(key)
            got = bias_mult * spread + 3.0 * lam * noise_radius(
                entry.n_controls, sigma, delta, n
            )
            spread_cache[key] = got
        return got

    budgets = np.empty(n)
    for i in range(n):
        best = budget_term(ROOT)
        key = ROOT
        row = rows[i]
        for m in range(reach[i]):
            key = key + (int(row[m]),)
            if key not in index:
                break
            b = budget_term(key)
            if b < best:
                best = b
        budgets[i] = best
    return budgets


# ---------------------------------------------------------------------------
# Brute-force reference pipeline


def brute_force_fit(g: Graph, observations, config: InterferenceConfig,
                    synthetic_labels=None) -> InterferenceFit:
    """Literal re-derivation of the adaptive fit for tiny graphs.

    Fresh BFS per node, key sets by set comprehension, the pruning rule by
    a triple loop over (pattern, deeper, parent-deeper), and the depth
    selection by a literal max. No tries, no caching. Must agree with
    ``interference.fit``/``fit_decoupled`` exactly; restricted to
    n <= 12 nodes.
    """
    if g.n > BRUTE_FORCE_MAX_NODES:
        raise ValueError(f"brute-force reference refuses n > {BRUTE_FORCE_MAX_NODES}")
    obs = observations if isinstance(observations, Observations) else Observations.from_nodes(observations)
    if obs.n != g.n:
        raise ValueError("observations length must equal node count")
    n = g.n
    z = [int(v) for v in obs.z]
    y = [float(v) for v in obs.y]
    controls = [i for i in range(n) if z[i] == 0]
    if not controls:
        raise ValueError("no controls")

    def all_layers(ego):
        seen = {ego}
        frontier = [ego]
        layers = []
        while True:
            nxt = sorted(
                {int(v) for u in frontier for v in g.neighbors(u)} - seen
            )
            if not nxt:
                return layers
            layers.append(nxt)
            seen.update(nxt)
            frontier = nxt

    layers = {i: all_layers(i) for i in range(n)}
    ecc = {i: len(layers[i]) for i in range(n)}

    if config.max_depth is not None:
        cap = config.max_depth
    else:
        cap = max(1, max(min(ecc[i], 10) for i in range(n)))

    def sig(i, m, labels):
        return tuple(sum(labels[j] for j in lay) for lay in layers[i][:m])

    if synthetic_labels is None:
        key_labels = z
        key_nodes = controls
    else:
        key_labels = [int(v) for v in synthetic_labels]
        if len(key_labels) != n:
            raise ValueError("synthetic labels length must equal node count")
        key_nodes = list(range(n))
    keys = {()} | {
        sig(i, m, key_labels)
        for i in key_nodes
        for m in range(1, min(cap, ecc[i]) + 1)
    }

    v_sets = {
        gk: [i for i in controls if len(gk) <= min(cap, ecc[i]) and sig(i, len(gk), z) == gk]
        for gk in keys
    }
    dropped = 0
    if synthetic_labels is not None:
        dropped = sum(1 for gk in keys if gk != () and not v_sets[gk])
        keys = {gk for gk in keys if gk == () or v_sets[gk]}

    if config.sigma_mode == "pooled":
        total = 0.0
        count = 0
        for i in range(n):
            if z[i] == 0:
                total += y[i]
                count += 1
        if count < 2:
            raise ValueError("pooled sigma_mode needs at least 2 control outcomes")
        mean = total / count
        ssq = 0.0
        for i in range(n):
            if z[i] == 0:
                d = y[i] - mean
                ssq += d * d
        sigma = math.sqrt(ssq / (count - 1))
    else:
        sigma = float(config.sigma_bar)

    f_hat_key, lo, hi = {}, {}, {}
    for gk in keys:
        members = v_sets[gk]
        total = 0.0
        for i in members:
            total += y[i]
        f = total / len(members)
        r = sigma * math.sqrt(2.0 * math.log(2.0 * n * n / config.delta) / len(members))
        f_hat_key[gk] = f
        lo[gk] = f - config.lam * r
        hi[gk] = f + config.lam * r

    def extends(child, base):
        return child[: len(base)] == base

    kept = {()}
    for gk in keys:
        if gk == ():
            continue
        par = gk[:-1]
        hit = False
        for g1 in keys:
            if not extends(g1, gk):
                continue
            for g2 in keys:
                if not extends(g2, par):
                    continue
                if lo[g1] > hi[g2] or lo[g2] > hi[g1]:
                    hit = True
                    break
            if hit:
                break
        if hit:
            kept.add(gk)

    m_hat = np.zeros(n, dtype=np.int32)
    f_hat = np.empty(n, dtype=np.float64)
    g_hat: list = [()] * n
    for i in range(n):
        options = [0] + [
            m for m in range(1, min(cap, ecc[i]) + 1) if sig(i, m, z) in kept
        ]
        best_m = max(options)
        m_hat[i] = best_m
        g_hat[i] = sig(i, best_m, z)
        f_hat[i] = f_hat_key[g_hat[i]]

    def dist_leq(k, i, m):
        if k == i:
            return True
        for d in range(1, min(m, ecc[k]) + 1):
            if i in layers[k][d - 1]:
                return True
        return False

    overlap = max(
        sum(1 for k in range(n) if dist_leq(k, i, int(m_hat[k]))) for i in range(n)
    )

    stats = {
        gk: KeyStats(
            len(v_sets[gk]),
            f_hat_key[gk],
            sigma * math.sqrt(2.0 * math.log(2.0 * n * n / config.delta) / len(v_sets[gk])),
        )
        for gk in kept
    }
    return InterferenceFit(
        graph=g,
        config=config,
        pattern_source="observed" if synthetic_labels is None else "synthetic",
        sigma_bar=sigma,
        max_depth=cap,
        index=None,
        tree=PrunedTree(stats),
        m_hat=m_hat,
        g_hat=g_hat,
        f_hat=f_hat,
        n=n,
        n_controls=len(controls),
        max_overlap=overlap,
        n_fallback=int((m_hat == 0).sum()),
        n_dropped_keys=dropped,
    )


# ---------------------------------------------------------------------------
# Monte-Carlo harness


@dataclass(frozen=True)
class MonteCarloConfig:
    """How each replicate is fitted and estimated.

    fit_mode: "observed" (Algorithm-1 tree), "decoupled" (synthetic-label
    tree), or "known-f" (skip fitting, use the true interference).
    propensity: "oracle" feeds the DGP's true e(x) as supplied values;
    otherwise pass a PropensityModel.
    """

    fit_mode: str = "observed"
    interference: InterferenceConfig | None = None
    propensity: object = "oracle"
    level: float = 0.95
    check_bound: bool = True
    adte: bool = False
    clip: float = 0.01

    def __post_init__(self):
        if self.fit_mode not in ("observed", "decoupled", "known-f"):
            raise ValueError(f"unknown fit_mode {self.fit_mode!r}")
        if self.fit_mode != "known-f" and self.interference is None:
            raise ValueError("fit_mode requires an InterferenceConfig")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must be in (0, 1)")
        if self.propensity != "oracle" and not isinstance(self.propensity, PropensityModel):
            raise ValueError("propensity must be 'oracle' or a PropensityModel")


@dataclass
class MCReport:
    """Per-replicate rows plus aggregate summary."""

    spec: DGPSpec
    config: MonteCarloConfig
    reps: int
    rows: list
    summary: dict

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            cols = list(self.rows[0].keys()) if self.rows else []
            writer.writerow(cols)
            for row in self.rows:
                writer.writerow([row.get(c) for c in cols])

    def summary_dict(self) -> dict:
        return {
            "schema_version": 1,
            "spec": self.spec.to_dict(),
            "reps": self.reps,
            "fit_mode": self.config.fit_mode,
            "level": self.config.level,
            "summary": self.summary,
        }


class _OracleInterference:
    """Stand-in fit carrying the true interference values."""

    def __init__(self, f, n):
        self.f_hat = np.asarray(f, dtype=np.float64)
        self.n = n


def _check_noise_scale(spec: DGPSpec, config: MonteCarloConfig) -> None:
    if config.fit_mode == "known-f" or config.interference is None:
        return
    cfg = config.interference
    if cfg.sigma_mode != "supplied":
        return
    scale = spec.noise_scale()
    if scale is not None and scale > cfg.sigma_bar + 1e-12:
        raise ValueError(
            f"noise scale {scale} exceeds configured sigma_bar {cfg.sigma_bar}"
        )


def _propensities_for(data: SimulatedData, config: MonteCarloConfig) -> np.ndarray:
    if config.propensity == "oracle":
        return true_propensities(data.spec, data.x)
    return estimate_propensity(data.observations, config.propensity)


def _mc_rep(spec: DGPSpec, graph: Graph, config: MonteCarloConfig, rep: int) -> dict:
    data = simulate(spec, rep=rep, graph=graph)
    obs = data.observations
    e_hat = _propensities_for(data, config)
    row: dict = {
        "rep": rep,
        "n_treated": obs.n_treated,
        "adtt_true": data.adtt,
        "adte_true": data.adte,
    }

    if config.fit_mode == "known-f":
        fit_result = _OracleInterference(data.f, data.graph.n)
        row.update(max_f_err=0.0, bound_violated=None, max_overlap=None,
                   n_fallback=None, n_dropped_keys=None)
    else:
        if config.fit_mode == "observed":
            fit_result = fit_interference(data.graph, obs, config.interference)
        else:
            syn = (
                stream(spec.seed, "synthetic", rep).random(data.graph.n) < e_hat
            ).astype(np.int8)
            fit_result = fit_decoupled(data.graph, obs, syn, config.interference)
        err = np.abs(fit_result.f_hat - data.f)
        row["max_f_err"] = float(err.max())
        if config.check_bound:
            budget = adaptive_error_budget(fit_result, data.f)
            row["bound_violated"] = bool(np.any(err > budget))
        else:
            row["bound_violated"] = None
        row["max_overlap"] = fit_result.max_overlap
        row["n_fallback"] = fit_result.n_fallback
        row["n_dropped_keys"] = fit_result.n_dropped_keys

    est_or = estimate_or(obs, fit_result)
    est_dr = estimate_dr(obs, fit_result, e_hat, level=config.level)
    row["tau_or"] = est_or.tau_hat
    row["tau_dr"] = est_dr.tau_hat
    row["sigma_tilde"] = est_dr.variance
    row["covered_tilde"] = bool(est_dr.ci_low <= data.adtt <= est_dr.ci_high)

    try:
        sigma_n = oracle_variance(data, true_propensities(spec, data.x))
    except ValueError:
        sigma_n = None
    if sigma_n is not None and sigma_n > 0:
        half = NormalDist().inv_cdf(0.5 + config.level / 2.0) * math.sqrt(
            sigma_n / obs.n_treated
        )
        row["sigma_oracle"] = sigma_n
        row["covered_oracle"] = bool(abs(est_dr.tau_hat - data.adtt) <= half)
        row["std_stat"] = float(
            math.sqrt(obs.n_treated) * (est_dr.tau_hat - data.adtt) / math.sqrt(sigma_n)
        )
    else:
        row["sigma_oracle"] = None
        row["covered_oracle"] = None
        row["std_stat"] = None

    if config.adte:
        tau_by_stratum = estimate_tau_of_x(obs, fit_result)
        a, b, d = estimate_adte(obs, fit_result, e_hat, tau_by_stratum)
        row["adte_or_a"] = a.tau_hat
        row["adte_or_b"] = b.tau_hat
        row["adte_dr"] = d.tau_hat
    return row


_WORKER_CTX: dict = {}


def _worker_init(spec: DGPSpec, config: MonteCarloConfig) -> None:
    _WORKER_CTX["spec"] = spec
    _WORKER_CTX["graph"] = spec.build_graph()
    _WORKER_CTX["config"] = config


def _worker_rep(rep: int) -> dict:
    return _mc_rep(_WORKER_CTX["spec"], _WORKER_CTX["graph"], _WORKER_CTX["config"], rep)


def ks_distance_to_normal(sample) -> float:
    """Kolmogorov-Smirnov distance between a sample and the standard normal."""
    xs = np.sort(np.asarray(sample, dtype=np.float64))
    m = xs.size
    if m == 0:
        raise ValueError("empty sample")
    nd = NormalDist()
    cdf = np.array([nd.cdf(v) for v in xs])
    grid = np.arange(1, m + 1) / m
    return float(max(np.max(grid - cdf), np.max(cdf - (grid - 1.0 / m))))


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def _summarize(rows: list, config: MonteCarloConfig) -> dict:
    err_or = np.array([r["tau_or"] - r["adtt_true"] for r in rows])
    err_dr = np.array([r["tau_dr"] - r["adtt_true"] for r in rows])
    summary = {
        "bias_or": float(err_or.mean()),
        "sd_or": float(err_or.std(ddof=1)) if len(rows) > 1 else 0.0,
        "rmse_or": float(np.sqrt(np.mean(err_or**2))),
        "bias_dr": float(err_dr.mean()),
        "sd_dr": float(err_dr.std(ddof=1)) if len(rows) > 1 else 0.0,
        "rmse_dr": float(np.sqrt(np.mean(err_dr**2))),
        "coverage_tilde": _mean([r["covered_tilde"] for r in rows]),
        "coverage_oracle": _mean([r["covered_oracle"] for r in rows]),
        "mean_sigma_tilde": _mean([r["sigma_tilde"] for r in rows]),
        "mean_sigma_oracle": _mean([r["sigma_oracle"] for r in rows]),
        "mean_n_treated": _mean([r["n_treated"] for r in rows]),
    }
    if config.fit_mode != "known-f":
        summary["mean_max_f_err"] = _mean([r["max_f_err"] for r in rows])
        summary["bound_violation_freq"] = _mean([r["bound_violated"] for r in rows])
        summary["mean_max_overlap"] = _mean([r["max_overlap"] for r in rows])
        summary["mean_n_fallback"] = _mean([r["n_fallback"] for r in rows])
    stats = [r["std_stat"] for r in rows if r["std_stat"] is not None]
    if stats:
        summary["ks_distance"] = ks_distance_to_normal(stats)
    if config.adte:
        for name in ("adte_or_a", "adte_or_b", "adte_dr"):
            summary[f"bias_{name}"] = _mean(
                [r[name] - r["adte_true"] for r in rows]
            )
    return summary


def monte_carlo(spec: DGPSpec, reps: int, config: MonteCarloConfig,
                workers: int = 1) -> MCReport:
    """Run ``reps`` independent replicates and aggregate.

    Replicates are keyed by their index, so results are identical for any
    worker count; aggregation only sees the ordered per-rep rows.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    _check_noise_scale(spec, config)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(
            max_workers=workers, initializer=_worker_init, initargs=(spec, config)
        ) as pool:
            rows = list(pool.map(_worker_rep, range(reps), chunksize=max(1, reps // (workers * 4))))
    else:
        graph = spec.build_graph()
        rows = [_mc_rep(spec, graph, config, rep) for rep in range(reps)]
    rows.sort(key=lambda r: r["rep"])
    return MCReport(spec, config, reps, rows, _summarize(rows, config))
