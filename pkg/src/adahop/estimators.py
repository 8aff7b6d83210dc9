"""Direct-effect estimators for the treated and for all units.

Point estimators subtract the fitted interference from outcomes; the
doubly-robust variant reweights control residuals by the propensity odds.
Variances follow the conservative squared-score form and its plug-in
refinement; the outcome-regression estimator deliberately reports no
variance (no distributional theory backs one).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .data import Observations
from .interference import InterferenceFit

__all__ = [
    "PropensityModel",
    "EffectEstimate",
    "estimate_propensity",
    "estimate_or",
    "estimate_dr",
    "variance_conservative",
    "variance_plugin",
    "estimate_tau_of_x",
    "tau_for_nodes",
    "estimate_adte",
    "fit_digest",
    "estimate_report",
]


@dataclass(frozen=True, eq=False)
class PropensityModel:
    """Treatment-probability model: constant, per-stratum frequency, or supplied.

    Stratified and supplied propensities are clipped into
    [clip, 1 - clip]; a constant is passed through untouched so that a
    known-zero propensity keeps the DR correction exactly off.
    """

    kind: str
    e0: float | None = None
    values: np.ndarray | None = None
    clip: float = 0.01

    def __post_init__(self):
        if self.kind not in ("constant", "stratified", "supplied"):
            raise ValueError(f"unknown propensity kind {self.kind!r}")
        if not 0.0 < self.clip < 0.5:
            raise ValueError("clip must be in (0, 0.5)")
        if self.kind == "constant":
            if self.e0 is None or not 0.0 <= self.e0 <= 1.0:
                raise ValueError("constant propensity requires e0 in [0, 1]")
        if self.kind == "supplied" and self.values is None:
            raise ValueError("supplied propensity requires per-node values")

    @classmethod
    def constant(cls, e0: float, clip: float = 0.01) -> "PropensityModel":
        return cls(kind="constant", e0=e0, clip=clip)

    @classmethod
    def stratified(cls, clip: float = 0.01) -> "PropensityModel":
        return cls(kind="stratified", clip=clip)

    @classmethod
    def supplied(cls, values, clip: float = 0.01) -> "PropensityModel":
        return cls(kind="supplied", values=np.asarray(values, dtype=np.float64), clip=clip)


@dataclass(frozen=True)
class EffectEstimate:
    """A point estimate with (optionally) variance and a normal interval."""

    method: str
    tau_hat: float
    n_treated: int
    variance: float | None = None
    variance_kind: str = "none"
    ci_low: float | None = None
    ci_high: float | None = None
    level: float | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "tau_hat": self.tau_hat,
            "n_treated": self.n_treated,
            "variance": self.variance,
            "variance_kind": self.variance_kind,
            "ci": None if self.ci_low is None else [self.ci_low, self.ci_high],
            "level": self.level,
        }


def estimate_propensity(obs: Observations, model: PropensityModel) -> np.ndarray:
    """Per-node treatment probabilities under ``model``."""
    if model.kind == "constant":
        return np.full(obs.n, float(model.e0))
    if model.kind == "supplied":
        values = model.values
        if values.shape[0] != obs.n:
            raise ValueError("supplied propensities must cover every node")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError("supplied propensities must lie in [0, 1]")
        return np.clip(values, model.clip, 1.0 - model.clip)
    e = np.empty(obs.n)
    for s in np.unique(obs.x):
        mask = obs.x == s
        if not mask.any():
            raise ValueError(f"empty stratum {int(s)}")
        e[mask] = obs.z[mask].mean()
    return np.clip(e, model.clip, 1.0 - model.clip)


def _residuals(obs: Observations, fit_result: InterferenceFit) -> np.ndarray:
    if fit_result.n != obs.n:
        raise ValueError("fit and observations disagree on node count")
    return obs.y - fit_result.f_hat


def _control_odds(z, e) -> np.ndarray:
    """e/(1-e) on controls, 0 on treated (where the weight is never used)."""
    if np.any((z == 0) & (e >= 1.0)):
        raise ValueError("propensity 1 on a control node leaves its weight undefined")
    return np.where(z == 0, e / np.where(z == 0, 1.0 - e, 1.0), 0.0)


def estimate_or(obs: Observations, fit_result: InterferenceFit) -> EffectEstimate:
    """Mean interference-adjusted outcome over treated nodes. No variance."""
    n1 = obs.n_treated
    if n1 == 0:
        raise ValueError("no treated units")
    resid = _residuals(obs, fit_result)
    tau = float(np.sum(obs.z * resid) / n1)
    return EffectEstimate(method="OR", tau_hat=tau, n_treated=n1)


def estimate_dr(obs: Observations, fit_result: InterferenceFit, propensities,
                level: float = 0.95) -> EffectEstimate:
    """Doubly-robust point estimate with the conservative variance.

    The control correction is normalized by the treated count, exactly as
    the estimating equation is written; the CI uses the sqrt(variance /
    n_treated) scaling of the limiting normal.
    """
    n1 = obs.n_treated
    if n1 == 0:
        raise ValueError("no treated units")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    e = np.asarray(propensities, dtype=np.float64)
    resid = _residuals(obs, fit_result)
    odds = _control_odds(obs.z, e)
    tau = float(np.sum(obs.z * resid - resid * (1 - obs.z) * odds) / n1)
    var = variance_conservative(obs, fit_result, e, tau)
    half = NormalDist().inv_cdf(0.5 + level / 2.0) * (var / n1) ** 0.5
    return EffectEstimate(
        method="DR",
        tau_hat=tau,
        n_treated=n1,
        variance=var,
        variance_kind="conservative",
        ci_low=tau - half,
        ci_high=tau + half,
        level=level,
    )


def _score_variance(obs, resid, odds, tau_per_node) -> float:
    scores = obs.z * (resid - tau_per_node) - resid * (1 - obs.z) * odds
    return float(np.sum(scores * scores) / obs.n_treated)


def variance_conservative(obs: Observations, fit_result: InterferenceFit,
                          propensities, tau_hat: float) -> float:
    """Mean squared score with a single pooled effect; upward-biased under
    heterogeneous effects, hence conservative."""
    if obs.n_treated == 0:
        raise ValueError("no treated units")
    resid = _residuals(obs, fit_result)
    odds = _control_odds(obs.z, np.asarray(propensities, dtype=np.float64))
    return _score_variance(obs, resid, odds, float(tau_hat))


def variance_plugin(obs: Observations, fit_result: InterferenceFit,
                    propensities, tau_per_node) -> float:
    """Squared-score variance with node-level effect estimates plugged in."""
    if obs.n_treated == 0:
        raise ValueError("no treated units")
    tau_i = np.asarray(tau_per_node, dtype=np.float64)
    if tau_i.shape[0] != obs.n:
        raise ValueError("tau_per_node must cover every node")
    resid = _residuals(obs, fit_result)
    odds = _control_odds(obs.z, np.asarray(propensities, dtype=np.float64))
    return _score_variance(obs, resid, odds, tau_i)


def estimate_tau_of_x(obs: Observations, fit_result: InterferenceFit) -> dict:
    """Per-stratum mean of treated residuals: the effect-by-covariate model."""
    resid = _residuals(obs, fit_result)
    out = {}
    missing = []
    for s in np.unique(obs.x):
        mask = (obs.x == s) & (obs.z == 1)
        if not mask.any():
            missing.append(int(s))
        else:
            out[int(s)] = float(resid[mask].mean())
    if missing:
        raise ValueError(f"strata without treated units: {missing}")
    return out


def tau_for_nodes(tau_by_stratum: dict, x) -> np.ndarray:
    """Expand a per-stratum effect table to node level."""
    x = np.asarray(x)
    missing = sorted({int(s) for s in np.unique(x)} - set(tau_by_stratum))
    if missing:
        raise ValueError(f"no effect estimate for strata: {missing}")
    return np.array([tau_by_stratum[int(s)] for s in x], dtype=np.float64)


def estimate_adte(obs: Observations, fit_result: InterferenceFit, propensities,
                  tau_by_stratum: dict) -> tuple:
    """All-units direct effect, three ways.

    OR-a averages the stratum effect model; OR-b uses observed residuals on
    the treated and the model on controls; DR adds the propensity-weighted
    corrections. The weights divide by e and 1-e, so propensities must be
    strictly inside (0, 1). No variance is attached to any of the three.
    """
    e = np.asarray(propensities, dtype=np.float64)
    if np.any(e <= 0.0) or np.any(e >= 1.0):
        raise ValueError("ADTE estimators need propensities strictly inside (0, 1)")
    tau_i = tau_for_nodes(tau_by_stratum, obs.x)
    resid = _residuals(obs, fit_result)
    z = obs.z
    n1 = obs.n_treated
    or_a = float(np.mean(tau_i))
    or_b = float(np.mean(z * resid + (1 - z) * tau_i))
    dr = float(np.mean(tau_i + z * (resid - tau_i) / e - (1 - z) * resid / (1.0 - e)))
    return (
        EffectEstimate(method="ADTE-OR-a", tau_hat=or_a, n_treated=n1),
        EffectEstimate(method="ADTE-OR-b", tau_hat=or_b, n_treated=n1),
        EffectEstimate(method="ADTE-DR", tau_hat=dr, n_treated=n1),
    )


def fit_digest(fit_result: InterferenceFit) -> str:
    """Hash of the kept-key table, for reproducibility audits."""
    h = hashlib.sha256()
    for key in sorted(fit_result.tree.keys(), key=lambda k: (len(k), k)):
        s = fit_result.tree[key]
        h.update(f"{key}|{s.n_controls}|{s.f_hat.hex()}|{s.radius.hex()}\n".encode())
    return h.hexdigest()


def estimate_report(estimate: EffectEstimate, fit_result: InterferenceFit,
                    config_echo: dict | None = None) -> dict:
    """JSON-ready single-estimate report with the fit digest."""
    out = {"schema_version": 1}
    out.update(estimate.to_dict())
    out["fit_digest"] = fit_digest(fit_result)
    if config_echo:
        out["config"] = config_echo
    return out
