"""Mechanism diagnostics: dynamic selection and within-residual profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import long_data, structural_component, within_demean

BIN_KINDS = ("within_time", "lead")


@dataclass(frozen=True)
class SelectionCurve:
    mean_alpha_s0: np.ndarray
    mean_alpha_s1: np.ndarray


def dynamic_selection(panel) -> SelectionCurve:
    """Mean heterogeneity per duration in S0 (all spells) and among S1 survivors."""
    def curve(mask):
        with np.errstate(invalid="ignore", divide="ignore"):
            return (mask * panel.alpha[:, None]).sum(axis=0) / mask.sum(axis=0)

    # same arithmetic on both masks, so no attrition gives identical curves
    return SelectionCurve(curve(panel.sample_mask("S0")), curve(panel.s1_mask))


def bin_values(kind: str, tau_bar: int) -> np.ndarray:
    if kind == "within_time":
        return np.arange(-(tau_bar - 1), tau_bar) / 2.0
    if kind == "lead":
        return np.arange(-(tau_bar - 1), 1, dtype=float)
    raise ValueError(f"unknown bin kind {kind!r}")


@dataclass
class ResidualProfile:
    """Binned residual sums, pooled over any number of panels.

    Arrays are indexed ``[bin, censored]`` with ``censored`` 0 or 1.  Means
    are NaN (absent) where a bin has zero weight.
    """

    tau_bar: int
    sums: dict[str, np.ndarray]  # "<kind>:eps" / "<kind>:eps_within" -> (bins, 2)
    counts: dict[str, np.ndarray]  # "<kind>" -> (bins, 2)

    @classmethod
    def empty(cls, tau_bar: int) -> "ResidualProfile":
        nb = 2 * tau_bar - 1
        nl = tau_bar
        sums, counts = {}, {}
        for kind, size in (("within_time", nb), ("lead", nl)):
            sums[f"{kind}:eps"] = np.zeros((size, 2))
            sums[f"{kind}:eps_within"] = np.zeros((size, 2))
            counts[kind] = np.zeros((size, 2))
        return cls(tau_bar, sums, counts)

    def __add__(self, other: "ResidualProfile") -> "ResidualProfile":
        return ResidualProfile(
            self.tau_bar,
            {k: v + other.sums[k] for k, v in self.sums.items()},
            {k: v + other.counts[k] for k, v in self.counts.items()},
        )

    def mean(self, kind: str, which: str = "eps_within") -> np.ndarray:
        c = self.counts[kind]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(c > 0, self.sums[f"{kind}:{which}"] / np.where(c > 0, c, 1.0), np.nan)


def residuals(panel, outcome: str):
    """Raw and within-demeaned residuals over S1 rows, with row metadata."""
    m = structural_component(panel, outcome)
    d = long_data(panel, outcome, "S1", cells={"m": m})
    eps = d.y - d.extra["m"]
    eps_w = within_demean(eps, d.group, d.w)
    return d, eps, eps_w


def residual_profiles(panel, outcome: str) -> ResidualProfile:
    """Bin mean residuals by within-time and by periods until the last
    observation, separately for censored and non-censored spells.

    Residuals are the outcome minus its structural component (see
    :func:`withinbias.estimation.structural_component`).  For the callback
    rate the cells carry application weights.  Within-time bins use the
    unweighted ``t - (T_i + 1)/2`` half-integer grid.
    """
    tb = panel.tau_bar
    d, eps, eps_w = residuals(panel, outcome)
    T = panel.t_obs[d.group]
    cens = panel.censored[d.group].astype(np.int64)
    prof = ResidualProfile.empty(tb)
    idx = {
        "within_time": (2 * d.t - (T + 1)) + (tb - 1),
        "lead": d.t - T + (tb - 1),
    }
    for kind, b in idx.items():
        size = prof.counts[kind].shape[0]
        flat = b * 2 + cens
        prof.counts[kind] += np.bincount(flat, weights=d.w, minlength=2 * size).reshape(size, 2)
        prof.sums[f"{kind}:eps"] += np.bincount(flat, weights=d.w * eps, minlength=2 * size).reshape(size, 2)
        prof.sums[f"{kind}:eps_within"] += np.bincount(flat, weights=d.w * eps_w, minlength=2 * size).reshape(size, 2)
    return prof


def fe_bias_decomposition(panel, outcome: str) -> tuple[float, float]:
    """Bias term of the linear fixed-effects slope as (numerator, denominator).

    numerator = sum of (within residual - its overall mean) * within time,
    denominator = sum of squared within time (frequency weighted for the
    callback rate).  The fitted slope equals
    ``structural_within_slope + numerator / denominator``.
    """
    d, eps, eps_w = residuals(panel, outcome)
    t_w = within_demean(d.t.astype(float), d.group, d.w)
    eps_bar = np.sum(d.w * eps_w) / np.sum(d.w)
    num = float(np.sum(d.w * (eps_w - eps_bar) * t_w))
    den = float(np.sum(d.w * t_w ** 2))
    return num, den


def structural_within_slope(panel, outcome: str) -> float:
    """Within slope of the structural component on duration over S1.

    Equals the structural slope exactly when that component is linear in
    ``t`` (applications); otherwise it is the true-slope term the bias is
    measured against.
    """
    m = structural_component(panel, outcome)
    d = long_data(panel, outcome, "S1", cells={"m": m})
    t_w = within_demean(d.t.astype(float), d.group, d.w)
    m_w = within_demean(d.extra["m"], d.group, d.w)
    with np.errstate(invalid="ignore", divide="ignore"):
        return float(np.sum(d.w * m_w * t_w) / np.sum(d.w * t_w ** 2))
