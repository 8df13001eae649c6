"""Duration-dependence regressions on simulated panels.

Three estimators are supported on either sample:

* pooled OLS on duration only (``control="none"``),
* pooled OLS adding the true heterogeneity ``alpha_i`` or a noisy proxy of it,
* the fixed-effects (within) estimator, implemented by demeaning within
  spell and solving a small system without an intercept.

Duration enters linearly (one slope on ``t``) or saturated (dummies for
``t = 2..tau_bar``, ``t = 1`` omitted).  The callback rate is an
application-level outcome; it is fitted at the ``(i, t)`` level on the cell
mean ``C/A`` with frequency weight ``A``, which gives the same coefficients
as the expanded 0/1 regression.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import rng

OUTCOMES = ("exit_y", "applications_A", "callback_rate_c", "callbacks_C")
SIM2_OUTCOMES = ("applications_A", "callback_rate_c", "callbacks_C")
FORMS = ("linear", "saturated")
CONTROLS = ("none", "true_alpha", "noisy_alpha", "fixed_effects")
SAMPLES = ("S0", "S1")

_PANEL_KIND = {
    "exit_y": "exit",
    "applications_A": "jobsearch",
    "callback_rate_c": "jobsearch",
    "callbacks_C": "jobsearch",
}


class RankDeficientError(ValueError):
    """Raised when a design column is (numerically) collinear with earlier ones."""

    def __init__(self, column: str, message: str | None = None):
        self.column = column
        super().__init__(message or f"design is rank deficient: column {column!r} is collinear with earlier columns")


@dataclass(frozen=True)
class RegressionSpec:
    outcome: str
    duration_form: str = "saturated"
    control: str = "none"
    sigma_eta: float = 0.0
    sample: str = "S1"

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if self.duration_form not in FORMS:
            raise ValueError(f"unknown duration form {self.duration_form!r}")
        if self.control not in CONTROLS:
            raise ValueError(f"unknown control {self.control!r}")
        if self.sample not in SAMPLES:
            raise ValueError(f"unknown sample {self.sample!r}")
        if self.sigma_eta < 0:
            raise ValueError("sigma_eta must be >= 0")

    @property
    def label(self) -> str:
        if self.control == "none":
            return "OLS"
        if self.control == "true_alpha":
            return "OLS+alpha"
        if self.control == "noisy_alpha":
            return f"OLS+proxy({self.sigma_eta:g})"
        return "FE"

    @property
    def slug(self) -> str:
        """Filename-safe short name: ols, ols_alpha, ols_proxy_<sd>, fe."""
        if self.control == "none":
            return "ols"
        if self.control == "true_alpha":
            return "ols_alpha"
        if self.control == "noisy_alpha":
            return f"ols_proxy_{self.sigma_eta:g}"
        return "fe"

    @property
    def control_label(self) -> str:
        if self.control == "noisy_alpha":
            return f"noisy_alpha:{self.sigma_eta:g}"
        return self.control


@dataclass(frozen=True)
class DurationProfile:
    """Level profile over ``t = 1..tau_bar``.

    ``anchor`` says how the level was pinned down; ``slope`` is set for
    linear profiles.
    """

    levels: np.ndarray
    anchor: str
    anchor_level: float
    slope: float | None = None


@dataclass
class FitResult:
    spec: RegressionSpec
    coefficients: dict[str, float]
    n_obs: float
    tau_bar: int
    profile: DurationProfile | None = None
    proxy_corr: float | None = None

    def duration_effects(self) -> np.ndarray:
        """Effect of duration relative to ``t = 1`` for every ``t``."""
        if self.spec.duration_form == "linear":
            return self.coefficients["t"] * np.arange(self.tau_bar, dtype=float)
        return np.array([0.0] + [self.coefficients[f"t={t}"] for t in range(2, self.tau_bar + 1)])

    @property
    def slope(self) -> float:
        return self.coefficients["t"]


# within transformation -------------------------------------------------------

def within_time(T: int) -> np.ndarray:
    """Demeaned duration ``t - (T + 1)/2`` for ``t = 1..T``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    return np.arange(1, T + 1, dtype=float) - (T + 1) / 2.0


def group_means(values, groups, weights=None, minlength: int = 0) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    groups = np.asarray(groups)
    w = np.ones_like(values) if weights is None else np.asarray(weights, dtype=float)
    tot = np.bincount(groups, weights=w, minlength=minlength)
    s = np.bincount(groups, weights=w * values, minlength=minlength)
    with np.errstate(invalid="ignore", divide="ignore"):
        return s / tot


def within_demean(values, groups, weights=None) -> np.ndarray:
    """Subtract the (optionally frequency-weighted) group mean from each value.

    ``values`` may be 1-D or 2-D (columns demeaned independently).  Every
    group that appears must carry positive total weight.
    """
    values = np.asarray(values, dtype=float)
    groups = np.asarray(groups, dtype=np.int64)
    if values.shape[0] != groups.shape[0]:
        raise ValueError("values and groups must have the same length")
    if values.shape[0] == 0:
        return values.copy()
    w = np.ones(groups.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    tot = np.bincount(groups, weights=w)
    present = np.bincount(groups) > 0
    if (tot[present] <= 0).any():
        raise ValueError("empty group: every group needs positive total weight")
    safe = np.where(tot > 0, tot, 1.0)
    if values.ndim == 1:
        return values - (np.bincount(groups, weights=w * values) / safe)[groups]
    out = np.empty_like(values)
    for j in range(values.shape[1]):
        out[:, j] = values[:, j] - (np.bincount(groups, weights=w * values[:, j]) / safe)[groups]
    return out


# solver -----------------------------------------------------------------------

def _checked_cholesky(G: np.ndarray, names, tol: float) -> np.ndarray:
    k = G.shape[0]
    L = np.zeros_like(G)
    for j in range(k):
        s = G[j, j] - L[j, :j] @ L[j, :j]
        if s <= tol:
            raise RankDeficientError(names[j])
        L[j, j] = np.sqrt(s)
        if j + 1 < k:
            L[j + 1:, j] = (G[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def least_squares(design, response, weights=None, names=None, tol: float = 1e-10) -> np.ndarray:
    """Weighted least squares via a checked Cholesky factorization.

    Minimizes ``sum(w * (y - X b)**2)``.  Columns are equilibrated before
    factorizing the normal matrix; a pivot below ``tol`` (one minus the
    R-squared of that column on the previous ones) raises
    :class:`RankDeficientError` naming the column.  One step of iterative
    refinement is applied.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2:
        raise ValueError("design must be 2-D")
    n, k = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(k)]
    if len(names) != k:
        raise ValueError("one name per column required")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if (w < 0).any():
        raise ValueError("weights must be non-negative")

    Xw = X * w[:, None]
    G = X.T @ Xw
    d = np.sqrt(np.diag(G))
    for j in range(k):
        if not d[j] > 0:
            raise RankDeficientError(names[j])
    Gs = G / np.outer(d, d)
    L = _checked_cholesky(Gs, names, tol)

    def solve(rhs):
        z = solve_triangular(L, rhs / d, lower=True)
        return solve_triangular(L.T, z, lower=False) / d

    b = solve(Xw.T @ y)
    b = b + solve(Xw.T @ (y - X @ b))
    return b


# data access ------------------------------------------------------------------

def _check_outcome(panel, outcome: str) -> None:
    if _PANEL_KIND[outcome] != panel.kind:
        raise ValueError(f"outcome {outcome!r} is not available in a {panel.kind!r} panel")


def outcome_cells(panel, outcome: str) -> tuple[np.ndarray, np.ndarray]:
    """Outcome value and frequency weight per ``(i, t)`` cell, shape ``(n, tau_bar)``."""
    _check_outcome(panel, outcome)
    o = panel.outcomes
    if outcome == "exit_y":
        return o["y"].astype(float), np.ones(o["y"].shape)
    if outcome == "applications_A":
        return o["A"].astype(float), np.ones(o["A"].shape)
    if outcome == "callbacks_C":
        return o["C"].astype(float), np.ones(o["C"].shape)
    A = o["A"].astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(A > 0, o["C"] / np.where(A > 0, A, 1.0), 0.0)
    return c, A


def structural_component(panel, outcome: str) -> np.ndarray:
    """Conditional mean of the outcome given the structural inputs, per cell.

    exit indicator: the hazard; applications: ``alpha + beta*(t-1)``;
    callback rate: the callback probability; callbacks: realized
    applications times the callback probability.
    """
    _check_outcome(panel, outcome)
    if outcome == "exit_y":
        return np.asarray(panel.outcomes["hazard"], dtype=float)
    from .sim2 import callback_prob, structural_mean_A

    cfg = panel.config
    t = panel.t_grid[None, :]
    a = panel.alpha[:, None]
    if outcome == "applications_A":
        return np.broadcast_to(structural_mean_A(a, t, cfg.beta), (panel.n, panel.tau_bar)).copy()
    rho = np.broadcast_to(callback_prob(a, t, cfg.gamma0, cfg.gamma1, cfg.gamma2), (panel.n, panel.tau_bar))
    if outcome == "callback_rate_c":
        return rho.copy()
    return panel.outcomes["A"] * rho


@dataclass
class LongData:
    """Flattened rows of one sample, ordered by (id, t); zero-weight rows dropped."""

    y: np.ndarray
    w: np.ndarray
    t: np.ndarray
    group: np.ndarray
    alpha: np.ndarray
    extra: dict = field(default_factory=dict)


def long_data(panel, outcome: str, sample: str = "S1", cells: dict | None = None) -> LongData:
    key = ("long", outcome, sample)
    if cells is None and key in panel._cache:
        return panel._cache[key]
    y2, w2 = outcome_cells(panel, outcome)
    mask = panel.sample_mask(sample) & (w2 > 0)
    t2 = np.broadcast_to(panel.t_grid[None, :], mask.shape)
    g2 = np.broadcast_to(np.arange(panel.n)[:, None], mask.shape)
    extra = {k: np.asarray(v)[mask] for k, v in (cells or {}).items()}
    group = g2[mask].astype(np.int64)
    d = LongData(
        y=y2[mask], w=w2[mask], t=t2[mask].astype(np.int64), group=group,
        alpha=panel.alpha[group], extra=extra,
    )
    if cells is None:
        panel._cache[key] = d
    return d


def duration_regressors(t: np.ndarray, tau_bar: int, form: str) -> tuple[np.ndarray, list[str]]:
    if form == "linear":
        return t.astype(float)[:, None], ["t"]
    cols = np.arange(2, tau_bar + 1)
    return (t[:, None] == cols[None, :]).astype(float), [f"t={s}" for s in cols]


def _pooled_design(panel, d: LongData, spec: RegressionSpec):
    key = ("pooled", spec.outcome, spec.sample, spec.duration_form)
    if key not in panel._cache:
        D, dnames = duration_regressors(d.t, panel.tau_bar, spec.duration_form)
        X = np.empty((D.shape[0], D.shape[1] + 1))
        X[:, 0] = 1.0
        X[:, 1:] = D
        panel._cache[key] = (X, ["const"] + dnames)
    return panel._cache[key]


def _within_design(panel, d: LongData, spec: RegressionSpec):
    key = ("within", spec.outcome, spec.sample, spec.duration_form)
    if key not in panel._cache:
        D, dnames = duration_regressors(d.t, panel.tau_bar, spec.duration_form)
        panel._cache[key] = (within_demean(D, d.group, d.w), within_demean(d.y, d.group, d.w), dnames)
    return panel._cache[key]


def _proxy_noise(panel, proxy_noise):
    if proxy_noise is not None:
        z = np.asarray(proxy_noise, dtype=float)
        if z.shape != (panel.n,):
            raise ValueError("proxy_noise needs one draw per spell")
        return z
    if panel.origin is None:
        raise ValueError("panel has no stream origin; pass proxy_noise explicitly")
    return rng.proxy_shocks(panel.origin[0], panel.origin[1], panel.n)


def fit(panel, spec: RegressionSpec, proxy_noise=None, anchor_level: float | None = None) -> FitResult:
    """Fit one regression specification on a panel.

    The returned profile is anchored at ``anchor_level`` (default: the S0
    structural mean at ``t = 1``) plus the estimated duration effects.
    """
    d = long_data(panel, spec.outcome, spec.sample)
    proxy_corr = None

    if spec.control == "fixed_effects":
        X, y, names = _within_design(panel, d, spec)
    else:
        base, names = _pooled_design(panel, d, spec)
        if spec.control == "none":
            X = base
        else:
            if spec.control == "true_alpha":
                extra = d.alpha
                names = names + ["alpha"]
            else:
                z = _proxy_noise(panel, proxy_noise)
                proxy = panel.alpha + spec.sigma_eta * z
                proxy_corr = float(np.corrcoef(proxy, panel.alpha)[0, 1]) if spec.sigma_eta > 0 else 1.0
                extra = proxy[d.group]
                names = names + ["alpha_proxy"]
            X = np.empty((base.shape[0], base.shape[1] + 1))
            X[:, :-1] = base
            X[:, -1] = extra
        y = d.y

    b = least_squares(X, y, d.w, names)
    res = FitResult(
        spec=spec,
        coefficients=dict(zip(names, map(float, b))),
        n_obs=float(d.w.sum()),
        tau_bar=panel.tau_bar,
        proxy_corr=proxy_corr,
    )
    if anchor_level is None:
        anchor_level = float(structural_profile(panel, spec.outcome).levels[0])
        desc = "S0 structural mean at t=1"
    else:
        desc = "supplied level at t=1"
    res.profile = profile_from_fit(res, anchor_level, desc)
    return res


def profile_from_fit(fit: FitResult, anchor_level: float, anchor: str = "supplied level at t=1") -> DurationProfile:
    levels = anchor_level + fit.duration_effects()
    slope = fit.coefficients["t"] if fit.spec.duration_form == "linear" else None
    return DurationProfile(levels=levels, anchor=anchor, anchor_level=float(anchor_level), slope=slope)


def structural_profile(panel, outcome: str, form: str = "saturated") -> DurationProfile:
    """Structural benchmark measured in S0.

    Saturated: the per-duration S0 mean (for the exit indicator, of the
    hazard; for the callback rate, averaged over job seekers).  Linear: the
    pooled S0 regression of the same quantity on ``(1, t)``.
    """
    key = ("structural", outcome, form)
    if key in panel._cache:
        return panel._cache[key]
    panel._cache[key] = prof = _structural_profile(panel, outcome, form)
    return prof


def benchmark_cells(panel, outcome: str) -> tuple[np.ndarray, np.ndarray]:
    """Values and weights used for the structural and empirical mean profiles.

    Like :func:`outcome_cells`, except that the exit indicator is replaced
    by its hazard and the callback rate is averaged over job seekers (each
    cell with at least one application weighs one), so that its mean at a
    given ``t`` is the average callback probability across individuals.
    """
    y2, w2 = outcome_cells(panel, outcome)
    if outcome == "callback_rate_c":
        return y2, (w2 > 0).astype(float)
    return y2, w2


def _structural_profile(panel, outcome: str, form: str) -> DurationProfile:
    y2, w2 = benchmark_cells(panel, outcome)
    if outcome == "exit_y":
        y2 = np.asarray(panel.outcomes["hazard"], dtype=float)
    if form == "saturated":
        with np.errstate(invalid="ignore", divide="ignore"):
            levels = (w2 * y2).sum(axis=0) / w2.sum(axis=0)
        return DurationProfile(levels=levels, anchor="S0 per-duration mean", anchor_level=float(levels[0]))
    t2 = np.broadcast_to(panel.t_grid[None, :], y2.shape).astype(float)
    keep = w2 > 0
    X = np.column_stack([np.ones(keep.sum()), t2[keep]])
    b = least_squares(X, y2[keep], w2[keep], ["const", "t"])
    levels = b[0] + b[1] * panel.t_grid
    return DurationProfile(levels=levels, anchor="S0 pooled OLS on (1, t)", anchor_level=float(levels[0]), slope=float(b[1]))


def empirical_profile(panel, outcome: str, sample: str = "S1") -> np.ndarray:
    """Per-duration mean of the observed outcome (NaN where no rows)."""
    y2, w2 = benchmark_cells(panel, outcome)
    w = np.where(panel.sample_mask(sample), w2, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return (w * y2).sum(axis=0) / w.sum(axis=0)
