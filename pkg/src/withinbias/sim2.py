"""Simulation II: a three-step job search process (applications, callbacks,
offers) with attrition at the first offer."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import rng
from .core import BEYOND_WINDOW, Panel


@dataclass(frozen=True)
class Sim2Config:
    n: int = 2000
    tau_bar: int = 15
    beta: float = -0.20
    gamma0: float = 7 / 50
    gamma1: float = -3 / 350
    gamma2: float = -1 / 1150
    psi: float = 0.3
    alpha_lo: float = 7.0
    alpha_hi: float = 14.0
    xi_lo: float = -1.0
    xi_hi: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.tau_bar < 1:
            raise ValueError("tau_bar must be >= 1")
        if not self.alpha_lo < self.alpha_hi:
            raise ValueError("alpha_lo must be < alpha_hi")
        if not self.xi_lo < self.xi_hi:
            raise ValueError("xi_lo must be < xi_hi")
        if not 0.0 <= self.psi <= 1.0:
            raise ValueError("psi must lie in [0, 1]")


def round_half_away(x):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def applications(alpha, t, xi, beta: float):
    """Application count: nearest integer of ``alpha + beta*(t-1) + xi``, floored at 0."""
    a = np.maximum(round_half_away(np.asarray(alpha) + beta * (np.asarray(t) - 1.0) + np.asarray(xi)), 0.0)
    a = a.astype(np.int64)
    return int(a) if a.ndim == 0 else a


def callback_prob(alpha, t, gamma0: float = 7 / 50, gamma1: float = -3 / 350, gamma2: float = -1 / 1150):
    """Per-application callback probability, linear in alpha and t, clipped to [0, 1]."""
    p = np.clip(gamma0 + gamma1 * np.asarray(alpha, dtype=float) + gamma2 * (np.asarray(t, dtype=float) - 1.0), 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def structural_mean_A(alpha, t, beta: float):
    """Conditional mean of applications, ignoring the rounding bias."""
    out = np.asarray(alpha, dtype=float) + beta * (np.asarray(t, dtype=float) - 1.0)
    return float(out) if out.ndim == 0 else out


def structural_mean_C(alpha, t, config: Sim2Config = Sim2Config()):
    return structural_mean_A(alpha, t, config.beta) * callback_prob(alpha, t, config.gamma0, config.gamma1, config.gamma2)


def generate_sim2(config: Sim2Config, base_seed: int, replication: int) -> Panel:
    """Generate one Simulation II panel.

    All three stages run through ``tau_bar`` for every spell (S0); the exit
    period is the first period with at least one offer.  Callbacks are drawn
    per application and offers per successful callback, each at its own
    stream address ``(purpose, t, application index)``.
    """
    n, tb = config.n, config.tau_bar
    keys = rng.stream_keys(base_seed, replication, np.arange(n, dtype=np.uint64))
    t = np.arange(1, tb + 1)

    alpha = config.alpha_lo + (config.alpha_hi - config.alpha_lo) * rng.uniform_at(keys, rng.address(rng.P_ALPHA))
    u_xi = rng.uniform_at(keys[:, None], rng.address(rng.P_XI, t[None, :]))
    xi = config.xi_lo + (config.xi_hi - config.xi_lo) * u_xi

    raw = round_half_away(alpha[:, None] + config.beta * (t[None, :] - 1.0) + xi)
    rho_raw = config.gamma0 + config.gamma1 * alpha[:, None] + config.gamma2 * (t[None, :] - 1.0)
    if (raw < 0).any():
        warnings.warn("application count clamped at zero for some rows", RuntimeWarning, stacklevel=2)
    if ((rho_raw < 0) | (rho_raw > 1)).any():
        warnings.warn("callback probability clipped to [0, 1] for some rows", RuntimeWarning, stacklevel=2)
    A = np.maximum(raw, 0).astype(np.int64)
    rho = np.clip(rho_raw, 0.0, 1.0)

    # expand to application level
    flat_A = A.ravel()
    total = int(flat_A.sum())
    cell = np.repeat(np.arange(flat_A.size), flat_A)
    starts = np.cumsum(flat_A) - flat_A
    item = np.arange(total) - starts[cell]
    spell = cell // tb
    period = cell % tb + 1
    app_keys = keys[spell]
    u_cb = rng.uniform_at(app_keys, rng.address(rng.P_CALLBACK, period, item))
    callback = u_cb < rho.ravel()[cell]
    u_off = rng.uniform_at(app_keys, rng.address(rng.P_OFFER, period, item))
    offer = callback & (u_off < config.psi)

    C = np.bincount(cell, weights=callback, minlength=flat_A.size).astype(np.int64).reshape(n, tb)
    O = np.bincount(cell, weights=offer, minlength=flat_A.size).astype(np.int64).reshape(n, tb)

    has_offer = O >= 1
    tau = np.where(has_offer.any(axis=1), has_offer.argmax(axis=1) + 1, BEYOND_WINDOW).astype(np.int64)

    return Panel(
        kind="jobsearch",
        tau_bar=tb,
        alpha=alpha,
        tau=tau,
        outcomes={"xi": xi, "A": A, "C": C, "O": O},
        config=config,
        origin=(int(base_seed), int(replication)),
    )


def calibration_checks(config: Sim2Config) -> dict[str, bool]:
    """Whether the zero floor on applications and the [0, 1] clip on the
    callback probability can bind anywhere in the support."""
    t_max = config.tau_bar - 1.0
    min_a = round_half_away(min(config.alpha_lo + config.beta * t_max, config.alpha_lo) + config.xi_lo)
    rho_vals = [
        config.gamma0 + config.gamma1 * a + config.gamma2 * s
        for a in (config.alpha_lo, config.alpha_hi)
        for s in (0.0, t_max)
    ]
    return {
        "applications_floor_binds": bool(min_a < 0),
        "callback_clip_binds": bool(min(rho_vals) < 0 or max(rho_vals) > 1),
    }
