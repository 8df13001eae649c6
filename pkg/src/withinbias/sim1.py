"""Simulation I: binary exit indicator from a heterogeneous discrete-time
survival process with logistic hazard."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .core import BEYOND_WINDOW, Panel

GAMMA_GRID = (0.05, 0.0, -0.02)


@dataclass(frozen=True)
class Sim1Config:
    n: int = 2000
    tau_bar: int = 15
    gamma: float = 0.0
    alpha_mean: float = 2.0
    nu_var: float = 0.5

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.tau_bar < 1:
            raise ValueError("tau_bar must be >= 1")
        if self.nu_var < 0:
            raise ValueError("nu_var must be >= 0")


def hazard(alpha, t, gamma: float):
    """Exit probability at duration ``t`` given survival to ``t``.

    ``1 / (1 + exp(alpha + gamma * (t - 1)))``; a higher ``alpha`` lowers the
    hazard and a positive ``gamma`` makes it fall with duration.
    """
    z = np.asarray(alpha, dtype=float) + gamma * (np.asarray(t, dtype=float) - 1.0)
    out = 1.0 / (1.0 + np.exp(z))
    return float(out) if np.ndim(out) == 0 else out


def survival(alpha, gamma: float, t: int):
    """Probability of reaching duration ``t``: product of ``1 - hazard`` over 1..t-1."""
    if t < 1:
        raise ValueError("t must be >= 1")
    ks = np.arange(1, t)
    alpha = np.asarray(alpha, dtype=float)
    if ks.size == 0:
        out = np.ones_like(alpha)
    else:
        out = np.prod(1.0 - hazard(alpha[..., None], ks, gamma), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def exit_time_from_uniform(u, hazards) -> np.ndarray:
    """Inverse transform on the survival function.

    ``hazards`` has shape ``(..., tau_bar)``; returns the first ``t`` with
    ``survival(t + 1) < u`` or ``BEYOND_WINDOW``.
    """
    surv_next = np.cumprod(1.0 - np.asarray(hazards, dtype=float), axis=-1)
    hit = surv_next < np.asarray(u, dtype=float)[..., None]
    any_hit = hit.any(axis=-1)
    first = hit.argmax(axis=-1) + 1
    return np.where(any_hit, first, BEYOND_WINDOW).astype(np.int64)


def sample_exit_time(stream: rng.RngStream, alpha: float, gamma: float, tau_bar: int) -> int:
    u = stream.uniforms(1)[0]
    lam = hazard(alpha, np.arange(1, tau_bar + 1), gamma)
    return int(exit_time_from_uniform(np.array(u), lam))


def generate_sim1(config: Sim1Config, base_seed: int, replication: int) -> Panel:
    """Generate one Simulation I panel.

    Per spell: ``alpha_i = alpha_mean + nu_i`` with ``nu_i ~ N(0, nu_var)``,
    an exit period by inverse transform sampling, and the exit indicator
    ``y``.  In S0, ``y`` after the exit period is continued with independent
    Bernoulli(hazard) draws so its S0 mean at every ``t`` tracks the hazard.
    """
    n, tb = config.n, config.tau_bar
    keys = rng.stream_keys(base_seed, replication, np.arange(n, dtype=np.uint64))
    z = rng.normal_at(keys, rng.address(rng.P_ALPHA))
    alpha = config.alpha_mean + np.sqrt(config.nu_var) * z if config.nu_var > 0 else np.full(n, config.alpha_mean)

    t = np.arange(1, tb + 1)
    lam = hazard(alpha[:, None], t[None, :], config.gamma)
    u = rng.uniform_at(keys, rng.address(rng.P_EXIT))
    tau = exit_time_from_uniform(u, lam)

    t_obs = np.where(tau == BEYOND_WINDOW, tb, tau)
    u_cont = rng.uniform_at(keys[:, None], rng.address(rng.P_Y_CONT, t[None, :]))
    y = np.where(t[None, :] > t_obs[:, None], (u_cont < lam).astype(np.int64), 0)
    exited = tau != BEYOND_WINDOW
    y[exited, tau[exited] - 1] = 1

    return Panel(
        kind="exit",
        tau_bar=tb,
        alpha=alpha,
        tau=tau,
        outcomes={"hazard": lam, "y": y},
        config=config,
        origin=(int(base_seed), int(replication)),
    )
