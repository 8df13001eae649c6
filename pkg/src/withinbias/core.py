"""Panel data model shared by both simulations and the estimators.

A panel stores the full data-generating sample S0 (every spell observed over
``t = 1..tau_bar``) as dense ``(n, tau_bar)`` arrays.  The observed sample S1
is the subset ``t <= t_obs`` of each spell and is exposed as a boolean mask,
so both views always come from the same draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, TextIO

import numpy as np

BEYOND_WINDOW = -1

EXIT_COLUMNS = ("hazard", "y")
JOBSEARCH_COLUMNS = ("xi", "A", "C", "O")


@dataclass(frozen=True)
class SpellMeta:
    id: int
    alpha: float
    tau: int  # BEYOND_WINDOW when no exit inside the window
    t_obs: int
    censored: bool


@dataclass(frozen=True)
class ExitRow:
    id: int
    t: int
    hazard: float
    y: int


@dataclass(frozen=True)
class JobSearchRow:
    id: int
    t: int
    xi: float
    a_count: int
    c_count: int
    o_count: int
    exit_here: bool


@dataclass(frozen=True, eq=False)
class Panel:
    """Immutable balanced panel over the full observation window.

    Attributes
    ----------
    kind : {"exit", "jobsearch"}
    tau_bar : int
        Right-censoring duration.
    alpha : ndarray, shape (n,)
        Heterogeneity parameter per spell.
    tau : ndarray of int, shape (n,)
        Exit period, or ``BEYOND_WINDOW``.
    outcomes : dict of ndarray, each shape (n, tau_bar)
        Row-level columns of S0.  Row ``(i, t)`` lives at ``[i, t - 1]``.
    config : object
        Generating configuration (``Sim1Config`` / ``Sim2Config``) or None.
    """

    kind: str
    tau_bar: int
    alpha: np.ndarray
    tau: np.ndarray
    outcomes: dict[str, np.ndarray]
    config: Any = None
    origin: tuple[int, int] | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.tau_bar < 1:
            raise ValueError("tau_bar must be >= 1")
        n = self.alpha.shape[0]
        if self.tau.shape != (n,):
            raise ValueError("tau must have one entry per spell")
        bad = (self.tau != BEYOND_WINDOW) & ((self.tau < 1) | (self.tau > self.tau_bar))
        if bad.any():
            raise ValueError("tau must be in 1..tau_bar or BEYOND_WINDOW")
        for name, arr in self.outcomes.items():
            if arr.shape != (n, self.tau_bar):
                raise ValueError(f"outcome {name!r} has shape {arr.shape}, expected {(n, self.tau_bar)}")
            arr.setflags(write=False)
        self.alpha.setflags(write=False)
        self.tau.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.alpha.shape[0])

    @property
    def censored(self) -> np.ndarray:
        return self.tau == BEYOND_WINDOW

    @property
    def t_obs(self) -> np.ndarray:
        return np.where(self.censored, self.tau_bar, self.tau)

    @property
    def t_grid(self) -> np.ndarray:
        return np.arange(1, self.tau_bar + 1)

    @property
    def s1_mask(self) -> np.ndarray:
        if "s1_mask" not in self._cache:
            m = self.t_grid[None, :] <= self.t_obs[:, None]
            m.setflags(write=False)
            self._cache["s1_mask"] = m
        return self._cache["s1_mask"]

    def sample_mask(self, sample: str) -> np.ndarray:
        if sample == "S1":
            return self.s1_mask
        if sample == "S0":
            return np.ones((self.n, self.tau_bar), dtype=bool)
        raise ValueError(f"unknown sample {sample!r}")

    def spells(self) -> list[SpellMeta]:
        t_obs = self.t_obs
        return [
            SpellMeta(i, float(self.alpha[i]), int(self.tau[i]), int(t_obs[i]), bool(self.tau[i] == BEYOND_WINDOW))
            for i in range(self.n)
        ]

    def rows(self, sample: str = "S0") -> Iterator[ExitRow | JobSearchRow]:
        """Row records ordered by (id, t)."""
        mask = self.sample_mask(sample)
        o = self.outcomes
        for i in range(self.n):
            for j in range(self.tau_bar):
                if not mask[i, j]:
                    break
                if self.kind == "exit":
                    yield ExitRow(i, j + 1, float(o["hazard"][i, j]), int(o["y"][i, j]))
                else:
                    oc = int(o["O"][i, j])
                    yield JobSearchRow(i, j + 1, float(o["xi"][i, j]), int(o["A"][i, j]),
                                       int(o["C"][i, j]), oc, oc >= 1)


def s1_view(panel: Panel) -> Iterator[ExitRow | JobSearchRow]:
    """Rows of the attrition-truncated sample, ordered by (id, t)."""
    return panel.rows("S1")


def spell_lengths(panel: Panel) -> dict[int, tuple[int, bool]]:
    t_obs = panel.t_obs
    cens = panel.censored
    return {i: (int(t_obs[i]), bool(cens[i])) for i in range(panel.n)}


def exit_panel(alpha, tau, hazard, y, tau_bar: int, config=None) -> Panel:
    """Build an exit-indicator panel from explicit arrays (tests and toy checks)."""
    return Panel(
        kind="exit",
        tau_bar=tau_bar,
        alpha=np.asarray(alpha, dtype=float),
        tau=np.asarray(tau, dtype=np.int64),
        outcomes={"hazard": np.asarray(hazard, dtype=float), "y": np.asarray(y, dtype=np.int64)},
        config=config,
    )


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".9g")


def write_panel_csv(panel: Panel, fh: TextIO, header_comment: str | None = None) -> int:
    """Dump S0 as ``id,t,alpha,t_obs,censored,<outcome columns>``; returns row count."""
    cols = EXIT_COLUMNS if panel.kind == "exit" else JOBSEARCH_COLUMNS
    if header_comment:
        fh.write(f"# {header_comment}\n")
    fh.write(",".join(("id", "t", "alpha", "t_obs", "censored") + cols) + "\n")
    t_obs = panel.t_obs
    cens = panel.censored
    count = 0
    for i in range(panel.n):
        head = f"{i},{{t}},{_fmt(panel.alpha[i])},{int(t_obs[i])},{_fmt(bool(cens[i]))}"
        for j in range(panel.tau_bar):
            vals = ",".join(_fmt(panel.outcomes[c][i, j]) for c in cols)
            fh.write(head.format(t=j + 1) + "," + vals + "\n")
            count += 1
    return count
