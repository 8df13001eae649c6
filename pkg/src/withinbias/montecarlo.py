"""Replication harness and percentile-band aggregation."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .diagnostics import (
    ResidualProfile,
    dynamic_selection,
    fe_bias_decomposition,
    residual_profiles,
    structural_within_slope,
)
from .estimation import (
    SIM2_OUTCOMES,
    RankDeficientError,
    RegressionSpec,
    empirical_profile,
    fit,
    structural_profile,
)
from .sim1 import Sim1Config, generate_sim1
from .sim2 import Sim2Config, generate_sim2

log = logging.getLogger(__name__)

PERCENTILES = (1, 5, 10, 90, 95, 99)
SHORT = {"exit_y": "y", "applications_A": "A", "callback_rate_c": "c", "callbacks_C": "C"}


class ReplicationError(RuntimeError):
    def __init__(self, k_index: int, spec, cause: Exception):
        self.k_index = k_index
        self.spec = spec
        super().__init__(f"replication {k_index}, spec {spec}: {cause}")


def percentile(sorted_values, p: int) -> float:
    """Nearest-rank percentile: the value at 1-based index ceil(p/100 * k)."""
    k = len(sorted_values)
    if k == 0:
        raise ValueError("percentile of empty input")
    if not 0 < p <= 100 or int(p) != p:
        raise ValueError("p must be an integer in 1..100")
    rank = max(1, -(-int(p) * k // 100))
    return float(sorted_values[rank - 1])


def outcomes_for(scenario) -> tuple[str, ...]:
    return ("exit_y",) if isinstance(scenario, Sim1Config) else SIM2_OUTCOMES


def default_specs(scenario, proxy_sds=()) -> tuple[RegressionSpec, ...]:
    specs = []
    for outcome in outcomes_for(scenario):
        for form in ("linear", "saturated"):
            specs.append(RegressionSpec(outcome, form, "none"))
            specs.append(RegressionSpec(outcome, form, "true_alpha"))
            for s in proxy_sds:
                specs.append(RegressionSpec(outcome, form, "noisy_alpha", sigma_eta=float(s)))
            specs.append(RegressionSpec(outcome, form, "fixed_effects"))
    return tuple(specs)


@dataclass(frozen=True)
class McConfig:
    scenario: Sim1Config | Sim2Config
    k: int = 200
    base_seed: int = 20240917
    specs: tuple[RegressionSpec, ...] = ()
    proxy_sds: tuple[float, ...] = ()
    percentiles: tuple[int, ...] = PERCENTILES

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if tuple(self.percentiles) != PERCENTILES:
            raise ValueError(f"percentile set must be exactly {PERCENTILES}")
        if any(s < 0 for s in self.proxy_sds):
            raise ValueError("proxy standard deviations must be >= 0")
        if not self.specs:
            object.__setattr__(self, "specs", default_specs(self.scenario, self.proxy_sds))

    @property
    def tau_bar(self) -> int:
        return self.scenario.tau_bar


@dataclass
class ReplicationResult:
    k_index: int
    series: dict[str, np.ndarray]
    scalars: dict[str, float]
    estimates: list[tuple]  # (form, outcome, spec, control, t, coef, level)
    residuals: dict[str, ResidualProfile]


def generate(scenario, base_seed: int, k_index: int):
    if isinstance(scenario, Sim1Config):
        return generate_sim1(scenario, base_seed, k_index)
    return generate_sim2(scenario, base_seed, k_index)


def run_replication(config: McConfig, k_index: int) -> ReplicationResult:
    """Generate one panel and compute every fit and diagnostic on it."""
    panel = generate(config.scenario, config.base_seed, k_index)
    tb = panel.tau_bar
    series: dict[str, np.ndarray] = {}
    scalars: dict[str, float] = {}
    estimates: list[tuple] = []
    resid: dict[str, ResidualProfile] = {}

    sel = dynamic_selection(panel)
    series["alpha_s0"] = sel.mean_alpha_s0
    series["alpha_s1"] = sel.mean_alpha_s1

    proxy = rng.proxy_shocks(config.base_seed, k_index, panel.n) if config.proxy_sds or any(
        s.control == "noisy_alpha" for s in config.specs) else None
    t_grid = np.arange(1, tb + 1)

    for outcome in outcomes_for(config.scenario):
        o = SHORT[outcome]
        sat = structural_profile(panel, outcome, "saturated")
        lin = structural_profile(panel, outcome, "linear")
        series[f"structural_{o}"] = sat.levels
        series[f"empirical_{o}"] = empirical_profile(panel, outcome)
        scalars[f"structural_slope_{o}"] = lin.slope
        for t, lev in zip(t_grid, sat.levels):
            estimates.append(("saturated", outcome, "structural", "none", int(t), float(lev - sat.levels[0]), float(lev)))
        estimates.append(("linear", outcome, "structural", "none", 0, lin.slope, lin.anchor_level))
        for t, lev in zip(t_grid, lin.levels):
            estimates.append(("linear", outcome, "structural", "none", int(t), float(lin.slope * (t - 1)), float(lev)))

        num, den = fe_bias_decomposition(panel, outcome)
        scalars[f"fe_bias_num_{o}"] = num
        scalars[f"fe_bias_den_{o}"] = den
        scalars[f"fe_true_within_slope_{o}"] = structural_within_slope(panel, outcome)
        resid[outcome] = residual_profiles(panel, outcome)

    for spec in config.specs:
        try:
            res = fit(panel, spec, proxy_noise=proxy, anchor_level=None)
        except (RankDeficientError, ValueError) as exc:
            raise ReplicationError(k_index, spec, exc) from exc
        o = SHORT[spec.outcome]
        prof = res.profile
        if spec.duration_form == "saturated":
            series[f"profile_{spec.slug}_{o}"] = prof.levels
            for t, eff, lev in zip(t_grid, res.duration_effects(), prof.levels):
                estimates.append(("saturated", spec.outcome, spec.label, spec.control_label, int(t), float(eff), float(lev)))
        else:
            scalars[f"slope_{spec.slug}_{o}"] = res.slope
            estimates.append(("linear", spec.outcome, spec.label, spec.control_label, 0, res.slope, prof.anchor_level))
            for t, eff, lev in zip(t_grid, res.duration_effects(), prof.levels):
                estimates.append(("linear", spec.outcome, spec.label, spec.control_label, int(t), float(eff), float(lev)))
        if res.proxy_corr is not None:
            scalars[f"proxy_corr_{spec.sigma_eta:g}"] = res.proxy_corr

    return ReplicationResult(k_index, series, scalars, estimates, resid)


@dataclass
class McSummary:
    """Per-replication draws plus band summaries.

    ``series[name]`` is a ``(k, tau_bar)`` matrix of per-replication curves,
    ``scalars[name]`` a length-``k`` vector (coefficient draws and other
    per-replication statistics), in replication order.
    """

    k: int
    tau_bar: int
    series: dict[str, np.ndarray]
    scalars: dict[str, np.ndarray]
    estimates: list[tuple]
    residuals: dict[str, list[ResidualProfile]]
    config: McConfig | None = field(default=None, repr=False)

    def band(self, name: str) -> dict[str, np.ndarray]:
        """Mean and nearest-rank percentiles per ``t`` of one series."""
        draws = self.series[name]
        out = {"mean": draws.mean(axis=0)}
        srt = np.sort(draws, axis=0)
        for p in PERCENTILES:
            out[f"p{p:02d}"] = np.array([percentile(srt[:, j], p) for j in range(draws.shape[1])])
        return out

    def mc_se(self, draws: np.ndarray) -> np.ndarray:
        """Monte Carlo standard error of the replication mean."""
        if self.k < 2:
            return np.zeros(draws.shape[1:])
        return draws.std(axis=0, ddof=1) / math.sqrt(self.k)

    def pooled_residuals(self, outcome: str) -> ResidualProfile:
        profs = self.residuals[outcome]
        total = ResidualProfile.empty(self.tau_bar)
        for p in profs:
            total = total + p
        return total


def aggregate(results: list[ReplicationResult], tau_bar: int, config: McConfig | None = None) -> McSummary:
    results = sorted(results, key=lambda r: r.k_index)
    names = results[0].series.keys()
    snames = results[0].scalars.keys()
    series = {n: np.vstack([r.series[n] for r in results]) for n in names}
    scalars = {n: np.array([r.scalars[n] for r in results]) for n in snames}
    estimates = [(r.k_index,) + row for r in results for row in r.estimates]
    resid = {o: [r.residuals[o] for r in results] for o in results[0].residuals}
    return McSummary(len(results), tau_bar, series, scalars, estimates, resid, config)


def _run_one(args):
    config, k = args
    return run_replication(config, k)


def run_mc(config: McConfig, workers: int = 1) -> McSummary:
    """Run ``config.k`` replications, optionally across worker processes.

    Results are merged by replication index, so the summary does not depend
    on the worker count or completion order.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    jobs = [(config, k) for k in range(config.k)]
    log.info("running %d replications with %d worker(s)", config.k, workers)
    if workers == 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, jobs, chunksize=max(1, config.k // (4 * workers))))
    return aggregate(results, config.tau_bar, config)
