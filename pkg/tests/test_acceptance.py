"""Acceptance oracles at the default calibration (N=2000, K=200, tau_bar=15).

Each test prints one ``[PASS]/[FAIL] criterion N`` line, collected again in
the terminal summary.
"""

import filecmp
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from withinbias import rng
from withinbias.cli import run_scenarios, toy_checks
from withinbias.config import DEFAULT_SEED, resolve
from withinbias.diagnostics import bin_values, residuals
from withinbias.estimation import RegressionSpec, within_time
from withinbias.montecarlo import McConfig, generate, percentile, run_mc
from withinbias.sim1 import GAMMA_GRID, Sim1Config, exit_time_from_uniform, hazard
from withinbias.sim2 import Sim2Config

K = 200
SEED = DEFAULT_SEED
PROXY_GRID = (0.0, 0.5, 1.0, 2.0)


@pytest.fixture(scope="module")
def sim1_runs():
    return {g: run_mc(McConfig(Sim1Config(gamma=g), k=K, base_seed=SEED)) for g in GAMMA_GRID}


@pytest.fixture(scope="module")
def sim2_run():
    return run_mc(McConfig(Sim2Config(), k=K, base_seed=SEED, proxy_sds=PROXY_GRID))


@pytest.fixture(scope="module")
def sim2_no_offers():
    specs = (RegressionSpec("applications_A", "saturated", "fixed_effects"),)
    return run_mc(McConfig(Sim2Config(psi=0.0), k=K, base_seed=SEED, specs=specs))


def _quantile(draws, p):
    return percentile(np.sort(draws), p)


def test_criterion_1_first_period_moments(verdict, sim2_run):
    mean_a = sim2_run.series["structural_A"][:, 0].mean()
    mean_c = sim2_run.series["structural_c"][:, 0].mean()
    # pooled over applications, for reference only
    pooled = []
    for k in range(5):
        p = generate(Sim2Config(), SEED, k)
        pooled.append(p.outcomes["C"][:, 0].sum() / p.outcomes["A"][:, 0].sum())
    ok_a = abs(mean_a - 10.5) <= 0.05
    ok_c = abs(mean_c - 0.05) <= 0.002
    verdict("1", ok_a and ok_c,
            f"mean A(t=1) = {mean_a:.4f} (10.5 +/- 0.05); mean callback rate(t=1) = {mean_c:.5f} "
            f"(0.05 +/- 0.002; application-pooled ratio {np.mean(pooled):.5f})")
    assert ok_a and ok_c


def test_criterion_2_within_identity(verdict):
    exact = all(within_time(T).sum() == 0.0 for T in range(1, 16))
    worst = 0.0
    for panel, outcomes in ((generate(Sim1Config(), SEED, 0), ("exit_y",)),
                            (generate(Sim2Config(), SEED, 0), ("applications_A", "callback_rate_c", "callbacks_C"))):
        for o in outcomes:
            d, _, eps_w = residuals(panel, o)
            sums = np.bincount(d.group, weights=d.w * eps_w, minlength=panel.n)
            worst = max(worst, float(np.abs(sums).max()))
    ok = exact and worst <= 1e-12
    verdict("2", ok, f"sum of within time exactly 0 for T=1..15: {exact}; max |per-spell demeaned sum| = {worst:.2e}")
    assert ok


def test_criterion_3_toy_oracle(verdict):
    checks = {name: (ok, detail) for name, ok, detail in toy_checks()}
    fe = checks["toy FE linear slope = 0.2"]
    ols = checks["toy pooled OLS slope = 1/14"]
    ok = fe[0] and ols[0]
    verdict("3", ok, f"FE {fe[1]}; OLS {ols[1]}")
    assert ok


def test_criterion_4_exit_bias_sign_fe(verdict, sim1_runs):
    p01 = {g: _quantile(s.scalars["slope_fe_y"], 1) for g, s in sim1_runs.items()}
    ok = all(v > 0 for v in p01.values())
    verdict("4 (FE slopes)", ok, "p01 of FE linear slope: " + ", ".join(f"gamma={g:g}: {v:.4f}" for g, v in p01.items()))
    assert ok


@pytest.mark.parametrize("gamma", [0.0, -0.02])
def test_criterion_4_structural_slope_nonpositive(verdict, sim1_runs, gamma):
    # absolute floating-point slack for the exactly flat gamma = 0 hazard
    slope = float(np.mean(sim1_runs[gamma].scalars["structural_slope_y"]))
    ok = slope <= 1e-12
    verdict(f"4 (structural, gamma={gamma:g})", ok, f"K-mean S0 linear slope of hazard = {slope:.3g} (<= 0)")
    assert ok


def _deviation(summary, slug, o):
    return summary.series[f"profile_{slug}_{o}"] - summary.series[f"structural_{o}"]


def test_criterion_5_applications_fe_unbiased(verdict, sim2_run):
    dev = _deviation(sim2_run, "fe", "A")
    se = sim2_run.mc_se(dev)
    mean = np.abs(dev.mean(axis=0))
    # both profiles share the t=1 anchor, so deviation and s.e. are 0 there
    z = np.divide(mean, se, out=np.zeros_like(mean), where=se > 0)
    ok = bool(np.all(z <= 3))
    verdict("5 (applications)", ok, f"max |FE - structural| / MC s.e. = {np.nanmax(z):.2f} at t={int(np.nanargmax(z)) + 1} (<= 3)")
    assert ok


@pytest.mark.parametrize("o", ["c", "C"])
def test_criterion_5_callback_fe_upward(verdict, sim2_run, o):
    dev = _deviation(sim2_run, "fe", o)
    mean_dev = dev.mean(axis=0)
    above = bool(np.all(mean_dev[9:15] > 0))
    p05 = _quantile(dev[:, 14], 5)
    ok = above and p05 > 0
    verdict(f"5 ({o})", ok, f"min mean FE deviation t=10..15 = {mean_dev[9:15].min():.4f} (> 0); p05 at t=15 = {p05:.4f} (> 0)")
    assert ok


def _mad(summary, slug, o):
    return float(np.mean(np.abs(_deviation(summary, slug, o).mean(axis=0))))


@pytest.mark.parametrize("o", ["c", "C"])
def test_criterion_6_heterogeneity_control(verdict, sim2_run, o):
    fe = _mad(sim2_run, "fe", o)
    ols_a = _mad(sim2_run, "ols_alpha", o)
    proxies = [_mad(sim2_run, f"ols_proxy_{s:g}", o) for s in PROXY_GRID]
    ratio_ok = ols_a <= 0.25 * fe
    mono = all(b > a for a, b in zip(proxies, proxies[1:]))
    ok = ratio_ok and mono
    verdict(f"6 ({o})", ok, f"MAD OLS+alpha {ols_a:.5f} vs FE {fe:.5f} (ratio {ols_a / fe:.3f} <= 0.25); "
            f"proxy MAD over sd {PROXY_GRID}: " + ", ".join(f"{v:.5f}" for v in proxies))
    assert ok


def _selection_checks(summary):
    s0, s1 = summary.series["alpha_s0"], summary.series["alpha_s1"]
    curve = s1.mean(axis=0)
    diff = s1 - s0
    se = summary.mc_se(diff)
    nondecreasing = bool(np.all(np.diff(curve) >= 0))
    at_1 = abs(diff[:, 0].mean()) <= 3 * se[0] or diff[:, 0].mean() == 0.0
    at_15 = diff[:, -1].mean() > 5 * se[-1]
    return nondecreasing, at_1, at_15, diff[:, -1].mean() / se[-1]


def test_criterion_7_dynamic_selection(verdict, sim1_runs, sim2_run, sim2_no_offers):
    parts, ok = [], True
    runs = [(f"sim1 gamma={g:g}", s) for g, s in sim1_runs.items()] + [("sim2", sim2_run)]
    for name, s in runs:
        nd, a1, a15, z = _selection_checks(s)
        ok &= nd and a1 and a15
        parts.append(f"{name}: nondecreasing={nd}, t=1 equal={a1}, t=15 z={z:.1f}")
    same = bool(np.array_equal(sim2_no_offers.series["alpha_s0"], sim2_no_offers.series["alpha_s1"]))
    ok &= same
    parts.append(f"psi=0 curves identical={same}")
    verdict("7", ok, "; ".join(parts))
    assert ok


def test_criterion_8_sampler_chi_square(verdict):
    n, tb = 100_000, 15
    keys = rng.stream_keys(SEED, 0, np.arange(n, dtype=np.uint64))
    u = rng.uniform_at(keys, rng.address(rng.P_EXIT))
    lam = hazard(2.0, np.arange(1, tb + 1), 0.0)
    tau = exit_time_from_uniform(u, np.broadcast_to(lam, (n, tb)))
    surv = np.concatenate([[1.0], np.cumprod(1 - lam)])
    probs = np.append(surv[:-1] * lam, surv[-1])
    counts = np.array([np.sum(tau == t) for t in range(1, tb + 1)] + [np.sum(tau < 0)])
    stat, p = stats.chisquare(counts, probs * n)
    ok = p > 0.01
    verdict("8", ok, f"chi-square = {stat:.2f} on {tb} df, p = {p:.3f} (> 0.01)")
    assert ok


def test_criterion_9_estimator_identity(verdict, sim1_runs, sim2_run):
    worst = 0.0
    runs = [(s, "y") for s in sim1_runs.values()] + [(sim2_run, o) for o in ("A", "c", "C")]
    for s, o in runs:
        fe = s.scalars[f"slope_fe_{o}"]
        rhs = s.scalars[f"fe_true_within_slope_{o}"] + s.scalars[f"fe_bias_num_{o}"] / s.scalars[f"fe_bias_den_{o}"]
        worst = max(worst, float(np.max(np.abs(fe - rhs) / np.maximum(np.abs(fe), 1e-300))))
    ok = worst <= 1e-8
    verdict("9", ok, f"max relative gap between FE slope and true slope + bias ratio = {worst:.2e} (<= 1e-8)")
    assert ok


def test_criterion_10_exit_residual_spike(verdict, sim1_runs):
    parts, ok = [], True
    lead0 = len(bin_values("lead", 15)) - 1
    for g, s in sim1_runs.items():
        share = np.mean([p.mean("lead")[lead0, 0] > 0 for p in s.residuals["exit_y"]])
        ok &= share >= 0.99
        parts.append(f"gamma={g:g}: {share:.3f}")
    verdict("10 (exit_y)", ok, "share of replications with mean within residual > 0 at t - T = 0: " + ", ".join(parts))
    assert ok


def test_criterion_10_applications_residuals_flat(verdict, sim2_run):
    prof = sim2_run.pooled_residuals("applications_A")
    worst, where = 0.0, ""
    for kind in ("within_time", "lead"):
        m = prof.mean(kind)
        bins = bin_values(kind, 15)
        if np.nanmax(np.abs(m)) > worst:
            i, c = np.unravel_index(np.nanargmax(np.abs(m)), m.shape)
            worst, where = float(np.abs(m[i, c])), f"{kind} bin {bins[i]:g}, censored={c}"
    ok = worst <= 0.05
    verdict("10 (applications)", ok, f"max |mean within residual| = {worst:.4f} at {where} (<= 0.05)")
    assert ok


def _run_cli(out: Path, workers: int):
    sf = resolve("sim2", flag_values={"n": 400, "k": 8, "workers": workers, "out_dir": str(out), "proxy_sd": (0.5,)})
    run_scenarios(sf)


def test_criterion_11_reproducibility(verdict, tmp_path):
    _run_cli(tmp_path / "a", 1)
    _run_cli(tmp_path / "b", 1)
    _run_cli(tmp_path / "c", 4)
    names = sorted(p.name for p in (tmp_path / "a").iterdir() if p.suffix in (".csv", ".gp", ".txt"))
    same_run = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
    same_workers = filecmp.cmpfiles(tmp_path / "a", tmp_path / "c", names, shallow=False)
    ok = not (same_run[1] or same_run[2] or same_workers[1] or same_workers[2])
    verdict("11", ok, f"{len(names)} output files byte-identical across reruns and workers 1 vs 4: {ok}")
    assert ok
