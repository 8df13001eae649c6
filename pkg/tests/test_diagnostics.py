import numpy as np
import pytest

from withinbias.core import BEYOND_WINDOW, exit_panel
from withinbias.diagnostics import (
    ResidualProfile,
    bin_values,
    dynamic_selection,
    fe_bias_decomposition,
    residual_profiles,
    residuals,
    structural_within_slope,
)
from withinbias.estimation import RegressionSpec, fit
from withinbias.sim1 import Sim1Config, generate_sim1
from withinbias.sim2 import Sim2Config, generate_sim2


@pytest.fixture(scope="module")
def exit_panel_default():
    return generate_sim1(Sim1Config(n=800), 3, 1)


@pytest.fixture(scope="module")
def search_panel():
    return generate_sim2(Sim2Config(n=400), 3, 1)


def test_selection_curves(exit_panel_default):
    sel = dynamic_selection(exit_panel_default)
    assert sel.mean_alpha_s1[0] == sel.mean_alpha_s0[0]
    assert np.all(sel.mean_alpha_s0 == sel.mean_alpha_s0[0])
    assert sel.mean_alpha_s1[-1] > sel.mean_alpha_s0[-1]


def test_selection_without_attrition_is_identical():
    sel = dynamic_selection(generate_sim2(Sim2Config(n=200, psi=0.0), 1, 0))
    assert np.array_equal(sel.mean_alpha_s0, sel.mean_alpha_s1)


def test_bin_grids():
    assert bin_values("within_time", 15)[0] == -7 and bin_values("within_time", 15)[-1] == 7
    assert bin_values("within_time", 15)[1] == -6.5
    assert np.array_equal(bin_values("lead", 3), [-2, -1, 0])
    with pytest.raises(ValueError):
        bin_values("other", 3)


@pytest.mark.parametrize("outcome", ["applications_A", "callback_rate_c", "callbacks_C"])
def test_within_residuals_sum_to_zero_per_spell(search_panel, outcome):
    d, _, eps_w = residuals(search_panel, outcome)
    assert np.abs(np.bincount(d.group, weights=d.w * eps_w)).max() <= 1e-12


def test_exit_spell_last_residual_positive(exit_panel_default):
    p = exit_panel_default
    d, eps, eps_w = residuals(p, "exit_y")
    last = d.t == p.t_obs[d.group]
    exited = ~p.censored[d.group]
    longer = p.t_obs[d.group] >= 2
    assert np.all(eps_w[last & exited & longer] > 0)
    # a one-row spell is its own mean
    assert np.all(eps_w[last & exited & ~longer] == 0)


def test_censored_exit_residual_is_minus_hazard(exit_panel_default):
    p = exit_panel_default
    d, eps, _ = residuals(p, "exit_y")
    cens = p.censored[d.group]
    lam = p.outcomes["hazard"][d.group, d.t - 1]
    assert np.array_equal(eps[cens], -lam[cens])


def test_toy_bias_ratio():
    y = np.array([[0, 0, 0], [0, 1, 0]])
    p = exit_panel([0.0, 0.0], [BEYOND_WINDOW, 2], np.full((2, 3), 0.1), y, 3)
    num, den = fe_bias_decomposition(p, "exit_y")
    assert num / den == pytest.approx(0.2, abs=1e-12)


def test_spell_constant_residual_gives_zero_ratio():
    hz = np.tile(np.array([[0.2], [0.5]]), (1, 4))
    p = exit_panel([0.0, 0.0], [BEYOND_WINDOW, BEYOND_WINDOW], hz, np.zeros((2, 4), int), 4)
    num, _ = fe_bias_decomposition(p, "exit_y")
    assert num == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("outcome", ["applications_A", "callback_rate_c", "callbacks_C"])
def test_bias_identity(search_panel, outcome):
    num, den = fe_bias_decomposition(search_panel, outcome)
    fe = fit(search_panel, RegressionSpec(outcome, "linear", "fixed_effects")).slope
    assert fe == pytest.approx(structural_within_slope(search_panel, outcome) + num / den, rel=1e-8)


def test_applications_true_within_slope_is_beta(search_panel):
    assert structural_within_slope(search_panel, "applications_A") == pytest.approx(-0.2, abs=1e-12)


def test_residual_profile_counts_and_absent_bins():
    p = generate_sim2(Sim2Config(n=100, psi=0.0), 2, 0)
    prof = residual_profiles(p, "applications_A")
    assert prof.counts["lead"][:, 0].sum() == 0
    assert np.all(np.isnan(prof.mean("lead")[:, 0]))
    assert prof.counts["lead"][:, 1].sum() == 100 * 15


def test_profiles_pool_by_addition(search_panel):
    a = residual_profiles(search_panel, "callbacks_C")
    total = ResidualProfile.empty(15) + a + a
    assert np.allclose(total.mean("within_time"), a.mean("within_time"), equal_nan=True)
