import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from withinbias.core import BEYOND_WINDOW, exit_panel
from withinbias.estimation import (
    RankDeficientError,
    RegressionSpec,
    fit,
    least_squares,
    long_data,
    profile_from_fit,
    structural_profile,
    within_demean,
    within_time,
)
from withinbias.sim1 import Sim1Config, generate_sim1
from withinbias.sim2 import Sim2Config, generate_sim2


@pytest.fixture(scope="module")
def toy():
    y = np.array([[0, 0, 0], [0, 1, 0]])
    return exit_panel([0.0, 0.0], [BEYOND_WINDOW, 2], np.full((2, 3), 0.1), y, 3)


@pytest.fixture(scope="module")
def jobsearch():
    return generate_sim2(Sim2Config(n=300), 42, 0)


def test_within_time_examples():
    assert np.array_equal(within_time(3), [-1, 0, 1])
    assert np.array_equal(within_time(2), [-0.5, 0.5])
    assert within_time(15).sum() == 0.0
    assert np.arange(1, 16).sum() == 120
    with pytest.raises(ValueError):
        within_time(0)


def test_within_demean_examples():
    g = np.array([0, 0, 0])
    assert np.array_equal(within_demean(np.zeros(3), g), np.zeros(3))
    assert np.allclose(within_demean(np.array([0.0, 1.0]), np.array([0, 0])), [-0.5, 0.5])


def test_weighted_demeaning_matches_application_level():
    # spell with (A, C) = (2, 1), (2, 0): rates 0.5 and 0 with weight 2
    rate = within_demean(np.array([0.5, 0.0]), np.array([0, 0]), np.array([2.0, 2.0]))
    apps = within_demean(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(4, int))
    assert rate == pytest.approx([0.25, -0.25])
    assert sorted(apps) == pytest.approx([-0.25, -0.25, -0.25, 0.75])


def test_toy_estimates(toy):
    assert fit(toy, RegressionSpec("exit_y", "linear", "fixed_effects")).slope == pytest.approx(0.2, abs=1e-10)
    assert fit(toy, RegressionSpec("exit_y", "linear", "none")).slope == pytest.approx(1 / 14, abs=1e-10)


def test_exact_system_recovered():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 4))
    b0 = np.array([1.0, -2.0, 0.5, 3.0])
    assert least_squares(X, X @ b0) == pytest.approx(b0, abs=1e-10)


def test_duplicate_column_raises_naming_it():
    X = np.column_stack([np.ones(10), np.arange(10.0), np.arange(10.0)])
    with pytest.raises(RankDeficientError) as err:
        least_squares(X, np.arange(10.0), names=["const", "t", "t_copy"])
    assert err.value.column == "t_copy"


def test_saturated_fe_without_within_variation_raises():
    p = exit_panel(np.zeros(3), [1, 1, 1], np.full((3, 5), 0.2), np.ones((3, 5), int), 5)
    with pytest.raises(RankDeficientError):
        fit(p, RegressionSpec("exit_y", "saturated", "fixed_effects"))


def test_noisy_zero_equals_true_alpha(jobsearch):
    a = fit(jobsearch, RegressionSpec("callbacks_C", "saturated", "true_alpha"))
    b = fit(jobsearch, RegressionSpec("callbacks_C", "saturated", "noisy_alpha", sigma_eta=0.0))
    assert list(a.coefficients.values()) == list(b.coefficients.values())


def test_saturated_dummies_equal_cell_means(jobsearch):
    res = fit(jobsearch, RegressionSpec("applications_A", "saturated", "none", sample="S0"))
    means = jobsearch.outcomes["A"].mean(axis=0)
    assert res.coefficients["const"] == pytest.approx(means[0], abs=1e-10)
    assert res.duration_effects() == pytest.approx(means - means[0], abs=1e-10)


@pytest.mark.parametrize("control", ["none", "true_alpha", "fixed_effects"])
def test_callback_rate_weighting_equals_expanded_regression(jobsearch, control):
    """Cell rates weighted by applications reproduce the 0/1 application-level fit."""
    spec = RegressionSpec("callback_rate_c", "linear", control)
    res = fit(jobsearch, spec)
    d = long_data(jobsearch, "callback_rate_c", "S1")
    reps = d.w.astype(int)
    C = np.rint(d.y * d.w).astype(int)
    y = np.concatenate([np.r_[np.ones(c), np.zeros(a - c)] for a, c in zip(reps, C)])
    t = np.repeat(d.t, reps).astype(float)
    g = np.repeat(d.group, reps)
    alpha = np.repeat(d.alpha, reps)
    if control == "fixed_effects":
        b = least_squares(within_demean(t, g)[:, None], within_demean(y, g))
    else:
        cols = [np.ones_like(t), t] + ([alpha] if control == "true_alpha" else [])
        b = least_squares(np.column_stack(cols), y)[1:2]
    assert res.slope == pytest.approx(b[0], rel=1e-9)


def test_fe_ignores_spell_constant_outcomes():
    y = np.array([[1, 1, 1], [0, 0, 0]])
    p = exit_panel([0.0, 1.0], [BEYOND_WINDOW, BEYOND_WINDOW], np.full((2, 3), 0.1), y, 3)
    res = fit(p, RegressionSpec("exit_y", "saturated", "fixed_effects"))
    assert np.allclose(res.duration_effects(), 0.0, atol=1e-12)


def test_profile_from_fit_examples(toy):
    sat = fit(toy, RegressionSpec("exit_y", "saturated", "none"))
    sat.coefficients.update({"t=2": 0.0, "t=3": 0.0})
    assert np.all(profile_from_fit(sat, 10.5).levels == 10.5)
    lin = fit(toy, RegressionSpec("exit_y", "linear", "none"))
    lin.coefficients["t"] = -0.2
    lin.tau_bar = 15
    assert profile_from_fit(lin, 10.5).levels[14] == pytest.approx(7.7)


def test_default_anchor_is_structural_level(jobsearch):
    res = fit(jobsearch, RegressionSpec("applications_A", "linear", "fixed_effects"))
    assert res.profile.anchor_level == structural_profile(jobsearch, "applications_A").levels[0]


def test_structural_profile_of_constant_outcome_is_flat():
    p = exit_panel(np.zeros(4), [BEYOND_WINDOW] * 4, np.full((4, 6), 0.3), np.zeros((4, 6), int), 6)
    prof = structural_profile(p, "exit_y", "linear")
    assert prof.slope == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(prof.levels, 0.3)


def test_outcome_panel_mismatch_raises(toy):
    with pytest.raises(ValueError):
        fit(toy, RegressionSpec("applications_A"))


def test_invalid_spec_values():
    with pytest.raises(ValueError):
        RegressionSpec("exit_y", "quadratic")
    with pytest.raises(ValueError):
        RegressionSpec("exit_y", control="noisy_alpha", sigma_eta=-1.0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=20, max_size=20))
def test_fe_invariant_to_spell_constant_shifts(shifts):
    p = generate_sim1(Sim1Config(n=20, gamma=0.0), 1, 0)
    spec = RegressionSpec("exit_y", "linear", "fixed_effects")
    base = fit(p, spec).slope
    y = p.outcomes["y"] + np.asarray(shifts)[:, None]
    d = long_data(p, "exit_y", "S1")
    yy = y[d.group, d.t - 1]
    shifted = least_squares(within_demean(d.t.astype(float), d.group)[:, None], within_demean(yy, d.group))[0]
    assert shifted == pytest.approx(base, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=30), st.integers(1, 5))
def test_demeaned_groups_sum_to_zero(values, n_groups):
    v = np.array(values)
    g = np.arange(v.size) % n_groups
    out = within_demean(v, g)
    sums = np.bincount(g, weights=out)
    assert np.all(np.abs(sums) <= 1e-9 * max(1.0, np.abs(v).max()) * v.size)
