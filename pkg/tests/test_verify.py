import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcgl_sources.errors import FitError
from qcgl_sources.evolve import SpongeSpec, fit_modulation, simulate, source_target, synthetic_trajectory
from qcgl_sources.grid import GridSpec
from qcgl_sources.profile import nozaki_bekki, solve_source
from qcgl_sources.verify import (
    TemplateSeries,
    analysis_mask,
    check,
    fit_checks,
    fit_exponential,
    fit_line,
    fit_power_law,
    overall,
    perturbation_residual,
    quadratic_term,
    shifted_source,
    template_monitor,
    template_scaling,
    theorem_decay_check,
    transport_term,
)
from qcgl_sources.wavetrain import wave_train_constants

from conftest import REFERENCE


@pytest.fixture(scope="module")
def small():
    return solve_source(REFERENCE, nozaki_bekki(2.0, 0.4, GridSpec(40.0, 0.1)))


@pytest.fixture(scope="module")
def wide():
    return solve_source(REFERENCE, nozaki_bekki(2.0, 0.4, GridSpec(150.0, 0.1)))


def test_power_law_fit_exact():
    t = np.linspace(1, 100, 50)
    f = fit_power_law(t, 3.0 * t**-0.5)
    assert f.exponent == pytest.approx(-0.5, abs=1e-12)
    assert f.amplitude == pytest.approx(3.0, rel=1e-10)
    assert f.r_squared == pytest.approx(1.0)
    assert f.window[0] >= 5.0


def test_exponential_fit_exact():
    t = np.linspace(0, 40, 81)
    f = fit_exponential(t, 0.2 * np.exp(-0.3 * t))
    assert f.exponent == pytest.approx(-0.3, abs=1e-12)
    assert f.kind == "exp"


def test_zero_series_is_trivial():
    t = np.linspace(0, 40, 81)
    f = fit_power_law(t, np.zeros_like(t))
    assert f.trivial and f.accepted()


def test_too_few_samples():
    with pytest.raises(FitError):
        fit_power_law([6.0, 7.0], [1.0, 0.5])
    with pytest.raises(FitError):
        fit_line([1.0], [2.0])


def test_nan_samples_skipped():
    t = np.linspace(6, 60, 10)
    y = t**-1.0
    y[3] = np.nan
    assert fit_power_law(t, y).exponent == pytest.approx(-1.0)


def test_analysis_mask():
    x = np.linspace(-10, 10, 201)
    m = analysis_mask(x, None, 2.0, band=3)
    assert not m[np.abs(x) > 8.0 + 1e-12].any()
    assert m[np.abs(x) <= 7.9].all()
    assert not analysis_mask(x, None, 0.0, band=3)[:3].any()


def test_shifted_source_identity(small):
    assert np.allclose(shifted_source(small, 2.0, 0.0, 0.0), small.field(2.0), atol=1e-14)
    rot = shifted_source(small, 2.0, 0.7, 0.0)
    assert np.allclose(rot, small.field(2.0) * np.exp(0.7j), atol=1e-14)


def test_transport_and_quadratic_vanish_at_zero(small):
    z = np.zeros_like(small.x)
    assert not transport_term(small, REFERENCE, z, z).any()
    assert not quadratic_term(small, REFERENCE, z, z, z, z, z).any()


def test_quadratic_term_is_quadratic(small):
    x = small.x
    R = 0.01 * np.exp(-x * x / 20)
    phi = 0.02 * np.exp(-x * x / 30)
    z = np.zeros_like(x)
    q1 = quadratic_term(small, REFERENCE, R, phi, z, z, z)
    q2 = quadratic_term(small, REFERENCE, 0.5 * R, 0.5 * phi, z, z, z)
    # with p = 0 every monomial is quadratic in (R, phi)
    assert np.abs(q2 - 0.25 * q1).max() < 1e-12 * np.abs(q1).max()


def test_source_run_is_quiet(small):
    wt = wave_train_constants(small.params, small.k0)
    traj = simulate(small, source_target(small), 1.0, None, 0.25, SpongeSpec(5.0))
    fit = fit_modulation(traj, small, wt)
    series = template_monitor(fit, small, wt, mask=analysis_mask(small.x, wt, 5.0))
    assert series.h[-1] < 1e-6
    assert not series.unstable()
    res = perturbation_residual(fit, small, REFERENCE, mask=analysis_mask(small.x, wt, 5.0))
    assert res.linear.max() < 1e-6


def test_synthetic_modulated_source_passes_theorem_check(wide):
    wt = wave_train_constants(wide.params, wide.k0)
    times = np.arange(80.0, 121.0, 10.0)
    traj = synthetic_trajectory(wide, wt, 0.05, -0.03, times)
    fit = fit_modulation(traj, wide, wt, passes=2)
    td = theorem_decay_check(traj, fit, wide, wt, t_min=80.0, mask=analysis_mask(wide.x, wt, 10.0))
    assert td.W[0].max() < 1e-3


def test_unstable_flags():
    t = np.linspace(0, 10, 11)
    z = np.zeros_like(t)
    grow = TemplateSeries(t, z, np.exp(t), 0.25, 0.5)
    assert grow.unstable()
    flat = TemplateSeries(t, z, np.ones_like(t), 0.25, 0.5)
    assert not flat.unstable()
    broke = TemplateSeries(t, z, np.ones_like(t), 0.25, 0.5, {"breakdown": 4.0})
    assert broke.unstable()
    # saturated growth: flat second half but a large rise from t = 0
    sat = TemplateSeries(t, z, np.minimum(1e-2 * np.exp(3 * t), 1e4), 0.25, 0.5)
    assert sat.unstable()


def test_template_scaling():
    t = np.linspace(0, 10, 5)
    z = np.zeros_like(t)
    series = {e: TemplateSeries(t, z, np.full_like(t, 3 * e), 0.25, 0.5) for e in (0.01, 0.005)}
    vals, spread = template_scaling(series)
    assert vals[0.01] == pytest.approx(3.0) and spread == pytest.approx(1.0)


def test_reporting_helpers():
    assert overall([check("a", 1.0, True, "x"), check("b", 2.0, True, "y")])
    assert not overall([check("a", 1.0, True, "x"), check("b", 2.0, False, "y")])
    t = np.linspace(6, 60, 10)
    res = fit_checks("w", fit_power_law(t, t**-0.5), -0.6, -0.4)
    assert res[0].passed
    assert not fit_checks("w", None, -0.6, -0.4)[0].passed


@settings(max_examples=40, deadline=None)
@given(st.floats(-2.0, 1.0), st.floats(1e-3, 1e3))
def test_power_law_recovery(e, a):
    t = np.linspace(5, 200, 40)
    f = fit_power_law(t, a * t**e)
    assert f.exponent == pytest.approx(e, abs=1e-9)
    assert f.amplitude == pytest.approx(a, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-5.0, 5.0))
def test_line_fit_recovery(m, b):
    t = np.linspace(0, 10, 11)
    slope, icpt, r2 = fit_line(t, m * t + b)
    assert slope == pytest.approx(m, abs=1e-10)
    assert icpt == pytest.approx(b, abs=1e-9)
