import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcgl_sources.errors import BlowUpError, DomainError
from qcgl_sources.evolve import (
    QcglStepper,
    SpongeSpec,
    centered_d2,
    evolve_linearized,
    extract_perturbation,
    fit_modulation,
    near_delta,
    new_state,
    perturb_initial,
    raw_perturbations,
    shift_field,
    simulate,
    source_target,
    synthetic_trajectory,
    weighted_c3_norm,
)
from qcgl_sources.grid import GridSpec
from qcgl_sources.linop import kernel_fields, split
from qcgl_sources.profile import nozaki_bekki, solve_source
from qcgl_sources.wavetrain import wave_train_constants

from conftest import REFERENCE


@pytest.fixture(scope="module")
def small():
    return solve_source(REFERENCE, nozaki_bekki(2.0, 0.4, GridSpec(40.0, 0.1)))


@pytest.fixture(scope="module")
def wide():
    return solve_source(REFERENCE, nozaki_bekki(2.0, 0.4, GridSpec(150.0, 0.1)))


def test_centered_d2_exactness():
    n, h = 41, 0.1
    x = np.arange(n) * h
    d2 = centered_d2(n, h, 6)
    # every row is at least second order, so quadratics are exact away from the two end rows
    assert np.allclose((d2 @ x**2)[1:-1], 2.0, atol=1e-9)
    inner = slice(3, n - 3)
    assert np.allclose((d2 @ x**5)[inner], 20 * x[inner] ** 3, atol=1e-8)


def test_sponge_profile():
    x = np.linspace(-10, 10, 201)
    s = SpongeSpec(3.0, 2.0).profile(x)
    assert np.all(s[np.abs(x) <= 7] == 0)
    assert s[0] == pytest.approx(2.0) and s[-1] == pytest.approx(2.0)
    assert np.all(np.diff(s[100:]) >= 0)
    assert not SpongeSpec(0.0).profile(x).any()


def test_source_is_fixed_point(small):
    A = source_target(small)
    traj = simulate(small, A, 1.0, None, 0.5, SpongeSpec(5.0))
    assert np.abs(traj.rotating[-1] - A).max() < 1e-10


def test_lab_frame_matches_rotating(small):
    A_in, _ = perturb_initial(small, 0.01, 16.0, "mixed", seed=1)
    traj = simulate(small, A_in, 0.5, None, 0.25, SpongeSpec(5.0))
    for t, lab, rot in zip(traj.times, traj.frames, traj.rotating):
        assert np.array_equal(lab, rot * np.exp(-1j * small.omega0 * t))


def test_resume_is_bit_exact(small):
    A_in, _ = perturb_initial(small, 0.01, 16.0, "even-bump")
    full = simulate(small, A_in, 1.0, None, 0.25, SpongeSpec(5.0))
    half = simulate(small, A_in, 0.5, None, 0.25, SpongeSpec(5.0))
    rest = simulate(small, None, 1.0, frame_every=0.25, state=half.final_state)
    assert np.array_equal(rest.rotating[-1], full.rotating[-1])
    assert np.allclose(rest.times, full.times[2:])


def test_blowup_detected(small):
    stepper = QcglStepper(small.grid, small.params, small.omega0, 1e-3, SpongeSpec(5.0), source_target(small))
    with pytest.raises(BlowUpError):
        stepper.check(np.full(small.grid.n, 100.0 + 0j), 1.0)
    with pytest.raises(BlowUpError):
        stepper.check(np.full(small.grid.n, np.nan + 0j), 1.0)


def test_sponge_width_flag(small):
    wt = wave_train_constants(small.params, small.k0)
    st_narrow = new_state(small, source_target(small), None, SpongeSpec(1.0), t_final=100.0, wt=wt)
    assert st_narrow.manifest["sponge_width_ok"] is False
    st_wide = new_state(small, source_target(small), None, SpongeSpec(30.0), t_final=1.0, wt=wt)
    assert st_wide.manifest["sponge_width_ok"] is True


def test_perturbation_norm(small):
    for shape in ("even-bump", "odd-bump", "phase-kick", "mixed"):
        A_in, norm = perturb_initial(small, 0.02, 16.0, shape, seed=4)
        assert norm == pytest.approx(0.02, rel=1e-12)
        assert np.abs(A_in - source_target(small)).max() > 0
    A0, n0 = perturb_initial(small, 0.0, 16.0)
    assert n0 == 0.0 and np.array_equal(A0, source_target(small))
    a, _ = perturb_initial(small, 0.01, 16.0, "mixed", seed=9)
    b, _ = perturb_initial(small, 0.01, 16.0, "mixed", seed=9)
    assert np.array_equal(a, b)
    with pytest.raises(DomainError):
        perturb_initial(small, 0.01, 16.0, "square")
    with pytest.raises(DomainError):
        perturb_initial(small, -0.01, 16.0)


def test_weighted_norm_of_gaussian():
    x = np.linspace(-20, 20, 4001)
    M0 = 10.0
    # exp(x^2/M0) exp(-x^2/M0) = 1 has no derivatives
    assert weighted_c3_norm(x, np.exp(-x * x / M0), M0) == pytest.approx(1.0, abs=1e-7)
    assert weighted_c3_norm(x, np.zeros_like(x), M0) == 0.0


def test_extract_source_is_zero(small):
    fr = extract_perturbation(small.field(3.0), 3.0, small)
    assert np.abs(fr.R).max() < 1e-12
    assert np.abs(fr.phi).max() < 1e-12


def test_shift_field():
    x = np.linspace(-10, 10, 2001)
    A = np.exp(-x * x) * (1 + 0.5j)
    assert np.array_equal(shift_field(x, A, 0.0), A)
    out = shift_field(x, A, np.full_like(x, 0.3))
    inner = np.abs(x) < 8
    assert np.abs(out - np.exp(-(x + 0.3) ** 2) * (1 + 0.5j))[inner].max() < 1e-10
    with pytest.raises(DomainError):
        shift_field(x, A, 2.0 * x)


def test_near_delta_unit_mass():
    g = GridSpec(10.0, 0.05)
    U = near_delta(g, 1.0, 1)
    R, P = split(U)
    assert not R.any()
    assert g.spacing * P.sum() == pytest.approx(1.0, rel=1e-10)


def test_kernel_stays_put_under_linear_flow(small):
    V1 = kernel_fields(small)[0]
    _, frames = evolve_linearized(V1, small, small.params, 0.01, 0.5, 0.5)
    band = np.repeat(np.abs(small.x) < 25, 2)
    assert np.abs(frames[-1] - V1)[band].max() < 1e-3 * np.abs(V1).max()


def test_fit_recovers_synthetic_deltas(wide):
    wt = wave_train_constants(wide.params, wide.k0)
    traj = synthetic_trajectory(wide, wt, 0.05, -0.03, [80.0, 100.0, 120.0])
    fit = fit_modulation(traj, wide, wt, passes=2)
    assert np.allclose(fit.delta_plus, 0.05, atol=1e-4)
    assert np.allclose(fit.delta_minus, -0.03, atol=1e-4)


def test_fit_defers_early_frames(wide):
    wt = wave_train_constants(wide.params, wide.k0)
    traj = synthetic_trajectory(wide, wt, 0.05, 0.05, [0.0])
    fit = fit_modulation(traj, wide, wt)
    assert math.isnan(fit.delta_plus[0])


def test_raw_perturbations(small):
    traj = simulate(small, source_target(small), 0.2, None, 0.1, SpongeSpec(5.0))
    fit = raw_perturbations(traj, small)
    assert len(fit.frames) == len(traj.times)
    assert np.all(np.isnan(fit.delta_plus))
    assert math.isnan(fit.breakdown)


def test_fit_truncates_on_breakdown(small):
    wt = wave_train_constants(small.params, small.k0)
    traj = simulate(small, source_target(small), 0.2, None, 0.1, SpongeSpec(5.0))
    traj.frames[1][small.x > 20] = 0.0
    with pytest.raises(DomainError):
        fit_modulation(traj, small, wt)
    fit = fit_modulation(traj, small, wt, truncate=True)
    assert len(fit.frames) == 1 and fit.breakdown == pytest.approx(traj.times[1])


# -- properties ------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.floats(-3.0, 3.0))
def test_gauge_rotation_shifts_phase(c):
    prof = solve_source(REFERENCE, nozaki_bekki(2.0, 0.4, GridSpec(20.0, 0.2)))
    fr = extract_perturbation(prof.field(1.0) * np.exp(1j * c), 1.0, prof)
    far = np.abs(prof.r) > 0.5 * prof.r0
    # the phase is defined modulo 2 pi on each side
    w = np.angle(np.exp(1j * (fr.phi[far] - c)))
    assert np.abs(w).max() < 1e-10
    assert np.abs(fr.R).max() < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10.0))
def test_weighted_norm_homogeneous(s):
    x = np.linspace(-15, 15, 1501)
    f = np.sin(x) * np.exp(-x * x / 5.0)
    assert weighted_c3_norm(x, s * f, 8.0) == pytest.approx(s * weighted_c3_norm(x, f, 8.0), rel=1e-12)
