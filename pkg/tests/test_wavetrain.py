import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcgl_sources.errors import DomainError, NotASourceError
from qcgl_sources.wavetrain import (
    QcglParams,
    amplitude_of_wavenumber,
    essential_spectrum_margin,
    fit_dispersion_tip,
    group_velocity_fd,
    linear_dispersion,
    omega_nl,
    wave_train_constants,
)

NB = QcglParams(1.0, -1.0)
NB_K0 = 0.566030


def test_amplitude_examples():
    assert amplitude_of_wavenumber(QcglParams(0.3, 0.1), 0.5) == pytest.approx(math.sqrt(0.75), abs=1e-12)
    # quadratic formula in s = r0^2: s = (1 - sqrt(0.85)) / 0.1
    s = (1 - math.sqrt(0.85)) / 0.1
    assert amplitude_of_wavenumber(QcglParams(0.3, 0.1, 0.05, 0.7), 0.5) == pytest.approx(math.sqrt(s), abs=1e-12)
    assert math.sqrt(s) == pytest.approx(0.8834339492611, abs=1e-12)
    assert amplitude_of_wavenumber(QcglParams(0.3, 0.1), 0.0) == 1.0


def test_amplitude_solves_quartic():
    P = QcglParams(1.0, 0.5, -0.2, 0.1)
    for k in (0.0, 0.3, 0.7):
        r0 = amplitude_of_wavenumber(P, k)
        assert abs(P.gamma1 * r0**4 - r0**2 + 1 - k * k) < 1e-12


def test_amplitude_out_of_range():
    with pytest.raises(DomainError):
        amplitude_of_wavenumber(QcglParams(0.0, 0.0), 1.2)


def test_cubic_q_is_alpha_minus_beta():
    wt = wave_train_constants(QcglParams(1.3, 0.2), 0.4)
    assert wt.q == pytest.approx(1.3 - 0.2, rel=1e-14)


def test_nozaki_bekki_wave_train():
    wt = wave_train_constants(NB, NB_K0)
    k2 = NB_K0**2
    # cubic closed forms with beta_star = beta = -1: cg = 4 k0, d = -4 k0^2 / (1 - k0^2)
    assert wt.cg == pytest.approx(4 * NB_K0, rel=1e-14)
    assert wt.cg == pytest.approx(2.264121, abs=2e-6)
    assert wt.d == pytest.approx(-4 * k2 / (1 - k2), rel=1e-14)
    assert wt.d == pytest.approx(-1.8857282410, abs=1e-9)
    assert wt.cg == pytest.approx(2 * NB_K0 * (NB.alpha - wt.beta_star))


def test_zero_wavenumber_is_not_a_source():
    wt = wave_train_constants(NB, 0.0)
    assert wt.cg == 0.0
    with pytest.raises(NotASourceError):
        wt.require_source()


def test_lambda_at_zero():
    P = QcglParams(0.7, 0.2, -0.1, 0.05)
    wt = wave_train_constants(P, 0.3)
    l1, l2 = linear_dispersion(P, wt, 0.0, 1)
    assert l1 == 0
    assert l2 == pytest.approx(-2 * wt.r0**2 * (1 - 2 * P.gamma1 * wt.r0**2), rel=1e-12)


def test_lambda2_homogeneous():
    P = QcglParams(0.0, 0.0)
    wt = wave_train_constants(P, 0.0)
    assert linear_dispersion(P, wt, 0.0, 1)[1] == pytest.approx(-2.0)


def test_tip_fit_matches_constants():
    P = QcglParams(2.0, 0.4, -0.1, -0.05)
    wt = wave_train_constants(P, 0.2290969929757043)
    lin, quad = fit_dispersion_tip(P, wt)
    assert lin == pytest.approx(-wt.cg, rel=0.01)
    assert quad == pytest.approx(-wt.d, rel=0.01)


def test_essential_margin_sign():
    good = QcglParams(2.0, 0.4, -0.1, -0.05)
    wt = wave_train_constants(good, 0.2290969929757043)
    assert wt.d > 0
    assert essential_spectrum_margin(good, wt, np.linspace(-2, 2, 401)) < 0
    wt_nb = wave_train_constants(NB, NB_K0)
    assert essential_spectrum_margin(NB, wt_nb, np.linspace(-2, 2, 401)) > 0
    assert essential_spectrum_margin(NB, wt_nb, [0.0]) == -math.inf


# -- properties ------------------------------------------------------------------

params_st = st.builds(
    QcglParams,
    st.floats(-3, 3),
    st.floats(-3, 3),
    st.floats(-0.15, 0.15),
    st.floats(-0.3, 0.3),
)


@settings(max_examples=60, deadline=None)
@given(params_st, st.floats(0.05, 0.6))
def test_group_velocity_is_dispersion_derivative(P, k):
    try:
        wt = wave_train_constants(P, k)
        amplitude_of_wavenumber(P, k + 0.01)
    except DomainError:
        return
    formula = 2 * k * (P.alpha - wt.beta_star)
    assert group_velocity_fd(P, k) == pytest.approx(formula, rel=1e-6, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.6, 0.6), st.floats(1e-4, 0.1))
def test_amplitude_branch_continuity(k, g):
    base = amplitude_of_wavenumber(QcglParams(1.0, 0.0), k)
    near = amplitude_of_wavenumber(QcglParams(1.0, 0.0, g * 1e-3), k)
    far = amplitude_of_wavenumber(QcglParams(1.0, 0.0, g), k)
    assert abs(near - base) <= abs(far - base) + 1e-15
    assert abs(near - base) < 1e-3


@settings(max_examples=40, deadline=None)
@given(params_st, st.floats(0.05, 0.6), st.floats(-2, 2))
def test_lambda_conjugate_symmetry(P, k, kappa):
    try:
        wt = wave_train_constants(P, k)
    except DomainError:
        return
    a = sorted(linear_dispersion(P, wt, kappa, 1), key=lambda z: (z.real, z.imag))
    b = sorted((np.conj(z) for z in linear_dispersion(P, wt, -kappa, 1)), key=lambda z: (z.real, z.imag))
    assert np.allclose(a, b, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(params_st, st.floats(0.05, 0.6))
def test_lambda1_vanishes_at_zero(P, k):
    try:
        wt = wave_train_constants(P, k)
    except DomainError:
        return
    assert linear_dispersion(P, wt, 0.0, 1)[0] == 0


def test_omega_consistent_with_wavenumber():
    P = QcglParams(0.5, 0.2)
    # cubic: omega_nl = beta + k^2 (alpha - beta)
    assert omega_nl(P, 0.3) == pytest.approx(0.2 + 0.09 * 0.3, rel=1e-12)
