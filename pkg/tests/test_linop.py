import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcgl_sources.grid import GridSpec
from qcgl_sources.linop import (
    adjoint_pair,
    assemble_operator,
    center_root,
    core_eigenvalues,
    count_zero_eigenvalues,
    critical_spatial_expansion,
    far_field_symbol,
    gram,
    interior_indices,
    interleave,
    kernel_fields,
    point_spectrum,
    spatial_eigenvalues,
    split,
    stability_verdict,
    zero_threshold,
)
from qcgl_sources.profile import nozaki_bekki, real_gl_hole, solve_source
from qcgl_sources.wavetrain import QcglParams, _d_matrices, linear_dispersion, wave_train_constants

from conftest import REFERENCE


@pytest.fixture(scope="module")
def ref_small():
    return solve_source(REFERENCE, nozaki_bekki(REFERENCE.alpha, REFERENCE.beta, GridSpec(40.0, 0.1)))


def test_interleave_roundtrip():
    R, P = np.arange(5.0), -np.arange(5.0)
    r2, p2 = split(interleave(R, P))
    assert np.array_equal(R, r2) and np.array_equal(P, p2)


def test_kernel_residual_is_second_order():
    norms = []
    for h in (0.2, 0.1, 0.05):
        prof = solve_source(REFERENCE, nozaki_bekki(2.0, 0.4, GridSpec(40.0, h)))
        op = assemble_operator(prof, REFERENCE, 0.0, 2)
        keep = interior_indices(op.n)
        band = np.repeat(np.abs(prof.x) < 30.0, 2)[keep]
        norms.append([np.abs((op.matrix @ v)[keep][band]).max() for v in kernel_fields(prof)])
    orders = np.log2(np.array(norms[:-1]) / np.array(norms[1:]))
    assert orders.min() > 1.8


def test_two_zero_eigenvalues(ref_small):
    op = assemble_operator(ref_small, REFERENCE, 0.0, 2)
    vals = point_spectrum(op, 4, 0.0)
    # the truncated essential spectrum also clusters near 0, so only the two
    # smallest are required to sit below the floor
    mags = sorted(abs(v) for v in vals)
    assert mags[1] < zero_threshold(op)
    assert mags[0] < 1e-3


def test_empty_request(ref_small):
    op = assemble_operator(ref_small, REFERENCE, 0.0, 2)
    assert point_spectrum(op, 0) == []


def test_rgl_hole_has_positive_eigenvalue():
    prof = real_gl_hole(GridSpec(30.0, 0.1))
    op = assemble_operator(prof, QcglParams(0.0, 0.0), 0.0, 2)
    vals = point_spectrum(op, 4, 0.4)
    assert max(v.real for v in vals) == pytest.approx(0.5, abs=0.01)
    assert stability_verdict(real_gl_hole(GridSpec(20.0, 0.2)), QcglParams(0.0, 0.0))[0] == "unstable"


def test_gram_is_identity(ref_small):
    op = assemble_operator(ref_small, REFERENCE, 0.0, 2)
    sp = adjoint_pair(ref_small, op)
    assert np.abs(gram(sp, ref_small.grid.spacing) - np.eye(2)).max() < 1e-8
    assert abs(np.linalg.det(sp.M_psi)) > 1e-3


def test_adjoints_localized(ref_small):
    op = assemble_operator(ref_small, REFERENCE, 0.0, 2)
    sp = adjoint_pair(ref_small, op)
    rate = sp.info.get("psi1_decay")
    assert rate is not None and rate >= 0.5 * ref_small.eta0 * 0.9


def test_weight_does_not_move_point_spectrum(ref_small):
    core = []
    for eta in (0.0, 0.1):
        op = assemble_operator(ref_small, REFERENCE, eta, 6)
        vals = point_spectrum(op, 6, 0.6)
        core.append(max(vals, key=lambda v: v.real))
    assert abs(core[0] - core[1]) < 1e-6


def test_core_instability_of_reference(ref_small):
    vals = core_eigenvalues(ref_small, REFERENCE)
    assert vals[0].real > 0.5


def test_spatial_roots_at_zero():
    wt = wave_train_constants(REFERENCE, 0.2290969929757043)
    rp, lp = spatial_eigenvalues(REFERENCE, wt, 0.0, 1)
    rm, lm = spatial_eigenvalues(REFERENCE, wt, 0.0, -1)
    assert np.min(np.abs(rp)) < 1e-12 and np.min(np.abs(rm)) < 1e-12
    assert sorted(lp) == ["center", "stable", "unstable", "unstable"]
    assert sorted(lm) == ["center", "stable", "stable", "unstable"]
    assert np.allclose(np.sort_complex(-rp), np.sort_complex(rm))


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.0, 1.0))
def test_essential_curve_has_imaginary_spatial_root(kappa):
    wt = wave_train_constants(REFERENCE, 0.2290969929757043)
    lam = linear_dispersion(REFERENCE, wt, kappa, 1)[0]
    roots, _ = spatial_eigenvalues(REFERENCE, wt, lam, 1)
    assert np.min(np.abs(roots - 1j * kappa)) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False))
def test_quartic_trace_identity(lam):
    wt = wave_train_constants(REFERENCE, 0.2290969929757043)
    roots, _ = spatial_eigenvalues(REFERENCE, wt, lam, 1)
    # sum of companion-matrix eigenvalues equals its trace
    d1, d2 = _d_matrices(REFERENCE)
    trace = np.trace(2.0 * wt.orientation * wt.k0 * np.linalg.inv(d2) @ d1)
    assert abs(roots.sum() - trace) < 1e-12 * max(1.0, abs(trace))


def test_expansion_mirrors_between_ends():
    P = QcglParams(1.0, -1.0)
    wt = wave_train_constants(P, 0.5660187638383031)
    c1p, c2p, _ = critical_spatial_expansion(P, wt, 1)
    c1m, c2m, _ = critical_spatial_expansion(P, wt, -1)
    assert c1m == pytest.approx(-c1p, rel=1e-8)
    assert c1p == pytest.approx(-1 / wt.cg, rel=1e-4)
    assert c2p == pytest.approx(wt.d / wt.cg**3, rel=0.02)


def test_center_root_small_lambda():
    wt = wave_train_constants(REFERENCE, 0.2290969929757043)
    assert abs(center_root(REFERENCE, wt, 1e-6, 1) + 1e-6 / wt.cg) < 1e-9


def test_far_field_symbol_matches_dispersion(ref_small):
    wt = wave_train_constants(REFERENCE, ref_small.k0)
    op = assemble_operator(ref_small, REFERENCE, 0.0, 2)
    kappa = 0.3
    ev = np.sort_complex(np.linalg.eigvals(far_field_symbol(op, kappa, 1)))
    ref = np.sort_complex(np.array(linear_dispersion(REFERENCE, wt, kappa, 1)))
    assert np.abs(ev - ref).max() < 0.05 * kappa**2 + 1e-3


def test_count_zero(ref_small):
    op = assemble_operator(ref_small, REFERENCE, 0.0, 2)
    n, vals = count_zero_eigenvalues(op, 4)
    assert n >= 2
