"""Linearization about a standing source and its spectral data.

Perturbations are written ``A = (r + w) exp(i phi - i omega0 t)`` with
``w = R + i r phi~``, so that ``U = (Re w, Im w)``.  In this variable the
linearization reads

    w_t = c2 w_xx + c1 w_x + c0 w + cb conj(w)

with smooth coefficients and no division by ``r``; the real 2x2 form of
this expression is the operator acting on ``U`` (interleaved samples
``R_0, P_0, R_1, P_1, ...``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import ConvergenceError, DomainError, HypothesisFailure
from .grid import GridSpec, derivative, diff_matrix
from .profile import ORDER, SourceProfile, _tail_fit
from .wavetrain import QcglParams, WaveTrain, far_field_zero_order, _d_matrices

log = logging.getLogger(__name__)

# second-order centered stencils for the operator
OP_ORDER = 2


def japanese_bracket(x):
    """Smooth surrogate ``sqrt(1 + x^2)`` of ``|x|``."""
    return np.sqrt(1.0 + np.asarray(x) ** 2)


def default_weight(eta0: float) -> float:
    return min(0.5 * eta0, 0.25)


@dataclass
class DiscretizedOperator:
    matrix: sparse.csr_matrix
    grid: GridSpec
    weight_eta: float
    bc: str
    coefficients: dict = field(repr=False, default_factory=dict)

    @property
    def n(self) -> int:
        return self.grid.n

    def interior(self) -> sparse.csc_matrix:
        """Operator restricted to interior nodes (Dirichlet closure)."""
        keep = interior_indices(self.n)
        return self.matrix[keep][:, keep].tocsc()


@dataclass
class SpectralData:
    eigenvalues: list
    kernel: tuple
    adjoints: tuple
    M_psi: np.ndarray
    M: np.ndarray
    info: dict = field(default_factory=dict)


def interior_indices(n: int) -> np.ndarray:
    return np.arange(2, 2 * n - 2)


def interleave(R, P) -> np.ndarray:
    out = np.empty(2 * len(R), dtype=np.result_type(R, P))
    out[0::2] = R
    out[1::2] = P
    return out


def split(U):
    return U[0::2], U[1::2]


def kernel_fields(profile: SourceProfile, order: int = ORDER):
    """``V1 = (r_x, r phi_x)`` and ``V2 = (0, r)`` as interleaved samples."""
    rx = derivative(profile.r, profile.grid.spacing, 1, order)
    v1 = interleave(rx, profile.r * profile.phi_x)
    v2 = interleave(np.zeros_like(profile.r), profile.r)
    return v1, v2


def operator_coefficients(profile: SourceProfile, params: QcglParams, eta: float = 0.0):
    """Complex coefficients ``(c2, c1, c0, cb)`` of the (weighted) linearization.

    The weighted operator is ``exp(-eta <x>) L exp(eta <x>)``.
    """
    a, b = params.alpha, params.beta
    gam = params.gamma1 + 1j * params.gamma2
    r, px = profile.r, profile.phi_x
    pxx = derivative(px, profile.grid.spacing, 1, ORDER)
    r2, r4 = r * r, r**4
    c2 = (1 + 1j * a) * np.ones_like(r)
    c1 = 2j * px * (1 + 1j * a)
    c0 = (1 + 1j * a) * (1j * pxx - px**2) + (1 + 1j * profile.omega0) - 2 * (1 + 1j * b) * r2 + 3 * gam * r4
    cb = -(1 + 1j * b) * r2 + 2 * gam * r4
    if eta:
        x = profile.x
        rho_x = x / japanese_bracket(x)
        rho_xx = 1.0 / japanese_bracket(x) ** 3
        c0 = c0 + eta * rho_x * c1 + c2 * (eta * rho_xx + (eta * rho_x) ** 2)
        c1 = c1 + 2 * eta * rho_x * c2
    return c2, c1, c0, cb


def _real_form(c2, c1, c0, cb, d1, d2):
    dg = sparse.diags
    rr = dg(c2.real) @ d2 + dg(c1.real) @ d1 + dg(c0.real + cb.real)
    rp = -dg(c2.imag) @ d2 - dg(c1.imag) @ d1 + dg(-c0.imag + cb.imag)
    pr = dg(c2.imag) @ d2 + dg(c1.imag) @ d1 + dg(c0.imag + cb.imag)
    pp = dg(c2.real) @ d2 + dg(c1.real) @ d1 + dg(c0.real - cb.real)
    block = sparse.bmat([[rr, rp], [pr, pp]]).tocsr()
    n = d1.shape[0]
    perm = interleave(np.arange(n), np.arange(n, 2 * n))
    return block[perm][:, perm].tocsr()


def assemble_operator(profile: SourceProfile, params: QcglParams, eta: float = 0.0,
                      order: int = OP_ORDER) -> DiscretizedOperator:
    if eta < 0:
        raise DomainError("weight eta must be nonnegative")
    r = profile.r
    c = profile.grid.center
    sign = np.sign(r)
    flips = np.flatnonzero(sign[1:] * sign[:-1] < 0)
    zeros = np.flatnonzero(sign == 0)
    if len(flips) + len(zeros) > 1 or any(abs(i - c) > 1 for i in np.concatenate([flips, zeros])):
        raise DomainError("amplitude vanishes away from the core; multi-defect profiles unsupported")
    n, h = profile.grid.n, profile.grid.spacing
    coeffs = operator_coefficients(profile, params, eta)
    mat = _real_form(*coeffs, diff_matrix(n, h, 1, order), diff_matrix(n, h, 2, order))
    return DiscretizedOperator(mat, profile.grid, float(eta), "dirichlet-interior",
                               dict(zip(("c2", "c1", "c0", "cb"), coeffs)))


def start_vector(m: int) -> np.ndarray:
    """Fixed Arnoldi start vector; ARPACK's default is random."""
    return np.random.default_rng(12345).standard_normal(m).astype(complex)


def point_spectrum(op: DiscretizedOperator, count: int, shift: complex = 0.0, tol: float = 1e-12):
    """The ``count`` eigenvalues nearest ``shift`` (shift-invert Arnoldi)."""
    if count <= 0:
        return []
    a = op.interior().astype(complex)
    m = a.shape[0]
    if count >= m - 1:
        vals = np.linalg.eigvals(a.toarray())
    else:
        try:
            vals = spla.eigs(a, k=count, sigma=shift, which="LM", return_eigenvectors=False,
                             tol=tol, maxiter=5000, v0=start_vector(m))
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"eigensolver did not converge near {shift}") from exc
        except RuntimeError as exc:
            raise ConvergenceError(f"shift-invert factorization failed: {exc}") from exc
    vals = np.asarray(vals)
    vals = vals[np.argsort(np.abs(vals - shift), kind="stable")][:count]
    return [complex(v) for v in vals]


def zero_threshold(op: DiscretizedOperator) -> float:
    """Acceptance floor ``10 h^2`` for the embedded zero eigenvalues."""
    return 10.0 * op.grid.spacing**2


def count_zero_eigenvalues(op: DiscretizedOperator, count: int = 4):
    vals = point_spectrum(op, count, 0.0)
    floor = zero_threshold(op)
    return sum(abs(v) < floor for v in vals), vals


def _left_null(op: DiscretizedOperator):
    a = op.interior().T.tocsc().astype(complex)
    vals, vecs = spla.eigs(a, k=2, sigma=0.0, which="LM", tol=1e-14, maxiter=5000, v0=start_vector(a.shape[0]))
    # real basis of the (real) left null space
    basis = np.concatenate([vecs.real, vecs.imag], axis=1)
    q, s, _ = np.linalg.svd(basis, full_matrices=False)
    return vals, q[:, :2]


def adjoint_pair(profile: SourceProfile, op: DiscretizedOperator, det_tol: float = 1e-8) -> SpectralData:
    """Left null vectors normalized against ``(V1, V2)``.

    ``M_psi`` is the pairing matrix of the unit-norm raw adjoint vectors
    with the kernel; the returned adjoints satisfy ``int <psi_i, V_j> =
    delta_ij``.
    """
    n, h = op.n, op.grid.spacing
    keep = interior_indices(n)
    vals, raw = _left_null(op)
    rho = japanese_bracket(profile.x)
    unweight = np.repeat(np.exp(-op.weight_eta * rho), 2)
    psis = []
    for j in range(2):
        full = np.zeros(2 * n)
        full[keep] = raw[:, j]
        # left vectors of W^-1 L W map back through W^-1; the 1/h turns the
        # discrete pairing into a quadrature
        full = full * unweight / h
        psis.append(full / math.sqrt(h * np.sum(full**2)))
    v1, v2 = kernel_fields(profile)
    kern = (v1, v2)
    m_psi = np.array([[h * psis[i] @ kern[j] for j in range(2)] for i in range(2)])
    det = float(np.linalg.det(m_psi))
    if abs(det) < det_tol:
        raise HypothesisFailure(f"M_psi is singular (det = {det:.3g}); the zero eigenvalue is not semisimple")
    m_inv = np.linalg.inv(m_psi)
    normed = m_inv @ np.vstack(psis)
    psi1, psi2 = normed[0], normed[1]
    info = {"det_M_psi": det, "null_eigenvalues": [complex(v) for v in vals]}
    try:
        info["psi1_decay"] = adjoint_decay_rate(profile.x, psi1)
        info["psi2_decay"] = adjoint_decay_rate(profile.x, psi2)
    except Exception as exc:  # localization fit is a diagnostic only
        info["decay_error"] = str(exc)
    return SpectralData([complex(v) for v in vals], kern, (psi1, psi2), m_psi, m_inv, info)


def adjoint_decay_rate(x, psi, floor: float = 1e-12):
    amp = np.hypot(*split(psi))
    rates = []
    for side in (1, -1):
        m = side * x > 1.0
        dev = amp[m]
        rate, _ = _tail_fit(x[m], dev, floor * max(amp.max(), 1e-300))
        rates.append(rate)
    return float(min(rates))


def gram(spectral: SpectralData, h: float) -> np.ndarray:
    psi, v = spectral.adjoints, spectral.kernel
    return np.array([[h * psi[i] @ v[j] for j in range(2)] for i in range(2)])


def spatial_eigenvalues(params: QcglParams, wt: WaveTrain, lam: complex, end: int = 1,
                        tol: float = 1e-6, floor: float = 1e-10):
    """Roots ``nu`` of the far-field characteristic quartic at ``end``.

    Returns ``(roots, labels)`` with labels ``"unstable"`` (Re nu > 0),
    ``"stable"`` or ``"center"``.
    """
    if end not in (1, -1):
        raise ValueError("end must be +1 or -1")
    d1, d2 = _d_matrices(params)
    d0 = far_field_zero_order(wt)
    d2inv = np.linalg.inv(d2)
    b0 = d2inv @ (lam * np.eye(2) - d0)
    c0 = d2inv @ d1
    k_end = end * wt.orientation * wt.k0
    comp = np.zeros((4, 4), dtype=complex)
    comp[:2, 2:] = np.eye(2)
    comp[2:, :2] = b0
    comp[2:, 2:] = 2.0 * k_end * c0
    roots = np.linalg.eigvals(comp)
    roots = roots[np.lexsort((roots.imag, roots.real))]
    thresh = tol * abs(lam) + floor
    labels = ["center" if abs(z.real) < thresh else ("unstable" if z.real > 0 else "stable") for z in roots]
    return roots, labels


def center_root(params: QcglParams, wt: WaveTrain, lam: complex, end: int = 1) -> complex:
    roots, _ = spatial_eigenvalues(params, wt, lam, end)
    return complex(roots[np.argmin(np.abs(roots))])


def critical_spatial_expansion(params: QcglParams, wt: WaveTrain, end: int = 1,
                               lam_max: float | None = None, npts: int = 41, degree: int = 5):
    """Fit ``nu_c(lambda) = c1 lambda + c2 lambda^2 + ...`` (``degree`` terms)
    for real ``lambda`` in ``(0, lam_max]``; returns ``(c1, c2, residual)``.

    The default window is ``0.02 min(1, c_g^2/|d|)``, inside the radius where
    the series terms are comparable.
    """
    if lam_max is None:
        lam_max = 0.02 * min(1.0, wt.cg**2 / max(abs(wt.d), 1e-12))
    lams = np.linspace(lam_max / npts, lam_max, npts)
    nus = np.array([center_root(params, wt, lam, end) for lam in lams])
    v = np.vander(lams, degree + 1, increasing=True)[:, 1:]
    coef, *_ = np.linalg.lstsq(v, nus.real, rcond=None)
    resid = float(np.max(np.abs(v @ coef - nus.real)))
    return float(coef[0]), float(coef[1]), resid


def far_field_symbol(op: DiscretizedOperator, kappa: float, end: int = 1, depth: float = 0.125):
    """2x2 symbol of the discrete operator on ``exp(i kappa x) w`` read off
    a fraction ``depth`` of the domain inside the ``end`` boundary."""
    n = op.n
    i = n - 1 - int(depth * n) if end == 1 else int(depth * n)
    wave = np.exp(1j * kappa * op.grid.x)
    sym = np.zeros((2, 2), dtype=complex)
    for col in range(2):
        u = np.zeros(2 * n, dtype=complex)
        u[col::2] = wave
        out = op.matrix @ u
        sym[:, col] = out[2 * i:2 * i + 2] / wave[i]
    return sym


def core_eigenvalues(profile: SourceProfile, params: QcglParams, width: float = 6.0,
                     localization: float = 0.3):
    """Dense eigenvalues whose eigenvectors carry more than ``localization``
    of their mass within ``|x| < width``, sorted by decreasing real part.

    Meant for modest grids (a few hundred nodes); the essential spectrum of
    the truncated operator is filtered out by the localization test.
    """
    op = assemble_operator(profile, params, 0.0)
    vals, vecs = np.linalg.eig(op.interior().toarray())
    x = profile.x[1:-1]
    near = np.repeat(np.abs(x) < width, 2)
    mass = np.abs(vecs) ** 2
    frac = mass[near].sum(axis=0) / mass.sum(axis=0)
    core = vals[frac > localization]
    return core[np.argsort(-core.real, kind="stable")]


def stability_verdict(profile: SourceProfile, params: QcglParams, zero_tol: float = 3e-3):
    """``(verdict, max_re, n_zero)`` from the core point spectrum.

    Eigenvalues within ``zero_tol`` of the origin count as the embedded
    zeros; any other eigenvalue with nonnegative real part is unstable.
    """
    core = core_eigenvalues(profile, params)
    zero = np.abs(core) < zero_tol
    rest = core[~zero]
    max_re = float(rest.real.max()) if rest.size else -math.inf
    verdict = "stable" if max_re < 0 else "unstable"
    return verdict, max_re, int(zero.sum())
