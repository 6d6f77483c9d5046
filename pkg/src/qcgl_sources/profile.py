"""Standing source profiles ``A = r(x) exp(i phi(x)) exp(-i omega0 t)``.

The cubic Nozaki-Bekki hole is sampled from its closed form; quintic sources
are obtained from it by Newton iteration on a sixth-order collocation of
the profile equation in Cartesian form.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import (
    ConvergenceError,
    DomainError,
    FitError,
    PhaseConditionError,
    SingularJacobianError,
)
from .grid import GridSpec, derivative, diff_matrix
from .wavetrain import QcglParams, amplitude_of_wavenumber, omega_nl

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
# accuracy of the collocation stencils; BAND edge points are excluded from
# residual reports
ORDER = 6
BAND = ORDER // 2


@dataclass
class SourceProfile:
    grid: GridSpec
    r: np.ndarray
    phi: np.ndarray
    phi_x: np.ndarray
    k0: float
    omega0: float
    params: QcglParams
    eta0: float = float("nan")
    info: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def r0(self) -> float:
        return amplitude_of_wavenumber(self.params, self.k0)

    def field(self, t: float = 0.0) -> np.ndarray:
        """Complex source ``A_source(x, t)`` on the grid."""
        return self.r * np.exp(1j * (self.phi - self.omega0 * t))

    def digest(self) -> str:
        """Content hash used to tie simulation manifests to a profile."""
        h = hashlib.sha256()
        for a in (self.x, self.r, self.phi, self.phi_x):
            h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
        h.update(repr((self.k0, self.omega0, self.params)).encode())
        return h.hexdigest()[:16]

    def derivatives(self, order: int = ORDER):
        """``(r_x, r_xx, phi_xx)`` by finite differences."""
        h = self.grid.spacing
        return (
            derivative(self.r, h, 1, order),
            derivative(self.r, h, 2, order),
            derivative(self.phi_x, h, 1, order),
        )


def _log_cosh(z: np.ndarray) -> np.ndarray:
    az = np.abs(z)
    return az + np.log1p(np.exp(-2.0 * az)) - math.log(2.0)


def nozaki_bekki_constants(alpha: float, beta: float):
    """``(delta, kappa, k0, r0, omega0)`` of the standing Nozaki-Bekki hole.

    For ``alpha == beta`` the limit ``delta -> 0`` is returned (a standing
    kink with ``kappa = 1/sqrt(2)``).
    """
    if alpha == beta:
        delta = 0.0
        kappa2 = 0.5
    else:
        b = 3.0 * (1.0 + alpha * beta) / (beta - alpha)
        disc = b * b + 8.0
        roots = ((-b + math.sqrt(disc)) / 2.0, (-b - math.sqrt(disc)) / 2.0)
        admissible = [dl for dl in roots if dl * (alpha - beta) < 0]
        if not admissible:
            raise DomainError("no root delta with delta (alpha - beta) < 0")
        delta = admissible[0]
        denom = (alpha - beta) * delta**2 - 3.0 * delta * (1.0 + alpha**2)
        kappa2 = (alpha - beta) / denom
    if not kappa2 > 0:
        raise DomainError(f"kappa^2 = {kappa2:.4g} <= 0: no hole for (alpha, beta) = ({alpha}, {beta})")
    kappa = math.sqrt(kappa2)
    k0 = -delta * kappa
    if abs(k0) >= 1:
        raise DomainError(f"selected wavenumber |k0| = {abs(k0):.4g} >= 1")
    r0 = math.sqrt(1.0 - k0 * k0)
    omega0 = beta + (alpha - beta) * k0 * k0
    return delta, kappa, k0, r0, omega0


def nozaki_bekki(alpha: float, beta: float, grid: GridSpec) -> SourceProfile:
    delta, kappa, k0, r0, omega0 = nozaki_bekki_constants(alpha, beta)
    x = grid.x
    r = r0 * np.tanh(kappa * x)
    # phi = -delta log(2 cosh kx) + delta log 2, so phi(0) = 0
    phi = -delta * _log_cosh(kappa * x)
    phi_x = -delta * kappa * np.tanh(kappa * x)
    prof = SourceProfile(grid, r, phi, phi_x, k0, omega0, QcglParams(alpha, beta),
                         eta0=2.0 * kappa, info={"delta": delta, "kappa": kappa})
    return prof


def real_gl_hole(grid: GridSpec) -> SourceProfile:
    """The kink ``tanh(x / sqrt 2)`` of the real Ginzburg-Landau equation."""
    return nozaki_bekki(0.0, 0.0, grid)


def ode_residual(profile: SourceProfile, params: QcglParams, order: int = ORDER):
    """Pointwise residuals of the two profile equations.

    Derivatives are taken by finite differences of ``r`` and ``phi``; the
    ``BAND`` points at either end are set to zero.
    """
    n = profile.grid.n
    h = profile.grid.spacing
    if n < 4 * BAND + 3:
        raise DomainError("grid too coarse for the residual stencil")
    res_r, res_phi = _residual_fields(profile.r, profile.phi, profile.omega0, params,
                                      diff_matrix(n, h, 1, order), diff_matrix(n, h, 2, order))
    res_r[:BAND] = res_r[-BAND:] = 0.0
    res_phi[:BAND] = res_phi[-BAND:] = 0.0
    return res_r, res_phi


def _residual_fields(r, phi, omega0, params, d1, d2):
    a, b, g1, g2 = params.alpha, params.beta, params.gamma1, params.gamma2
    rx, rxx = d1 @ r, d2 @ r
    px, pxx = d1 @ phi, d2 @ phi
    r3, r5 = r**3, r**5
    e1 = rxx + r - r * px**2 - 2 * a * rx * px - a * r * pxx - r3 + g1 * r5
    e2 = r * pxx + 2 * rx * px + a * rxx + omega0 * r - a * r * px**2 - b * r3 + g2 * r5
    return e1, e2


class _Collocation:
    """Residual and Jacobian of the collocated profile problem.

    Standing sources are odd, ``a(-x) = -a(x)`` for ``a = r exp(i phi) =
    u + i v``, so the Cartesian form of the profile equation is collocated on
    ``x >= 0`` with the odd extension supplying the stencils across the core.
    Unknowns are ``(u, v, k0, omega0)`` on the half grid.  Rows: the equation
    at interior nodes, ``a(0) = 0``, the gauge ``v'(0) = 0``, the far-field
    conditions ``|a| = r0(k0)`` and ``phi_x = k0`` at ``x = L``, and the
    dispersion relation ``omega0 = omega_nl(k0)``.  Without that last row the
    end of the domain acts as a sink and the wavenumber there decouples from
    the core.  With ``fix_k0`` (cubic case) the wavenumber is frozen and the
    dispersion row dropped.
    """

    def __init__(self, grid: GridSpec, params: QcglParams, fix_k0: bool = False, k0_fixed=None,
                 order: int = ORDER):
        self.grid = grid
        self.params = params
        n, c = grid.n, grid.center
        self.m = m = n - c
        ext = sparse.lil_matrix((n, m))
        for j in range(m):
            ext[c + j, j] = 1.0
            if j:
                ext[c - j, j] = -1.0
        self.ext = ext.tocsr()
        half = slice(c, n)
        self.d1 = (diff_matrix(n, grid.spacing, 1, order) @ self.ext)[half].tocsr()
        self.d2 = (diff_matrix(n, grid.spacing, 2, order) @ self.ext)[half].tocsr()
        self.fix_k0 = fix_k0
        self.k0_fixed = k0_fixed

    def unpack(self, z):
        m = self.m
        u, v = z[:m], z[m:2 * m]
        if self.fix_k0:
            return u, v, self.k0_fixed, z[2 * m]
        return u, v, z[2 * m], z[2 * m + 1]

    def pack(self, profile: SourceProfile):
        c = self.grid.center
        a = (profile.r * np.exp(1j * profile.phi))[c:]
        tail = [profile.omega0] if self.fix_k0 else [profile.k0, profile.omega0]
        return np.concatenate([a.real, a.imag, tail])

    def residual(self, z):
        m = self.m
        p = self.params
        u, v, k0, omega0 = self.unpack(z)
        a = u + 1j * v
        s = u * u + v * v
        f = ((1 + 1j * p.alpha) * (self.d2 @ a) + (1 + 1j * omega0) * a
             - (1 + 1j * p.beta) * s * a + (p.gamma1 + 1j * p.gamma2) * s * s * a)
        ux, vx = self.d1 @ u, self.d1 @ v
        r0 = amplitude_of_wavenumber(p, k0)
        # Im(conj(a) a') = phi_x |a|^2
        flux = u[-1] * vx[-1] - v[-1] * ux[-1]
        rows = [u[0], v[0], vx[0], s[-1] - r0**2, flux - k0 * s[-1]]
        if not self.fix_k0:
            rows.append(omega0 - omega_nl(p, k0))
        inner = slice(1, m - 1)
        return np.concatenate([f.real[inner], f.imag[inner], rows])

    def jacobian(self, z):
        m = self.m
        p = self.params
        u, v, k0, omega0 = self.unpack(z)
        a = u + 1j * v
        s = u * u + v * v
        gam = p.gamma1 + 1j * p.gamma2
        # dF = (1 + i alpha) w'' + cw w + cb conj(w)
        cw = (1 + 1j * omega0) - 2 * (1 + 1j * p.beta) * s + 3 * gam * s * s
        cb = -(1 + 1j * p.beta) * a * a + 2 * gam * s * a * a
        dg = sparse.diags
        d1, d2 = self.d1, self.d2
        j_uu = d2 + dg(cw.real + cb.real)
        j_uv = -p.alpha * d2 + dg(-cw.imag + cb.imag)
        j_vu = p.alpha * d2 + dg(cw.imag + cb.imag)
        j_vv = d2 + dg(cw.real - cb.real)
        inner = slice(1, m - 1)
        npar = 1 if self.fix_k0 else 2
        par = np.zeros((2 * (m - 2), npar))
        # omega0 enters as i a
        par[:, npar - 1] = np.concatenate([-v[inner], u[inner]])
        body = sparse.hstack([sparse.vstack([sparse.hstack([j_uu[inner], j_uv[inner]]),
                                             sparse.hstack([j_vu[inner], j_vv[inner]])]),
                              sparse.csr_matrix(par)])
        nunk = 2 * m + npar
        ux, vx = d1 @ u, d1 @ v
        r0 = amplitude_of_wavenumber(p, k0)
        denom = 1.0 - 2.0 * p.gamma1 * r0**2
        dr02 = -2.0 * k0 / denom
        e = d1[m - 1].toarray().ravel()
        rows = sparse.lil_matrix((6, nunk))
        rows[0, 0] = 1.0
        rows[1, m] = 1.0
        rows[2, m:2 * m] = d1[0].toarray().ravel()
        rows[3, m - 1] = 2 * u[-1]
        rows[3, 2 * m - 1] = 2 * v[-1]
        rows[4, :m] = -v[-1] * e
        rows[4, m:2 * m] = u[-1] * e
        rows[4, m - 1] += vx[-1] - 2 * k0 * u[-1]
        rows[4, 2 * m - 1] += -ux[-1] - 2 * k0 * v[-1]
        if self.fix_k0:
            rows = rows[:5]
        else:
            rows[3, 2 * m] = -dr02
            rows[4, 2 * m] = -s[-1]
            domega = 2 * (p.alpha - p.beta) * k0 + (p.beta * p.gamma1 - p.gamma2) * 2 * r0**2 * dr02
            rows[5, 2 * m] = -domega
            rows[5, 2 * m + 1] = 1.0
        return sparse.vstack([body, rows.tocsr()]).tocsc()

    def to_profile(self, z, params: QcglParams, info=None) -> SourceProfile:
        u, v, k0, omega0 = self.unpack(z)
        c = self.grid.center
        a = self.ext @ (u + 1j * v)
        # gauge: the core slope a'(0) is real, make it positive so r > 0 for x > 0
        if (self.d1 @ u)[0] < 0:
            a = -a
        phi = np.zeros(self.grid.n)
        phi[c + 1:] = np.unwrap(np.angle(a[c + 1:]))
        phi[:c] = phi[c + 1:][::-1]
        r = np.real(a * np.exp(-1j * phi))
        phi_x = derivative(phi, self.grid.spacing, 1, ORDER)
        return SourceProfile(self.grid, r, phi, phi_x, float(k0), float(omega0), params,
                             info=info or {})


def _newton(col: _Collocation, z, tol, max_iter):
    history = []
    for it in range(max_iter + 1):
        f = col.residual(z)
        norm = float(np.max(np.abs(f)))
        history.append(norm)
        log.debug("newton %d residual %.3e", it, norm)
        if not np.isfinite(norm):
            raise ConvergenceError("Newton iterate became non-finite", history)
        if norm < tol:
            return z, history
        if it == max_iter:
            break
        jac = col.jacobian(z)
        try:
            lu = spla.splu(jac)
        except RuntimeError as exc:
            raise SingularJacobianError(f"collocation Jacobian is singular: {exc}", history)
        dz = lu.solve(f)
        if not np.all(np.isfinite(dz)):
            raise SingularJacobianError("collocation Jacobian is singular", history)
        z = z - dz
    raise ConvergenceError(f"Newton did not converge in {max_iter} steps", history)


def solve_source(params: QcglParams, guess: SourceProfile, tol: float = NEWTON_TOL,
                 max_iter: int = 12, continuation_steps: int = 10) -> SourceProfile:
    """Converge a standing source from ``guess`` by Newton's method.

    If the direct iteration fails, the quintic coefficients are ramped up
    from those of ``guess`` in at most ``continuation_steps`` stages.
    """
    grid = guess.grid
    c = grid.center
    scale = max(1e-3, float(np.max(np.abs(guess.r))))
    if abs(guess.r[c]) > 0.1 * scale:
        raise PhaseConditionError(
            f"guess has r(0) = {guess.r[c]:.3g}; the core must sit at x = 0")
    try:
        return _solve_at(params, guess, tol, max_iter)
    except ConvergenceError as exc:
        if continuation_steps <= 1 or params == guess.params:
            raise
        log.info("direct Newton failed (%s); continuing in gamma", exc)
    g_start = np.array([guess.params.gamma1, guess.params.gamma2])
    g_end = np.array([params.gamma1, params.gamma2])
    prof = guess
    for s in np.linspace(0.0, 1.0, continuation_steps + 1)[1:]:
        g = g_start + s * (g_end - g_start)
        step = replace(params, gamma1=float(g[0]), gamma2=float(g[1]))
        prof = _solve_at(step, prof, tol, max_iter)
    return prof


def _solve_at(params: QcglParams, guess: SourceProfile, tol, max_iter) -> SourceProfile:
    cubic = params.is_cubic
    col = _Collocation(guess.grid, params, fix_k0=cubic, k0_fixed=guess.k0)
    z, history = _newton(col, col.pack(guess), tol, max_iter)
    prof = col.to_profile(z, params, {"newton_history": history})
    try:
        prof.eta0 = tail_decay_rate(prof)[0]
    except FitError:
        prof.eta0 = guess.eta0
    return prof


def jacobian_condition(params: QcglParams, profile: SourceProfile) -> float:
    """1-norm condition estimate of the collocation Jacobian at ``profile``."""
    col = _Collocation(profile.grid, params, fix_k0=params.is_cubic, k0_fixed=profile.k0)
    jac = col.jacobian(col.pack(profile))
    lu = spla.splu(jac)
    inv = spla.LinearOperator(jac.shape, matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="T"))
    return float(spla.norm(jac, 1) * spla.onenormest(inv))


def _tail_fit(x, dev, floor):
    """Log-linear fit of ``dev`` against ``|x|`` on the outer half of its
    resolved range (values above ``floor``)."""
    ax = np.abs(x)
    # contiguous resolved range outwards from the core; on wide domains the
    # boundary layer rises above the floor again and must not be fitted
    order = np.argsort(ax, kind="stable")
    below = dev[order] <= floor
    first = int(np.argmax(below)) if below.any() else len(order)
    ok = np.zeros(len(x), dtype=bool)
    ok[order[:first]] = True
    ok &= dev > 0
    if ok.sum() < 8:
        raise FitError("tail not resolved above the noise floor")
    xmax = ax[ok].max()
    # starts where the deviation is 1e-3 of its core value or halfway out
    start = max(0.5 * xmax, ax[ok][np.argmax(dev[ok] < 1e-3 * dev.max())] if np.any(dev[ok] < 1e-3 * dev.max()) else 0)
    sel = ok & (ax >= start) & (ax <= xmax)
    if sel.sum() < 8:
        sel = ok & (ax >= 0.5 * xmax)
    slope, intercept = np.polyfit(ax[sel], np.log(dev[sel]), 1)
    pred = slope * ax[sel] + intercept
    resid = np.log(dev[sel]) - pred
    ss = np.sum((np.log(dev[sel]) - np.log(dev[sel]).mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 0.0
    return -slope, r2


def tail_decay_rate(profile: SourceProfile, floor: float = 1e-11):
    """Exponential approach rate of ``r -> +-r0`` and ``phi_x -> +-k0``.

    Returns ``(eta0, r_squared)`` with the slowest rate over both fields and
    both tails.
    """
    x, r0, k0 = profile.x, profile.r0, profile.k0
    rates, r2s = [], []
    for side in (1, -1):
        m = side * x > 0
        for dev in (np.abs(profile.r - side * r0), np.abs(profile.phi_x - side * k0)):
            if abs(k0) < 1e-14 and dev is not None and np.all(dev[m] < floor):
                continue
            try:
                rate, r2 = _tail_fit(x[m], dev[m], floor)
            except FitError:
                if np.all(dev[m][len(dev[m]) // 2:] <= floor):
                    continue
                raise
            rates.append(rate)
            r2s.append(r2)
    if not rates:
        raise FitError("no resolved tail")
    i = int(np.argmin(rates))
    return float(rates[i]), float(min(r2s))


def profile_diagnostics(profile: SourceProfile, order: int = ORDER) -> dict:
    """Core derivatives, tail decay rate and the structural invariants."""
    c = profile.grid.center
    h = profile.grid.spacing
    rx, rxx, pxx = profile.derivatives(order)
    eta0, r2 = tail_decay_rate(profile)
    if r2 < 0.99:
        raise FitError(f"tail not asymptotic (R^2 = {r2:.4f}); enlarge the domain")
    r0 = profile.r0
    L = profile.grid.half_width
    edge_tol = max(1e-8, 10 * math.exp(-eta0 * L))
    report = {
        "r_x(0)": float(rx[c]),
        "r_xx(0)": float(rxx[c]),
        "phi_x(0)": float(profile.phi_x[c]),
        "r(0)": float(profile.r[c]),
        "eta0": eta0,
        "tail_r_squared": r2,
        "k0": profile.k0,
        "omega0": profile.omega0,
        "omega_nl(k0)": omega_nl(profile.params, profile.k0),
        "r0": r0,
        "edge_r_error": float(max(abs(profile.r[-1] - r0), abs(profile.r[0] + r0))),
        "edge_k_error": float(max(abs(profile.phi_x[-1] - profile.k0), abs(profile.phi_x[0] + profile.k0))),
    }
    report["checks"] = {
        "core_zero": abs(report["r(0)"]) < 10 * h**2,
        "core_slope_nonzero": abs(report["r_x(0)"]) > 1e-3,
        "edges_converged": report["edge_r_error"] < edge_tol and report["edge_k_error"] < edge_tol,
        "frequency_consistent": abs(report["omega0"] - report["omega_nl(k0)"]) < 1e-8,
    }
    return report


def default_half_width(eta0: float) -> float:
    return float(np.clip(50.0 / eta0, 40.0, 400.0))
