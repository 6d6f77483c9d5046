"""Closed-form modulation fields around a standing source.

The plateau ``e(x, t)`` is a difference of two error functions moving at
``+-c_g`` and spreading diffusively with coefficient ``d``.  With
``B(x, t) = e(x, t + 1)`` the Cole-Hopf pair

    phi_hat = d/(2q) [log(1 + dp B) + log(1 + dm B)]
    p       = d/(2q k0) [log(1 + dp B) - log(1 + dm B)]

gives the phase modulation and spatial shift.  Hatted quantities live in
the variables that diagonalize the far-field zero-order matrix; the map
back to ``U = (R, r phi)`` is ``S = [[1, 0], [beta_star, -1]]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .errors import AnsatzUndefinedError, DomainError
from .grid import derivative
from .profile import ORDER, SourceProfile
from .wavetrain import WaveTrain

ERRFN_NORMALIZATIONS = ("standard", "literal")


def errfn(z, normalization: str = "standard"):
    """Cumulative Gaussian with limits 0 and 1.

    ``normalization="literal"`` uses the prefactor ``1/(2 pi)`` in front of
    ``int_{-inf}^z exp(-s^2) ds``, which tends to ``1/(2 sqrt(pi))``; it is
    kept only for sensitivity checks.
    """
    z = np.asarray(z, dtype=float)
    base = 0.5 * (1.0 + special.erf(z))
    if normalization == "standard":
        return base
    if normalization == "literal":
        return base / (2.0 * math.sqrt(math.pi))
    raise ValueError(f"unknown errfn normalization {normalization!r}")


def _errfn_scale(normalization: str) -> float:
    return 1.0 if normalization == "standard" else 1.0 / (2.0 * math.sqrt(math.pi))


def _require_plateau(wt: WaveTrain):
    if not wt.d > 0:
        raise AnsatzUndefinedError(f"plateau needs d > 0 (d = {wt.d:.6g})")


def plateau(x, t, wt: WaveTrain, normalization: str = "standard"):
    """``e(x, t) = errfn((x + c t)/sqrt(4 d t)) - errfn((x - c t)/sqrt(4 d t))``."""
    _require_plateau(wt)
    if not t > 0:
        raise DomainError("plateau needs t > 0")
    s = math.sqrt(4.0 * wt.d * t)
    x = np.asarray(x, dtype=float)
    return errfn((x + wt.cg * t) / s, normalization) - errfn((x - wt.cg * t) / s, normalization)


def plateau_derivatives(x, t, wt: WaveTrain, normalization: str = "standard"):
    """``(e, e_x, e_xx, e_t)`` in closed form."""
    _require_plateau(wt)
    if not t > 0:
        raise DomainError("plateau needs t > 0")
    x = np.asarray(x, dtype=float)
    c, d = wt.cg, wt.d
    s = math.sqrt(4.0 * d * t)
    k = _errfn_scale(normalization)
    zp, zm = (x + c * t) / s, (x - c * t) / s
    gp, gm = np.exp(-zp * zp), np.exp(-zm * zm)
    e = errfn(zp, normalization) - errfn(zm, normalization)
    # d/dz errfn = k exp(-z^2)/sqrt(pi)
    a = k / math.sqrt(math.pi)
    ex = a * (gp - gm) / s
    exx = a * (-2.0 * zp * gp + 2.0 * zm * gm) / s**2
    # dz/dt = (+-c)/s - z/(2t)
    et = a * (gp * (c / s - zp / (2 * t)) - gm * (-c / s - zm / (2 * t)))
    return e, ex, exx, et


def gaussian_profile(x, t, wt: WaveTrain, M0: float):
    """Envelope ``theta(x, t)`` of the two Gaussian packets."""
    if not M0 > 0:
        raise DomainError("M0 must be positive")
    x = np.asarray(x, dtype=float)
    w = M0 * (t + 1.0)
    return (np.exp(-((x - wt.cg * t) ** 2) / w) + np.exp(-((x + wt.cg * t) ** 2) / w)) / math.sqrt(1.0 + t)


def default_M0(wt: WaveTrain) -> float:
    """Width constant of ``theta``: sixteen times the widest heat-kernel scale."""
    _require_plateau(wt)
    return 16.0 * max(4.0 * wt.d, 8.0 * wt.d / max(wt.cg, 1e-12) ** 2)


@dataclass(frozen=True)
class ModulationState:
    delta_plus: float
    delta_minus: float
    t: float
    wt: WaveTrain
    M0: float = float("nan")
    normalization: str = "standard"

    def __post_init__(self):
        # sup|B| = 1, so |delta| < 1 keeps both logarithms defined
        for name in ("delta_plus", "delta_minus"):
            if not abs(getattr(self, name)) < 1.0:
                raise DomainError(f"|{name}| must be < 1 for the logarithms to be defined")
        if self.t < 0:
            raise DomainError("t must be nonnegative")
        if not self.wt.q_defined:
            raise AnsatzUndefinedError("q = 0: the Cole-Hopf pair is undefined")
        _require_plateau(self.wt)
        if self.normalization not in ERRFN_NORMALIZATIONS:
            raise ValueError(f"unknown errfn normalization {self.normalization!r}")

    @property
    def theta_width(self) -> float:
        return self.M0 if self.M0 == self.M0 else default_M0(self.wt)

    def at(self, t: float) -> "ModulationState":
        return replace(self, t=float(t))

    def with_deltas(self, dp: float, dm: float) -> "ModulationState":
        return replace(self, delta_plus=float(dp), delta_minus=float(dm))

    def swapped(self) -> "ModulationState":
        return replace(self, delta_plus=self.delta_minus, delta_minus=self.delta_plus)


def asymptotic_shifts(delta_plus: float, delta_minus: float, wt: WaveTrain):
    """``(delta_phi, delta_p)``: plateau heights of the phase and the shift."""
    c = wt.d / (2.0 * wt.q)
    delta_phi = -c * (math.log1p(delta_plus) + math.log1p(delta_minus))
    delta_p = c / wt.k0 * (math.log1p(delta_plus) - math.log1p(delta_minus))
    return delta_phi, delta_p


@dataclass
class PhaseFields:
    phi_hat: np.ndarray
    p: np.ndarray
    phi_a: np.ndarray
    # x-derivatives of phi_hat and p, orders 1 and 2
    phi_hat_x: np.ndarray = None
    phi_hat_xx: np.ndarray = None
    p_x: np.ndarray = None
    p_xx: np.ndarray = None
    B: np.ndarray = None


def _cole_hopf(dl, B, Bx, Bxx):
    """``log(1 + dl B)`` and its first two x-derivatives."""
    den = 1.0 + dl * B
    if np.any(den <= 0):
        raise DomainError("1 + delta B <= 0: logarithm undefined")
    g = np.log1p(dl * B)
    gx = dl * Bx / den
    gxx = dl * Bxx / den - (dl * Bx / den) ** 2
    return g, gx, gxx


def phase_ansatz(x, state: ModulationState, t: float | None = None, B=None) -> PhaseFields:
    """Cole-Hopf phase ``phi_hat``, shift ``p`` and physical phase ``-phi_hat``.

    ``B`` defaults to ``e(x, t + 1)``; a tuple ``(B, B_x, B_xx)`` may be
    passed instead (any solution of the linear transport-diffusion problem).
    """
    wt = state.wt
    t = state.t if t is None else t
    if B is None:
        b, bx, bxx, _ = plateau_derivatives(x, t + 1.0, wt, state.normalization)
    else:
        b, bx, bxx = (np.broadcast_to(np.asarray(v, dtype=float), np.shape(x)) for v in B)
    gp, gpx, gpxx = _cole_hopf(state.delta_plus, b, bx, bxx)
    gm, gmx, gmxx = _cole_hopf(state.delta_minus, b, bx, bxx)
    c = wt.d / (2.0 * wt.q)
    ck = c / wt.k0
    phi_hat = c * (gp + gm)
    p = ck * (gp - gm)
    return PhaseFields(phi_hat, p, -phi_hat, c * (gpx + gmx), c * (gpxx + gmxx),
                       ck * (gpx - gmx), ck * (gpxx - gmxx), b)


def burgers_residual(state: ModulationState, x, phi_x, t: float, dt: float, B=None, order: int = 4):
    """``L_B W - q W_x^2`` for ``W = phi_hat +- k0 p``.

    ``L_B = d/dt + 2 (alpha - beta_star) phi_x d/dx - d d^2/dx^2``, evaluated
    by centered differences (spacing of ``x`` in space, ``dt`` in time).
    ``B`` may be a callable ``t -> (B, B_x, B_xx)``.  Returns
    ``(res_plus, res_minus)`` with stencil bands zeroed.
    """
    wt = state.wt
    x = np.asarray(x, dtype=float)
    h = x[1] - x[0]

    def w_pair(tt):
        bb = None if B is None else B(tt)
        f = phase_ansatz(x, state, tt, bb)
        return f.phi_hat + wt.k0 * f.p, f.phi_hat - wt.k0 * f.p

    now = w_pair(t)
    if t - dt < 0 and B is None:
        raise DomainError("need t >= dt for the centered time difference")
    later, earlier = w_pair(t + dt), w_pair(t - dt)
    adv = 2.0 * (wt.params.alpha - wt.beta_star) * np.asarray(phi_x)
    band = order // 2 + 1
    out = []
    for k in range(2):
        w = now[k]
        wt_ = (later[k] - earlier[k]) / (2.0 * dt)
        wx = derivative(w, h, 1, order)
        wxx = derivative(w, h, 2, order)
        res = wt_ + adv * wx - wt.d * wxx - wt.q * wx**2
        res[:band] = res[-band:] = 0.0
        out.append(res)
    return tuple(out)


@dataclass
class AnsatzFields:
    x: np.ndarray
    t: float
    phi_hat: np.ndarray
    p: np.ndarray
    R_hat0: np.ndarray
    R_hat1: np.ndarray
    R_a: np.ndarray
    rphi_a: np.ndarray
    phi_a: np.ndarray
    E_plus: np.ndarray = None
    E_minus: np.ndarray = None
    extra: dict = field(default_factory=dict)

    @property
    def R_hat(self) -> np.ndarray:
        return self.R_hat0 + self.R_hat1

    @property
    def U(self) -> np.ndarray:
        """``U^a = S (R_hat, r phi_hat)`` as an ``(2, N)`` array."""
        return np.vstack([self.R_a, self.rphi_a])


def amplitude_ansatz(profile: SourceProfile, state: ModulationState, t: float | None = None,
                     order: int = ORDER) -> AnsatzFields:
    """Amplitude correction ``R_hat = R_hat0 + R_hat1`` and ``U^a = S U_hat``.

    ``R_hat1`` is the algebraic correction that cancels the quadratic and
    next-order terms of the amplitude equation; its time derivative is
    replaced by transport, ``(R_hat0)_t ~ -2 (alpha - beta_star) phi_x
    (R_hat0)_x``.
    """
    wt = state.wt
    t = state.t if t is None else t
    x, h = profile.x, profile.grid.spacing
    a, g1 = wt.params.alpha, wt.params.gamma1
    bs, k0, r0, den = wt.beta_star, wt.k0, wt.r0, wt.denom
    r, px = profile.r, profile.phi_x
    f = phase_ansatz(x, state, t)
    hx, hxx, pxp, pxx = f.phi_hat_x, f.phi_hat_xx, f.p_x, f.p_xx
    mix = hx + px * pxp
    R0 = k0 / (r0 * den) * mix
    R0x = derivative(R0, h, 1, order)
    R0t = -2.0 * (a - bs) * px * R0x
    rhs = (-R0t - 2.0 * (a + bs) * px * R0x + a * r * (hxx + px * pxx) + 2.0 * px * mix * R0
           - r * hx**2 - 3.0 * r * px**2 * pxp**2 - 4.0 * r * px * pxp * hx
           - (3.0 * r - 10.0 * g1 * r**3) * R0**2)
    R1 = rhs / (2.0 * r0**2 * den)
    R_hat = R0 + R1
    rphi_a = bs * R_hat - r * f.phi_hat
    with np.errstate(divide="ignore", invalid="ignore"):
        phi_a = np.where(np.abs(r) > 1e-12, rphi_a / r, -f.phi_hat)
    return AnsatzFields(x, t, f.phi_hat, f.p, R0, R1, R_hat, rphi_a, phi_a,
                        extra={"phase": f})


def neutral_modes(profile: SourceProfile, wt: WaveTrain, t: float, order: int = ORDER,
                  normalization: str = "standard"):
    """Neutral modes ``E+`` and ``E-`` as ``(2, N)`` arrays.

    They are the leading-order derivatives of ``U^a - p (r_x, r phi_x)``
    with respect to ``log(1 + delta+-)``, scaled by ``2q/d``; in particular
    ``E+- = -B V2 -+ (B/k0) V1 + O(theta)``.
    """
    _require_plateau(wt)
    x = profile.x
    b, bx, _, _ = plateau_derivatives(x, t + 1.0, wt, normalization)
    r, px = profile.r, profile.phi_x
    rx = derivative(r, profile.grid.spacing, 1, order)
    k0, bs = wt.k0, wt.beta_star
    out = []
    for s in (1, -1):
        rh = (k0 + s * px) / (wt.r0 * wt.denom) * bx
        e = np.vstack([rh, bs * rh - r * b]) - s * (b / k0) * np.vstack([rx, r * px])
        out.append(e)
    return out[0], out[1]


def sigma_modes(profile: SourceProfile, state: ModulationState, step: float = 1e-6):
    """``Sigma+-``: derivative of ``U^a - p (r_x, r phi_x)`` in ``delta+-``
    by centered differences."""
    rx = derivative(profile.r, profile.grid.spacing, 1, ORDER)
    v1 = np.vstack([rx, profile.r * profile.phi_x])
    out = []
    for which in ("delta_plus", "delta_minus"):
        base = getattr(state, which)
        fp = amplitude_ansatz(profile, replace(state, **{which: base + step}))
        fm = amplitude_ansatz(profile, replace(state, **{which: base - step}))
        out.append((fp.U - fm.U) / (2 * step) - (fp.p - fm.p) / (2 * step) * v1)
    return out[0], out[1]


def psi_combinations(psi1, psi2, k0: float):
    """Adjoint combinations ``Psi+-`` dual to ``E+-``.

    With ``<psi_i, V_j> = delta_ij`` and ``E+- ~ -B V2 -+ (B/k0) V1`` the
    projection ``e V1 <psi1, .> + e V2 <psi2, .>`` equals
    ``E+ <Psi+, .> + E- <Psi-, .>`` for ``Psi+- = -psi2/2 -+ (k0/2) psi1``.
    """
    return -0.5 * psi2 - 0.5 * k0 * psi1, -0.5 * psi2 + 0.5 * k0 * psi1


def modulated_source(profile: SourceProfile, state: ModulationState, t: float | None = None,
                     full: bool = False) -> np.ndarray:
    """``A_mod = r exp(i (phi + phi^a)) exp(-i omega0 t)``.

    By default ``phi^a = -phi_hat`` (leading order); ``full=True`` uses the
    complete ``S``-transform phase ``(beta_star R_hat - r phi_hat) / r``.
    """
    t = state.t if t is None else t
    if full:
        phi_a = amplitude_ansatz(profile, state, t).phi_a
    else:
        phi_a = phase_ansatz(profile.x, state, t).phi_a
    return profile.r * np.exp(1j * (profile.phi + phi_a - profile.omega0 * t))
