"""Asymptotic wave trains of the cubic-quintic Ginzburg-Landau equation.

The equation is taken in the normalized form

    A_t = (1 + i alpha) A_xx + A - (1 + i beta) |A|^2 A + (gamma1 + i gamma2) |A|^4 A

whose plane waves ``r0 exp(i(k x - omega t))`` obey

    gamma1 r0^4 - r0^2 + 1 - k^2 = 0,
    omega_nl(k) = beta + (alpha - beta) k^2 + (beta gamma1 - gamma2) r0^4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import (
    DegenerateWaveTrainError,
    DomainError,
    NoRealRootError,
    NotASourceError,
)

# relative size of q below which the Cole-Hopf construction is rejected
Q_TOL = 1e-10


@dataclass(frozen=True)
class QcglParams:
    alpha: float
    beta: float
    gamma1: float = 0.0
    gamma2: float = 0.0

    @property
    def is_cubic(self) -> bool:
        return self.gamma1 == 0.0 and self.gamma2 == 0.0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class WaveTrain:
    """Selected wave train and the coefficients of its modulation equations.

    ``cg`` is stored as a magnitude.  ``orientation`` is ``+1`` when
    ``2 k0 (alpha - beta_star) > 0``; otherwise the source is described in
    the reflected frame ``x -> -x`` and ``orientation`` is ``-1``.
    """

    params: QcglParams
    k0: float
    r0: float
    omega0: float
    beta_star: float
    d: float
    cg: float
    q: float
    orientation: int = 1

    @property
    def denom(self) -> float:
        """``1 - 2 gamma1 r0^2``."""
        return 1.0 - 2.0 * self.params.gamma1 * self.r0**2

    @property
    def is_source(self) -> bool:
        return self.cg > 0.0

    @property
    def q_defined(self) -> bool:
        return abs(self.q) > Q_TOL * max(1.0, abs(self.params.alpha), abs(self.beta_star))

    def cg_end(self, end: int) -> float:
        """Signed group velocity ``c_g^{+-}`` at the end ``end = +1 | -1``."""
        return end * self.cg

    def require_source(self) -> "WaveTrain":
        if not self.is_source:
            raise NotASourceError(f"group velocity {self.cg!r} is not positive; not a source")
        return self

    def require_ansatz(self) -> "WaveTrain":
        self.require_source()
        if self.d <= 0:
            raise DomainError(f"effective diffusion d = {self.d:.6g} <= 0; plateau ansatz undefined")
        if not self.q_defined:
            raise DegenerateWaveTrainError("q = 0: the Cole-Hopf ansatz is undefined")
        return self


def amplitude_of_wavenumber(params: QcglParams, k: float) -> float:
    """Plane-wave amplitude ``r0(k)`` on the branch continuous from the cubic case."""
    if not abs(k) < 1.0:
        raise DomainError(f"|k| = {float(abs(k)):.6g} must be < 1")
    g = params.gamma1
    c = 1.0 - k * k
    disc = 1.0 - 4.0 * g * c
    if disc < 0:
        raise NoRealRootError(
            f"no real plane-wave amplitude: discriminant {disc:.3g} < 0 (gamma1 too large)"
        )
    eps = g * c
    if abs(eps) < 1e-4:
        # s = c * (1 + eps + 2 eps^2 + 5 eps^3 + 14 eps^4 + ...) (Catalan numbers)
        s = c * (1.0 + eps * (1.0 + eps * (2.0 + eps * (5.0 + eps * (14.0 + 42.0 * eps)))))
    else:
        # rationalized form of (1 - sqrt(disc)) / (2 g): no cancellation
        s = 2.0 * c / (1.0 + math.sqrt(disc))
    if s <= 0:
        raise NoRealRootError("plane-wave amplitude squared is not positive")
    return math.sqrt(s)


def omega_nl(params: QcglParams, k: float) -> float:
    r0 = amplitude_of_wavenumber(params, k)
    a, b, g1, g2 = params.alpha, params.beta, params.gamma1, params.gamma2
    return b + (a - b) * k * k + (b * g1 - g2) * r0**4


def wave_train_constants(params: QcglParams, k0: float) -> WaveTrain:
    r0 = amplitude_of_wavenumber(params, k0)
    a, b, g1, g2 = params.alpha, params.beta, params.gamma1, params.gamma2
    denom = 1.0 - 2.0 * g1 * r0**2
    if denom <= 0:
        raise DegenerateWaveTrainError(f"1 - 2 gamma1 r0^2 = {denom:.3g} <= 0")
    omega0 = b + (a - b) * k0**2 + (b * g1 - g2) * r0**4
    beta_star = (b - 2.0 * g2 * r0**2) / denom
    d = (1.0 + a * beta_star) - 2.0 * k0**2 * (1.0 + beta_star**2) / (r0**2 * denom)
    signed_cg = 2.0 * k0 * (a - beta_star)
    q = (a - beta_star) + 4.0 * k0**2 * (g1 * b - g2) / denom**3
    orientation = 1 if signed_cg >= 0 else -1
    return WaveTrain(params, k0, r0, omega0, beta_star, d, abs(signed_cg), q, orientation)


def _d_matrices(params: QcglParams):
    a = params.alpha
    d1 = np.array([[a, 1.0], [-1.0, a]])
    d2 = np.array([[1.0, -a], [a, 1.0]])
    return d1, d2


def far_field_zero_order(wt: WaveTrain) -> np.ndarray:
    """The constant matrix ``D0_inf`` of the far-field operators."""
    g1, g2 = wt.params.gamma1, wt.params.gamma2
    r2 = wt.r0**2
    return -2.0 * r2 * np.array([[1.0 - 2.0 * g1 * r2, 0.0], [wt.params.beta - 2.0 * g2 * r2, 0.0]])


def dispersion_matrix(params: QcglParams, wt: WaveTrain, kappa: float, end: int) -> np.ndarray:
    """Symbol of the far-field operator at ``end`` acting on ``exp(i kappa x) w``."""
    d1, d2 = _d_matrices(params)
    k_end = end * wt.orientation * wt.k0
    return -kappa**2 * d2 - 2j * kappa * k_end * d1 + far_field_zero_order(wt)


def linear_dispersion(params: QcglParams, wt: WaveTrain, kappa: float, end: int = 1):
    """The two essential-spectrum branches at wavenumber ``kappa``.

    ``lambda1`` is the branch with the larger real part, which is the one
    through the origin for small ``kappa``.
    """
    if end not in (1, -1):
        raise ValueError("end must be +1 or -1")
    m = dispersion_matrix(params, wt, kappa, end)
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    root = np.sqrt(complex(tr * tr / 4.0 - det))
    l1, l2 = tr / 2.0 + root, tr / 2.0 - root
    if kappa == 0.0:
        # D0_inf has a zero column: the neutral phase mode is exactly zero
        l1, l2 = 0.0 + 0.0j, complex(m[0, 0])
    elif l2.real > l1.real:
        l1, l2 = l2, l1
    return complex(l1), complex(l2)


def essential_spectrum_margin(
    params: QcglParams, wt: WaveTrain, kappa_grid, exclude: float = 1e-3
) -> float:
    """Largest real part of both branches at both ends over ``kappa_grid``.

    Points with ``|kappa| < exclude`` are skipped on ``lambda1``, whose real
    part vanishes quadratically there.  Returns ``-inf`` when nothing is
    sampled.
    """
    kappa_grid = np.asarray(list(kappa_grid), dtype=float)
    if kappa_grid.size == 0:
        raise ValueError("empty kappa grid")
    margin = -math.inf
    for kappa in kappa_grid:
        for end in (1, -1):
            l1, l2 = linear_dispersion(params, wt, float(kappa), end)
            if abs(kappa) >= exclude:
                margin = max(margin, l1.real, l2.real)
            elif abs(kappa) > 0.0:
                margin = max(margin, l2.real)
    return margin


def fit_dispersion_tip(params: QcglParams, wt: WaveTrain, end: int = 1,
                       window: float = 0.05, npts: int = 41):
    """Fit ``lambda1(kappa)`` by a quartic over ``|kappa| <= window``.

    Returns ``(linear, quadratic)`` coefficients: the imaginary part of the
    linear coefficient (``-c_g^{end}``) and the real part of the quadratic
    coefficient (``-d``).
    """
    kappas = np.linspace(-window, window, npts)
    lam = np.array([linear_dispersion(params, wt, float(k), end)[0] for k in kappas])
    v = np.vander(kappas, 5, increasing=True)
    coef, *_ = np.linalg.lstsq(v, lam, rcond=None)
    return float(coef[1].imag), float(coef[2].real)


def group_velocity_fd(params: QcglParams, k0: float, h: float = 1e-3) -> float:
    """Richardson-extrapolated centered difference of ``omega_nl`` at ``k0``."""
    def cd(step):
        return (omega_nl(params, k0 + step) - omega_nl(params, k0 - step)) / (2 * step)
    return (4.0 * cd(h / 2) - cd(h)) / 3.0
