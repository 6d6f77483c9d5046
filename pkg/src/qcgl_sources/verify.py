"""Quantitative checks on linearized and nonlinear runs.

Every acceptance threshold used here is an implementation choice; the
analytic statements being tested only assert the existence of constants.
Fit windows start at ``T_MIN`` to skip the initial transient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .ansatz import (
    ModulationState,
    amplitude_ansatz,
    asymptotic_shifts,
    default_M0,
    gaussian_profile,
    modulated_source,
    plateau,
)
from .errors import DomainError, FitError
from .evolve import ModulationFit, Trajectory, interface_width, shift_field
from .grid import derivative
from .linop import assemble_operator, interleave, split
from .profile import ORDER, SourceProfile
from .wavetrain import QcglParams, WaveTrain

T_MIN = 5.0
KAPPA = 0.25
THETA_FLOOR = 1e-8
R2_MIN = 0.95
# largest h(T)/h(0) accepted as bounded by the template monitor
GROWTH_MAX = 1e3


@dataclass
class DecayFit:
    """``y ~ amplitude * t^exponent`` (or ``exp(exponent t)`` for rate fits)."""

    exponent: float
    amplitude: float
    window: tuple
    r_squared: float
    n: int = 0
    kind: str = "power"

    @property
    def trivial(self) -> bool:
        """Series identically zero; nothing to fit."""
        return self.amplitude == 0.0 and self.exponent == -math.inf

    def accepted(self, r2: float = R2_MIN) -> bool:
        return self.trivial or self.r_squared >= r2


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: str
    passed: bool
    note: str = ""


def _window(t, y, t_min, t_max):
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    hi = np.inf if t_max is None else t_max
    m = (t >= t_min) & (t <= hi) & np.isfinite(y)
    return t[m], y[m]


def _regress(u, v):
    A = np.vstack([u, np.ones_like(u)]).T
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    pred = A @ coef
    ss = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - float(np.sum((v - pred) ** 2)) / ss if ss > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def _fit(t, y, t_min, t_max, kind):
    t, y = _window(t, y, t_min, t_max)
    if len(t) and np.all(y == 0):
        return DecayFit(-math.inf, 0.0, (t_min, t_max), 1.0, len(t), kind)
    m = y > 0
    t, y = t[m], y[m]
    if len(t) < 3:
        raise FitError(f"only {len(t)} usable samples in the fit window")
    u = np.log(t) if kind == "power" else t
    slope, icpt, r2 = _regress(u, np.log(y))
    return DecayFit(slope, math.exp(icpt), (float(t[0]), float(t[-1])), r2, len(t), kind)


def fit_power_law(t, y, t_min: float = T_MIN, t_max: float | None = None) -> DecayFit:
    return _fit(t, y, t_min, t_max, "power")


def fit_exponential(t, y, t_min: float = T_MIN, t_max: float | None = None) -> DecayFit:
    return _fit(t, y, t_min, t_max, "exp")


def fit_line(t, y):
    """``(slope, intercept, r^2)`` of an ordinary least-squares line."""
    t, y = np.asarray(t, float), np.asarray(y, float)
    m = np.isfinite(y)
    if m.sum() < 2:
        raise FitError("fewer than two finite samples")
    return _regress(t[m], y[m])


def analysis_mask(x, wt: WaveTrain | None = None, sponge_width: float = 0.0, band: int = ORDER):
    """Nodes away from the sponge layers and the stencil band at the ends."""
    L = float(np.max(np.abs(x)))
    m = np.abs(x) <= L - max(sponge_width, 0.0)
    m[:band] = m[-band:] = False
    return m


# -- Green's function ----------------------------------------------------------

@dataclass
class GreenResult:
    times: np.ndarray
    remainder: np.ndarray
    remainder_R: np.ndarray
    pairings: np.ndarray
    plateau_coeffs: np.ndarray  # least-squares (c1, c2) per frame
    fit: DecayFit | None
    fit_R: DecayFit | None
    front_speeds: tuple = (math.nan, math.nan)


def green_pairings(spectral, U0, h: float) -> np.ndarray:
    """``<psi_j, U0>`` for ``j = 1, 2``."""
    return np.array([h * float(np.dot(psi, U0)) for psi in spectral.adjoints])


def front_positions(x, frames, times, core: float = 5.0):
    """Positions of the steepest descent of the second component on each side."""
    left, right = [], []
    h = x[1] - x[0]
    for U in frames:
        g = np.abs(derivative(split(U)[1], h, 1, 4))
        g[:ORDER] = g[-ORDER:] = 0
        r = x > core
        l = x < -core
        right.append(x[r][np.argmax(g[r])])
        left.append(x[l][np.argmax(g[l])])
    return np.array(left), np.array(right)


def green_decomposition_fit(times, frames, profile: SourceProfile, spectral, wt: WaveTrain, U0,
                            t_min: float = 10.0, t_max: float | None = None, mask=None) -> GreenResult:
    """Subtract ``e(x, t) (V1 <psi1, U0> + V2 <psi2, U0>)`` and fit the decay
    of what is left, overall and in the first (amplitude) row."""
    x, h = profile.x, profile.grid.spacing
    V1, V2 = spectral.kernel
    c = green_pairings(spectral, U0, h)
    mask = analysis_mask(x) if mask is None else mask
    mm = interleave(mask, mask)
    rem, remR, coeffs = [], [], []
    for t, U in zip(times, frames):
        if t <= 0:
            rem.append(np.nan)
            remR.append(np.nan)
            coeffs.append((np.nan, np.nan))
            continue
        e = plateau(x, t, wt)
        ee = interleave(e, e)
        r = U - ee * (c[0] * V1 + c[1] * V2)
        rem.append(float(np.max(np.abs(r[mm]))))
        remR.append(float(np.max(np.abs(r[0::2][mask]))))
        A = np.vstack([(ee * V1)[mm], (ee * V2)[mm]]).T
        coeffs.append(tuple(np.linalg.lstsq(A, U[mm], rcond=None)[0]))
    times = np.asarray(times, float)
    rem, remR = np.array(rem), np.array(remR)
    try:
        fit = fit_power_law(times, rem, t_min, t_max)
        fitR = fit_power_law(times, remR, t_min, t_max)
    except FitError:
        fit = fitR = None
    sel = times >= t_min
    speeds = (math.nan, math.nan)
    if sel.sum() >= 3:
        lp, rp = front_positions(x, np.asarray(frames)[sel], times[sel])
        speeds = (fit_line(times[sel], lp)[0], fit_line(times[sel], rp)[0])
    return GreenResult(times, rem, remR, c, np.array(coeffs), fit, fitR, speeds)


def tail_pairing_decay(spectral, x, ys, component: int = 0):
    """``|<psi_j(y), e_component>|`` at the sample points ``ys`` and the fitted
    exponential rate of their decay in ``|y|``."""
    vals = []
    for y in ys:
        i = int(np.argmin(np.abs(x - y)))
        vals.append(max(abs(psi[2 * i + component]) for psi in spectral.adjoints))
    vals = np.array(vals)
    slope, _, r2 = fit_line(np.abs(ys), np.log(vals))
    return vals, -slope, r2


# -- nonlinear runs ------------------------------------------------------------

def _states(fit: ModulationFit, wt: WaveTrain, M0=None):
    M0 = default_M0(wt) if M0 is None else M0
    for i, t in enumerate(fit.times):
        dp, dm = fit.delta_plus[i], fit.delta_minus[i]
        if np.isfinite(dp) and np.isfinite(dm) and t > 0:
            yield i, ModulationState(float(dp), float(dm), float(t), wt, M0)


@dataclass
class TheoremDecay:
    times: np.ndarray
    W: dict  # derivative order -> series
    fits: dict
    R_sup: np.ndarray
    R_fit: DecayFit | None
    delta_fits: tuple


def theorem_decay_check(traj: Trajectory, fit: ModulationFit, profile: SourceProfile, wt: WaveTrain,
                        kappa: float = KAPPA, M0: float | None = None, orders=(0, 1),
                        t_min: float = 10.0, mask=None, floor: float = THETA_FLOOR) -> TheoremDecay:
    """``W_l(t) = sup |d^l (A(x+p) - A_mod)| / ((1+t)^kappa ((1+t)^(-l/2) + exp(-eta0|x|)) theta)``."""
    x, h = profile.x, profile.grid.spacing
    M0 = default_M0(wt) if M0 is None else M0
    mask = analysis_mask(x) if mask is None else mask
    core = np.exp(-profile.eta0 * np.abs(x))
    times, W, Rsup = [], {l: [] for l in orders}, []
    for i, st in _states(fit, wt, M0):
        t = st.t
        B = shift_field(x, traj.frames[i], fit.p_fields[i])
        diff = B - modulated_source(profile, st)
        theta = gaussian_profile(x, t, wt, M0)
        ok = mask & (theta >= floor * theta.max())
        for l in orders:
            dl = diff if l == 0 else derivative(diff, h, l, ORDER)
            den = (1 + t) ** kappa * ((1 + t) ** (-l / 2) + core) * theta
            W[l].append(float(np.max(np.abs(dl[ok]) / den[ok])))
        times.append(t)
        Rsup.append(float(np.max(np.abs(fit.frames[i].R[mask]))))
    times = np.array(times)
    fits = {}
    for l in orders:
        try:
            fits[l] = fit_power_law(times, W[l], t_min)
        except FitError:
            fits[l] = None
    try:
        rfit = fit_power_law(times, Rsup, t_min)
    except FitError:
        rfit = None
    return TheoremDecay(times, {l: np.array(v) for l, v in W.items()}, fits, np.array(Rsup), rfit,
                        delta_convergence(fit, t_min))


def delta_convergence(fit: ModulationFit, t_min: float = T_MIN):
    """Exponential fits of ``|delta+-(t) - delta+-(T)|`` (``T`` excluded)."""
    out = []
    for series in (fit.delta_plus, fit.delta_minus):
        ok = np.isfinite(series)
        if ok.sum() < 5:
            out.append(None)
            continue
        t, s = fit.times[ok], series[ok]
        try:
            out.append(fit_exponential(t[:-1], np.abs(s[:-1] - s[-1]), t_min))
        except FitError:
            out.append(None)
    return tuple(out)


@dataclass
class ConeResult:
    times: np.ndarray
    sup_diff: np.ndarray
    fit: DecayFit | None
    predicted: tuple  # (delta_phi, delta_p) from the fitted deltas
    measured: tuple  # (delta_phi, delta_p) fitted directly at the final frame

    def shift_errors(self):
        return tuple(abs(m - p) / max(abs(p), 1e-300) for m, p in zip(self.measured, self.predicted))


def shifted_source(profile: SourceProfile, t: float, delta_phi: float, delta_p: float):
    """``A_source(x - delta_p, t - delta_phi / omega0)``."""
    base = profile.field(t) * np.exp(1j * delta_phi)
    return shift_field(profile.x, base, -delta_p)


def cone_convergence_check(traj: Trajectory, fit: ModulationFit, profile: SourceProfile, wt: WaveTrain,
                           eta_cone: float | None = None, t_min: float = T_MIN, mask=None) -> ConeResult:
    """Sup of ``A - A_source(x - delta_p, t - delta_phi/omega0)`` over
    ``|x| <= (c_g - eta_cone) t`` and an exponential fit in ``t``."""
    x = profile.x
    eta_cone = 0.25 * wt.cg if eta_cone is None else eta_cone
    mask = analysis_mask(x) if mask is None else mask
    ok = np.isfinite(fit.delta_plus) & np.isfinite(fit.delta_minus)
    if not ok.any():
        raise FitError("no fitted modulation parameters")
    last = np.nonzero(ok)[0][-1]
    pred = asymptotic_shifts(float(fit.delta_plus[last]), float(fit.delta_minus[last]), wt)
    times, sups = [], []
    for t, A in zip(traj.times, traj.frames):
        cone = mask & (np.abs(x) <= (wt.cg - eta_cone) * t)
        if cone.sum() < 3:
            continue
        ref = shifted_source(profile, t, *pred)
        times.append(t)
        sups.append(float(np.max(np.abs(A - ref)[cone])))
    times = np.array(times)
    try:
        efit = fit_exponential(times, sups, t_min)
    except FitError:
        efit = None
    tT = traj.times[-1]
    cone = mask & (np.abs(x) <= (wt.cg - eta_cone) * tT)

    def resid(s):
        d = traj.frames[-1] - shifted_source(profile, tT, s[0], s[1])
        return np.concatenate([d.real[cone], d.imag[cone]])

    meas = optimize.least_squares(resid, np.array(pred, float), xtol=1e-13, ftol=1e-13).x
    return ConeResult(times, np.array(sups), efit, tuple(float(v) for v in pred),
                      tuple(float(v) for v in meas))


@dataclass
class PlateauKinematics:
    times: np.ndarray
    fronts: np.ndarray  # (T, 2): left, right front position
    widths: np.ndarray  # (T, 2)
    speeds: tuple
    width_fits: tuple


def _front_fit(x, y, side, guess_X, guess_W):
    """Fit ``a/2 erfc(side (x - X)/W) + b`` on one side of the core."""
    def model(c):
        a, X, W, b = c
        return 0.5 * a * special.erfc(side * (x - X) / abs(W)) + b

    plateau_val = float(y[np.argmin(np.abs(x - 0.5 * guess_X))])
    c0 = np.array([plateau_val, guess_X, guess_W, 0.0])
    sol = optimize.least_squares(lambda c: model(c) - y, c0)
    return sol.x[1], abs(sol.x[2])


def plateau_kinematics(fit: ModulationFit, profile: SourceProfile, wt: WaveTrain,
                       t_min: float = 20.0, core: float | None = None, mask=None) -> PlateauKinematics:
    """Front positions and widths of the measured phase plateaus.

    The unshifted phase perturbation is fitted on each side by a
    complementary error function; speeds come from a line fit of the
    positions and the width exponent from a log-log fit.
    """
    x = profile.x
    mask = analysis_mask(x) if mask is None else mask
    core = 2.0 / max(profile.eta0, 1e-3) if core is None else core
    times, fronts, widths = [], [], []
    for t, fr in zip(fit.times, fit.frames):
        if t < t_min:
            continue
        phi = fr.phi + profile.phi_x * fr.p_used  # back to the unshifted phase
        w0 = interface_width(wt, t)
        row_f, row_w = [], []
        for side in (-1, 1):
            sel = mask & (side * x > core)
            if sel.sum() < 4:
                raise FitError("no samples between the core and the analysis boundary")
            X, W = _front_fit(x[sel], phi[sel], side, side * wt.cg * t, w0)
            row_f.append(X)
            row_w.append(W)
        times.append(t)
        fronts.append(row_f)
        widths.append(row_w)
    times = np.array(times)
    fronts, widths = np.array(fronts), np.array(widths)
    if len(times) < 3:
        raise FitError("too few frames after t_min for plateau kinematics")
    speeds = tuple(fit_line(times, fronts[:, j])[0] for j in (0, 1))
    wfits = tuple(fit_power_law(times, widths[:, j], t_min) for j in (0, 1))
    return PlateauKinematics(times, fronts, widths, speeds, wfits)


# -- template functions --------------------------------------------------------

@dataclass
class TemplateSeries:
    times: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    kappa: float
    eta: float
    info: dict = field(default_factory=dict)

    @property
    def h(self) -> np.ndarray:
        return self.h1 + self.h2

    def unstable(self, factor: float = 10.0, growth: float = GROWTH_MAX) -> bool:
        """Growth by more than ``factor`` over the second half of the run or
        by more than ``growth`` over the whole run, or a breakdown of the
        perturbation extraction.

        The whole-run test catches instabilities that saturate early, such
        as a hole filling in.
        """
        if math.isfinite(self.info.get("breakdown", math.nan)):
            return True
        h = self.h
        if len(h) < 4 or not np.isfinite(h[-1]):
            return not np.isfinite(h[-1]) if len(h) else False
        mid = h[len(h) // 2]
        if h[0] > 0 and h[-1] > growth * h[0]:
            return True
        return bool(h[-1] > factor * max(mid, 1e-300))


def _tilde_fields(profile, st, frame):
    if st is None:
        return frame.R, frame.phi
    af = amplitude_ansatz(profile, st)
    return frame.R - af.R_hat, frame.phi - af.phi_a


def template_monitor(fit: ModulationFit, profile: SourceProfile, wt: WaveTrain, kappa: float = KAPPA,
                     eta: float | None = None, M0: float | None = None, floor: float = THETA_FLOOR,
                     mask=None, with_ansatz: bool = True) -> TemplateSeries:
    """Running sups ``h1`` (modulation speed) and ``h2`` (theta-normalized
    residual fields); ``with_ansatz=False`` monitors the raw perturbation."""
    x, h = profile.x, profile.grid.spacing
    eta = 0.5 * profile.eta0 if eta is None else eta
    mask = analysis_mask(x) if mask is None else mask
    try:
        M0 = default_M0(wt) if M0 is None else M0
    except DomainError:
        M0 = 16.0
    times = np.asarray(fit.times, float)
    n = len(times)
    states = dict(_states(fit, wt, M0)) if with_ansatz else {}
    tilde = []
    for i in range(n):
        tilde.append(_tilde_fields(profile, states.get(i), fit.frames[i]))
    phis = np.array([p for _, p in tilde])
    phi_t = np.gradient(phis, times, axis=0) if n > 1 else np.zeros_like(phis)
    ratios = np.zeros(n)
    for i, t in enumerate(times):
        R, ph = tilde[i]
        if wt.cg > 0 and wt.d > 0:
            theta = gaussian_profile(x, t, wt, M0)
        else:
            theta = np.exp(-x * x / (M0 * (1 + t))) / math.sqrt(1 + t)
        ok = mask & (theta >= floor * theta.max())
        slow = (1 + t) ** -0.5 * theta
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            cands = [np.abs(ph) / theta]
            for f in (derivative(ph, h, 1, ORDER), phi_t[i], derivative(ph, h, 2, ORDER), R,
                      derivative(R, h, 1, ORDER), derivative(R, h, 2, ORDER)):
                cands.append(np.abs(f) / slow)
        ratios[i] = (1 + t) ** -kappa * max(float(np.max(c[ok])) for c in cands)
    h2 = np.maximum.accumulate(ratios)
    dp = np.nan_to_num(fit.delta_plus, nan=0.0) if with_ansatz else np.zeros(n)
    dm = np.nan_to_num(fit.delta_minus, nan=0.0) if with_ansatz else np.zeros(n)
    if n > 1:
        rate = (np.abs(np.gradient(dp, times)) + np.abs(np.gradient(dm, times))) * np.exp(eta * times)
    else:
        rate = np.zeros(n)
    h1 = np.maximum.accumulate(rate)
    return TemplateSeries(times, h1, h2, kappa, eta,
                          {"theta_floor": floor, "M0": M0, "breakdown": getattr(fit, "breakdown", math.nan)})


def template_scaling(series_by_eps: dict):
    """``h(T)/eps`` per epsilon and the max/min spread."""
    vals = {eps: float(s.h[-1]) / eps for eps, s in series_by_eps.items() if eps > 0}
    v = np.array(list(vals.values()))
    spread = float(v.max() / v.min()) if len(v) and v.min() > 0 else math.inf
    return vals, spread


# -- perturbation system -----------------------------------------------------

def transport_term(profile: SourceProfile, params: QcglParams, p, p_t, order: int = ORDER):
    """Linear residual of the shift: ``p_t V1 + 2 r phi_x^2 p_x (1, alpha)
    + r phi_x p_xx (alpha, -1)``."""
    h = profile.grid.spacing
    a = params.alpha
    r, px = profile.r, profile.phi_x
    rx = derivative(r, h, 1, order)
    p_x, p_xx = derivative(p, h, 1, order), derivative(p, h, 2, order)
    TR = p_t * rx + 2 * r * px**2 * p_x + a * r * px * p_xx
    TP = p_t * r * px + 2 * a * r * px**2 * p_x - r * px * p_xx
    return np.vstack([TR, TP])


def quadratic_term(profile: SourceProfile, params: QcglParams, R, phi, phi_t, p, p_t,
                   order: int = ORDER):
    h = profile.grid.spacing
    a, b, g1, g2 = params.alpha, params.beta, params.gamma1, params.gamma2
    r, vx = profile.r, profile.phi_x
    fx = derivative(phi, h, 1, order)
    p_x = derivative(p, h, 1, order)
    QR = (-2 * vx * R * fx - r * fx**2 - 3 * r * R**2 + 10 * g1 * r**3 * R**2
          - 3 * r * vx**2 * p_x**2 + 4 * r * vx * p_x * fx + 2 * vx**2 * R * p_x)
    QP = (-R * phi_t - 2 * a * vx * R * fx - a * r * fx**2 - 3 * b * r * R**2 + 10 * g2 * r**3 * R**2
          - r * vx * p_t * p_x + r * p_t * fx + vx * p_t * R - 3 * a * r * vx**2 * p_x**2
          + 4 * a * r * vx * p_x * fx + 2 * a * vx**2 * p_x * R)
    return np.vstack([QR, QP])


def remainder_classes(profile: SourceProfile, R, phi, p, p_t, order: int = ORDER):
    """Pointwise sum of the monomials bounding the higher-order remainder."""
    h = profile.grid.spacing
    d = lambda f, k: derivative(f, h, k, order)  # noqa: E731
    fx, fxx, Rx = d(phi, 1), d(phi, 2), d(R, 1)
    px, pxx = d(p, 1), d(p, 2)
    core = np.exp(-profile.eta0 * np.abs(profile.x))
    return (np.abs(R * fx**2) + np.abs(Rx * fx) + np.abs(R * fxx) + np.abs(R) ** 3 + np.abs(R * Rx)
            + np.abs(px) ** 3 + np.abs(px**2 * p_t) + np.abs(px * pxx) + np.abs(p_t * Rx)
            + np.abs(pxx) * (np.abs(R) + np.abs(fx))
            + np.abs(px) * (np.abs(Rx) + np.abs(fxx) + np.abs(R * fx) + core))


@dataclass
class ResidualReport:
    times: np.ndarray
    linear: np.ndarray  # sup |(d_t - L) U|
    remainder: np.ndarray  # sup |N|
    classes: np.ndarray  # sup of the bound classes
    constant: float  # sup |N| / classes over frames


def perturbation_residual(fit: ModulationFit, profile: SourceProfile, params: QcglParams,
                          mask=None, order: int = ORDER) -> ResidualReport:
    """``N = (d_t - L) U - T(p) - Q(R, phi, p)`` on interior frames.

    Time derivatives are centred differences between neighbouring frames.
    """
    x = profile.x
    mask = analysis_mask(x) if mask is None else mask
    op = assemble_operator(profile, params, 0.0, order)
    times = np.asarray(fit.times, float)
    out_t, lin, rem, cls = [], [], [], []
    for i in range(1, len(times) - 1):
        f0, f1, f2 = fit.frames[i - 1], fit.frames[i], fit.frames[i + 1]
        dt = times[i + 1] - times[i - 1]
        U_t = (f2.U - f0.U) / dt
        phi_t = (f2.phi - f0.phi) / dt
        p = fit.p_fields[i]
        p_t = (fit.p_fields[i + 1] - fit.p_fields[i - 1]) / dt
        LU = np.vstack(split(op.matrix @ interleave(f1.U[0], f1.U[1])))
        res_lin = U_t - LU
        N = res_lin - transport_term(profile, params, p, p_t, order) \
            - quadratic_term(profile, params, f1.R, f1.phi, phi_t, p, p_t, order)
        C = remainder_classes(profile, f1.R, f1.phi, p, p_t, order)
        out_t.append(times[i])
        lin.append(float(np.max(np.abs(res_lin[:, mask]))))
        rem.append(float(np.max(np.abs(N[:, mask]))))
        cls.append(float(np.max(C[mask])))
    lin, rem, cls = np.array(lin), np.array(rem), np.array(cls)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(cls > 0, rem / cls, np.where(rem > 0, np.inf, 0.0))
    return ResidualReport(np.array(out_t), lin, rem, cls, float(np.max(ratio)) if len(ratio) else 0.0)


# -- reporting helpers -------------------------------------------------------

def check(name, value, passed, tolerance: str, note: str = "") -> CheckResult:
    return CheckResult(name, float(value), tolerance, bool(passed), note)


def fit_checks(prefix: str, fit: DecayFit | None, lo: float, hi: float, r2: float = R2_MIN):
    if fit is None:
        return [check(prefix, math.nan, False, f"[{lo}, {hi}]", "fit failed")]
    ok = fit.trivial or (lo <= fit.exponent <= hi and fit.r_squared >= r2)
    return [check(prefix, fit.exponent, ok, f"[{lo}, {hi}], R2>={r2}", f"R2={fit.r_squared:.4f}")]


def overall(results) -> bool:
    return all(r.passed for r in results)
