"""Time integration of the full and the linearized equation.

The nonlinear equation is advanced in the frame rotating with the source,
``A = exp(-i omega0 t) a``, on a bounded grid.  The linear part
``(1 + i alpha) d_xx + 1 + i omega0`` and the sponge are treated by
Crank-Nicolson, the nonlinearity by a two-stage explicit predictor-corrector
(one-step, second order).  Steady states of the rotating frame are fixed
points of the discrete scheme, so a converged source profile is preserved
to solver accuracy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import interpolate, optimize, sparse
from scipy.sparse import linalg as spla

from .ansatz import ModulationState, amplitude_ansatz, phase_ansatz
from .errors import BlowUpError, DomainError, FitError
from .grid import GridSpec, derivative, diff_matrix, fd_weights
from .linop import assemble_operator, interior_indices, interleave, split
from .profile import ORDER, SourceProfile
from .wavetrain import QcglParams, WaveTrain

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 10.0
# sentinel for frames where the plateaus have not formed yet
DEFERRED = float("nan")


@dataclass(frozen=True)
class SpongeSpec:
    """Absorbing layers of ``width`` at both ends with a smooth ramp to
    ``strength``; the field is relaxed to the source's far field there."""

    width: float
    strength: float = 1.0

    def profile(self, x: np.ndarray) -> np.ndarray:
        if self.width <= 0 or self.strength == 0:
            return np.zeros_like(x)
        L = np.max(np.abs(x))
        s = np.clip((np.abs(x) - (L - self.width)) / self.width, 0.0, 1.0)
        return self.strength * s * s * (3.0 - 2.0 * s)


def default_dt(grid: GridSpec, params: QcglParams) -> float:
    return 0.25 * grid.spacing**2 / (1.0 + abs(params.alpha))


def interface_width(wt: WaveTrain, t: float) -> float:
    return math.sqrt(4.0 * wt.d * max(t, 0.0))


@dataclass
class SimState:
    a: np.ndarray  # field in the rotating frame
    t: float
    dt: float
    step: int
    sponge: SpongeSpec
    manifest: dict = field(default_factory=dict)
    omega0: float = 0.0

    @property
    def A(self) -> np.ndarray:
        """Field in the laboratory frame."""
        return self.a * np.exp(-1j * self.omega0 * self.t)


class QcglStepper:
    """Crank-Nicolson / explicit predictor-corrector stepper on a fixed grid."""

    def __init__(self, grid: GridSpec, params: QcglParams, omega0: float, dt: float,
                 sponge: SpongeSpec, target: np.ndarray, order: int = ORDER):
        self.grid, self.params, self.omega0, self.dt = grid, params, omega0, dt
        n = grid.n
        x = grid.x
        self.s = sponge.profile(x)
        self.target = np.asarray(target, dtype=complex)
        lin = ((1 + 1j * params.alpha) * centered_d2(n, grid.spacing, order)
               + sparse.diags(np.full(n, 1 + 1j * omega0) - self.s)).tolil()
        # Dirichlet ends held at the target
        lin[0, :] = 0
        lin[n - 1, :] = 0
        self.lin = lin.tocsr()
        eye = sparse.identity(n, dtype=complex, format="csr")
        self.explicit = (eye + 0.5 * dt * self.lin).tocsr()
        self.lu = spla.splu((eye - 0.5 * dt * self.lin).tocsc())
        self.forcing = self.s * self.target
        self.forcing[0] = self.forcing[-1] = 0.0
        # balance the truncation error of the target so that it is an exact
        # fixed point; this only matters in the rows with reduced stencils
        self.forcing -= self.rhs(self.target)
        self.r0 = float(np.max(np.abs(target)))

    def rhs(self, a):
        return self.lin @ a + self.nonlinear(a)

    def nonlinear(self, a):
        s = (a * a.conj()).real
        nl = -(1 + 1j * self.params.beta) * s * a + (self.params.gamma1 + 1j * self.params.gamma2) * s * s * a
        nl[0] = nl[-1] = 0.0
        return nl + self.forcing

    def advance(self, a):
        dt = self.dt
        rhs0 = self.explicit @ a
        n0 = self.nonlinear(a)
        pred = self.lu.solve(rhs0 + dt * n0)
        out = self.lu.solve(rhs0 + 0.5 * dt * (n0 + self.nonlinear(pred)))
        return out

    def check(self, a, t):
        peak = float(np.max(np.abs(a)))
        if not np.isfinite(peak):
            raise BlowUpError(f"non-finite field at t = {t:.6g}")
        if peak > BLOWUP_FACTOR * self.r0:
            raise BlowUpError(f"sup|A| = {peak:.3g} exceeds {BLOWUP_FACTOR} r0 at t = {t:.6g}")


def centered_d2(n: int, h: float, order: int = ORDER) -> sparse.csr_matrix:
    """Second derivative with centred stencils of decreasing order towards
    the ends; one-sided high-order closures are unstable next to Dirichlet
    nodes."""
    d2 = diff_matrix(n, h, 2, order).tolil()
    half = order // 2
    for k in range(1, half):
        for row in (k, n - 1 - k):
            d2[row, :] = 0
            d2[row, row - k:row + k + 1] = fd_weights(0.0, np.arange(-k, k + 1.0), 2)[:, 2] / h**2
    return d2.tocsr()


def source_target(profile: SourceProfile) -> np.ndarray:
    """Rotating-frame source field; equal to the wave trains up to
    ``exp(-eta0 |x|)`` and used as the sponge target."""
    return profile.r * np.exp(1j * profile.phi)


def new_state(profile: SourceProfile, A_in: np.ndarray, dt: float | None = None,
              sponge: SpongeSpec | None = None, manifest: dict | None = None,
              t_final: float | None = None, wt: WaveTrain | None = None) -> SimState:
    grid = profile.grid
    dt = default_dt(grid, profile.params) if dt is None else float(dt)
    if sponge is None:
        sponge = SpongeSpec(0.1 * grid.half_width)
    man = dict(manifest or {})
    if t_final is not None and wt is not None and wt.d > 0:
        need = 5.0 * interface_width(wt, t_final)
        man["sponge_width_ok"] = sponge.width >= need
        if sponge.width < need:
            log.warning("sponge width %.3g below five interface widths %.3g", sponge.width, need)
    return SimState(np.asarray(A_in, dtype=complex).copy(), 0.0, dt, 0, sponge, man, profile.omega0)


def step_qcgl(state: SimState, stepper: QcglStepper) -> SimState:
    a = stepper.advance(state.a)
    step = state.step + 1
    t = step * state.dt
    stepper.check(a, t)
    return replace(state, a=a, t=t, step=step)


@dataclass
class Trajectory:
    grid: GridSpec
    times: np.ndarray
    frames: np.ndarray  # laboratory-frame fields, one row per time
    manifest: dict = field(default_factory=dict)
    final_state: SimState | None = None
    rotating: np.ndarray | None = None  # the stepped variable a, stored exactly for resumes

    def __len__(self):
        return len(self.times)


def simulate(profile: SourceProfile, A_in: np.ndarray, t_final: float, dt: float | None = None,
             frame_every: float = 1.0, sponge: SpongeSpec | None = None, manifest: dict | None = None,
             state: SimState | None = None, wt: WaveTrain | None = None) -> Trajectory:
    """Integrate to ``t_final`` storing frames every ``frame_every``.

    Passing ``state`` resumes a stored run; frames are then recorded from
    the state's time on.
    """
    if state is None:
        state = new_state(profile, A_in, dt, sponge, manifest, t_final, wt)
    stepper = QcglStepper(profile.grid, profile.params, profile.omega0, state.dt, state.sponge,
                          source_target(profile))
    stride = max(1, int(round(frame_every / state.dt)))
    nsteps = int(round(t_final / state.dt))
    times, frames, rot = [state.t], [state.A], [state.a.copy()]
    while state.step < nsteps:
        state = step_qcgl(state, stepper)
        if state.step % stride == 0 or state.step == nsteps:
            times.append(state.t)
            frames.append(state.A)
            rot.append(state.a.copy())
    man = dict(state.manifest)
    man.update({"dt": state.dt, "t_final": t_final, "frame_stride": stride, "stepper": "cn-pc2"})
    return Trajectory(profile.grid, np.array(times), np.array(frames), man, state, np.array(rot))


def step_linearized(U: np.ndarray, profile: SourceProfile, params: QcglParams, dt: float,
                    nsteps: int = 1, order: int = ORDER, op=None) -> np.ndarray:
    """Crank-Nicolson steps of ``U_t = L U`` (interleaved samples, Dirichlet
    ends)."""
    stepper = LinearStepper(profile, params, dt, order, op)
    for _ in range(nsteps):
        U = stepper.advance(U)
    return U


class LinearStepper:
    def __init__(self, profile: SourceProfile, params: QcglParams, dt: float, order: int = ORDER,
                 op=None):
        op = op or assemble_operator(profile, params, 0.0, order)
        a = op.interior()
        eye = sparse.identity(a.shape[0], format="csc")
        self.keep = interior_indices(op.n)
        self.explicit = (eye + 0.5 * dt * a).tocsr()
        self.lu = spla.splu((eye - 0.5 * dt * a).tocsc())
        self.dt = dt

    def advance(self, U):
        out = np.zeros_like(U)
        out[self.keep] = self.lu.solve(self.explicit @ U[self.keep])
        return out


def evolve_linearized(U0, profile, params, dt, t_final, frame_every=1.0, order: int = ORDER):
    stepper = LinearStepper(profile, params, dt, order)
    stride = max(1, int(round(frame_every / dt)))
    nsteps = int(round(t_final / dt))
    U = np.array(U0, dtype=float)
    times, frames = [0.0], [U.copy()]
    for k in range(1, nsteps + 1):
        U = stepper.advance(U)
        if not np.all(np.isfinite(U)) or np.max(np.abs(U)) > 1e12:
            raise BlowUpError(f"linearized evolution diverged at t = {k * dt:.6g}")
        if k % stride == 0:
            times.append(k * dt)
            frames.append(U.copy())
    return np.array(times), np.array(frames)


def near_delta(grid: GridSpec, y: float, component: int = 0, width: float | None = None):
    """Unit-mass Gaussian of width ``3 h`` centred at ``y`` in one component."""
    w = 3.0 * grid.spacing if width is None else width
    g = np.exp(-((grid.x - y) ** 2) / (2 * w * w)) / (math.sqrt(2 * math.pi) * w)
    z = np.zeros_like(g)
    return interleave(g, z) if component == 0 else interleave(z, g)


# -- initial data ------------------------------------------------------------

def weighted_c3_norm(x, f, M0: float, max_weight: float = 1e4) -> float:
    """``sum_{j<=3} sup |d^j (exp(x^2/M0) f)|`` by finite differences.

    The sup is taken where the weight is below ``max_weight``; further out
    the weight only amplifies rounding in ``f``.
    """
    h = x[1] - x[0]
    # clip the exponent: beyond the cap the weight is never used
    g = np.exp(np.minimum(x * x / M0, 700.0)) * f
    keep = x * x <= M0 * math.log(max_weight)
    total = float(np.max(np.abs(g[keep])))
    for j in (1, 2, 3):
        total += float(np.max(np.abs(derivative(g, h, j, ORDER)[keep])))
    return total


def initial_norm(profile: SourceProfile, A_in: np.ndarray, M0: float) -> float:
    """Weighted ``C^3`` distance of ``A_in`` from the source in amplitude-phase form."""
    z = A_in * np.exp(-1j * profile.phi)
    sgn = np.where(profile.x >= 0, 1.0, -1.0)
    dphi = np.angle(z * sgn)
    c = profile.grid.center
    dphi[c] = 0.5 * (dphi[c - 1] + dphi[c + 1])
    R = np.real(z * np.exp(-1j * dphi)) - profile.r
    return weighted_c3_norm(profile.x, R, M0) + weighted_c3_norm(profile.x, dphi, M0)


PERTURBATION_SHAPES = ("even-bump", "odd-bump", "phase-kick", "mixed")


def perturb_initial(profile: SourceProfile, epsilon: float, M0: float, shape: str = "even-bump",
                    center: float = 0.0, seed: int | None = None):
    """``A_in = (r + rho) exp(i (phi + sigma))`` with weighted norm ``epsilon``.

    The perturbation is built from ``g = exp(-2 (x - center)^2 / M0)`` and
    rescaled so that the weighted ``C^3`` norm of ``(rho, sigma)`` is
    exactly ``epsilon``.
    """
    if epsilon < 0:
        raise DomainError("epsilon must be nonnegative")
    if shape not in PERTURBATION_SHAPES:
        raise DomainError(f"unknown perturbation shape {shape!r}")
    x = profile.x
    g = np.exp(-2.0 * (x - center) ** 2 / M0)
    rho = np.zeros_like(x)
    sigma = np.zeros_like(x)
    if shape == "even-bump":
        rho = g
    elif shape == "odd-bump":
        rho = (x - center) / math.sqrt(M0) * g
    elif shape == "phase-kick":
        sigma = g
    else:
        rng = np.random.default_rng(seed)
        c = rng.uniform(-1.0, 1.0, 4)
        u = (x - center) / math.sqrt(M0)
        rho = (c[0] + c[1] * u) * g
        sigma = (c[2] + c[3] * u) * g
    if epsilon == 0:
        return profile.r * np.exp(1j * profile.phi), 0.0
    norm = weighted_c3_norm(x, rho, M0) + weighted_c3_norm(x, sigma, M0)
    scale = epsilon / norm
    rho, sigma = scale * rho, scale * sigma
    A_in = (profile.r + rho) * np.exp(1j * (profile.phi + sigma))
    return A_in, weighted_c3_norm(x, rho, M0) + weighted_c3_norm(x, sigma, M0)


# -- perturbation extraction ---------------------------------------------------

@dataclass
class PerturbationFrame:
    R: np.ndarray
    phi: np.ndarray
    U: np.ndarray  # (2, N): (R, r phi)
    p_used: np.ndarray
    t: float


def shift_field(x, A, p, k: int = 5):
    """``A(x + p(x))`` by spline interpolation of real and imaginary parts."""
    p = np.broadcast_to(np.asarray(p, dtype=float), x.shape)
    if np.any(p != 0):
        px = np.gradient(p, x)
        if np.max(np.abs(px)) >= 1.0:
            raise DomainError("shift map x -> x + p is not invertible (|p_x| >= 1)")
        spl = interpolate.make_interp_spline(x, np.column_stack([A.real, A.imag]), k=k)
        xs = np.clip(x + p, x[0], x[-1])
        v = spl(xs)
        return v[:, 0] + 1j * v[:, 1]
    return np.asarray(A, dtype=complex)


def _anchored_unwrap(theta, c):
    """Unwrap outward-in from both ends, each end anchored at its principal
    value, meeting at index ``c``."""
    out = np.empty_like(theta)
    right = np.unwrap(theta[c:][::-1])[::-1]
    left = np.unwrap(theta[:c + 1])
    out[c:] = right
    out[:c] = left[:c]
    return out


def extract_perturbation(A: np.ndarray, t: float, profile: SourceProfile, p=0.0,
                         core_floor: float = 1e-3) -> PerturbationFrame:
    """Perturbation ``(R, phi)`` of ``A(x + p, t)`` about the source.

    ``phi`` is unwrapped from the far-field ends inwards; where ``|r|`` is
    below ``core_floor`` the phase is interpolated and ``U = (R, r phi)``
    stays regular.
    """
    x = profile.x
    B = shift_field(x, A, p)
    z = B * np.exp(-1j * (profile.phi - profile.omega0 * t))
    sgn = np.where(x >= 0, 1.0, -1.0)
    theta = np.angle(z * sgn)
    c = profile.grid.center
    phi = _anchored_unwrap(theta, c)
    weak = np.abs(profile.r) < core_floor * max(profile.r0, 1e-300)
    if np.any(weak) and not np.all(weak):
        phi[weak] = np.interp(x[weak], x[~weak], phi[~weak])
    far = np.abs(profile.r) > 0.5 * profile.r0
    R = np.real(z * np.exp(-1j * phi)) - profile.r
    if np.any(np.abs(z[far]) < 1e-6 * profile.r0):
        where = float(x[far][np.argmin(np.abs(z[far]))])
        raise DomainError(f"amplitude vanishes outside the core near x = {where:.4g}; phase ambiguous")
    U = np.vstack([R, profile.r * phi])
    return PerturbationFrame(R, phi, U, np.broadcast_to(np.asarray(p, float), x.shape).copy(), t)


# -- modulation fitting --------------------------------------------------------

def plateau_regions(x, t, wt: WaveTrain, margin: float | None = None):
    """Masks of the two plateau half-regions ``[w, c t - w]`` and mirror."""
    w = interface_width(wt, t + 1.0) if margin is None else margin
    right = (x >= w) & (x <= wt.cg * t - w)
    left = (x <= -w) & (x >= -wt.cg * t + w)
    return left, right


def _phase_model(x, phi_x, state: ModulationState, t, p_used):
    f = phase_ansatz(x, state, t)
    # a mismatch between the true and the applied shift shows up as -phi_x dp
    return f.phi_a - phi_x * (f.p - p_used), f.p


def fit_deltas(frame: PerturbationFrame, profile: SourceProfile, wt: WaveTrain, guess=(0.0, 0.0),
               margin: float | None = None, min_points: int = 8):
    """Least-squares ``(delta+, delta-)`` from the phase on the plateaus."""
    x, t = profile.x, frame.t
    left, right = plateau_regions(x, t, wt, margin)
    if left.sum() < min_points or right.sum() < min_points:
        return DEFERRED, DEFERRED, None
    sel = left | right
    base = ModulationState(0.0, 0.0, t, wt)
    px = profile.phi_x[sel]
    p_used = frame.p_used[sel]

    def resid(d):
        st = base.with_deltas(*np.clip(d, -0.9, 0.9))
        model, _ = _phase_model(x[sel], px, st, t, p_used)
        return model - frame.phi[sel]

    sol = optimize.least_squares(resid, np.asarray(guess, float), xtol=1e-14, ftol=1e-14, gtol=1e-14)
    dp, dm = (float(v) for v in sol.x)
    p_new = phase_ansatz(x, base.with_deltas(dp, dm), t).p
    return dp, dm, p_new


@dataclass
class ModulationFit:
    times: np.ndarray
    delta_plus: np.ndarray
    delta_minus: np.ndarray
    p_fields: list
    frames: list
    breakdown: float = math.nan  # first time the extraction failed, if truncated


def fit_modulation(traj: Trajectory, profile: SourceProfile, wt: WaveTrain, passes: int = 1,
                   margin: float | None = None, truncate: bool = False) -> ModulationFit:
    """``delta+-(t)`` per frame, extracted with the previous frame's shift
    and refined by ``passes`` fixed-point passes.

    With ``truncate`` an extraction failure (the field no longer looks like
    a perturbed source) ends the series instead of raising; the failure
    time is kept in ``breakdown``.
    """
    x = profile.x
    p_prev = np.zeros_like(x)
    dps, dms, ps, frames = [], [], [], []
    guess = (0.0, 0.0)
    breakdown = math.nan
    for t, A in zip(traj.times, traj.frames):
        try:
            frame = extract_perturbation(A, t, profile, p_prev)
            dp, dm, p_new = fit_deltas(frame, profile, wt, guess, margin)
            for _ in range(passes if p_new is not None else 0):
                frame = extract_perturbation(A, t, profile, p_new)
                dp, dm, p_new = fit_deltas(frame, profile, wt, (dp, dm), margin)
        except DomainError:
            if not truncate:
                raise
            breakdown = float(t)
            break
        if p_new is None:
            p_new = np.zeros_like(x)
        else:
            guess = (dp, dm)
        dps.append(dp)
        dms.append(dm)
        ps.append(p_new)
        frames.append(frame)
        p_prev = p_new
    n = len(frames)
    return ModulationFit(np.asarray(traj.times)[:n], np.array(dps), np.array(dms), ps, frames, breakdown)


def raw_perturbations(traj: Trajectory, profile: SourceProfile) -> ModulationFit:
    """Unshifted perturbation frames with no modulation fit (all ``delta``
    undefined), truncated at the first extraction failure."""
    frames = []
    breakdown = math.nan
    for t, A in zip(traj.times, traj.frames):
        try:
            frames.append(extract_perturbation(A, t, profile, 0.0))
        except DomainError:
            breakdown = float(t)
            break
    n = len(frames)
    nan = np.full(n, DEFERRED)
    return ModulationFit(np.asarray(traj.times)[:n], nan, nan.copy(), [np.zeros_like(profile.x)] * n, frames,
                         breakdown)


def synthetic_trajectory(profile: SourceProfile, wt: WaveTrain, delta_plus: float, delta_minus: float,
                         times) -> Trajectory:
    """Frames ``A(y) = A_mod(x)`` at ``y = x + p(x)`` for constant ``delta+-``."""
    x = profile.x
    frames = []
    for t in times:
        st = ModulationState(delta_plus, delta_minus, t, wt)
        f = phase_ansatz(x, st, t)
        amod = profile.r * np.exp(1j * (profile.phi + f.phi_a - profile.omega0 * t))
        y = x + f.p
        # resample A_mod from the shifted nodes y back onto the grid
        spl = interpolate.make_interp_spline(y, np.column_stack([amod.real, amod.imag]), k=5)
        v = spl(np.clip(x, y[0], y[-1]))
        frames.append(v[:, 0] + 1j * v[:, 1])
    return Trajectory(profile.grid, np.asarray(times, float), np.array(frames), {"synthetic": True})


def initial_deltas_from_adjoints(profile: SourceProfile, wt: WaveTrain, spectral, A_in):
    """``delta+-(0)`` from the adjoint pairing condition.

    Solves ``<psi_j, U_in(. + p) - U^a(0)> = 0`` for ``j = 1, 2``, where
    ``U_in(. + p)`` is the perturbation of the initial data extracted with
    the shift implied by the trial ``delta+-``.
    """
    h = profile.grid.spacing
    psi = [np.vstack(split(v)) for v in spectral.adjoints]

    def g(d):
        st = ModulationState(float(d[0]), float(d[1]), 0.0, wt)
        af = amplitude_ansatz(profile, st, 0.0)
        frame = extract_perturbation(A_in, 0.0, profile, af.p)
        rem = frame.U - af.U
        return np.array([h * np.sum(q * rem) for q in psi])

    sol = optimize.root(g, np.zeros(2), tol=1e-12)
    if not sol.success:
        raise FitError(f"initial delta solve failed: {sol.message}")
    return float(sol.x[0]), float(sol.x[1])
