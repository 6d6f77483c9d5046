"""Command-line front end.

Every command reads an INI-style config (``--config``), applies flag
overrides, writes its artifacts to the output directory and finishes with
``manifest.ini``, which can be fed back through ``--config`` to reproduce
the outputs byte for byte.

Exit codes: 0 success, 2 invalid parameters or config, 3 missing input
artifacts, 4 failure inside a numerical module.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import metadata
from pathlib import Path

import numpy as np

from . import plots, store
from .ansatz import (
    ModulationState,
    amplitude_ansatz,
    burgers_residual,
    default_M0,
    neutral_modes,
    plateau,
)
from .errors import DomainError, QcglError
from .evolve import (
    PERTURBATION_SHAPES,
    SimState,
    SpongeSpec,
    Trajectory,
    default_dt,
    evolve_linearized,
    fit_modulation,
    initial_norm,
    interface_width,
    near_delta,
    new_state,
    perturb_initial,
    simulate,
)
from .grid import GridSpec
from .linop import (
    adjoint_pair,
    assemble_operator,
    count_zero_eigenvalues,
    gram,
    split,
    stability_verdict,
    zero_threshold,
)
from .profile import nozaki_bekki, ode_residual, profile_diagnostics, solve_source
from .store import MissingInputError
from .verify import (
    analysis_mask,
    check,
    cone_convergence_check,
    fit_checks,
    green_decomposition_fit,
    overall,
    perturbation_residual,
    plateau_kinematics,
    template_monitor,
    theorem_decay_check,
)
from .wavetrain import (
    QcglParams,
    amplitude_of_wavenumber,
    essential_spectrum_margin,
    fit_dispersion_tip,
    group_velocity_fd,
    linear_dispersion,
    omega_nl,
    wave_train_constants,
)

log = logging.getLogger("qcgl_sources")

EXIT_OK, EXIT_DOMAIN, EXIT_MISSING, EXIT_MODULE = 0, 2, 3, 4

DEFAULTS = {
    "params": {"alpha": "2.0", "beta": "0.4", "gamma1": "-0.1", "gamma2": "-0.05"},
    "grid": {"half_width": "300.0", "points": "4096"},
    "run": {"seed": "0", "threads": "1"},
    "profile": {"tol": "1e-10", "continuation_steps": "10"},
    "dispersion": {"k_min": "-0.6", "k_max": "0.6", "k_count": "121", "kappa_max": "0.5",
                   "kappa_count": "101", "k0": "auto"},
    "spectrum": {"eta": "0.0", "order": "2", "count": "6"},
    "ansatz": {"delta_plus": "0.1", "delta_minus": "0.05", "times": "10, 50, 100",
               "normalization": "standard", "dt": "1e-3"},
    "simulate": {"epsilon": "0.01", "shape": "even-bump", "M0": "auto", "t_final": "200.0",
                 "dt": "auto", "frame_every": "2.0", "sponge_width": "auto", "sponge_strength": "1.0",
                 "center": "0.0", "resume": ""},
    "green": {"y": "0.0", "component": "0", "t_final": "100.0", "dt": "0.05", "frame_every": "1.0",
              "order": "6", "t_min": "10.0"},
    "verify": {"kappa": "0.25", "eta": "auto", "M0": "auto", "t_min": "10.0", "eta_cone": "auto",
               "residual_frames": "20"},
    "scan": {"alpha": "2.0", "beta": "0.4", "gamma1": "-0.1", "gamma2": "-0.05",
             "half_width": "40.0", "spacing": "0.2", "kappa_max": "3.0", "kappa_count": "301"},
    "input": {"profile": "", "run": ""},
}

COMMAND_SECTIONS = {
    "dispersion": ("params", "run", "dispersion", "profile"),
    "profile": ("params", "grid", "run", "profile"),
    "spectrum": ("run", "spectrum", "input"),
    "ansatz": ("run", "ansatz", "input"),
    "simulate": ("run", "simulate", "input"),
    "green": ("run", "green", "input"),
    "verify": ("run", "verify", "input"),
    "scan": ("run", "scan", "profile"),
}


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0"


# -- shared helpers ----------------------------------------------------------------

def grid_from(cfg) -> GridSpec:
    s = store.section(cfg, "grid")
    L, npts = s.float("half_width"), s.int("points")
    if npts < 8 or npts % 2:
        raise DomainError("grid.points must be an even count of intervals >= 8")
    return GridSpec(L, 2.0 * L / npts)


def build_profile(params: QcglParams, grid: GridSpec, tol: float = 1e-10, steps: int = 10):
    """Nozaki-Bekki guess for ``(alpha, beta)`` continued to ``params``."""
    guess = nozaki_bekki(params.alpha, params.beta, grid)
    return solve_source(params, guess, tol=tol, continuation_steps=steps)


def require_profile(cfg):
    path = store.section(cfg, "input").values.get("profile", "")
    if not path:
        raise MissingInputError("input.profile is not set; run the profile command and pass --profile")
    return store.load_profile(path)


def wave_train_of(profile):
    return wave_train_constants(profile.params, profile.k0)


def downsample(n: int, target: int = 512) -> slice:
    return slice(None, None, max(1, n // target))


# -- commands --------------------------------------------------------------------

def cmd_dispersion(cfg, out: Path):
    params = store.params_from(cfg)
    s = store.section(cfg, "dispersion")
    ks = np.linspace(s.float("k_min"), s.float("k_max"), s.int("k_count"))
    rows = []
    for k in ks:
        try:
            wt = wave_train_constants(params, float(k))
            rows.append((k, wt.r0, omega_nl(params, k), group_velocity_fd(params, float(k)),
                         2 * k * (params.alpha - wt.beta_star), wt.beta_star, wt.d, wt.q))
        except DomainError:
            rows.append((k,) + (math.nan,) * 7)
    store.write_csv(out / "dispersion.csv", ["k", "r0", "omega_nl", "cg_fd", "cg_formula", "beta_star", "d", "q"],
                    rows)
    k0 = s.optional_float("k0")
    if k0 is None:
        if params.is_cubic:
            k0 = nozaki_bekki(params.alpha, params.beta, GridSpec(1.0, 0.5)).k0
        else:
            k0 = build_profile(params, GridSpec(40.0, 0.2)).k0
    wt = wave_train_constants(params, k0)
    kap = np.linspace(-s.float("kappa_max"), s.float("kappa_max"), s.int("kappa_count"))
    curves = {1: [], 2: []}
    lrows = []
    for kk in kap:
        l1, l2 = linear_dispersion(params, wt, float(kk), 1)
        curves[1].append(l1)
        curves[2].append(l2)
        lrows.append((kk, 1, l1.real, l1.imag))
        lrows.append((kk, 2, l2.real, l2.imag))
    store.write_csv(out / "lambda_curves.csv", ["kappa", "branch", "re", "im"], lrows)
    lin, quad = fit_dispersion_tip(params, wt)
    store.write_csv(out / "tip_fit.csv", ["name", "value"],
                    [("k0", k0), ("cg", wt.cg), ("d", wt.d), ("fit_linear_imag", lin), ("fit_quadratic_real", quad)])
    arr = np.array(rows, float)
    plots.line_plot(out / "dispersion.png", arr[:, 0], {"omega_nl": arr[:, 2], "cg": arr[:, 3], "d": arr[:, 6]},
                    xlabel="k", title="wave-train dispersion")
    plots.spectrum_plot(out / "lambda_curves.png", [], {"branch 1": curves[1], "branch 2": curves[2]},
                        title=f"essential spectrum at k0 = {k0:.4g}")
    return {"k0": float(k0)}


def cmd_profile(cfg, out: Path):
    params = store.params_from(cfg)
    grid = grid_from(cfg)
    s = store.section(cfg, "profile")
    prof = build_profile(params, grid, s.float("tol"), s.int("continuation_steps"))
    store.save_profile(out / "profile.txt", prof)
    rr, rp = ode_residual(prof, params)
    diag = profile_diagnostics(prof)
    rows = [(k, v) for k, v in diag.items() if k != "checks"]
    rows += [(f"check_{k}", v) for k, v in diag["checks"].items()]
    rows.append(("ode_residual_max", float(max(np.abs(rr).max(), np.abs(rp).max()))))
    store.write_csv(out / "diagnostics.csv", ["name", "value"], rows)
    sl = downsample(grid.n, 2048)
    store.write_csv(out / "profile_fields.csv", ["x", "r", "phi", "phi_x", "res_r", "res_phi"],
                    zip(prof.x[sl], prof.r[sl], prof.phi[sl], prof.phi_x[sl], rr[sl], rp[sl]))
    plots.line_plot(out / "profile.png", prof.x, {"r": prof.r, "phi_x": prof.phi_x}, xlabel="x",
                    title="standing source")
    return {"profile_digest": prof.digest()}


def cmd_spectrum(cfg, out: Path):
    prof = require_profile(cfg)
    params = prof.params
    s = store.section(cfg, "spectrum")
    op = assemble_operator(prof, params, s.float("eta"), s.int("order"))
    nz, vals = count_zero_eigenvalues(op, s.int("count"))
    store.write_csv(out / "eigenvalues.csv", ["index", "re", "im", "abs"],
                    [(i, v.real, v.imag, abs(v)) for i, v in enumerate(vals)])
    sp = adjoint_pair(prof, op)
    G = gram(sp, prof.grid.spacing)
    store.write_csv(out / "gram.csv", ["i", "j", "normalized", "raw_M_psi"],
                    [(i, j, G[i, j], sp.M_psi[i, j]) for i in range(2) for j in range(2)])
    (v1r, v1p), (v2r, v2p) = split(sp.kernel[0]), split(sp.kernel[1])
    (p1r, p1p), (p2r, p2p) = split(sp.adjoints[0]), split(sp.adjoints[1])
    sl = downsample(prof.grid.n, 2048)
    store.write_csv(out / "kernel_adjoints.csv",
                    ["x", "V1_R", "V1_P", "V2_R", "V2_P", "psi1_R", "psi1_P", "psi2_R", "psi2_P"],
                    zip(prof.x[sl], v1r[sl], v1p[sl], v2r[sl], v2p[sl], p1r[sl], p1p[sl], p2r[sl], p2p[sl]))
    wt = wave_train_of(prof)
    summary = [("n_zero", nz), ("zero_threshold", zero_threshold(op)),
               ("det_M_psi", float(np.linalg.det(sp.M_psi))),
               ("gram_error", float(np.max(np.abs(G - np.eye(2))))),
               ("psi1_decay", sp.info.get("psi1_decay", math.nan)),
               ("psi2_decay", sp.info.get("psi2_decay", math.nan)),
               ("d", wt.d), ("cg", wt.cg)]
    if wt.d > 0:
        summary.append(("essential_margin",
                        essential_spectrum_margin(params, wt, np.linspace(-3, 3, 601))))
    store.write_csv(out / "summary.csv", ["name", "value"], summary)
    kap = np.linspace(-1.5, 1.5, 301)
    curves = {f"end {e:+d} branch {b + 1}": [linear_dispersion(params, wt, float(k), e)[b] for k in kap]
              for e in (1, -1) for b in (0, 1)}
    plots.spectrum_plot(out / "spectrum.png", vals, curves, title="spectrum near the origin")
    plots.line_plot(out / "adjoints.png", prof.x, {"psi1_R": p1r, "psi1_P": p1p, "psi2_R": p2r, "psi2_P": p2p},
                    xlabel="x", title="normalized adjoint null vectors")
    return {"profile_digest": prof.digest()}


def cmd_ansatz(cfg, out: Path):
    prof = require_profile(cfg)
    wt = wave_train_of(prof).require_ansatz()
    s = store.section(cfg, "ansatz")
    norm = s.str("normalization")
    base = ModulationState(s.float("delta_plus"), s.float("delta_minus"), 0.0, wt, normalization=norm)
    x = prof.x
    sl = downsample(prof.grid.n, 2048)
    rows, sections = [], {}
    for t in s.floats("times"):
        st = base.at(t)
        af = amplitude_ansatz(prof, st)
        Ep, Em = neutral_modes(prof, wt, t, normalization=norm)
        rp, rm = burgers_residual(st, x, prof.phi_x, t, s.float("dt"))
        e = plateau(x, t, wt, norm)
        store.write_csv(out / f"ansatz_t{t:g}.csv",
                        ["x", "e", "phi_hat", "p", "R_hat", "rphi_a", "Eplus_R", "Eplus_P", "Eminus_R", "Eminus_P"],
                        zip(x[sl], e[sl], af.phi_hat[sl], af.p[sl], af.R_hat[sl], af.rphi_a[sl],
                            Ep[0][sl], Ep[1][sl], Em[0][sl], Em[1][sl]))
        rows.append((t, float(np.max(np.abs(rp))), float(np.max(np.abs(rm))), float(np.max(np.abs(af.phi_hat))),
                     float(np.max(np.abs(af.R_hat)))))
        sections[f"t={t:g}"] = af.phi_hat
    store.write_csv(out / "burgers_residual.csv", ["t", "res_plus", "res_minus", "sup_phi_hat", "sup_R_hat"], rows)
    plots.line_plot(out / "plateaus.png", x, sections, xlabel="x", ylabel="phi_hat",
                    title="phase plateaus of the ansatz")
    return {"profile_digest": prof.digest()}


def _snapshot_name(step: int) -> str:
    return f"frame_{step:09d}.txt"


def cmd_simulate(cfg, out: Path):
    prof = require_profile(cfg)
    wt = wave_train_of(prof)
    s = store.section(cfg, "simulate")
    seed = store.section(cfg, "run").int("seed")
    T = s.float("t_final")
    dt = s.optional_float("dt")
    dt = default_dt(prof.grid, prof.params) if dt is None else dt
    M0 = s.optional_float("M0")
    M0 = default_M0(wt) if M0 is None else M0
    sw = s.optional_float("sponge_width")
    sw = 0.15 * prof.grid.half_width if sw is None else sw
    sponge = SpongeSpec(sw, s.float("sponge_strength"))
    shape = s.str("shape")
    if shape not in PERTURBATION_SHAPES:
        raise DomainError(f"simulate.shape must be one of {PERTURBATION_SHAPES}")
    eps = s.float("epsilon")
    A_in, nrm = perturb_initial(prof, eps, M0, shape, s.float("center"), seed)
    resume = s.values.get("resume", "").strip()
    frames_dir = out / "frames"
    if resume:
        _, a, meta = store.load_snapshot(resume)
        step = int(meta["step"])
        state = SimState(a, step * dt, dt, step, sponge, {}, prof.omega0)
    else:
        state = new_state(prof, A_in, dt, sponge, {}, T, wt)
    sponge_ok = sw >= 5.0 * interface_width(wt, T)
    traj = simulate(prof, A_in, T, dt, s.float("frame_every"), sponge, state=state)
    index = []
    stride = traj.manifest["frame_stride"]
    for k, (t, a) in enumerate(zip(traj.times, traj.rotating)):
        step = int(round(t / dt))
        name = _snapshot_name(step)
        store.save_snapshot(frames_dir / name, prof.x, a, {"t": t, "step": step, "dt": dt, "omega0": prof.omega0,
                                                            "frame": "rotating"})
        index.append((k, t, step, f"frames/{name}"))
    store.write_csv(out / "trajectory.csv", ["index", "t", "step", "file"], index)
    sl = downsample(prof.grid.n)
    xs = prof.x[sl]
    store.write_csv(out / "spacetime_abs.csv", ["t"] + [repr(float(v)) for v in xs],
                    [[t] + list(np.abs(A[sl])) for t, A in zip(traj.times, traj.frames)])
    store.write_csv(out / "spacetime_arg.csv", ["t"] + [repr(float(v)) for v in xs],
                    [[t] + list(np.angle(A[sl] * np.exp(-1j * prof.phi[sl] + 1j * prof.omega0 * t)))
                     for t, A in zip(traj.times, traj.frames)])
    plots.heatmap(out / "spacetime_abs.png", xs, traj.times, np.abs(traj.frames[:, sl]), title="|A|")
    summary = {"initial_norm": nrm, "sponge_width": sw, "sponge_width_ok": sponge_ok, "dt": dt, "M0": M0,
               "frame_stride": stride, "profile_digest": prof.digest(), "fit_status": "ok"}
    try:
        mf = fit_modulation(traj, prof, wt)
        store.write_csv(out / "deltas.csv", ["t", "delta_plus", "delta_minus"],
                        zip(mf.times, mf.delta_plus, mf.delta_minus))
        plots.line_plot(out / "deltas.png", mf.times, {"delta+": mf.delta_plus, "delta-": mf.delta_minus},
                        xlabel="t", title="fitted modulation parameters")
    except QcglError as exc:
        summary["fit_status"] = f"failed: {exc}"
        store.write_csv(out / "deltas.csv", ["t", "delta_plus", "delta_minus"], [])
    store.write_csv(out / "summary.csv", ["name", "value"], list(summary.items()))
    return {"profile_digest": prof.digest(), "sponge_width": sw, "sponge_width_ok": sponge_ok}


def load_run(run_dir, profile) -> tuple:
    run_dir = Path(run_dir)
    man = run_dir / "manifest.ini"
    idx = run_dir / "trajectory.csv"
    if not man.is_file() or not idx.is_file():
        raise MissingInputError(f"{run_dir} is not a simulate output directory")
    mcfg = store.read_config(man)
    digest = mcfg.get("run", {}).get("profile_digest", "")
    if digest != profile.digest():
        raise DomainError(f"run {run_dir} was produced from profile {digest or '?'}, "
                          f"not the supplied profile {profile.digest()}")
    times, frames = [], []
    for row in store.read_csv(idx):
        _, a, meta = store.load_snapshot(run_dir / row["file"])
        t = float(meta["t"])
        times.append(t)
        frames.append(a * np.exp(-1j * profile.omega0 * t))
    return Trajectory(profile.grid, np.array(times), np.array(frames), {}), mcfg


def cmd_green(cfg, out: Path):
    prof = require_profile(cfg)
    wt = wave_train_of(prof).require_ansatz()
    s = store.section(cfg, "green")
    order = s.int("order")
    op = assemble_operator(prof, prof.params, 0.0, order)
    sp = adjoint_pair(prof, op)
    U0 = near_delta(prof.grid, s.float("y"), s.int("component"))
    times, frames = evolve_linearized(U0, prof, prof.params, s.float("dt"), s.float("t_final"),
                                      s.float("frame_every"), order)
    res = green_decomposition_fit(times, frames, prof, sp, wt, U0, s.float("t_min"))
    store.write_csv(out / "remainder.csv", ["t", "remainder", "remainder_R", "c1_lsq", "c2_lsq"],
                    zip(times, res.remainder, res.remainder_R, res.plateau_coeffs[:, 0], res.plateau_coeffs[:, 1]))
    rows = []
    for name, f in (("remainder", res.fit), ("remainder_R", res.fit_R)):
        if f is None:
            rows.append((name, math.nan, math.nan, math.nan, math.nan, math.nan))
        else:
            rows.append((name, f.exponent, f.amplitude, f.r_squared, f.window[0], f.window[1]))
    store.write_csv(out / "fits.csv", ["series", "fitted_slope", "amplitude", "r_squared", "t_lo", "t_hi"], rows)
    store.write_csv(out / "summary.csv", ["name", "value"],
                    [("pairing_psi1", res.pairings[0]), ("pairing_psi2", res.pairings[1]),
                     ("front_speed_left", res.front_speeds[0]), ("front_speed_right", res.front_speeds[1]),
                     ("cg", wt.cg)])
    plots.scatter_fit(out / "remainder.png", times, res.remainder, res.fit, ylabel="sup |remainder|")
    plots.scatter_fit(out / "remainder_R.png", times, res.remainder_R, res.fit_R, ylabel="sup |remainder R|")
    return {"profile_digest": prof.digest()}


def _null_run(fit) -> bool:
    return all(float(np.max(np.abs(f.U))) < 1e-10 for f in fit.frames)


def cmd_verify(cfg, out: Path):
    prof = require_profile(cfg)
    wt = wave_train_of(prof).require_ansatz()
    s = store.section(cfg, "verify")
    rdir = store.section(cfg, "input").values.get("run", "")
    if not rdir:
        raise MissingInputError("input.run is not set; pass the simulate output directory with --run")
    traj, mcfg = load_run(rdir, prof)
    sim = store.Section("simulate", mcfg.get("simulate", {}))
    eps = sim.float("epsilon")
    sw = float(mcfg.get("run", {}).get("sponge_width", "0") or 0)
    mask = analysis_mask(prof.x, wt, sw)
    M0 = s.optional_float("M0")
    M0 = default_M0(wt) if M0 is None else M0
    kappa, t_min = s.float("kappa"), s.float("t_min")
    fit = fit_modulation(traj, prof, wt, truncate=True)
    store.write_csv(out / "deltas.csv", ["t", "delta_plus", "delta_minus"],
                    zip(fit.times, fit.delta_plus, fit.delta_minus))
    results = []
    if math.isfinite(fit.breakdown):
        results.append(check("extraction.breakdown_time", fit.breakdown, False, "none",
                             "field left the neighbourhood of the source; later frames dropped"))
    if _null_run(fit):
        for name in ("theorem.W0_exponent", "theorem.R_exponent", "cone.decay", "template.h", "residual.N"):
            results.append(check(name, 0.0, True, "zero perturbation", "null run: all residuals vanish"))
    else:
        td = theorem_decay_check(traj, fit, prof, wt, kappa, M0, t_min=t_min, mask=mask)
        store.write_csv(out / "theorem_series.csv", ["t", "W0", "W1", "R_sup"],
                        zip(td.times, td.W[0], td.W[1], td.R_sup))
        for l in (0, 1):
            f = td.fits[l]
            results.append(check(f"theorem.W{l}_exponent", f.exponent if f else math.nan,
                                 f is not None and f.exponent <= 0.05, "<= 0.05"))
        results += fit_checks("theorem.R_exponent", td.R_fit, -0.65, -0.35, r2=0.0)
        for name, f in zip(("delta_plus", "delta_minus"), td.delta_fits):
            results.append(check(f"theorem.{name}_convergence", f.exponent if f else math.nan,
                                 f is not None and (f.trivial or (f.exponent < 0 and f.r_squared >= 0.9)),
                                 "rate < 0, R2 >= 0.9", f"R2={f.r_squared:.4f}" if f else "fit failed"))
        if len(td.times):
            plots.scatter_fit(out / "W0.png", td.times, td.W[0], td.fits[0], ylabel="W0")
        eta_c = s.optional_float("eta_cone")
        try:
            cone = cone_convergence_check(traj, fit, prof, wt, eta_c, t_min, mask)
            store.write_csv(out / "cone_series.csv", ["t", "sup_diff"], zip(cone.times, cone.sup_diff))
            f = cone.fit
            results.append(check("cone.decay", f.exponent if f else math.nan,
                                 f is not None and (f.trivial or (f.exponent < 0 and f.r_squared >= 0.95)),
                                 "rate < 0, R2 >= 0.95", f"R2={f.r_squared:.4f}" if f else "fit failed"))
            for name, err in zip(("delta_phi", "delta_p"), cone.shift_errors()):
                results.append(check(f"cone.{name}_rel_error", err, err <= 0.1, "<= 0.1"))
        except QcglError as exc:
            results.append(check("cone.decay", math.nan, False, "rate < 0", f"failed: {exc}"))
        try:
            kin = plateau_kinematics(fit, prof, wt, mask=mask)
            store.write_csv(out / "fronts.csv", ["t", "x_left", "x_right", "w_left", "w_right"],
                            zip(kin.times, kin.fronts[:, 0], kin.fronts[:, 1], kin.widths[:, 0], kin.widths[:, 1]))
            for name, v in zip(("left", "right"), kin.speeds):
                err = abs(abs(v) - wt.cg) / wt.cg
                results.append(check(f"plateau.speed_{name}_rel_error", err, err <= 0.05, "<= 0.05"))
            for name, f in zip(("left", "right"), kin.width_fits):
                results += fit_checks(f"plateau.width_exponent_{name}", f, 0.4, 0.6, r2=0.0)
        except QcglError as exc:
            results.append(check("plateau.kinematics", math.nan, False, "fronts at +-cg", f"failed: {exc}"))
        eta = s.optional_float("eta")
        ts = template_monitor(fit, prof, wt, kappa, eta, M0, mask=mask)
        store.write_csv(out / "template.csv", ["t", "h1", "h2"], zip(ts.times, ts.h1, ts.h2))
        results.append(check("template.h_over_eps", float(ts.h[-1]) / eps if eps > 0 else math.nan,
                             np.isfinite(ts.h[-1]) and not ts.unstable(), "bounded, no growth"))
        nres = s.int("residual_frames")
        sub = _subsample_fit(fit, nres)
        try:
            rr = perturbation_residual(sub, prof, prof.params, mask)
            store.write_csv(out / "residual.csv", ["t", "linear", "remainder", "classes"],
                            zip(rr.times, rr.linear, rr.remainder, rr.classes))
            results.append(check("residual.N_constant", rr.constant, np.isfinite(rr.constant),
                                 "finite", "sup |N| / sup(bound classes)"))
        except QcglError as exc:
            results.append(check("residual.N_constant", math.nan, False, "finite", f"failed: {exc}"))
    rows = [(r.name, r.value, r.tolerance, r.passed, r.note) for r in results]
    store.write_csv(out / "checks.csv", ["name", "value", "tolerance", "passed", "note"], rows)
    ok = overall(results)
    lines = ["verification report", f"profile {prof.digest()}, run {Path(rdir).name}, epsilon {eps!r}",
             "thresholds are implementation choices", ""]
    lines += [f"{'PASS' if r.passed else 'FAIL'}  {r.name} = {r.value!r}  ({r.tolerance}) {r.note}" for r in results]
    lines += ["", f"overall: {'PASS' if ok else 'FAIL'}"]
    store.write_text(out / "report.txt", "\n".join(lines) + "\n")
    store.write_text(out / "summary.ini", store.dump_config({"summary": {"overall_pass": store.fmt_value(ok),
                                                                          "checks": str(len(results))}}))
    return {"profile_digest": prof.digest(), "overall_pass": ok}


def _subsample_fit(fit, n):
    """The last ``n`` frames (consecutive, since the residual takes time
    derivatives between neighbours)."""
    if len(fit.times) <= n:
        return fit
    sel = slice(len(fit.times) - n, None)
    return type(fit)(fit.times[sel], fit.delta_plus[sel], fit.delta_minus[sel], fit.p_fields[sel],
                     fit.frames[sel])


SCAN_HEADER = ["alpha", "beta", "gamma1", "gamma2", "status", "k0", "r0", "omega0", "cg", "d", "q",
               "beta_star", "d_sign", "essential_margin", "max_core_re", "n_zero", "verdict", "error"]


def scan_point(args):
    """One stability-map row; failures are recorded in the row."""
    (a, b, g1, g2), L, h, kmax, kcount = args
    params = QcglParams(a, b, g1, g2)
    row = dict.fromkeys(SCAN_HEADER, "")
    row.update(alpha=a, beta=b, gamma1=g1, gamma2=g2)
    try:
        prof = build_profile(params, GridSpec(L, h))
        wt = wave_train_of(prof)
        row.update(k0=prof.k0, r0=wt.r0, omega0=prof.omega0, cg=wt.cg, d=wt.d, q=wt.q, beta_star=wt.beta_star,
                   d_sign=int(np.sign(wt.d)))
        if wt.d < 0:
            row.update(status="ok", verdict="unstable", essential_margin=math.inf, error="d < 0: essential")
            return [row[k] for k in SCAN_HEADER]
        row["essential_margin"] = essential_spectrum_margin(params, wt, np.linspace(-kmax, kmax, kcount))
        verdict, max_re, nz = stability_verdict(prof, params)
        if row["essential_margin"] > 1e-8:
            verdict = "unstable"
        row.update(status="ok", max_core_re=max_re, n_zero=nz, verdict=verdict)
    except (QcglError, ValueError, np.linalg.LinAlgError) as exc:
        row.update(status="failed", verdict="unknown", error=f"{type(exc).__name__}: {exc}")
    return [row[k] for k in SCAN_HEADER]


def cmd_scan(cfg, out: Path):
    s = store.section(cfg, "scan")
    threads = max(1, store.section(cfg, "run").int("threads"))
    grid = list(itertools.product(s.floats("alpha"), s.floats("beta"), s.floats("gamma1"), s.floats("gamma2")))
    jobs = [(p, s.float("half_width"), s.float("spacing"), s.float("kappa_max"), s.int("kappa_count"))
            for p in grid]
    if threads == 1:
        rows = [scan_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(scan_point, jobs))  # map keeps grid order
    store.write_csv(out / "scan.csv", SCAN_HEADER, rows)
    ok = [r for r in rows if r[4] == "ok" and r[14] != ""]
    best = min(ok, key=lambda r: r[14]) if ok else None
    stable = [r for r in rows if r[16] == "stable"]
    summary = [("points", len(rows)), ("stable_points", len(stable)),
               ("least_unstable", "" if best is None else ",".join(repr(float(v)) for v in best[:4])),
               ("least_unstable_max_re", math.nan if best is None else best[14])]
    store.write_csv(out / "summary.csv", ["name", "value"], summary)
    if ok:
        arr = np.array([[r[0], r[1], r[14]] for r in ok], float)
        plots.line_plot(out / "scan.png", np.arange(len(arr)), {"max core Re": arr[:, 2]}, xlabel="point",
                        title="largest core eigenvalue per scan point")
    return {"points": len(rows), "stable_points": len(stable)}


COMMANDS = {
    "dispersion": (cmd_dispersion, "wave-train constants and essential-spectrum curves",
                   "dispersion.csv: k,r0,omega_nl,cg_fd,cg_formula,beta_star,d,q\n"
                   "lambda_curves.csv: kappa,branch,re,im (two rows per kappa)\n"
                   "tip_fit.csv: name,value"),
    "profile": (cmd_profile, "solve the standing source on the configured grid",
                "profile.txt: x r phi phi_x with a '# key = value' header\n"
                "diagnostics.csv: name,value\nprofile_fields.csv: x,r,phi,phi_x,res_r,res_phi"),
    "spectrum": (cmd_spectrum, "point spectrum near zero, kernel and adjoint null vectors",
                 "eigenvalues.csv: index,re,im,abs\ngram.csv: i,j,normalized,raw_M_psi\n"
                 "kernel_adjoints.csv: x,V1_R,V1_P,V2_R,V2_P,psi1_R,psi1_P,psi2_R,psi2_P\nsummary.csv: name,value"),
    "ansatz": (cmd_ansatz, "closed-form modulation fields at selected times",
               "ansatz_t<T>.csv: x,e,phi_hat,p,R_hat,rphi_a,Eplus_R,Eplus_P,Eminus_R,Eminus_P\n"
               "burgers_residual.csv: t,res_plus,res_minus,sup_phi_hat,sup_R_hat"),
    "simulate": (cmd_simulate, "perturb the source and integrate the full equation",
                 "frames/frame_<step>.txt: x re im (rotating frame, header t, step)\n"
                 "trajectory.csv: index,t,step,file\nspacetime_abs.csv, spacetime_arg.csv: t then one column per x\n"
                 "deltas.csv: t,delta_plus,delta_minus\nsummary.csv: name,value"),
    "green": (cmd_green, "linearized evolution from near-delta data and remainder decay",
              "remainder.csv: t,remainder,remainder_R,c1_lsq,c2_lsq\n"
              "fits.csv: series,fitted_slope,amplitude,r_squared,t_lo,t_hi\nsummary.csv: name,value"),
    "verify": (cmd_verify, "decay, cone, plateau, template and residual checks on a simulate run",
               "checks.csv: name,value,tolerance,passed,note\nreport.txt, summary.ini (overall_pass)\n"
               "theorem_series.csv: t,W0,W1,R_sup\ncone_series.csv: t,sup_diff\nfronts.csv, template.csv, residual.csv"),
    "scan": (cmd_scan, "stability map over a parameter grid",
             "scan.csv: " + ",".join(SCAN_HEADER) + "\nsummary.csv: name,value"),
}

# flag -> (section, key)
FLAG_MAP = {
    "alpha": ("params", "alpha"), "beta": ("params", "beta"), "gamma1": ("params", "gamma1"),
    "gamma2": ("params", "gamma2"), "half_width": ("grid", "half_width"), "points": ("grid", "points"),
    "profile": ("input", "profile"), "run": ("input", "run"), "epsilon": ("simulate", "epsilon"),
    "t_final": None, "dt": None, "resume": ("simulate", "resume"), "y": ("green", "y"),
    "k0": ("dispersion", "k0"), "delta_plus": ("ansatz", "delta_plus"), "delta_minus": ("ansatz", "delta_minus"),
}

PER_COMMAND_FLAGS = {
    "dispersion": ("alpha", "beta", "gamma1", "gamma2", "k0"),
    "profile": ("alpha", "beta", "gamma1", "gamma2", "half_width", "points"),
    "spectrum": ("profile",),
    "ansatz": ("profile", "delta_plus", "delta_minus"),
    "simulate": ("profile", "epsilon", "t_final", "dt", "resume"),
    "green": ("profile", "y", "t_final", "dt"),
    "verify": ("profile", "run"),
    "scan": (),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcgl-sources", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, helptext, schema) in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext, description=helptext,
                            epilog="outputs:\n" + schema + f"\n\noutput root: --out, else ${store.OUTPUT_ROOT_ENV}/{name}",
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", help="INI config or a manifest.ini from an earlier run")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="random seed (recorded in the manifest)")
        sp.add_argument("--threads", type=int, help="worker processes for parallel stages")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override any config value")
        sp.add_argument("-v", "--verbose", action="store_true")
        for flag in PER_COMMAND_FLAGS[name]:
            sp.add_argument("--" + flag.replace("_", "-"), dest=flag)
    return ap


def resolve_config(args) -> dict:
    cmd = args.command
    defaults = {s: DEFAULTS[s] for s in COMMAND_SECTIONS[cmd]}
    layers = []
    if args.config:
        layers.append(store.read_config(args.config))
    over = {}
    for flag in PER_COMMAND_FLAGS[cmd]:
        v = getattr(args, flag, None)
        if v is None:
            continue
        target = FLAG_MAP[flag] or (cmd, flag)
        over.setdefault(target[0], {})[target[1]] = v
    if args.seed is not None:
        over.setdefault("run", {})["seed"] = str(args.seed)
    if args.threads is not None:
        over.setdefault("run", {})["threads"] = str(args.threads)
    for text in args.set:
        s, k, v = store.parse_override(text)
        over.setdefault(s, {})[k] = v
    layers.append(over)
    cfg = store.merge(defaults, *layers)
    # a manifest fed back as config: drop the recorded outputs, keep the inputs
    run = cfg.get("run", {})
    for k in list(run):
        if k not in DEFAULTS["run"]:
            del run[k]
    keep = set(COMMAND_SECTIONS[cmd])
    return {s: v for s, v in cfg.items() if s in keep}


def run_command(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        out = store.output_dir(args.command, args.out)
        out.mkdir(parents=True, exist_ok=True)
        func = COMMANDS[args.command][0]
        with np.errstate(all="ignore"):
            extra = func(cfg, out) or {}
        extra["package_version"] = package_version()
        store.write_manifest(out, args.command, cfg, extra)
    except MissingInputError as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except QcglError as exc:
        print(f"error in {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODULE
    return EXIT_OK


def main(argv=None):
    sys.exit(run_command(argv))


if __name__ == "__main__":
    main()
