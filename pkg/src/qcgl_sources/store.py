"""Run configuration, manifests and on-disk artifacts.

Configs are INI-style text (``key = value`` under ``[section]`` headers).
Every float is written with ``repr`` so a rerun from a manifest sees the
exact same inputs, and no output embeds timestamps or host details.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import os
from pathlib import Path

import numpy as np

from .errors import DomainError, QcglError
from .grid import GridSpec
from .profile import SourceProfile
from .wavetrain import QcglParams

OUTPUT_ROOT_ENV = "QCGL_OUTPUT_ROOT"
FLOAT_FMT = "%.17g"


class MissingInputError(QcglError, FileNotFoundError):
    """An upstream artifact required by a command is absent."""


# -- configuration -------------------------------------------------------------

def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    return cp


def read_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"config file {path} not found")
    cp = _parser()
    try:
        cp.read_string(path.read_text())
    except configparser.Error as exc:
        raise DomainError(f"malformed config {path}: {exc}") from exc
    return {s: dict(cp[s]) for s in cp.sections()}


def parse_override(text: str):
    """``section.key=value`` into ``(section, key, value)``."""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise DomainError(f"override {text!r} must look like section.key=value")
    lhs, value = text.split("=", 1)
    section, key = lhs.strip().split(".", 1)
    return section.strip(), key.strip(), value.strip()


def merge(defaults: dict, *layers) -> dict:
    out = {s: dict(v) for s, v in defaults.items()}
    for layer in layers:
        for s, kv in layer.items():
            out.setdefault(s, {}).update({k: str(v) for k, v in kv.items()})
    return out


def fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return ", ".join(fmt_value(u) for u in v)
    return str(v)


def dump_config(cfg: dict) -> str:
    """Canonical text: sections and keys sorted, values as written."""
    buf = io.StringIO()
    for s in sorted(cfg):
        buf.write(f"[{s}]\n")
        for k in sorted(cfg[s]):
            buf.write(f"{k} = {cfg[s][k]}\n")
        buf.write("\n")
    return buf.getvalue()


def config_digest(cfg: dict) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()[:16]


class Section:
    """Typed accessors on one config section."""

    def __init__(self, name: str, values: dict):
        self.name, self.values = name, values

    def _raw(self, key):
        if key not in self.values:
            raise DomainError(f"missing config key {self.name}.{key}")
        return self.values[key]

    def float(self, key) -> float:
        raw = self._raw(key)
        try:
            return float(raw)
        except ValueError as exc:
            raise DomainError(f"{self.name}.{key} is not a number: {raw!r}") from exc

    def int(self, key) -> int:
        raw = self._raw(key)
        try:
            return int(raw)
        except ValueError as exc:
            raise DomainError(f"{self.name}.{key} is not an integer: {raw!r}") from exc

    def str(self, key) -> str:
        return self._raw(key)

    def bool(self, key) -> bool:
        v = self._raw(key).strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise DomainError(f"{self.name}.{key} is not a boolean: {v!r}")

    def floats(self, key) -> list:
        raw = self._raw(key)
        try:
            return [float(u) for u in raw.replace(";", ",").split(",") if u.strip()]
        except ValueError as exc:
            raise DomainError(f"{self.name}.{key} is not a list of numbers: {raw!r}") from exc

    def optional_float(self, key):
        v = self.values.get(key, "").strip().lower()
        return None if v in ("", "none", "auto") else self.float(key)


def section(cfg: dict, name: str) -> Section:
    return Section(name, cfg.get(name, {}))


def params_from(cfg: dict) -> QcglParams:
    s = section(cfg, "params")
    return QcglParams(s.float("alpha"), s.float("beta"), s.float("gamma1"), s.float("gamma2"))


def output_dir(command: str, out: str | None) -> Path:
    if out:
        return Path(out)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    return Path(root) / command if root else Path("qcgl_out") / command


# -- tabular output ------------------------------------------------------------

def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def write_manifest(outdir, command: str, cfg: dict, extra: dict | None = None) -> Path:
    """Resolved config plus a ``[run]`` section; rerunnable with ``--config``."""
    full = {s: dict(v) for s, v in cfg.items()}
    run = dict(full.get("run", {}))
    run["command"] = command
    for k, v in (extra or {}).items():
        run[k] = fmt_value(v)
    full["run"] = run
    return write_text(Path(outdir) / "manifest.ini", dump_config(full))


# -- profiles ------------------------------------------------------------------

def save_profile(path, profile: SourceProfile) -> Path:
    """Columnar text ``x r phi phi_x`` with a header carrying the scalars."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    p = profile.params
    head = [
        f"alpha = {p.alpha!r}", f"beta = {p.beta!r}", f"gamma1 = {p.gamma1!r}", f"gamma2 = {p.gamma2!r}",
        f"k0 = {float(profile.k0)!r}", f"omega0 = {float(profile.omega0)!r}",
        f"eta0 = {float(profile.eta0)!r}", f"half_width = {float(profile.grid.half_width)!r}",
        f"spacing = {float(profile.grid.spacing)!r}", "columns = x r phi phi_x",
    ]
    data = np.column_stack([profile.x, profile.r, profile.phi, profile.phi_x])
    np.savetxt(path, data, fmt=FLOAT_FMT, header="\n".join(head), comments="# ")
    return path


def load_profile(path) -> SourceProfile:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"profile file {path} not found; run the profile command first")
    meta = {}
    with path.open() as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if "=" in line:
                k, v = line[1:].split("=", 1)
                meta[k.strip()] = v.strip()
    try:
        data = np.loadtxt(path, comments="#", ndmin=2)
        params = QcglParams(float(meta["alpha"]), float(meta["beta"]), float(meta["gamma1"]),
                            float(meta["gamma2"]))
        grid = GridSpec(float(meta["half_width"]), float(meta["spacing"]))
        k0, omega0, eta0 = float(meta["k0"]), float(meta["omega0"]), float(meta["eta0"])
    except (KeyError, ValueError) as exc:
        raise DomainError(f"profile file {path} is malformed: {exc}") from exc
    if data.shape != (grid.n, 4):
        raise DomainError(f"profile file {path} has shape {data.shape}, expected ({grid.n}, 4)")
    return SourceProfile(grid, data[:, 1].copy(), data[:, 2].copy(), data[:, 3].copy(), k0, omega0,
                         params, eta0=eta0)


# -- simulation snapshots ---------------------------------------------------------

def save_snapshot(path, x, a, header: dict) -> Path:
    """``x Re Im`` columns; ``header`` values are written with ``repr``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    head = [f"{k} = {fmt_value(v)}" for k, v in header.items()] + ["columns = x re im"]
    np.savetxt(path, np.column_stack([x, a.real, a.imag]), fmt=FLOAT_FMT, header="\n".join(head),
               comments="# ")
    return path


def load_snapshot(path):
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"snapshot {path} not found")
    meta = {}
    with path.open() as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if "=" in line:
                k, v = line[1:].split("=", 1)
                meta[k.strip()] = v.strip()
    data = np.loadtxt(path, comments="#", ndmin=2)
    return data[:, 0], data[:, 1] + 1j * data[:, 2], meta
