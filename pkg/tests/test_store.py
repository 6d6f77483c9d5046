import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcgl_sources import store
from qcgl_sources.errors import DomainError
from qcgl_sources.grid import GridSpec
from qcgl_sources.profile import nozaki_bekki


def test_override_parsing():
    assert store.parse_override("simulate.epsilon=0.02") == ("simulate", "epsilon", "0.02")
    assert store.parse_override(" a.b = c=d ") == ("a", "b", "c=d")
    for bad in ("epsilon=0.1", "simulate.epsilon"):
        with pytest.raises(DomainError):
            store.parse_override(bad)


def test_merge_layers():
    out = store.merge({"a": {"x": "1", "y": "2"}}, {"a": {"y": 3}}, {"b": {"z": "4"}})
    assert out == {"a": {"x": "1", "y": "3"}, "b": {"z": "4"}}


def test_config_roundtrip(tmp_path):
    cfg = {"grid": {"points": "400", "half_width": "40.0"}, "params": {"alpha": "2.0"}}
    p = tmp_path / "c.ini"
    p.write_text(store.dump_config(cfg))
    assert store.read_config(p) == cfg
    assert store.config_digest(cfg) == store.config_digest(store.read_config(p))


def test_missing_and_malformed_config(tmp_path):
    with pytest.raises(store.MissingInputError):
        store.read_config(tmp_path / "nope.ini")
    bad = tmp_path / "bad.ini"
    bad.write_text("no header\n")
    with pytest.raises(DomainError):
        store.read_config(bad)


def test_section_accessors():
    s = store.Section("x", {"f": "1.5", "i": "3", "b": "yes", "l": "1, 2;3", "n": "auto", "bad": "q"})
    assert s.float("f") == 1.5 and s.int("i") == 3 and s.bool("b")
    assert s.floats("l") == [1.0, 2.0, 3.0]
    assert s.optional_float("n") is None
    for fn in (s.float, s.int, s.bool, s.floats):
        with pytest.raises(DomainError):
            fn("bad")
    with pytest.raises(DomainError):
        s.float("missing")


def test_output_dir(monkeypatch, tmp_path):
    assert store.output_dir("scan", str(tmp_path)) == tmp_path
    monkeypatch.setenv(store.OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    assert store.output_dir("scan", None) == tmp_path / "root" / "scan"
    monkeypatch.delenv(store.OUTPUT_ROOT_ENV)
    assert store.output_dir("scan", None).parts[-1] == "scan"


def test_profile_roundtrip_is_exact(tmp_path):
    prof = nozaki_bekki(1.0, -1.0, GridSpec(10.0, 0.1))
    path = store.save_profile(tmp_path / "p.txt", prof)
    back = store.load_profile(path)
    for name in ("r", "phi", "phi_x"):
        assert np.array_equal(getattr(back, name), getattr(prof, name))
    assert back.k0 == prof.k0 and back.omega0 == prof.omega0
    assert back.params == prof.params


def test_profile_errors(tmp_path):
    with pytest.raises(store.MissingInputError):
        store.load_profile(tmp_path / "missing.txt")
    prof = nozaki_bekki(1.0, -1.0, GridSpec(10.0, 0.1))
    path = store.save_profile(tmp_path / "p.txt", prof)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-5]) + "\n")
    with pytest.raises(DomainError):
        store.load_profile(path)


def test_csv_cells(tmp_path):
    p = store.write_csv(tmp_path / "t.csv", ["a", "b", "c"], [[0.1, True, 1 + 2j]])
    assert p.read_text() == "a,b,c\n0.1,true,(1+2j)\n"
    assert store.read_csv(p) == [{"a": "0.1", "b": "true", "c": "(1+2j)"}]


def test_manifest_records_run_section(tmp_path):
    store.write_manifest(tmp_path, "scan", {"run": {"seed": "0"}}, {"digest": "abc", "ok": True})
    cfg = store.read_config(tmp_path / "manifest.ini")
    assert cfg["run"] == {"seed": "0", "command": "scan", "digest": "abc", "ok": "true"}


def test_snapshot_roundtrip(tmp_path):
    x = np.linspace(-1, 1, 11)
    a = np.exp(1j * x) / 3
    store.save_snapshot(tmp_path / "s.txt", x, a, {"t": 0.1, "step": 5})
    x2, a2, meta = store.load_snapshot(tmp_path / "s.txt")
    assert np.array_equal(x, x2) and np.array_equal(a, a2)
    assert meta["t"] == "0.1" and meta["step"] == "5"


@settings(max_examples=100, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_roundtrips(v):
    assert float(store.fmt_value(v)) == v
