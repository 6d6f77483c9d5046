import configparser

import pytest

from qcgl_sources import cli, store

SMALL = ["--half-width", "40", "--points", "400"]


@pytest.fixture(scope="module")
def profile_path(tmp_path_factory):
    out = tmp_path_factory.mktemp("profile")
    assert cli.run_command(["profile", *SMALL, "--out", str(out)]) == 0
    return out / "profile.txt"


def _manifest(path):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read(path / "manifest.ini")
    return cp


def test_help_lists_schema(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.run_command(["scan", "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    assert "scan.csv:" in text and store.OUTPUT_ROOT_ENV in text


def test_profile_outputs(profile_path):
    out = profile_path.parent
    for name in ("profile.txt", "diagnostics.csv", "profile_fields.csv", "profile.png", "manifest.ini"):
        assert (out / name).is_file()
    man = _manifest(out)
    assert man["run"]["command"] == "profile"
    assert man["grid"]["points"] == "400"


def test_exit_codes(tmp_path, profile_path):
    assert cli.run_command(["spectrum", "--out", str(tmp_path / "a")]) == cli.EXIT_MISSING
    assert cli.run_command(["spectrum", "--profile", str(tmp_path / "nope.txt"),
                            "--out", str(tmp_path / "b")]) == cli.EXIT_MISSING
    assert cli.run_command(["profile", "--points", "401", "--out", str(tmp_path / "c")]) == cli.EXIT_DOMAIN
    assert cli.run_command(["profile", *SMALL, "--set", "params.alpha=abc",
                            "--out", str(tmp_path / "d")]) == cli.EXIT_DOMAIN
    assert cli.run_command(["profile", *SMALL, "--set", "profile.tol=1e-30",
                            "--out", str(tmp_path / "e")]) == cli.EXIT_MODULE
    assert cli.run_command(["simulate", "--profile", str(profile_path), "--epsilon", "1e4", "--t-final", "1",
                            "--out", str(tmp_path / "f")]) == cli.EXIT_MODULE


def test_output_root_env(monkeypatch, tmp_path):
    monkeypatch.setenv(store.OUTPUT_ROOT_ENV, str(tmp_path))
    assert cli.run_command(["dispersion", "--set", "dispersion.k_count=11"]) == 0
    assert (tmp_path / "dispersion" / "dispersion.csv").is_file()


def test_flag_overrides_config(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[params]\nalpha = 1.0\nbeta = -1.0\ngamma1 = 0.0\ngamma2 = 0.0\n")
    out = tmp_path / "o"
    assert cli.run_command(["dispersion", "--config", str(cfg), "--beta", "-0.5",
                            "--set", "dispersion.k_count=11", "--seed", "7", "--out", str(out)]) == 0
    man = _manifest(out)
    assert man["params"]["alpha"] == "1.0" and man["params"]["beta"] == "-0.5"
    assert man["run"]["seed"] == "7"


def test_simulate_resume_and_verify(tmp_path, profile_path):
    first = tmp_path / "sim"
    args = ["simulate", "--profile", str(profile_path), "--t-final", "4", "--set", "simulate.frame_every=1",
            "--set", "simulate.shape=mixed"]
    assert cli.run_command([*args, "--out", str(first)]) == 0
    frames = sorted((first / "frames").iterdir())
    mid = frames[len(frames) // 2]
    resumed = tmp_path / "resumed"
    assert cli.run_command([*args, "--resume", str(mid), "--out", str(resumed)]) == 0
    assert (resumed / "frames" / frames[-1].name).read_bytes() == frames[-1].read_bytes()
    rep = tmp_path / "verify"
    assert cli.run_command(["verify", "--profile", str(profile_path), "--run", str(first),
                            "--out", str(rep)]) == 0
    assert (rep / "checks.csv").is_file() and (rep / "summary.ini").is_file()


def test_verify_rejects_mismatched_profile(tmp_path, profile_path):
    sim = tmp_path / "sim"
    assert cli.run_command(["simulate", "--profile", str(profile_path), "--t-final", "1",
                            "--out", str(sim)]) == 0
    other = tmp_path / "other"
    assert cli.run_command(["profile", "--half-width", "30", "--points", "300", "--out", str(other)]) == 0
    code = cli.run_command(["verify", "--profile", str(other / "profile.txt"), "--run", str(sim),
                            "--out", str(tmp_path / "v")])
    assert code == cli.EXIT_DOMAIN
    assert cli.run_command(["verify", "--profile", str(profile_path), "--run", str(tmp_path / "none"),
                            "--out", str(tmp_path / "w")]) == cli.EXIT_MISSING


def test_scan_thread_independent(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    base = ["scan", "--set", "scan.alpha=0,2", "--set", "scan.beta=0.4"]
    assert cli.run_command([*base, "--threads", "1", "--out", str(a)]) == 0
    assert cli.run_command([*base, "--threads", "2", "--out", str(b)]) == 0
    assert (a / "scan.csv").read_bytes() == (b / "scan.csv").read_bytes()
    rows = store.read_csv(a / "scan.csv")
    assert len(rows) == 2
