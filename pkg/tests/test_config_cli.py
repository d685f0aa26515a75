from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kktldg.cli import main
from kktldg.config import ConfigError, RunConfig, parse_config

QUICK = "preset = porous1d\nelements = 10\ndegree = 1\ndirk_order = 2\nfinal_time = 0.02\n"


def test_defaults_resolved_from_preset():
    cfg = RunConfig(preset="porous2d").resolved()
    assert cfg.elements == (30, 30) and cfg.degree == 2 and cfg.dirk_order == 3
    assert cfg.tau_max == pytest.approx(12.0 / 30)
    assert cfg.tau_min == pytest.approx(cfg.tau_max / 4096)
    assert RunConfig(preset="porous2d", elements=(8,)).resolved().elements == (8, 8)


@given(
    st.sampled_from(["porous1d", "doublewell1d", "boson1d"]),
    st.integers(2, 400),
    st.integers(0, 4),
    st.floats(1e-6, 10.0),
    st.booleans(),
)
def test_manifest_round_trip(name, m, k, alpha, limiter):
    cfg = RunConfig(preset=name, elements=(m,), degree=k, alpha=alpha, limiter=limiter).resolved()
    again = parse_config(cfg.manifest())
    assert again == cfg


@pytest.mark.parametrize(
    "text",
    [
        "colour = red\n",
        "degree = two\n",
        "limiter = maybe\n",
        "flux = central\n",
        "alpha = -1\n",
        "dirk_order = 7\n",
        "just words\n",
    ],
)
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_overrides_and_comments():
    cfg = parse_config("preset = porous1d  # comment\nelements = 30x1\n", ["elements=16", "limiter=off"])
    assert cfg.elements == (16,) and cfg.limiter is False


def test_unknown_preset_rejected_on_resolve():
    with pytest.raises(ConfigError):
        RunConfig(preset="nope").resolved()


def test_cli_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("degree = x\n")
    assert main(["run", "--config", str(p)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
    good = tmp_path / "good.cfg"
    good.write_text(QUICK)
    assert main(["table", "--config", str(good), "--meshes", "10,30"]) == 2


def test_cli_run_is_deterministic_and_compare_is_zero(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(QUICK)
    for d in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--output", str(tmp_path / d)]) == 0
    for name in ("manifest.txt", "steps.csv", "solution.csv", "samples.csv", "summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert not (tmp_path / "a" / "FAILED").exists()
    capsys.readouterr()
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out and all(float(line.split()[1]) == 0.0 for line in out)
    manifest = (tmp_path / "a" / "manifest.txt").read_text()
    assert "preset = porous1d" in manifest and "output_dir" not in manifest


def test_cli_compare_incompatible(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(QUICK)
    main(["run", "--config", str(cfg), "--output", str(tmp_path / "a")])
    main(["run", "--config", str(cfg), "--override", "elements=12", "--output", str(tmp_path / "b")])
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b")]) == 2


def test_cli_table(tmp_path, capsys):
    cfg = tmp_path / "acc.cfg"
    cfg.write_text("preset = accuracy1d\ndegree = 1\ndirk_order = 2\nfinal_time = 0.05\n")
    assert main(["table", "--config", str(cfg), "--meshes", "10,20", "--output", str(tmp_path / "t")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# kktldg convergence table v1")
    assert (tmp_path / "t" / "table.csv").read_text() == out
    assert (tmp_path / "t" / "M20" / "summary.txt").exists()


def test_cli_failure_marker(tmp_path, capsys):
    cfg = tmp_path / "f.cfg"
    cfg.write_text(QUICK + "newton_max_iter = 1\nnewton_tol = 1e-16\ntau_min = 0.01\n")
    code = main(["run", "--config", str(cfg), "--output", str(tmp_path / "f")])
    assert code == 3
    assert (tmp_path / "f" / "FAILED").read_text().startswith("solver_failure")
    assert (tmp_path / "f" / "steps.csv").exists()
