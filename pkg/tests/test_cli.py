import csv
import json
import os
import subprocess
import sys

import pytest

from hyperising import cli


def run_cli(*args):
    return cli.main([str(a) for a in args])


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv(cli.ENV_OUTPUT_ROOT, str(tmp_path / "root"))


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_defaults_resolve():
    cfg = cli.resolve_config("evolve")
    assert cfg.kind == "evolve" and cfg.N == cli.SCHEMA["N"].default
    assert cfg.params.N == cfg.N


def test_layering_order():
    text = "N = 7\nJ = 3.0\n"
    cfg = cli.resolve_config("otoc", {"J": "4.5"}, "fig-otoc-small", text)
    assert cfg.N == 7 and cfg.J == 4.5


@pytest.mark.parametrize("overrides,key", [
    ({"N": "1"}, "N"),
    ({"N": "seven"}, "N"),
    ({"bogus": "1"}, "bogus"),
    ({"engine": "gpu"}, "engine"),
    ({"dt": "0.1", "sample_dt": "0.25"}, "sample_dt"),
    ({"scales": "1,2"}, "scales"),
    ({"p": "1.5"}, "p"),
    ({"N": "5", "w_site": "5"}, "w_site"),
])
def test_config_errors_name_the_field(overrides, key):
    with pytest.raises(cli.ConfigError) as exc:
        cli.resolve_config("evolve", overrides)
    assert key in exc.value.errors


def test_config_file_errors():
    with pytest.raises(cli.ConfigError) as exc:
        cli.parse_config_text("N = 5\nnot a pair\nmystery = 2\n")
    assert set(exc.value.errors) == {"line 2", "mystery"}
    with pytest.raises(cli.ConfigError):
        cli.resolve_config("evolve", text="kind = otoc\n")
    with pytest.raises(cli.ConfigError):
        cli.resolve_config("evolve", preset="no-such-preset")


def test_every_preset_resolves():
    for name in cli.PRESETS:
        for kind in cli.KINDS:
            try:
                cli.resolve_config(kind, preset=name)
            except cli.ConfigError as exc:  # pragma: no cover - reported below
                pytest.fail(f"{name}/{kind}: {exc.errors}")


def test_config_text_roundtrip():
    cfg = cli.resolve_config("otoc", preset="fig-otoc-lmax3")
    again = cli.resolve_config("otoc", text=cfg.to_text())
    assert again.values == cfg.values and again.digest() == cfg.digest()


def test_print_config(capsys):
    assert run_cli("evolve", "--N", 5, "--print-config") == 0
    assert "N = 5" in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    assert run_cli("evolve", "--N", 1) == cli.EXIT_CONFIG
    assert run_cli("evolve", "--set", "nothing") == cli.EXIT_CONFIG
    assert run_cli("evolve", "--config", tmp_path / "missing.cfg") == cli.EXIT_CONFIG
    assert run_cli("evolve", "--N", 40, "--engine", "exact") == cli.EXIT_ENGINE
    assert run_cli("randomized", "--protocol", "global", "--N", 12) == cli.EXIT_ENGINE
    assert run_cli("presets") == 0
    err = capsys.readouterr().err
    assert "config error: N" in err and "engine capability error" in err


def _evolve(tmp_path, name, engine, **extra):
    args = ["evolve", "--N", 9, "--engine", engine, "--t-max", 1.0, "--dt", 0.05,
            "--sample-dt", 0.25, "--out", tmp_path / name]
    for k, v in extra.items():
        args += ["--" + k.replace("_", "-"), v]
    assert run_cli(*args) == 0
    return tmp_path / name


def test_evolve_manifest_and_verify(tmp_path):
    d = _evolve(tmp_path, "a", "exact")
    m = json.loads((d / "manifest.json").read_text())
    assert m["kind"] == "evolve" and m["config"]["N"] == 9
    names = {a["path"] for a in m["artifacts"]}
    assert {"config.txt", "magnetization.csv"} <= names
    assert all(cli.verify_manifest(d / "manifest.json").values())
    assert run_cli("verify", d) == 0
    (d / "magnetization.csv").write_text("tampered\n")
    assert run_cli("verify", d) == cli.EXIT_COMPARE


def test_rerun_is_identical(tmp_path):
    a = _evolve(tmp_path, "a", "exact")
    b = _evolve(tmp_path, "b", "exact")
    assert (a / "magnetization.csv").read_bytes() == (b / "magnetization.csv").read_bytes()
    ma, mb = (json.loads((x / "manifest.json").read_text()) for x in (a, b))
    assert ma["config_digest"] == mb["config_digest"]
    assert (a / "config.txt").read_text() == (b / "config.txt").read_text()


def test_compare_exact_and_mps(tmp_path, capsys):
    a = _evolve(tmp_path, "a", "exact")
    b = _evolve(tmp_path, "b", "mps")
    report = cli.compare(a, b, 1e-3)
    assert report["pass"] and report["observables"]
    assert all(o["n"] > 0 for o in report["observables"].values())
    assert run_cli("compare", a, b, "--tolerance", 1e-3, "--out", tmp_path / "r.json") == 0
    assert json.loads((tmp_path / "r.json").read_text())["pass"]
    assert cli.compare(a, a, 0.0)["pass"]


def test_compare_incompatible(tmp_path):
    a = _evolve(tmp_path, "a", "exact")
    c = tmp_path / "c"
    assert run_cli("evolve", "--N", 7, "--t-max", 0.5, "--out", c) == 0
    with pytest.raises(cli.IncompatibleRunsError):
        cli.compare(a, c)
    assert run_cli("compare", a, c) == cli.EXIT_COMPARE
    z = tmp_path / "z"
    assert run_cli("trotter-zne", "--N", 5, "--trajectories", 50, "--out", z) == 0
    with pytest.raises(cli.IncompatibleRunsError):
        cli.compare(a, z)
    d = _evolve(tmp_path, "d", "exact", t_max=0.5)
    with pytest.raises(cli.IncompatibleRunsError):
        cli.compare(a, d)


def test_default_output_root(tmp_path):
    cfg = cli.resolve_config("evolve", {"N": "5", "t_max": "0.5"})
    manifest = cli.run(cfg)
    assert manifest.parent == tmp_path / "root" / f"evolve-{cfg.digest()[:12]}"
    # nothing is written outside the output root
    assert sorted(os.listdir(tmp_path)) == ["root"]


def test_otoc_then_lightcone(tmp_path):
    o = tmp_path / "o"
    assert run_cli("otoc", "--N", 7, "--engine", "exact", "--t-max", 2.0, "--dt", 0.05,
                   "--sample-dt", 0.25, "--out", o) == 0
    rows = read_csv(o / "otoc_grid.csv")
    assert len(rows) == 7 * 9
    assert (o / "otoc.svg").read_text().startswith("<svg")
    lc = tmp_path / "lc"
    assert run_cli("lightcone", "--N", 7, "--grid", o / "otoc_grid.csv", "--d-min", 1, "--out", lc) == 0
    report = json.loads((lc / "regime_report.json").read_text())
    assert report["classification"] in ("linear", "logarithmic", "power-law", "confined", "undetermined")
    assert len(read_csv(lc / "lightcone_points.csv")) == 7
    # model keys come from the grid's metadata unless given explicitly
    inherit = tmp_path / "inherit"
    assert run_cli("lightcone", "--grid", o / "otoc_grid.csv", "--d-min", 1, "--out", inherit) == 0
    assert "N = 7" in (inherit / "config.txt").read_text()
    assert run_cli("lightcone", "--grid", o / "otoc_grid.csv", "--N", 9, "--out", tmp_path / "bad") == cli.EXIT_CONFIG


def test_ground_state_scan_workers_agree(tmp_path):
    rows = []
    for w in (1, 2):
        out = tmp_path / f"g{w}"
        assert run_cli("ground-state", "--N", 6, "--engine", "exact", "--J-list", "1,3",
                       "--workers", w, "--out", out) == 0
        rows.append(read_csv(out / "equilibrium.csv"))
    assert rows[0] == rows[1] and len(rows[0]) == 2


def test_randomized_and_rydberg_runs(tmp_path):
    r = tmp_path / "r"
    assert run_cli("randomized", "--N", 4, "--n-reps", 20, "--shots", 10, "--t-max", 1.0,
                   "--dt", 0.5, "--sample-dt", 0.5, "--out", r) == 0
    assert len(read_csv(r / "protocol.csv")) == 3
    y = tmp_path / "y"
    assert run_cli("rydberg", "--N", 5, "--l-max", 3.0, "--t-max", 0.5, "--dt", 0.05,
                   "--sample-dt", 0.05, "--out", y) == 0
    assert "pulse_rule" in json.loads((y / "rydberg.json").read_text())
    assert len(read_csv(y / "geometry.csv")) == 5
    assert json.loads((y / "pulse.json").read_text())["register"][0] == 0.0


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hyperising.cli", "presets"], capture_output=True, text=True)
    assert proc.returncode == 0 and "fig-otoc-lmax3" in proc.stdout
