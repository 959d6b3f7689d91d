import json
import subprocess
import sys

import pytest

from noisyprop import __version__
from noisyprop.cli import COMMANDS, ConfigError, main, parse_value
from noisyprop.reporting import read_csv

FAST = {
    "dispersion": ["-p", "n_k=5"],
    "propagator": ["-p", "kind=commutator_cutoff", "-p", "n_radial=16", "-p", "n_energy=16"],
    "noisy-propagator": ["-p", "zeta=0.1,0.2,0,0", "-p", "n_radial=12", "-p", "n_angular=8"],
    "positivity": ["-p", "n_functions=4", "-p", "n_space=6", "-p", "n_time=6"],
    "laplace-check": [],
    "semigroup": [],
    "mike-check": [],
}


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def report(out):
    return json.loads((out / "report.json").read_text())


@pytest.mark.parametrize("command", list(COMMANDS))
def test_every_command_succeeds(tmp_path, command):
    code, out = run(tmp_path, command, *FAST[command])
    assert code == 0
    doc = report(out)
    assert doc["command"] == command and doc["version"] == __version__
    for path in out.iterdir():
        if path.suffix in (".csv", ".dat"):
            text = path.read_text()
            assert f"# version: {__version__}" in text and '"command": "%s"' % command in text


def test_positivity_seed7(tmp_path):
    code, out = run(tmp_path, "positivity", "--seed", "7")
    assert code == 0
    res = report(out)["results"]
    assert res["verdict_re"] == "positive" and res["seed"] == 7
    assert len(res["per_function"]) == 200 and res["min_re"] >= 0


def test_negated_kernel_exit_1(tmp_path):
    code, out = run(tmp_path, "positivity", *FAST["positivity"], "-p", "negate=true")
    assert code == 1
    assert report(out)["results"]["verdict_re"] == "violated"


@pytest.mark.parametrize("args", [
    ["positivity", "-p", "kernel=noisy_feynman", "-p", "zeta=0.8,0,0,0"],
    ["dispersion", "-p", "zeta=1,0,0"],
    ["dispersion", "-p", "nonsense=1"],
    ["dispersion", "-p", "xi=-1"],
    ["laplace-check", "-p", "n_xi=800"],
    ["propagator", "-p", "kind=retarded"],
    ["semigroup", "--threads", "0"],
])
def test_config_errors_exit_2_without_outputs(tmp_path, capsys, args):
    code, out = run(tmp_path, *args)
    assert code == 2
    assert not out.exists()
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["status"] == "config_error" and rec["exit_code"] == 2


def test_missing_config_file(tmp_path):
    code, out = run(tmp_path, "dispersion", "--config", str(tmp_path / "nope.ini"))
    assert code == 2 and not out.exists()


def test_numerical_failure_exit_3(tmp_path, capsys):
    code, out = run(tmp_path, "semigroup", "-p", "zeta=0,0.7,0,0", "-p", "taus=1e4")
    assert code == 3
    rec = json.loads((out / "error.json").read_text())
    assert rec["status"] == "numerical_failure" and rec["config"]["params"]["taus"] == [1e4]
    assert json.loads(capsys.readouterr().err)["exit_code"] == 3
    assert not (out / "report.json").exists()


def test_deterministic_outputs(tmp_path):
    args = ["positivity", *FAST["positivity"], "-p", "family=mixed", "--seed", "3"]
    _, a = run(tmp_path, *args, name="a")
    _, b = run(tmp_path, *args, name="b")
    da, db = report(a), report(b)
    da.pop("header"), db.pop("header")
    assert da == db
    for name in ("summary.csv", "sigma.dat"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ja = (a / "report.json").read_text().splitlines()
    jb = (b / "report.json").read_text().splitlines()
    assert [x for x in ja if "timestamp" not in x] == [x for x in jb if "timestamp" not in x]


def test_threads_same_report(tmp_path):
    _, a = run(tmp_path, "positivity", *FAST["positivity"], name="a")
    _, b = run(tmp_path, "positivity", *FAST["positivity"], "--threads", "3", name="b")
    assert report(a)["results"] == report(b)["results"]


def test_csv_roundtrip(tmp_path):
    _, out = run(tmp_path, "noisy-propagator", *FAST["noisy-propagator"])
    header, rows = read_csv(out / "summary.csv")
    assert header == ["t", "r", "noisy_re", "noisy_im", "free_re", "free_im", "ratio_re", "ratio_im"]
    text = (out / "summary.csv").read_text().splitlines()
    body = [ln for ln in text if not ln.startswith("#")][1:]
    for line, row in zip(body, rows):
        assert [repr(v) for v in row] == line.split(",")


def test_csv_matches_report(tmp_path):
    _, out = run(tmp_path, "positivity", *FAST["positivity"])
    _, rows = read_csv(out / "summary.csv")
    per = report(out)["results"]["per_function"]
    assert [(r[1], r[2]) for r in rows] == [(p["re"], p["im"]) for p in per]


def test_ini_config_and_overrides(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[common]\nseed = 11\nn_k = 3\n\n[dispersion]\nxi = 0.25, 4\nk_max = 2\n")
    _, out = run(tmp_path, "dispersion", "--config", str(ini), name="a")
    cfg = report(out)["config"]
    assert cfg["seed"] == 11 and cfg["params"]["xi"] == [0.25, 4.0] and cfg["params"]["n_k"] == 3
    _, out = run(tmp_path, "dispersion", "--config", str(ini), "-p", "k_max=3", "--seed", "2", name="b")
    cfg = report(out)["config"]
    assert cfg["seed"] == 2 and cfg["params"]["k_max"] == 3.0
    _, rows = read_csv(out / "summary.csv")
    assert len(rows) == 6


def test_ini_unknown_key(tmp_path):
    ini = tmp_path / "bad.ini"
    ini.write_text("[dispersion]\nbogus = 1\n")
    assert run(tmp_path, "dispersion", "--config", str(ini))[0] == 2


def test_laplace_check_passes(tmp_path):
    code, out = run(tmp_path, "laplace-check")
    res = report(out)["results"]
    assert code == 0 and res["passed"] and res["max_rel_err"] < 1e-3 and res["min_order"] >= 1.8
    header, rows = read_csv(out / "summary.csv")
    assert len(rows) == 16 and header[5:7] == ["lhs_re", "lhs_im"]


def test_laplace_check_failure_exit_1(tmp_path):
    code, out = run(tmp_path, "laplace-check", "-p", "n_xi=21")
    assert code == 1 and report(out)["results"]["passed"] is False


def test_commutator_diagnostics_in_report(tmp_path):
    _, out = run(tmp_path, "propagator", *FAST["propagator"])
    diag = report(out)["results"]["diagnostics"]
    assert diag["fixed_mass"]["max_abs_equal_time"] == 0.0
    assert len(diag["cutoff"]["ladder"]) == 4


def test_figures(tmp_path):
    pytest.importorskip("matplotlib")
    _, out = run(tmp_path, "dispersion", *FAST["dispersion"], "--figures")
    assert sorted(p.name for p in out.glob("*.png")) == ["dispersion_0.png", "dispersion_1.png", "dispersion_2.png"]


def test_parse_value():
    assert parse_value("vectors", "0,0,0,1; 1,2,3,4") == ((0.0, 0.0, 0.0, 1.0), (1.0, 2.0, 3.0, 4.0))
    assert parse_value("bool", "Yes") is True
    with pytest.raises(ConfigError):
        parse_value("vec3", "1,2")
    with pytest.raises(ConfigError):
        parse_value("int", "1.5")


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "noisyprop", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "noisyprop", "dispersion", "-p", "zeta=0.9,0,0,0",
                           "--out", str(tmp_path / "x")], capture_output=True, text=True)
    assert proc.returncode == 2 and not (tmp_path / "x").exists()
