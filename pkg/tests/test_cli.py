import csv
import json
import shutil
import subprocess

import numpy as np
import pytest

from bbrmc.cli import main
from bbrmc.experiments import RunConfig, _parse_h, load_config, run_convergence


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def test_ode_command(tmp_path, capsys):
    assert main(["ode", "--N", "6,8", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "ode1_table.csv")
    assert rows[0] == ["N", "err", "theory"]
    assert [r[0] for r in rows[1:]] == ["6", "8"]
    assert float(rows[2][2]) == pytest.approx((2 * np.pi) ** -8, rel=1e-3)
    assert "N=  8" in capsys.readouterr().out


def test_solve_command(capsys):
    assert main(["solve", "--problem", "heat2", "--N", "8", "--M", "4"]) == 0
    out = capsys.readouterr().out
    assert "heat2" in out and "iter=" in out and "err=" in out


def test_convergence_gmres_csv(tmp_path):
    assert main(["convergence", "--problem", "heat2", "--N", "8", "--M", "4,8", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "heat2_N8_gmres.csv")
    assert rows[0] == ["h", "iter", "err", "order"]
    assert [r[0] for r in rows[1:]] == ["1/4", "1/8"]
    assert rows[1][3] == "" and float(rows[2][3]) > 3
    raw = read_csv(tmp_path / "heat2_N8_gmres_raw.csv")
    assert raw[0] == ["h", "iter", "err", "order", "time"]
    assert float(raw[2][2]) == pytest.approx(float(rows[2][2]), rel=1e-3)


def test_convergence_direct_csv(tmp_path):
    assert main(["convergence", "--problem", "advdiff3", "--N", "8", "--M", "4",
                 "--mode", "dense-direct", "--out", str(tmp_path)]) == 0
    assert read_csv(tmp_path / "advdiff3_N8_direct.csv")[0] == ["h", "err", "order"]


def test_config_file_and_overrides(tmp_path):
    cfg = write_json(tmp_path / "cfg.json", {"problem": "heat2", "N": [6], "h": ["1/4", "1/8"],
                                            "out": str(tmp_path / "a")})
    assert main(["convergence", "--config", cfg, "--N", "8"]) == 0
    assert (tmp_path / "a" / "heat2_N8_gmres.csv").exists()
    assert not (tmp_path / "a" / "heat2_N6_gmres.csv").exists()


def test_deterministic_output(tmp_path):
    for d in ("a", "b"):
        assert main(["convergence", "--problem", "wave4", "--N", "6", "--M", "4,8", "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "wave4_N6_gmres.csv").read_bytes()
    assert a == (tmp_path / "b" / "wave4_N6_gmres.csv").read_bytes()


def test_non_halving_grid_leaves_order_empty():
    rows = run_convergence(RunConfig(problem="heat2", N=(6,), M=(4, 6)), write=False)
    assert [r["order"] for r in rows] == [None, None]


@pytest.mark.parametrize("problem", ["heat2", "advdiff3", "wave4", "telegraph5"])
def test_modes_agree_at_coarse_grid(problem):
    kw = dict(problem=problem, N=(12,), M=(6,))
    g = run_convergence(RunConfig(mode="gmres+pde", **kw), write=False)[0]["err"]
    d = run_convergence(RunConfig(mode="dense-direct", **kw), write=False)[0]["err"]
    assert f"{g:.2e}" == f"{d:.2e}"


def test_spectrum_command(tmp_path, capsys):
    assert main(["spectrum", "--problem", "heat2", "--N", "4", "--M", "4", "--out", str(tmp_path)]) == 0
    pre = read_csv(tmp_path / "heat2_N4_M4_spectrum_pre.csv")
    raw = read_csv(tmp_path / "heat2_N4_M4_spectrum_raw.csv")
    assert pre[0] == ["re", "im"] == raw[0]
    assert len(pre) - 1 == 6 * 9
    lam = np.array([complex(float(a), float(b)) for a, b in pre[1:]])
    assert np.sum(np.abs(lam - 1) < 1e-6) >= 5 * 9
    assert "lower bound 45" in capsys.readouterr().out


def test_spectrum_budget_exit(tmp_path, capsys):
    cfg = write_json(tmp_path / "c.json", {"problem": "heat2", "N": [12], "M": [8], "spectrum_budget": 100})
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "at least 686" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["solve", "--config", "/nonexistent/cfg.json"],
    ["solve", "--problem", "nosuch"],
    ["solve", "--N", "5"],
    ["solve", "--M", "1"],
    ["solve", "--mode", "banana"],
    ["solve", "--N", "x"],
    ["frobnicate"],
])
def test_config_errors(argv):
    assert main(argv) == 2


@pytest.mark.parametrize("doc", [
    {"h": ["2/7"]},
    {"h": [0.3]},
    {"colour": "blue"},
    {"tol": -1},
    ["not", "an", "object"],
])
def test_bad_config_documents(tmp_path, doc):
    assert main(["solve", "--config", write_json(tmp_path / "c.json", doc)]) == 2


def test_h_parsing(tmp_path):
    assert _parse_h("1/12") == 12
    assert _parse_h(1 / 24) == 24
    assert _parse_h(6) == 6
    cfg = load_config(write_json(tmp_path / "c.json", {"h": ["1/6", 0.125]}))
    assert cfg.M == (6, 8)


def test_non_convergence_exit(tmp_path):
    cfg = write_json(tmp_path / "c.json", {"problem": "wave4", "N": [6], "M": [4], "tol": 1e-14,
                                          "restart": 1, "max_cycles": 1})
    assert main(["solve", "--config", cfg]) == 3
    assert main(["convergence", "--config", cfg, "--out", str(tmp_path)]) == 3


def test_singular_exit(tmp_path):
    # zero spatial operator makes Q singular
    prob = write_json(tmp_path / "p.json", {"beta2": 1, "coeffs": {"a1": "0"}, "source": "0",
                                           "exact": "1 + 0*t*x*y"})
    assert main(["solve", "--problem", prob, "--N", "4", "--M", "3"]) == 4


def test_json_problem_relative_path(tmp_path, capsys):
    write_json(tmp_path / "p.json", {
        "name": "heatjson", "beta2": 1, "coeffs": {"a1": "-1", "a3": "-1"},
        "source": "exp(x + y + t) * (-1)", "exact": "exp(x + y + t)",
    })
    cfg = write_json(tmp_path / "c.json", {"problem": "p.json", "N": [8], "M": [4]})
    assert main(["solve", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert main(["solve", "--problem", "heat2", "--N", "8", "--M", "4"]) == 0
    ref = capsys.readouterr().out
    # the JSON definition is the builtin heat problem
    assert out.startswith("heatjson")
    assert out.split("err=")[1].split()[0] == ref.split("err=")[1].split()[0]


@pytest.mark.skipif(shutil.which("bbrmc") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["bbrmc", "ode", "--N", "6", "--out", "/tmp/bbrmc-cli-test"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "N=  6" in proc.stdout
    assert subprocess.run(["bbrmc", "solve", "--N", "3"], capture_output=True).returncode == 2
