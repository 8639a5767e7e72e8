import json
import subprocess
import sys

import numpy as np
import pytest

from regspec.cli import main
from regspec.spectral import parse_eigenvalues_csv


def test_gen_and_reload(tmp_path, capsys):
    g = tmp_path / "g.json"
    edges = tmp_path / "e.csv"
    assert main(["gen", "--n", "50", "--d", "3", "--seed", "4", "--out", str(g), "--csv", str(edges)]) == 0
    assert "n=50 d=3" in capsys.readouterr().out
    assert len(edges.read_text().splitlines()) == 1 + 75
    spec = tmp_path / "s.csv"
    assert main(["spectrum", "--graph", str(g), "--csv", str(spec)]) == 0
    lam = parse_eigenvalues_csv(spec.read_text())
    assert lam.size == 50 and lam[-1] == pytest.approx(3.0)


def test_spectrum_json_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert main(["spectrum", "--n", "40", "--d", "4", "--seed", "2", "--rho0", "0.5", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(json.loads(a.read_text())["eigenvalues"]) == 40


def test_cycles_command(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["cycles", "--n", "100", "--d", "3", "--kmax", "5", "--csv", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "k,cycles,tree_like_fraction" and len(rows) == 6


def test_quadrature_demo_passes_bound(tmp_path):
    out = tmp_path / "q.json"
    assert main(["quadrature-demo", "--measure", "km", "--d", "3", "--M", "8", "--s", "0.5", "--out", str(out)]) == 0
    obj = json.loads(out.read_text())
    assert obj["kolmogorov_distance"] <= obj["bound"]
    assert sum(obj["weights"]) == pytest.approx(1.0)


def test_green_command_rows_agree(tmp_path):
    out = tmp_path / "g.json"
    assert main(["green", "--d", "3", "--z", "0,1", "--z", "1.5,0.2", "--depth", "20", "--out", str(out)]) == 0
    rows = np.array(json.loads(out.read_text())["rows"])
    assert np.allclose(rows[0, 2:4], [0.0, 0.4], atol=1e-12)
    assert np.allclose(rows[:, 2:4], rows[:, 6:8], atol=1e-6)


def test_density_command(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["density", "--d", "3", "--rho0", "1", "--trials", "5", "--depth", "5", "--points", "9",
                 "--csv", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 10


def test_verify_outputs_and_exit_code(tmp_path, capsys):
    out, csv = tmp_path / "r.json", tmp_path / "r.csv"
    code = main(["verify", "cycles", "--n", "100", "--trials", "5", "--out", str(out), "--csv", str(csv)])
    obj = json.loads(out.read_text())
    assert code == (0 if obj["passed"] else 1)
    assert csv.read_text().startswith("trial,")
    assert capsys.readouterr().out.splitlines()[-1].split()[:2] == ["PASS" if obj["passed"] else "FAIL", "cycles"]


def test_failed_check_exits_one():
    # the schedule check cannot hold at such a small eta
    assert main(["verify", "green", "--n", "200", "--trials", "1", "--statements", "1", "--eta", "0.01"]) == 1


@pytest.mark.parametrize("argv", [
    ["verify", "nope"],
    ["verify", "adj", "--interval", "1,0"],
    ["green", "--z", "abc"],
    ["quadrature-demo", "--measure", "foo"],
])
def test_usage_errors_exit_two(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_invalid_parameters_exit_two(capsys):
    assert main(["gen", "--n", "7", "--d", "3"]) == 2
    assert main(["green", "--z", "1,0"]) == 2
    assert main(["verify", "adj", "--eps", "0"]) == 2
    assert "error:" in capsys.readouterr().err


def test_budget_exceeded_exits_three(monkeypatch, capsys):
    monkeypatch.setenv("REGSPEC_BUDGET", "10")
    assert main(["cycles", "--n", "200", "--d", "3", "--kmax", "6"]) == 3
    assert "error:" in capsys.readouterr().err


def test_svg_output(tmp_path):
    pytest.importorskip("matplotlib")
    for argv in (["spectrum", "--n", "60", "--d", "3"], ["quadrature-demo", "--M", "5"],
                 ["verify", "cycles", "--n", "100", "--trials", "3"]):
        svg = tmp_path / "f.svg"
        main(argv + ["--svg", str(svg)])
        assert svg.read_text().lstrip().startswith("<?xml")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "regspec", "green", "--z", "0,1", "--depth", "6"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("re,im,")
