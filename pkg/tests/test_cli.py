import os
import subprocess
import sys

import numpy as np
import pytest

from l1equiv.cli import main
from l1equiv.scenario import ScenarioError, parse_scenario
from l1equiv.simulator import read_trace_csv

SCALAR = """\
[plant]
a = -1

[reference]
a_m = 1

[l1]
k = {k}
gamma = 10

[init]
x0 = 1

[integrator]
dt = 1e-3
t_end = {t_end}
sample_every = 100
"""

SECOND_ORDER = """\
[plant]
n = 2
a = 2, 3

[reference]
a_m = 1 2
Q = 1 0; 0 1

[l1]
k = 1
gamma = 10

[integrator]
dt = 1e-3
t_end = 2
sample_every = 10
"""


@pytest.fixture
def write(tmp_path):
    def _write(text, name="s.ini"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return _write


def kv(path):
    out = {}
    for line in open(path):
        if " = " in line:
            key, value = line.rstrip("\n").split(" = ", 1)
            out[key] = value
    return out


class TestScenario:
    def test_defaults(self):
        sc = parse_scenario(SECOND_ORDER)
        np.testing.assert_array_equal(sc.ref.Q, np.eye(2))
        x0, u0, xh, th, v0 = sc.init.resolve(2, sc.l1.k)
        np.testing.assert_array_equal(x0, [1, 0])
        assert v0 == 0.0 and sc.integrator.blowup_threshold == 1e6

    def test_negative_reference_coefficient_anchored(self):
        text = SECOND_ORDER.replace("a_m = 1 2", "a_m = 1 -2")
        with pytest.raises(ScenarioError, match=r"a_m\[i\] > 0") as exc:
            parse_scenario(text, "bad.ini")
        assert exc.value.line == 6
        assert str(exc.value).startswith("bad.ini:6:")

    def test_declared_order_mismatch(self):
        with pytest.raises(ScenarioError, match="n = 3"):
            parse_scenario(SECOND_ORDER.replace("n = 2", "n = 3"))

    def test_missing_section(self):
        with pytest.raises(ScenarioError, match=r"\[l1\]"):
            parse_scenario(SECOND_ORDER.replace("[l1]", "[filter]"))

    def test_not_a_number(self):
        with pytest.raises(ScenarioError, match="gamma") as exc:
            parse_scenario(SECOND_ORDER.replace("gamma = 10", "gamma = fast"))
        assert exc.value.line == 11

    def test_ragged_matrix(self):
        with pytest.raises(ScenarioError, match="ragged"):
            parse_scenario(SECOND_ORDER.replace("Q = 1 0; 0 1", "Q = 1 0; 1"))

    def test_explicit_v0(self):
        sc = parse_scenario(SCALAR.format(k=2, t_end=1).replace("x0 = 1", "x0 = 1\nv0 = 5"))
        assert sc.init.resolve(1, 2.0)[4] == 5.0

    def test_default_v0(self):
        sc = parse_scenario(SCALAR.format(k=2, t_end=1).replace("x0 = 1", "x0 = 3\nu0 = 0.5"))
        assert sc.init.resolve(1, 2.0)[4] == 6.5


class TestSimulate:
    def test_stable_pi(self, write, tmp_path):
        out = str(tmp_path / "pi.csv")
        assert main(["simulate", "--config", write(SCALAR.format(k=2, t_end=20)), "--arch", "pi", "--out", out]) == 0
        data = read_trace_csv(out)
        assert abs(data["x1"][-1]) <= 1e-3 and abs(data["x1"][0]) == 1.0
        assert kv(out + ".verdict")["verdict"] == "Completed"

    def test_divergence_exit_code(self, write, tmp_path):
        out = str(tmp_path / "l1.csv")
        assert main(["simulate", "--config", write(SCALAR.format(k=0.5, t_end=100)), "--out", out]) == 3
        assert kv(out + ".verdict")["verdict"] == "Diverged"
        assert os.path.exists(out)

    def test_invalid_scenario_writes_nothing(self, write, tmp_path, capsys):
        out = tmp_path / "never.csv"
        cfg = write(SECOND_ORDER.replace("a_m = 1 2", "a_m = 1 -2"))
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 2
        assert "a_m[i] > 0" in capsys.readouterr().err
        assert list(tmp_path.iterdir()) == [tmp_path / "s.ini"]

    def test_missing_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path / "o")]) == 2

    def test_bad_flag(self, write, tmp_path):
        assert main(["simulate", "--config", write(SECOND_ORDER), "--arch", "mrac", "--out", str(tmp_path / "o")]) == 2


class TestAnalysisCommands:
    def test_equiv_pass(self, write, tmp_path):
        out = str(tmp_path / "eq.txt")
        assert main(["equiv", "--config", write(SECOND_ORDER), "--out", out]) == 0
        text = open(out).read()
        assert "[true]" in text and "[frozen]" in text and "[scripted]" in text

    def test_equiv_negative_control(self, write, tmp_path):
        cfg = write(SECOND_ORDER + "\n[init]\nx0 = 1, 0\nv0 = 1\n")
        out = str(tmp_path / "eq.txt")
        assert main(["equiv", "--config", cfg, "--estimator", "frozen", "--out", out]) == 1
        rep = kv(out)
        assert rep["passed"] == "False" and rep["v0_consistent"] == "False"

    def test_charpoly(self, write, tmp_path, capsys):
        out = str(tmp_path / "cp.txt")
        assert main(["charpoly", "--config", write(SECOND_ORDER), "--out", out]) == 0
        rep = kv(out)
        assert rep["rhs"] == "1 4 4 1" and rep["match"] == "True" and rep["stability"] == "Hurwitz"
        assert [float(c) for c in rep["lhs"].split()] == pytest.approx([1, 4, 4, 1], abs=1e-13)

    def test_kc(self, write, tmp_path):
        out = str(tmp_path / "kc.txt")
        assert main(["kc", "--config", write(SCALAR.format(k=2, t_end=1)), "--k-lo", "0.1", "--k-hi", "10", "--out", out]) == 0
        assert float(kv(out)["k_c"]) == pytest.approx(1.0, abs=1e-9)

    def test_kc_bracket_error(self, write, tmp_path):
        out = str(tmp_path / "kc.txt")
        assert main(["kc", "--config", write(SECOND_ORDER), "--out", out]) == 4
        assert kv(out)["status"] == "bracket-error"

    def test_l1norm(self, write, tmp_path):
        out = str(tmp_path / "n.txt")
        code = main(["l1norm", "--config", write(SCALAR.format(k=4, t_end=1)), "--out", out])
        rep = kv(out)
        assert float(rep["norm"]) == pytest.approx(0.6299605, abs=1e-4)
        assert code == 0 and rep["condition_satisfied"] == "True"

    def test_l1norm_fails_condition(self, write, tmp_path):
        out = str(tmp_path / "n.txt")
        assert main(["l1norm", "--config", write(SCALAR.format(k=0.2, t_end=1)), "--out", out]) == 1

    def test_sweep(self, write, tmp_path):
        out = str(tmp_path / "sw.csv")
        cfg = write(SCALAR.format(k=2, t_end=60))
        assert main(["sweep", "--config", cfg, "--k", "0.5:2:2", "--gamma", "1:10:2", "--out", out]) == 0
        assert open(out).read() == "k,pi,1,10\n0.5,U,D,D\n2,H,C,C\n"

    def test_sweep_bad_grid(self, write, tmp_path):
        cfg = write(SCALAR.format(k=2, t_end=1))
        assert main(["sweep", "--config", cfg, "--k", "0.5:2", "--gamma", "1:10:2", "--out", str(tmp_path / "o")]) == 2

    def test_fragility(self, tmp_path):
        out = str(tmp_path / "fr.txt")
        assert main(["fragility", "--epsilon", "1e-6", "--out", out]) == 0
        rep = kv(out)
        assert rep["perturbed_verdict"] == "Diverged"
        assert float(rep["perturbed_diverged_at"]) == pytest.approx(float(rep["predicted_blowup_time"]), abs=0.5)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "l1equiv", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("simulate", "equiv", "charpoly", "kc", "l1norm", "sweep", "fragility"):
        assert name in proc.stdout
