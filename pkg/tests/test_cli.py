import json
import subprocess
import sys

import numpy as np
import pytest
from scipy import integrate

from fracpois.cli import RateSpecError, parse_rate_spec, run
from fracpois.errors import DomainError
from fracpois.rates import RateFunction


class TestRateSpec:
    def test_examples(self):
        assert parse_rate_spec("linear:lambda=2") == RateFunction.linear(2.0)
        w = parse_rate_spec("weibull:b=1,c=0.7")
        assert w == RateFunction.weibull(1.0, 0.7) and w.declared_rv_index == 0.7
        m = parse_rate_spec("makeham:c=1,b=1,mu=0.5")
        assert m == RateFunction.makeham(1.0, 1.0, 0.5) and m.declared_rv_index is None

    def test_round_trip(self):
        for rf in (RateFunction.linear(0.3), RateFunction.weibull(2.0, 1.5), RateFunction.makeham(1, 2, 3)):
            assert parse_rate_spec(rf.spec()) == rf

    @pytest.mark.parametrize("bad", ["", "linear", "quad:a=1", "linear:lambda=x", "weibull:b=1", "linear:lambda=1,q=2"])
    def test_errors_carry_position(self, bad):
        with pytest.raises(RateSpecError) as info:
            parse_rate_spec(bad)
        assert info.value.pos >= 0

    def test_invalid_values(self):
        with pytest.raises((RateSpecError, DomainError)):
            parse_rate_spec("weibull:b=1,c=0")


class TestEval:
    def test_ml(self, capsys):
        assert run(["eval", "ml", "--alpha", "0.5", "--x", "-1"]) == 0
        assert capsys.readouterr().out.startswith("0.42758357615")

    def test_routes_agree(self, capsys):
        run(["eval", "h", "--alpha", "0.6", "--t", "1", "--x", "1"])
        series = float(capsys.readouterr().out)
        run(["eval", "h", "--alpha", "0.6", "--t", "1", "--x", "1", "--route", "laplace"])
        assert float(capsys.readouterr().out) == pytest.approx(series, rel=1e-3)

    def test_g_and_survival(self, capsys):
        assert run(["eval", "g", "--alpha", "0.5", "--z", "4"]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(0.0331254415, abs=1e-9)
        assert run(["eval", "ml-survival", "--alpha", "0.5", "--t", "1"]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(0.42758358, abs=1e-8)


class TestExitCodes:
    def test_usage(self, capsys):
        assert run([]) == 2
        assert run(["eval", "ml", "--alpha", "0.5"]) == 2
        assert run(["eval", "ml", "--alpha", "zero", "--x", "1"]) == 2
        assert run(["sample", "fnpp", "--alpha", "0.5", "--rate", "linear:lambda=1", "--t", "1"]) == 2
        assert run(["eval", "ml", "--alpha", "1.5", "--x", "1"]) == 2
        err = capsys.readouterr().err
        assert "seed" in err

    def test_rate_error_message(self, capsys):
        assert run(["pmf", "--alpha", "0.5", "--rate", "linear:lambda=", "--t", "1", "--k", "0"]) == 2
        assert "position" in capsys.readouterr().err

    def test_numeric(self, capsys):
        argv = ["sample", "gergely", "--alpha", "0.9", "--rate", "linear:lambda=10", "--t", "10", "--seed", "1"]
        assert run(argv) == 3
        assert "numerical" in capsys.readouterr().err
        assert run(["sample", "nhpp-path", "--rate", "makeham:c=1,b=1,mu=0", "--horizon", "800", "--seed", "1"]) == 3

    def test_verdict_fail(self, tmp_path):
        argv = ["experiment", "clt", "--alpha", "0.9", "--rate", "linear:lambda=1", "--times", "10",
                "--n", "2000", "--seed", "1", "--threshold", "final_ks=0.0001", "--out", str(tmp_path / "r.json")]
        assert run(argv) == 1
        assert json.loads((tmp_path / "r.json").read_text())["verdict"]["pass"] is False

    def test_unknown_threshold_key(self):
        argv = ["experiment", "clt", "--alpha", "0.9", "--rate", "linear:lambda=1", "--times", "10",
                "--n", "100", "--seed", "1", "--threshold", "final_tv=0.1"]
        assert run(argv) == 2


class TestOutputs:
    def test_density_csv(self, tmp_path):
        out = tmp_path / "h.csv"
        argv = ["density", "inv-subordinator", "--alpha", "0.6", "--t", "10", "--xmax", "auto",
                "--n-points", "512", "--out", str(out)]
        assert run(argv) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x,h" and len(lines) == 513
        data = np.loadtxt(out, delimiter=",", skiprows=1)
        assert integrate.trapezoid(data[:, 1], data[:, 0]) == pytest.approx(1.0, abs=0.01)

    def test_explicit_xmax(self, tmp_path):
        out = tmp_path / "h.csv"
        assert run(["density", "inv-subordinator", "--alpha", "0.5", "--t", "1", "--xmax", "3",
                    "--n-points", "64", "--out", str(out)]) == 0
        assert float(out.read_text().splitlines()[-1].split(",")[0]) == 3.0

    def test_sample_reproducible(self, tmp_path):
        argv = ["sample", "fnpp", "--alpha", "0.7", "--rate", "weibull:b=1,c=0.7", "--t", "5", "--n", "500", "--seed", "9"]
        assert run(argv + ["--out", str(tmp_path / "a.csv")]) == 0
        assert run(argv + ["--out", str(tmp_path / "b.csv")]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        lines = (tmp_path / "a.csv").read_text().splitlines()
        assert lines[0] == "value" and len(lines) == 501 and all(v.isdigit() for v in lines[1:])

    def test_path_output(self, tmp_path):
        out = tmp_path / "p.csv"
        assert run(["sample", "fnpp-path", "--alpha", "0.8", "--rate", "linear:lambda=2", "--horizon", "5",
                    "--grid-step", "0.01", "--seed", "3", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "event_time"
        ev = np.array([float(v) for v in lines[1:]])
        assert np.all(np.diff(ev) > 0) and np.all(ev <= 5)

    def test_pmf_table(self, tmp_path):
        out = tmp_path / "pmf.csv"
        assert run(["pmf", "--alpha", "0.9", "--rate", "linear:lambda=1", "--t", "1", "--k-max", "60",
                    "--out", str(out)]) == 0
        data = np.loadtxt(out, delimiter=",", skiprows=1)
        assert data.shape == (61, 2) and data[:, 1].sum() == pytest.approx(1.0, abs=1e-5)

    def test_workers_byte_identical(self, tmp_path):
        base = ["experiment", "brownian", "--alpha", "0.9", "--lambdas", "10,100", "--t", "1",
                "--n", "3000", "--seed", "5"]
        run(base + ["--workers", "1", "--out", str(tmp_path / "w1.json")])
        run(base + ["--workers", "3", "--out", str(tmp_path / "w3.json")])
        assert (tmp_path / "w1.json").read_bytes() == (tmp_path / "w3.json").read_bytes()

    def test_csv_format(self, tmp_path):
        out = tmp_path / "r.csv"
        run(["experiment", "alpha-to-one", "--alphas", "0.7,0.9,0.99", "--rate", "linear:lambda=1", "--t", "1",
             "--format", "csv", "--out", str(out)])
        text = out.read_text()
        assert "# per_time" in text and "# histogram" in text


class TestConfig:
    def test_precedence(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("# defaults\nalpha = 0.5\nx = -1\n")
        assert run(["eval", "ml", "--config", str(cfg)]) == 0
        assert capsys.readouterr().out.startswith("0.42758357615")
        assert run(["eval", "ml", "--config", str(cfg), "--x", "0"]) == 0
        assert float(capsys.readouterr().out) == 1.0

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("bogus = 1\n")
        assert run(["eval", "ml", "--config", str(cfg), "--alpha", "0.5", "--x", "1"]) == 2

    def test_missing_file(self, tmp_path):
        assert run(["eval", "ml", "--config", str(tmp_path / "nope"), "--alpha", "0.5", "--x", "1"]) == 2


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "fracpois.cli", "eval", "ml", "--alpha", "1", "--x", "0"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and float(proc.stdout) == 1.0
