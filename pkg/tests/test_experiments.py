import math
import os

import numpy as np
import pytest

from lpsflow import cli, experiments
from lpsflow.errors import ConfigurationError

MINIMAL = """
# minimal sweep
method = GD
degree = 2
grid = 1
levels = 1-2
"""

FAST = """
method = GD
degree = 2
grid = 1
levels = 1-2
dt = 0.01
t_end = 0.02
"""


class TestParsing:
    def test_minimal_config_gets_documented_defaults(self):
        cfg = experiments.parse_config(MINIMAL)
        assert cfg.dt == 0.01
        assert cfg.t_end == 0.5
        assert cfg.nu == (1e-6,)
        assert cfg.scheme == "crank-nicolson"
        assert cfg.levels == (1, 2)
        assert cfg.tau_p_coeff == 1.0 and cfg.tau_p_power == 2.0
        assert cfg.mu_coeff == 0.1

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigurationError, match="unknown key"):
            experiments.parse_config(MINIMAL + "\nupwinding = yes\n")

    def test_missing_required_key(self):
        with pytest.raises(ConfigurationError, match="method"):
            experiments.parse_config("degree = 2\ngrid = 1\nlevels = 1-2\n")

    def test_malformed_value_names_key(self):
        with pytest.raises(ConfigurationError):
            experiments.parse_config(MINIMAL + "\ndt = notanumber\n")

    def test_halfrate_nu_versus_mesh_width(self):
        text = "method = HALFRATE\ndegree = 2\ngrid = 1\nlevels = 2-3\nnu = 1.0\n"
        with pytest.raises(ConfigurationError, match="nu"):
            experiments.parse_config(text)
        ok = experiments.parse_config(
            "method = HALFRATE\ndegree = 2\ngrid = 1\nlevels = 2-3\nnu = 1e-8\n")
        assert ok.nu == (1e-8,)

    def test_round_trip_canonical(self):
        cfg = experiments.parse_config(MINIMAL)
        text = experiments.serialize_config(cfg)
        again = experiments.parse_config(text)
        assert again == cfg
        assert experiments.serialize_config(again) == text

    def test_comma_levels_and_nu_lists(self):
        cfg = experiments.parse_config(
            "method = GD\ndegree = 2\ngrid = 1\nlevels = 1,3\nnu = 1e-2,1e-4\n")
        assert cfg.levels == (1, 3)
        assert cfg.nu == (1e-2, 1e-4)


@pytest.fixture(scope="module")
def result(tmp_path_factory):
    out = tmp_path_factory.mktemp("csv") / "gd.csv"
    cfg = experiments.parse_config(FAST + f"out = {out}\n")
    return experiments.run_experiment(cfg), out


class TestRunExperiment:

    def test_row_counts(self, result):
        res, out = result
        assert res.status == experiments.EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0] == ",".join(experiments.CSV_COLUMNS)
        data = [l for l in lines[1:] if l.startswith("data,")]
        rate = [l for l in lines[1:] if l.startswith("rate,")]
        assert len(data) == 2 and len(rate) == 1

    def test_rate_row_recomputes_log2_ratio(self, result):
        res, _ = result
        data = [r for r in res.rows if r["row"] == "data"]
        rate = [r for r in res.rows if r["row"] == "rate"][0]
        want = math.log2(data[0]["composite"] / data[1]["composite"])
        assert rate["composite"] == pytest.approx(want, rel=1e-14)

    def test_rerun_bit_identical(self, result):
        res, _ = result
        cfg = experiments.parse_config(FAST)
        again = experiments.run_experiment(cfg, out_path=None)
        assert again.csv_text == res.csv_text

    def test_full_precision_output(self, result):
        res, out = result
        text = out.read_text()
        h = float(text.splitlines()[1].split(",")[2])
        assert h == math.sqrt(2.0) / 2.0


def test_golden_csv_regression(tmp_path):
    golden_path = os.path.join(os.path.dirname(__file__), "data", "golden_gd_grid1_level2.csv")
    cfg = experiments.parse_config(
        "method = GD\ndegree = 2\ngrid = 1\nlevels = 2\ndt = 0.01\nt_end = 0.05\n")
    res = experiments.run_experiment(cfg, out_path=None)
    assert res.status == experiments.EXIT_OK
    if not os.path.exists(golden_path):  # first run freezes the golden file
        os.makedirs(os.path.dirname(golden_path), exist_ok=True)
        with open(golden_path, "w") as fh:
            fh.write(res.csv_text)
    with open(golden_path) as fh:
        assert fh.read() == res.csv_text


def test_solver_failure_leaves_partial_csv_and_log(tmp_path):
    out = tmp_path / "fail.csv"
    cfg = experiments.parse_config(
        "method = GD\ndegree = 2\ngrid = 1\nlevels = 1-2\ndt = 0.01\nt_end = 0.02\n"
        "picard_max_iterations = 1\n" + f"out = {out}\n")
    res = experiments.run_experiment(cfg)
    assert res.status == experiments.EXIT_SOLVER_FAILURE
    assert out.exists()
    log = (str(out) + ".log")
    assert os.path.exists(log)
    content = open(log).read()
    assert "level=1" in content and "nu=1e-06" in content and "step=1" in content


class TestNuSweep:
    def test_rows_and_monotone_nu(self, tmp_path):
        out = tmp_path / "sweep.csv"
        cfg = experiments.parse_config(
            "method = GD\ndegree = 2\ngrid = 1\nlevels = 2\nnu = 1e-4,1e-2\n"
            "dt = 0.01\nt_end = 0.02\n" + f"out = {out}\n")
        res = experiments.run_nu_sweep(cfg)
        assert res.status == experiments.EXIT_OK
        nus = [r["nu"] for r in res.rows]
        assert nus == sorted(nus)
        assert len(res.rows) == 2
        for r in res.rows:
            for col in experiments.CSV_COLUMNS[4:11]:
                assert np.isfinite(r[col])

    def test_needs_single_level_and_two_nus(self):
        cfg = experiments.parse_config(
            "method = GD\ndegree = 2\ngrid = 1\nlevels = 1-2\nnu = 1e-2,1e-4\n")
        with pytest.raises(ConfigurationError):
            experiments.run_nu_sweep(cfg)
        cfg = experiments.parse_config(
            "method = GD\ndegree = 2\ngrid = 1\nlevels = 2\nnu = 1e-2\n")
        with pytest.raises(ConfigurationError):
            experiments.run_nu_sweep(cfg)


class TestCli:
    def test_flags_only_run(self, tmp_path, capsys):
        out = tmp_path / "cli.csv"
        code = cli.main(["--method", "GD", "--degree", "2", "--grid", "1",
                         "--levels", "1", "--dt", "0.01", "--tend", "0.02",
                         "--out", str(out)])
        assert code == 0
        assert out.exists()

    def test_config_file_with_override(self, tmp_path):
        cfg_file = tmp_path / "exp.cfg"
        out = tmp_path / "o.csv"
        cfg_file.write_text(FAST + "out = placeholder.csv\n")
        code = cli.main(["--config", str(cfg_file), "--levels", "1",
                         "--out", str(out)])
        assert code == 0
        text = out.read_text()
        assert len([l for l in text.splitlines() if l.startswith("data,")]) == 1

    def test_configuration_error_exit_code(self, capsys):
        assert cli.main(["--method", "NOPE", "--degree", "2", "--grid", "1",
                         "--levels", "1"]) == 1

    def test_solver_failure_exit_code(self, tmp_path):
        cfg_file = tmp_path / "bad.cfg"
        cfg_file.write_text(FAST + "picard_max_iterations = 1\n"
                            + f"out = {tmp_path/'x.csv'}\n")
        assert cli.main(["--config", str(cfg_file)]) == 2
