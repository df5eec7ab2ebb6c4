import csv
import json
import math
import subprocess
import sys

import pytest

from measctrl import cli, instantaneous


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestInstantaneousCommand:
    def test_rows(self, tmp_path):
        out = tmp_path / "inst.csv"
        assert cli.main(["instantaneous", "--n-max", "3", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == ["N", "Y_opt", "Y_asymptotic", "Y_bruteforce", "abs_gap"]
        assert [float(r[1]) for r in rows[1:]] == [0.5, 0.5625, 0.625]

    def test_brute_force_only_up_to_six(self, tmp_path):
        out = tmp_path / "inst.csv"
        assert cli.main(["instantaneous", "--n-max", "8", "--out", str(out)]) == 0
        rows = read_csv(out)[1:]
        assert all(r[3] for r in rows[:6]) and not any(r[3] for r in rows[6:])

    def test_asymptote_gap_at_1000(self, tmp_path):
        out = tmp_path / "inst.csv"
        assert cli.main(["instantaneous", "--n-max", "1000", "--out", str(out)]) == 0
        assert float(read_csv(out)[-1][4]) < 5e-5

    def test_zero_is_usage_error(self, tmp_path):
        assert cli.main(["instantaneous", "--n-max", "0", "--out", str(tmp_path / "x.csv")]) == 1

    def test_round_trip_digits(self, tmp_path):
        out = tmp_path / "inst.csv"
        cli.main(["instantaneous", "--n-max", "2", "--out", str(out)])
        row = read_csv(out)[2]
        assert float(row[2]) == instantaneous.asymptotic_yield_instantaneous(2)

    def test_validation_failure_exit_code(self, tmp_path, monkeypatch):
        monkeypatch.setattr(instantaneous, "optimal_yield_instantaneous", lambda N: 0.1)
        out = tmp_path / "inst.csv"
        assert cli.main(["instantaneous", "--n-max", "1", "--out", str(out)]) == 2
        assert out.exists()


class TestContinuousCommand:
    def test_rows(self, tmp_path):
        out = tmp_path / "cont.csv"
        assert cli.main(["continuous", "--gamma-prime", "0.5,2", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == ["gamma_prime", "A_m", "B_m", "Y_opt", "Y_rk4", "abs_diff"]
        assert float(rows[1][1]) == 0.0
        assert float(rows[2][5]) < 1e-6

    @pytest.mark.parametrize("value", ["", "a,b", "-1", "nan"])
    def test_bad_lists(self, tmp_path, value):
        assert cli.main(["continuous", "--gamma-prime", value, "--out", str(tmp_path / "c.csv")]) == 1


class TestEsSearchCommand:
    def test_small_run_deterministic(self, tmp_path):
        args = ["es-search", "--gamma-prime", "1,2", "--knots", "2", "--budget", "1000", "--seed", "3"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli.main(args + ["--out", str(a)]) == 0
        assert cli.main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        rows = read_csv(a)
        assert rows[0] == ["gamma_prime", "Y_analytic", "Y_es", "gap"]
        assert len(rows) == 3
        for r in rows[1:]:
            assert float(r[3]) >= -1e-6
            assert float(r[3]) == pytest.approx(float(r[1]) - float(r[2]), abs=1e-15)

    def test_coarse_gap_flagged_not_failed(self, tmp_path, caplog):
        out = tmp_path / "es.csv"
        assert cli.main(["es-search", "--gamma-prime", "8", "--knots", "2", "--budget", "1000", "--out", str(out)]) == 0
        gap = float(read_csv(out)[1][3])
        assert gap > 1e-3
        assert any("gap" in r.getMessage() for r in caplog.records)

    def test_budget_floor(self, tmp_path):
        assert cli.main(["es-search", "--budget", "999", "--out", str(tmp_path / "x.csv")]) == 1

    def test_knots_floor(self, tmp_path):
        assert cli.main(["es-search", "--knots", "1", "--out", str(tmp_path / "x.csv")]) == 1


class TestThreeLevelCommand:
    def test_report(self, tmp_path):
        out = tmp_path / "tl.json"
        assert cli.main(["three-level", "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        for key in ("x1_star", "x2_star", "delta_psi", "P_max", "closed_form_P_max"):
            assert key in rep
        assert rep["P_max"] == pytest.approx(rep["closed_form_P_max"], abs=1e-9)
        assert rep["coherent_only_max"] <= 0.5 + 1e-9
        assert rep["P2_measurement_max"] == pytest.approx(rep["closed_form_P_max"], abs=1e-9)
        assert rep["prior_numeric_optimum"] == 0.669 and rep["exceeds_prior_numeric_optimum"]
        assert rep["tolerances"]["P_max"] == 1e-9
        assert all(rep["checks"].values())


class TestConfiguration:
    def test_output_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path / "results"))
        assert cli.main(["instantaneous", "--n-max", "1"]) == 0
        assert (tmp_path / "results" / "instantaneous.csv").exists()

    def test_config_file_and_precedence(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"out": str(tmp_path / "flat.csv"), "instantaneous": {"n-max": 2}}))
        assert cli.main(["instantaneous", "--config", str(cfg)]) == 0
        assert len(read_csv(tmp_path / "flat.csv")) == 3
        assert cli.main(["instantaneous", "--config", str(cfg), "--n-max", "4"]) == 0
        assert len(read_csv(tmp_path / "flat.csv")) == 5

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("[1, 2]")
        assert cli.main(["instantaneous", "--config", str(cfg)]) == 1
        assert cli.main(["instantaneous", "--config", str(tmp_path / "missing.json")]) == 1

    def test_experiment_spec_requires_keys(self):
        with pytest.raises(cli.UsageError):
            cli.ExperimentSpec("es-search", {"gamma_prime": [1.0]})
        with pytest.raises(cli.UsageError):
            cli.ExperimentSpec("plot")

    def test_argparse_errors_are_usage_errors(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["instantaneous", "--n-max", "three"])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            cli.main([])
        assert exc.value.code == 1

    def test_help_lists_flags(self):
        result = subprocess.run([sys.executable, "-m", "measctrl.cli", "es-search", "--help"],
                                capture_output=True, text=True, check=True)
        for flag in ("--gamma-prime", "--knots", "--budget", "--seed", "--out", "--config"):
            assert flag in result.stdout
