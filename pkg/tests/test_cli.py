import csv
import io
import json
import math

import numpy as np
import pytest

from hesoftmax.analysis import CSV_COLUMNS
from hesoftmax.cli import RunConfig, main


def run_csv(capsys, *argv):
    code = main(["run", *argv])
    out = capsys.readouterr()
    rows = list(csv.DictReader(io.StringIO(out.out)))
    return code, rows, out.err


class TestRun:
    def test_exact_mode_rows(self, capsys):
        code, rows, _ = run_csv(capsys, "--algo", "a", "--n", "16", "--M", "32",
                                "--mode", "exact", "--trials", "10", "--seed", "1")
        assert code == 0
        trials = [r for r in rows if r["seed"] != "summary"]
        assert len(trials) == 10 and rows[-1]["seed"] == "summary"
        assert all(float(r["err_abs_bits"]) >= 26 for r in trials)

    def test_batched_b_needs_no_main_bootstrap(self, capsys):
        code, rows, _ = run_csv(capsys, "--algo", "b", "--n", "256", "--M", "128",
                                "--ciphertexts", "4", "--trials", "5")
        assert code == 0
        assert rows[-1]["bootstraps_main"] == "0"

    def test_header(self, capsys):
        main(["run", "--n", "4", "--M", "8", "--trials", "1", "--N0", "16"])
        header = capsys.readouterr().out.splitlines()[0].split(",")
        assert tuple(header[: len(CSV_COLUMNS)]) == CSV_COLUMNS

    def test_non_power_of_two(self, capsys):
        code = main(["run", "--n", "3"])
        assert code != 0
        assert "n must be a power of two" in capsys.readouterr().err

    def test_bad_layout_named(self, capsys):
        code = main(["run", "--n", "16", "--N0", "8", "--ciphertexts", "3"])
        assert code != 0
        assert "m must be a power of two" in capsys.readouterr().err

    def test_naive_infeasible_range_reports_failure(self, capsys):
        code = main(["run", "--algo", "naive", "--n", "16", "--M", "64", "--trials", "2", "--N0", "64"])
        assert code != 0
        assert "InfeasibleError" in capsys.readouterr().err

    def test_summary_recomputes(self, capsys):
        _, rows, _ = run_csv(capsys, "--n", "64", "--M", "64", "--trials", "8", "--seed", "4", "--N0", "256")
        trials, summary = rows[:-1], rows[-1]
        errs = np.array([2.0 ** -float(r["err_abs_bits"]) for r in trials])
        bits = np.array([float(r["err_abs_bits"]) for r in trials])
        assert abs(float(summary["err_abs_bits"]) - bits.min()) <= 1e-12
        assert abs(float(summary["avg_abs_bits"]) + math.log2(errs.mean())) <= 1e-12
        assert abs(float(summary["std_abs_bits"]) - bits.std()) <= 1e-12

    def test_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("HESOFTMAX_SEED", "3")
        _, a, _ = run_csv(capsys, "--n", "8", "--M", "16", "--trials", "2", "--N0", "32")
        _, b, _ = run_csv(capsys, "--n", "8", "--M", "16", "--trials", "2", "--N0", "32", "--seed", "3")
        assert a == b

    def test_byte_identical_files(self, tmp_path):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for p in paths:
            assert main(["run", "--n", "16", "--M", "32", "--trials", "3", "--seed", "9",
                         "--N0", "64", "--out-path", str(p)]) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()
        assert b"\r\n" not in paths[0].read_bytes()

    def test_workers_preserve_order(self, tmp_path):
        outs = []
        for w in ("1", "2"):
            p = tmp_path / f"w{w}.csv"
            main(["run", "--n", "8", "--M", "16", "--trials", "4", "--seed", "2",
                  "--N0", "32", "--workers", w, "--out-path", str(p)])
            outs.append(p.read_bytes())
        assert outs[0] == outs[1]

    def test_json_format(self, capsys):
        main(["run", "--n", "8", "--M", "16", "--trials", "2", "--N0", "32", "--format", "json", "--mode", "exact"])
        data = json.loads(capsys.readouterr().out)
        assert isinstance(data, list) and len(data) == 3
        assert set(CSV_COLUMNS) <= set(data[0])

    def test_config_validation(self):
        with pytest.raises(ValueError, match="trials"):
            RunConfig(trials=0).validate()


class TestApprox:
    def test_weighted_invsqrt(self, capsys):
        assert main(["approx", "--func", "invsqrt", "--interval", "0.25,1", "--bits", "10", "--weighted"]) == 0
        out = capsys.readouterr()
        d = json.loads(out.out)
        assert d["verified_err"] <= 2.0**-10
        assert "degree" in out.err and "depth" in out.err

    def test_exp_degree_form(self, capsys):
        main(["approx", "--func", "exp", "--interval=-6,0", "--bits", "20"])
        d = json.loads(capsys.readouterr().out)
        deg = len(d["coeffs"]) - 1
        assert (deg + 1) & deg == 0

    def test_degenerate_interval(self, capsys):
        assert main(["approx", "--func", "exp", "--interval", "1,1", "--bits", "10"]) != 0
        assert "error" in capsys.readouterr().err


class TestBound:
    def test_report(self, capsys):
        assert main(["bound", "--n", "4", "--k", "2", "--p", "40"]) == 0
        out = capsys.readouterr().out
        assert "8.82" in out and "hypothesis holds" in out
        assert "heuristic loss" in out and "max-subtraction levels" in out

    def test_violated_marker(self, capsys):
        main(["bound", "--n", "256", "--k", "6", "--p", "29"])
        assert "hypothesis violated" in capsys.readouterr().out
