import json

import pytest

from lmec.bench import read_records
from lmec.cli import main


class TestCLI:
    def test_run_and_profile(self, tmp_path, capsys):
        out = tmp_path / "results.csv"
        traces = tmp_path / "traces"
        code = main(["run", "--suite", "hs6,hs77", "--solvers", "lm,gn", "--out", str(out),
                     "--trace-dir", str(traces)])
        assert code == 0
        records = read_records(out)
        assert [(r.problem, r.solver) for r in records] == [
            ("hs6", "lm"), ("hs6", "gn"), ("hs77", "lm"), ("hs77", "gn")]
        assert len(list(traces.glob("*.jsonl"))) == 4

        prof = tmp_path / "profile.csv"
        plot = tmp_path / "profile.dat"
        assert main(["profile", "--in", str(out), "--out", str(prof), "--gnuplot", str(plot)]) == 0
        assert prof.read_text().startswith("solver,tau,log2_tau,rho")
        assert plot.read_text().startswith("# log2_tau lm gn")
        assert "rho(1)" in capsys.readouterr().out

    def test_solve(self, tmp_path, capsys):
        trace = tmp_path / "t.jsonl"
        assert main(["solve", "--problem", "hs6", "--solver", "lm", "--trace", str(trace)]) == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["status"] == "CONVERGED" and summary["problem"] == "hs6"
        assert len(trace.read_text().splitlines()) == summary["iters"] + 1

    @pytest.mark.parametrize("argv", [
        ["run", "--suite", "hs6", "--solvers", "lm,trust"],
        ["run", "--suite", "hs999"],
        ["solve", "--problem", "nope"],
        ["solve", "--problem", "hs6", "--solver", "sqp"],
        ["solve", "--problem", "hs6", "--tol", "-1"],
    ])
    def test_configuration_errors(self, argv, tmp_path, capsys):
        assert main(argv + (["--out", str(tmp_path / "r.csv")] if argv[0] == "run" else [])) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_missing_input(self, tmp_path):
        assert main(["profile", "--in", str(tmp_path / "absent.csv")]) == 2

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["frobnicate"])
        assert info.value.code == 2
