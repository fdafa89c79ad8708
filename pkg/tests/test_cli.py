"""Command-line interface: exit codes, flags, report files."""

import json

import numpy as np
import pytest

from smalleig.cli import main
from smalleig.densecore import frank_matrix


def run_cli(argv):
    try:
        return main(argv)
    except SystemExit as exc:  # argparse errors exit directly
        return exc.code


class TestExitCodes:
    def test_successful_solve_returns_zero(self, capsys):
        assert run_cli(["solve", "--n", "12"]) == 0
        out = capsys.readouterr().out
        assert "largest eigenvalues" in out

    def test_verify_passes_on_frank(self):
        assert run_cli(["verify", "--n", "20", "--px", "2", "--py", "2"]) == 0

    def test_verify_fails_with_injected_error(self, capsys):
        code = run_cli(["verify", "--n", "15", "--inject-eigenvalue-error", "0.5"])
        assert code == 1
        assert "FAIL" in capsys.readouterr().out

    @pytest.mark.parametrize(
        "argv",
        [
            ["solve"],  # missing --n
            ["solve", "--n", "-2"],
            ["solve", "--n", "8", "--hit-gather", "bogus"],
            ["solve", "--n", "8", "--mblk", "0"],
            ["solve", "--n", "8", "--ml", "0"],
            ["bogus-command"],
            ["solve", "--matrix", "file"],  # missing --input
        ],
    )
    def test_usage_errors_return_two(self, argv, capsys):
        assert run_cli(argv) == 2


class TestMatrixSources:
    def test_file_input(self, tmp_path, capsys):
        a = frank_matrix(6)
        p = tmp_path / "a.txt"
        p.write_text("6\n" + "\n".join(" ".join(repr(float(v)) for v in row) for row in a) + "\n")
        assert run_cli(["verify", "--matrix", "file", "--input", str(p)]) == 0

    def test_asymmetric_file_rejected(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("2\n1.0 2.0\n3.0 4.0\n")
        with pytest.raises(ValueError, match="not symmetric"):
            run_cli(["solve", "--matrix", "file", "--input", str(p)])

    def test_random_matrix_seeded(self, capsys):
        assert run_cli(["solve", "--n", "10", "--matrix", "random", "--seed", "3", "--verify"]) == 0


class TestReportFile:
    def test_report_written_and_tallies(self, tmp_path, capsys):
        path = tmp_path / "report.json"
        code = run_cli(
            ["solve", "--n", "16", "--px", "2", "--py", "2", "--report", str(path)]
        )
        assert code == 0
        doc = json.loads(path.read_text())
        assert doc["schema_version"] == 1
        assert doc["config"] == {
            "n": 16,
            "p_x": 2,
            "p_y": 2,
            "trd_pivot_send": "nonblocking",
            "trd_presend_frac": 0.25,
            "trd_reduce": "allreduce",
            "hit_gather": "block-bcast",
            "hit_mblk": 128,
            "ml": 2,
            "el": 75,
            "tol": None,
        }
        assert doc["counters"]["total"]["msgs"] > 0
        assert "accuracy" in doc


class TestOtherCommands:
    def test_bench_lists_all_gathers(self, capsys):
        assert run_cli(["bench", "--n", "14", "--px", "2", "--py", "2"]) == 0
        out = capsys.readouterr().out
        for word in ("bcast", "isend", "block-bcast"):
            assert word in out

    def test_tune_reports_17_back_transform_evaluations(self, capsys):
        assert run_cli(["tune", "--n", "30", "--px", "2", "--py", "1"]) == 0
        out = capsys.readouterr().out
        assert "back-transform stage 17" in out
        assert "best:" in out

    def test_solve_variant_flags_accepted(self, capsys):
        code = run_cli(
            [
                "solve", "--n", "13", "--px", "2", "--py", "2",
                "--trd-reduce", "tree", "--trd-pivot", "blocking",
                "--hit-gather", "isend", "--mblk", "2",
                "--ml", "1", "--el", "4", "--tol", "1e-12", "--verify",
            ]
        )
        assert code == 0
