"""End-to-end command-line behavior: formats, determinism, exit codes."""

import csv
import io
import json
import os

import numpy as np
import pytest

from qsf import cli
from qsf.specfile import SpecError, load_spec

SPECS = os.path.join(os.path.dirname(__file__), os.pardir, "specs")
QUBIT_SPEC = os.path.join(SPECS, "qubit-zx.json")
HADAMARD_SPEC = os.path.join(SPECS, "hadamard-robust.json")
CHAIN_SPEC = os.path.join(SPECS, "xx-chain-4q.json")
IDENTITY_SPEC = os.path.join(SPECS, "identity-trivial.json")


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSpecLoading:
    def test_minimal_spec_loads(self):
        spec = load_spec(QUBIT_SPEC)
        assert spec.n_qubits == 1
        assert spec.drift == "z" and spec.controls == ("x",)

    def test_worked_example_spec(self):
        spec = load_spec(CHAIN_SPEC)
        assert spec.n_qubits == 4
        assert len(spec.controls) == 4
        assert set(spec.observables) == {"C1", "C2"}
        sys_ = spec.system()
        assert sys_.dim == 16

    def test_wrong_letter_count_rejected_with_path(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({
            "version": 1, "n_qubits": 2, "drift": "z", "controls": ["x1"],
        }))
        with pytest.raises(SpecError) as exc:
            load_spec(str(bad))
        assert "drift" in str(exc.value)

    def test_unknown_field_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({
            "version": 1, "n_qubits": 1, "drift": "z", "controls": ["x"],
            "extra_knob": 3,
        }))
        with pytest.raises(SpecError) as exc:
            load_spec(str(bad))
        assert "extra_knob" in str(exc.value)

    def test_version_required(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"n_qubits": 1, "drift": "z", "controls": ["x"]}))
        with pytest.raises(SpecError):
            load_spec(str(bad))


class TestAnalyze:
    def test_qubit_report(self, capsys):
        code, out, _ = run_cli(capsys, "analyze", QUBIT_SPEC, "--no-timestamp")
        assert code == 0
        doc = json.loads(out)
        assert doc["closure_dim"] == 3
        assert doc["controllable"] is True
        assert doc["symmetry_dim"] == 2
        assert doc["observables"]["Z"]["observable"] is True

    def test_deterministic_output(self, capsys):
        _, out1, _ = run_cli(capsys, "analyze", QUBIT_SPEC, "--no-timestamp")
        _, out2, _ = run_cli(capsys, "analyze", QUBIT_SPEC, "--no-timestamp")
        assert out1 == out2

    def test_timestamp_toggle(self, capsys):
        _, out, _ = run_cli(capsys, "analyze", QUBIT_SPEC)
        assert "timestamp" in json.loads(out)
        _, out, _ = run_cli(capsys, "analyze", QUBIT_SPEC, "--no-timestamp")
        assert "timestamp" not in json.loads(out)

    def test_missing_file_exits_one(self, capsys):
        code, _, err = run_cli(capsys, "analyze", "/nonexistent.json")
        assert code == 1
        assert "error" in err


class TestSynthesize:
    def test_end_to_end(self, capsys, tmp_path):
        out_dir = str(tmp_path / "synth")
        code, out, _ = run_cli(
            capsys, "synthesize", HADAMARD_SPEC, "--out", out_dir,
            "--seed", "0", "--no-timestamp", "--max-iters-stage2", "60",
        )
        assert code == 0
        assert out.startswith("F_nom=")
        report = json.loads((tmp_path / "synth" / "report.json").read_text())
        assert report["feasible"] is True
        assert report["F_nom"] >= 0.999
        with open(tmp_path / "synth" / "schedule.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["segment", "channel", "amplitude"]
        assert len(rows) == 1 + 4 * 2  # header + segments x channels

    def test_byte_identical_given_seed(self, capsys, tmp_path):
        outs = []
        for name in ("a", "b"):
            out_dir = str(tmp_path / name)
            code, _, _ = run_cli(
                capsys, "synthesize", HADAMARD_SPEC, "--out", out_dir,
                "--seed", "3", "--no-timestamp", "--max-iters-stage2", "40",
            )
            assert code == 0
            outs.append(
                (
                    (tmp_path / name / "schedule.csv").read_bytes(),
                    (tmp_path / name / "report.json").read_bytes(),
                )
            )
        assert outs[0] == outs[1]

    def test_infeasible_exit_three_report_written(self, capsys, tmp_path):
        out_dir = str(tmp_path / "fail")
        code, out, _ = run_cli(
            capsys, "synthesize", HADAMARD_SPEC, "--out", out_dir,
            "--max-iters", "1", "--no-timestamp",
        )
        assert code == 3
        report = json.loads((tmp_path / "fail" / "report.json").read_text())
        assert report["feasible"] is False

    def test_plot_files_created(self, capsys, tmp_path):
        out_dir = str(tmp_path / "plot")
        code, _, _ = run_cli(
            capsys, "synthesize", HADAMARD_SPEC, "--out", out_dir, "--plot",
            "--no-timestamp", "--max-iters-stage2", "20",
        )
        assert code == 0
        assert (tmp_path / "plot" / "schedule.png").stat().st_size > 0

    def test_identity_target_degenerate(self, capsys, tmp_path):
        # no controls: the nominal gate is already exact and the measure
        # stays at delta * |E|_2 = 0.1
        out_dir = str(tmp_path / "ident")
        code, out, _ = run_cli(
            capsys, "synthesize", IDENTITY_SPEC, "--out", out_dir, "--no-timestamp",
        )
        assert code == 0
        report = json.loads((tmp_path / "ident" / "report.json").read_text())
        assert report["F_nom"] == 1.0
        assert report["J_rbst"] == pytest.approx(0.1)
        with open(tmp_path / "ident" / "schedule.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows == [["segment", "channel", "amplitude"]]

    def test_qsf_threads_env(self, capsys, monkeypatch):
        monkeypatch.setenv("QSF_THREADS", "1")
        code, out, _ = run_cli(capsys, "analyze", QUBIT_SPEC, "--no-timestamp")
        assert code == 0
        assert json.loads(out)["closure_dim"] == 3


class TestBound:
    def test_csv_shape_and_monotonicity(self, capsys):
        code, out, _ = run_cli(
            capsys, "bound", "--T", "1", "--delta-range", "0:0.1:1.8",
            "--jrbst", "0,0.025,0.05",
        )
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 3 * 19
        by_delta = {}
        for r in rows:
            by_delta.setdefault(r["T_delta"], []).append(
                (float(r["J_rbst"]), float(r["F_lb"]))
            )
        for pts in by_delta.values():
            pts.sort()
            assert pts[0][1] > pts[1][1] > pts[2][1]

    def test_zero_point_empty_error_cell(self, capsys):
        _, out, _ = run_cli(capsys, "bound", "--T", "1", "--delta-range", "0:1:0",
                            "--jrbst", "0")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert rows[0]["F_lb"] == "1"
        assert rows[0]["log10_fidelity_error"] == ""

    def test_infeasible_rows(self, capsys):
        _, out, _ = run_cli(capsys, "bound", "--T", "1", "--delta-range", "1.9:0.1:2.0",
                            "--jrbst", "0")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert all(r["feasible"] == "false" for r in rows)
        assert all(r["F_lb"] == "0" for r in rows)

    def test_malformed_range_exit_one(self, capsys):
        code, _, err = run_cli(capsys, "bound", "--T", "1", "--delta-range", "oops",
                               "--jrbst", "0")
        assert code == 1 and "error" in err

    def test_plot_file(self, capsys, tmp_path):
        png = str(tmp_path / "curves.png")
        code, _, _ = run_cli(capsys, "bound", "--T", "1", "--delta-range", "0:0.1:1.5",
                             "--jrbst", "0,0.05", "--plot", png)
        assert code == 0 and os.path.getsize(png) > 0


class TestSimulate:
    def test_bell_histogram(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "-", "--circuit", "bell",
            "--shots", "100000", "--seed", "7", "--no-timestamp",
        )
        assert code == 0
        doc = json.loads(out)
        counts = doc["counts"]
        assert counts["01"] == 0 and counts["10"] == 0
        sigma = 3 * np.sqrt(0.25 * 100000)
        assert abs(counts["00"] - 50000) < sigma
        assert abs(counts["11"] - 50000) < sigma

    def test_bell_deterministic(self, capsys):
        args = ("simulate", "-", "--circuit", "bell", "--shots", "1000",
                "--seed", "5", "--no-timestamp")
        _, out1, _ = run_cli(capsys, *args)
        _, out2, _ = run_cli(capsys, *args)
        assert out1 == out2

    def test_qft_uniform_amplitudes(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", "-", "--circuit", "qft",
                               "--no-timestamp")
        doc = json.loads(out)
        amps = np.array([complex(re, im) for re, im in doc["amplitudes"]])
        assert len(amps) == 8
        assert np.allclose(amps, 1 / np.sqrt(8), atol=1e-9)

    def test_trotter_reports_error(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", "-", "--circuit", "trotter",
                               "--steps", "16", "--no-timestamp")
        doc = json.loads(out)
        assert 0 < doc["error_vs_exact"] < 0.1

    def test_vqa_converges(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", "-", "--circuit", "vqa",
                               "--no-timestamp")
        doc = json.loads(out)
        assert abs(doc["f_star"] - (-1.0)) < 1e-3

    def test_unknown_circuit_exit_one(self, capsys):
        code, _, _ = run_cli(capsys, "simulate", "-", "--circuit", "nope")
        assert code == 1

    def test_spec_driven_qft(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", QUBIT_SPEC, "--circuit", "qft",
                               "--no-timestamp")
        doc = json.loads(out)
        assert doc["n_qubits"] == 1


class TestExitCodes:
    def test_usage_error_is_one(self, capsys):
        assert run_cli(capsys, "frobnicate")[0] == 1
        assert run_cli(capsys)[0] == 1

    def test_numerical_nonconvergence_is_two(self, capsys):
        code, _, err = run_cli(
            capsys, "analyze", CHAIN_SPEC, "--max-solver-iters", "1",
            "--no-timestamp",
        )
        assert code == 2
        assert "residuals" in err

    def test_significant_digits(self, capsys):
        _, out, _ = run_cli(capsys, "simulate", "-", "--circuit", "qft",
                            "--no-timestamp")
        assert "0.353553390593" in out  # 1/sqrt(8) at 12 significant digits
