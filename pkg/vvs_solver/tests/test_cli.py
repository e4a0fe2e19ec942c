import json
from pathlib import Path

import pandas as pd
import pytest
from numpy.testing import assert_allclose

from vvs_solver import cli, picard, verification
from vvs_solver.cli import EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE, EXIT_VERIFICATION_FAILED, main
from vvs_solver.errors import DivergenceError

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def _case(tmp_path, top, **solver):
    payload = {
        "name": "small_lid",
        "grid": {"nx": 9, "ny": 9},
        "boundary": {"u0": {"sides": {"top": top}}},
        "closures": {
            "eta": {"breakpoints": [-0.1, 0.0], "values": [2.0, 1.0]},
            "b": {"breakpoints": [1.0, 2.0], "values": [1.0, 1.5]},
        },
        "solver": solver,
    }
    path = tmp_path / "small_lid.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


# ----- solve
def test_solve_zero_case(tmp_path):
    code = main(["solve", str(CONFIGS / "zero.json"), "--out-dir", str(tmp_path), "--quiet"])
    assert code == EXIT_OK
    frame = pd.read_csv(tmp_path / "zero_state.csv")
    assert len(frame) == 81
    assert_allclose(frame[["Phi", "u1", "u2", "Pi"]].to_numpy(), 0.0, atol=1e-14)
    assert_allclose(frame[["rho", "mu"]].to_numpy(), 1.0)
    report = json.loads((tmp_path / "zero_report.json").read_text())
    assert report["converged"] is True


def test_solve_rejects_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{ not json", encoding="utf-8")
    assert main(["solve", str(path), "--quiet"]) == EXIT_USAGE


def test_solve_missing_file(tmp_path):
    assert main(["solve", str(tmp_path / "absent.json"), "--quiet"]) == EXIT_USAGE


def test_solve_with_net_boundary_flux(tmp_path):
    assert main(["solve", str(_case(tmp_path, [0.0, 1.0])), "--quiet"]) == EXIT_USAGE


def test_solve_out_of_iterations(tmp_path):
    path = _case(tmp_path, [1.0, 0.0], max_iter=1)
    assert main(["solve", str(path), "--out-dir", str(tmp_path / "out"), "--quiet"]) == EXIT_NOT_CONVERGED
    # partial results are still written
    assert (tmp_path / "out" / "small_lid_state.csv").exists()


def test_solve_into_an_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("", encoding="utf-8")
    code = main(["solve", str(CONFIGS / "zero.json"), "--out-dir", str(blocker / "sub"), "--quiet"])
    assert code == EXIT_USAGE


def test_solve_with_a_diverging_iteration(tmp_path, monkeypatch):
    def blow_up(spec, state, context, omega):
        raise DivergenceError("iterate norm grew without bound")

    monkeypatch.setattr(picard, "oseen_step", blow_up)
    path = CONFIGS / "zero.json"
    assert main(["solve", str(path), "--out-dir", str(tmp_path), "--quiet"]) == EXIT_USAGE
    assert not (tmp_path / "zero_report.json").exists()


def test_solve_with_a_singular_operator(tmp_path, monkeypatch):
    def singular(matrix):
        raise RuntimeError("Factor is exactly singular")

    monkeypatch.setattr(picard.splinalg, "splu", singular)
    path = _case(tmp_path, [1.0, 0.0])
    assert main(["solve", str(path), "--out-dir", str(tmp_path / "out"), "--quiet"]) == EXIT_USAGE


# ----- symmetric
def test_symmetric_couette(tmp_path, capsys):
    assert main(["symmetric", "couette", "--out-dir", str(tmp_path), "--quiet"]) == EXIT_OK
    assert (tmp_path / "couette_am1_ap2_c10.csv").exists()
    report = json.loads((tmp_path / "couette_am1_ap2_c10_report.json").read_text())
    assert report["constants"]["C"] == -4.0
    assert report["constants"]["C2"] == 3.0
    assert "C = -4" in capsys.readouterr().out


def test_symmetric_concentric(tmp_path):
    assert main(["symmetric", "concentric", "--out-dir", str(tmp_path), "--quiet"]) == EXIT_OK
    frame = pd.read_csv(tmp_path / "concentric_gm1_gp2_c10.csv")
    assert frame.iloc[0, 1] == pytest.approx(1.0)
    assert frame.iloc[-1, 1] == pytest.approx(2.0)


def test_symmetric_radial_example(tmp_path):
    assert main(["symmetric", "radial", "--example", "--out-dir", str(tmp_path), "--quiet"]) == EXIT_OK
    report = json.loads(next(tmp_path.glob("radial_*_report.json")).read_text())
    assert report["constants"]["max_error"] <= 1e-6


# ----- mms, verify and usage errors
def test_mms_needs_two_levels(tmp_path):
    assert main(["mms", "--levels", "1", "--out-dir", str(tmp_path), "--quiet"]) == EXIT_USAGE


def test_unknown_command():
    assert main(["render"]) == EXIT_USAGE


def test_help_exits_cleanly():
    assert main(["--help"]) == EXIT_OK


def test_verify_selected_criteria(tmp_path):
    assert main(["verify", "--only", "1", "2", "--out-dir", str(tmp_path), "--quiet"]) == EXIT_OK
    summary = json.loads((tmp_path / "verification.json").read_text())
    assert [r["criterion"] for r in summary["results"]] == [1, 2]


def test_verify_reports_a_failed_criterion(monkeypatch):
    failing = [(1, "always fails", lambda: (False, "forced"))]
    monkeypatch.setattr(verification, "CRITERIA", failing)
    assert cli.main(["verify", "--quiet"]) == EXIT_VERIFICATION_FAILED
