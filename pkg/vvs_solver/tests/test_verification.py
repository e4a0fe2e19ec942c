import pytest

from vvs_solver import verification
from vvs_solver.verification import (
    check_apriori_bound,
    check_concentric_oracle,
    check_couette_oracle,
    check_couette_strip,
    check_manufactured,
    check_norm_equivalence,
    check_radial_oracle,
    check_skew_symmetry,
    check_spd_and_determinism,
    lid_cavity_case,
    run_criterion,
    run_verification,
)


@pytest.mark.parametrize(
    "check",
    [
        check_couette_oracle,
        check_concentric_oracle,
        check_radial_oracle,
        check_norm_equivalence,
        check_skew_symmetry,
    ],
)
def test_fast_criteria_pass(check):
    passed, detail = check()
    assert passed, detail


def test_spd_and_determinism(tmp_path):
    passed, detail = check_spd_and_determinism(tmp_path)
    assert passed, detail


def test_apriori_bound_criterion():
    passed, detail = check_apriori_bound()
    assert passed, detail
    assert detail.count("f x") == 3
    assert detail.startswith("f x0.25:")


@pytest.mark.slow
def test_two_dimensional_couette():
    passed, detail = check_couette_strip()
    assert passed, detail


@pytest.mark.slow
def test_manufactured_convergence_criterion():
    passed, detail = check_manufactured()
    assert passed, detail


def test_lid_cavity_case_drives_only_the_top_wall():
    spec = lid_cavity_case(9)
    i, j = spec.grid.boundary_indices()
    assert spec.u0[j == 8, 0].tolist() == [1.0] * 9
    assert spec.u0[j < 8].sum() == 0.0


def test_crashing_check_is_a_failed_criterion():
    def broken():
        raise ZeroDivisionError("boom")

    result = run_criterion(7, "broken", broken)
    assert not result.passed
    assert result.detail.startswith("ZeroDivisionError")
    assert result.wall_ms >= 0.0


def test_run_verification_selects_by_number(monkeypatch):
    monkeypatch.setattr(
        verification,
        "CRITERIA",
        [(2, "second", lambda: (True, "ok")), (1, "first", lambda: (True, "ok")), (3, "third", lambda: (False, "no"))],
    )
    summary = run_verification([1, 2])
    assert [r.criterion for r in summary.results] == [1, 2]
    assert summary.passed
    assert not run_verification().passed
