import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from vvs_solver.schemas import CaseConfig, CriterionResult, VerificationSummary, load_case

CONFIGS = Path(__file__).resolve().parents[2] / "configs"

CLOSURES = {
    "eta": {"breakpoints": [0.0], "values": [1.0]},
    "b": {"breakpoints": [0.0], "values": [1.0]},
}


def _write(tmp_path, payload, name="case.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_load_zero_case():
    spec = load_case(CONFIGS / "zero.json")
    assert spec.grid.shape == (9, 9)
    assert spec.name == "zero"
    assert_allclose(spec.u0, 0.0)
    assert_allclose(spec.force.values, 0.0)


def test_load_couette_strip_case():
    spec = load_case(CONFIGS / "couette_strip.json")
    assert spec.grid.periodic_x1
    assert spec.u0.shape == (128, 2)
    assert spec.strip_flux == 5.0
    assert spec.max_iter == 80
    assert_allclose(spec.u0[:64, 0], 1.0)
    assert_allclose(spec.u0[64:, 0], 2.0)


def test_side_velocities_give_the_corners_to_bottom_and_top(tmp_path):
    payload = {
        "grid": {"nx": 5, "ny": 5},
        "boundary": {"u0": {"sides": {"left": [0.0, 3.0], "top": [1.0, 0.0]}}},
        "closures": CLOSURES,
    }
    spec = load_case(_write(tmp_path, payload))
    i, j = spec.grid.boundary_indices()
    corner = (i == 0) & (j == 4)
    assert_allclose(spec.u0[corner], [[1.0, 0.0]])
    left_inner = (i == 0) & (j > 0) & (j < 4)
    assert_allclose(spec.u0[left_inner, 1], 3.0)
    assert spec.name == "case"


def test_step_closure_defaults_to_two_spacings():
    config = CaseConfig.parse_obj(
        {
            "grid": {"nx": 17, "ny": 17},
            "closures": {"eta": {"step": {"threshold": 0.0, "low": 1.0, "high": 2.0}}, "b": CLOSURES["b"]},
        }
    )
    spec = config.to_problem(Path("."))
    assert spec.eta.evaluate(-1.0) == pytest.approx(1.0)
    assert spec.eta.evaluate(1.0) == pytest.approx(2.0)


def test_closure_with_table_and_step_is_rejected():
    with pytest.raises(ValidationError):
        CaseConfig.parse_obj(
            {
                "grid": {"nx": 9, "ny": 9},
                "closures": {
                    "eta": {"breakpoints": [0.0], "values": [1.0], "step": {"threshold": 0, "low": 1, "high": 2}},
                    "b": CLOSURES["b"],
                },
            }
        )


def test_unknown_keys_are_rejected():
    with pytest.raises(ValidationError):
        CaseConfig.parse_obj({"grid": {"nx": 9, "ny": 9}, "closures": CLOSURES, "viscosity": 1.0})


def test_too_small_grid_and_reversed_domain_are_rejected():
    with pytest.raises(ValidationError):
        CaseConfig.parse_obj({"grid": {"nx": 3, "ny": 9}, "closures": CLOSURES})
    with pytest.raises(ValidationError):
        CaseConfig.parse_obj(
            {"grid": {"nx": 9, "ny": 9}, "domain": {"x1_min": 1.0, "x1_max": 0.0}, "closures": CLOSURES}
        )


def test_two_velocity_sources_are_rejected():
    with pytest.raises(ValidationError):
        CaseConfig.parse_obj(
            {
                "grid": {"nx": 5, "ny": 5},
                "boundary": {"u0": {"sides": {}, "csv": "u0.csv"}},
                "closures": CLOSURES,
            }
        )


def test_node_list_of_the_wrong_length(tmp_path):
    payload = {
        "grid": {"nx": 5, "ny": 5},
        "boundary": {"u0": {"nodes": [[0.0, 0.0]] * 3}},
        "closures": CLOSURES,
    }
    with pytest.raises(ValueError, match="16"):
        load_case(_write(tmp_path, payload))


def test_velocity_and_force_from_csv(tmp_path):
    n = 5
    count = 4 * (n - 1)
    pd.DataFrame({"u1": np.arange(count) * 0.0, "u2": np.zeros(count)}).to_csv(tmp_path / "u0.csv", index=False)
    x = np.linspace(0.0, 1.0, n)
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    force = pd.DataFrame({"x1": x1.ravel(), "x2": x2.ravel(), "v1": x2.ravel(), "v2": -x1.ravel()})
    # row order must not matter
    force.iloc[::-1].to_csv(tmp_path / "f.csv", index=False)
    payload = {
        "grid": {"nx": n, "ny": n},
        "boundary": {"u0": {"csv": "u0.csv"}},
        "force": {"csv": "f.csv"},
        "closures": CLOSURES,
    }
    spec = load_case(_write(tmp_path, payload))
    assert spec.u0.shape == (count, 2)
    assert_allclose(spec.force.v1, x2)
    assert_allclose(spec.force.v2, -x1)


def test_force_table_with_missing_rows(tmp_path):
    pd.DataFrame({"x1": [0.0], "x2": [0.0], "v1": [1.0], "v2": [0.0]}).to_csv(tmp_path / "f.csv", index=False)
    payload = {"grid": {"nx": 5, "ny": 5}, "force": {"csv": "f.csv"}, "closures": CLOSURES}
    with pytest.raises(ValueError, match="rows"):
        load_case(_write(tmp_path, payload))


def test_verification_summary_sorts_and_aggregates():
    summary = VerificationSummary(
        results=[
            CriterionResult(criterion=3, name="c", passed=True),
            CriterionResult(criterion=1, name="a", passed=False),
        ]
    )
    assert [r.criterion for r in summary.results] == [1, 3]
    assert not summary.passed
