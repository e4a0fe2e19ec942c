import numpy as np
import pytest
from numpy.testing import assert_allclose

from vvs_solver.fields import ClosureTable, Grid, ScalarField, VectorField, closure_eval
from vvs_solver.manufactured import DENSITY_LAW, VISCOSITY_LAW, manufactured_case
from vvs_solver.operators import gradient
from vvs_solver.reconstruct import (
    convective_flux_divergence,
    momentum_residual,
    pressure_recover,
    recover_state,
    run_case,
    state_frame,
    write_state_csv,
)
from vvs_solver.symmetric import (
    PiecewiseProfile,
    classical_couette_profile,
    concentric_constants,
    concentric_profile,
    concentric_viscosity,
    couette_constants,
    couette_profile,
    couette_viscosity,
    sector_fields,
)


def test_recover_state_of_a_shear_stream(unit_grid):
    Phi = ScalarField.from_function(unit_grid, lambda x1, x2: x2)
    u, rho, mu = recover_state(Phi, ClosureTable.constant(1.0), ClosureTable.constant(2.0))
    assert_allclose(u.v1, 1.0, atol=1e-12)
    assert_allclose(u.v2, 0.0, atol=1e-12)
    assert_allclose(rho.values, 1.0)
    assert_allclose(mu.values, 2.0)


def test_rest_state_has_zero_pressure(unit_grid):
    one = ScalarField.constant(unit_grid, 1.0)
    zero = VectorField.zeros(unit_grid)
    Pi, compat = pressure_recover(zero, one, one, zero)
    assert_allclose(Pi.values, 0.0, atol=1e-14)
    assert compat == pytest.approx(0.0, abs=1e-14)
    assert momentum_residual(zero, one, one, Pi, zero) == (0.0, 0.0)


def test_uniform_force_is_balanced_by_a_linear_pressure(unit_grid):
    one = ScalarField.constant(unit_grid, 1.0)
    zero = VectorField.zeros(unit_grid)
    Pi, compat = pressure_recover(zero, one, one, VectorField.uniform(unit_grid, 0.0, -9.81))
    x1, x2 = unit_grid.coordinates()
    assert_allclose(Pi.values, -9.81 * (x2 - 0.5), atol=1e-10)
    assert compat == pytest.approx(0.0, abs=1e-10)
    assert np.mean(Pi.values[unit_grid.interior_mask(1)]) == pytest.approx(0.0, abs=1e-12)


def _strip_state(profile, mu_profile, ny=65):
    grid = Grid(9, ny, 0.0, 1.0, -1.0, 1.0, periodic_x1=True)
    x1, x2 = grid.coordinates()
    u = VectorField.from_components(grid, np.asarray(profile.value(x2)), 0.0)
    rho = ScalarField.constant(grid, 1.0)
    mu = ScalarField(grid, np.asarray(mu_profile.value(x2)) * np.ones(grid.shape))
    return grid, u, rho, mu


def test_classical_couette_pressure_is_linear_in_x1():
    C = -4.0
    profile = classical_couette_profile(1.0, 2.0, C)
    grid, u, rho, mu = _strip_state(profile, PiecewiseProfile.constant("x2", 1.0, -1.0, 1.0))
    assert np.max(np.abs(convective_flux_divergence(u, rho).values)) < 1e-12

    Pi, compat = pressure_recover(u, rho, mu, VectorField.zeros(grid))
    x1, _ = grid.coordinates()
    assert_allclose(Pi.values - Pi.values[0], C * x1, atol=1e-9)
    assert compat < 1e-9
    r_l2, r_max = momentum_residual(u, rho, mu, Pi, VectorField.zeros(grid))
    assert r_max < 1e-8


def test_strip_pressure_mean_counts_each_column_once():
    profile = classical_couette_profile(1.0, 2.0, -4.0)
    grid, u, rho, mu = _strip_state(profile, PiecewiseProfile.constant("x2", 1.0, -1.0, 1.0))
    Pi, _ = pressure_recover(u, rho, mu, VectorField.zeros(grid))
    assert np.mean(Pi.values[:-1, 1:-1]) == pytest.approx(0.0, abs=1e-9)
    # the repeated column carries the slope, so the full mean is off by C·h/2
    assert np.mean(Pi.values[:, 1:-1]) == pytest.approx(-4.0 / 16, abs=1e-9)


def test_layered_couette_pressure_slope_is_C():
    C, C2 = couette_constants(1.0, 2.0, 0.0)
    grid, u, rho, mu = _strip_state(couette_profile(C, 0.0, C2), couette_viscosity())
    Pi, _ = pressure_recover(u, rho, mu, VectorField.zeros(grid))
    assert_allclose(Pi.values[-1] - Pi.values[0], C, atol=1e-8)


def test_concentric_pressure_turns_at_rate_C():
    C, C2 = concentric_constants(1.0, 2.0, 0.0)
    g = concentric_profile(C, 0.0, C2)
    grid = Grid(41, 41, 1.0, 1.35, 1.0, 1.35)
    rho_profile = PiecewiseProfile.constant("r", 1.0, 0.5, 2.0)
    u, rho, mu = sector_fields("concentric", grid, g, rho_profile, concentric_viscosity())
    Pi, _ = pressure_recover(u, rho, mu, VectorField.zeros(grid))

    grad = gradient(Pi)
    x1, x2 = grid.coordinates()
    d_theta = x1 * grad.v2 - x2 * grad.v1
    mask = grid.interior_mask(2)
    assert np.max(np.abs(d_theta[mask] - C)) <= 0.05 * abs(C)


def test_manufactured_momentum_residual_is_second_order():
    residuals = []
    for n in (17, 33):
        case = manufactured_case(n)
        grid = case.spec.grid
        rho = case.exact.with_values(closure_eval(DENSITY_LAW, case.exact.values))
        mu = rho.with_values(closure_eval(VISCOSITY_LAW, rho.values))
        residuals.append(momentum_residual(case.velocity, rho, mu, ScalarField.zeros(grid), case.spec.force)[0])
    assert residuals[0] / residuals[1] > 3.0


def test_uniform_flow_has_no_momentum_residual():
    grid = Grid(5, 5)
    one = ScalarField.constant(grid, 1.0)
    r = momentum_residual(VectorField.uniform(grid, 1.0, 0.0), one, one, ScalarField.zeros(grid), VectorField.zeros(grid))
    assert r == (pytest.approx(0.0, abs=1e-12), pytest.approx(0.0, abs=1e-12))


def test_pressure_recovery_rejects_mixed_grids(unit_grid):
    other = Grid(9, 9)
    with pytest.raises(ValueError):
        pressure_recover(
            VectorField.zeros(unit_grid),
            ScalarField.constant(other, 1.0),
            ScalarField.constant(unit_grid, 1.0),
            VectorField.zeros(unit_grid),
        )


# ----- Full pipeline
def test_state_table_layout(lid_cavity):
    result = run_case(lid_cavity(n=9))
    frame = state_frame(result)
    assert list(frame.columns) == ["x1", "x2", "Phi", "u1", "u2", "rho", "mu", "Pi"]
    assert len(frame) == 81
    # x2 runs fastest
    assert frame["x2"].iloc[1] == pytest.approx(0.125)
    assert frame["x1"].iloc[1] == 0.0


def test_state_csv_is_byte_identical_across_runs(lid_cavity, tmp_path):
    spec = lid_cavity(n=9)
    first = write_state_csv(run_case(spec), tmp_path / "a.csv")
    second = write_state_csv(run_case(spec), tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()
    assert first.read_text().splitlines()[0] == "x1,x2,Phi,u1,u2,rho,mu,Pi"
