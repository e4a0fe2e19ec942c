import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vvs_solver.fields import Grid
from vvs_solver.symmetric import (
    PiecewiseProfile,
    centripetal_identity_residual,
    classical_couette_profile,
    concentric_constants,
    concentric_ode,
    concentric_pressure_identity_residual,
    concentric_profile,
    concentric_stream,
    concentric_viscosity,
    couette_constants,
    couette_eta_table,
    couette_ode,
    couette_profile,
    couette_strip_case,
    couette_stream,
    couette_viscosity,
    interface_second_difference,
    radial_bvp,
    radial_convection_identity_residual,
    radial_example,
    radial_pressure_identity_residual,
    radial_stress_identity_residual,
    symmetric_stream_residual,
)

QUARTER = math.pi / 4.0


# ----- Couette
@pytest.mark.parametrize(
    "a_minus, a_plus, C1, expected",
    [(0.0, 0.0, 0.0, (0.0, 0.0)), (1.0, 2.0, 0.0, (-4.0, 3.0)), (1.5, 1.5, 0.0, (0.0, 1.5))],
)
def test_couette_constants(a_minus, a_plus, C1, expected):
    assert couette_constants(a_minus, a_plus, C1) == pytest.approx(expected)


def test_couette_profile_meets_walls_and_flux_continuity():
    C, C2 = couette_constants(1.0, 2.0, 0.3)
    profile = couette_profile(C, 0.3, C2)
    assert profile.value(-1.0) == pytest.approx(1.0)
    assert profile.value(1.0) == pytest.approx(2.0)
    below = 1.0 * profile.one_sided(0.0, "left", derivative=True)
    above = 2.0 * profile.one_sided(0.0, "right", derivative=True)
    assert below == pytest.approx(0.3)
    assert above == pytest.approx(0.3)
    assert profile.one_sided(0.0, "left") == pytest.approx(profile.one_sided(0.0, "right"))


def test_couette_viscosity_puts_the_interface_below():
    mu = couette_viscosity()
    assert mu.value(0.0) == 1.0
    assert mu.value(1e-12) == 2.0


def test_couette_ode_reproduces_the_closed_form():
    C, C2 = couette_constants(1.0, 2.0, 0.3)
    closed = couette_profile(C, 0.3, C2)
    integrated = couette_ode(couette_viscosity(), C, 0.3, C2)
    x = np.linspace(-1.0, 1.0, 101)
    assert_allclose(integrated.value(x), closed.value(x), rtol=1e-12, atol=1e-12)


def test_couette_ode_with_constant_viscosity():
    nu = PiecewiseProfile.constant("x2", 3.0, -1.0, 1.0)
    C, C1, C2 = -2.0, 0.5, 1.0
    x = np.linspace(-1.0, 1.0, 41)
    expected = C / (2.0 * 3.0) * x**2 + C1 / 3.0 * x + C2
    assert_allclose(couette_ode(nu, C, C1, C2).value(x), expected, atol=1e-12)


def test_classical_couette_profile():
    profile = classical_couette_profile(1.0, 2.0, -4.0, nu=2.0)
    assert profile.value(-1.0) == pytest.approx(1.0)
    assert profile.value(1.0) == pytest.approx(2.0)
    assert profile.derivative(0.3) == pytest.approx(-4.0 / 2.0 * 0.3 + 0.5)


def test_couette_stream_derivative_is_the_velocity():
    C, C2 = couette_constants(1.0, 2.0, 0.0)
    stream = couette_stream(C, 0.0, C2, 0.0)
    profile = couette_profile(C, 0.0, C2)
    x = np.linspace(-0.9, 0.9, 19)
    assert_allclose(stream.derivative(x), profile.value(x), rtol=1e-12)
    assert stream.value(0.0) == 0.0
    assert stream.value(-1.0) == pytest.approx(-7.0 / 3.0)
    assert stream.value(1.0) == pytest.approx(8.0 / 3.0)


def test_couette_density_table_example():
    table, phi_minus, phi_plus = couette_eta_table(1.5, 1.0, 0.2, 0.0)
    assert phi_minus == pytest.approx(-0.53333333333)
    assert phi_plus == pytest.approx(0.41666666667)
    assert table.evaluate(phi_minus) == 1.0
    assert table.evaluate(phi_plus) == 2.0

    C, C2 = couette_constants(1.5, 1.0, 0.2)
    stream = couette_stream(C, 0.2, C2, 0.0)
    assert stream.value(-1.0) == pytest.approx(phi_minus)
    assert stream.value(1.0) == pytest.approx(phi_plus)


@pytest.mark.parametrize("a_minus, a_plus, C1", [(2.5, 1.0, 0.2), (1.5, 1.0, 0.3), (0.5, 1.0, 0.1)])
def test_couette_density_table_precondition(a_minus, a_plus, C1):
    with pytest.raises(ValueError):
        couette_eta_table(a_minus, a_plus, C1, 0.0)


def test_couette_strip_case():
    spec, profile = couette_strip_case(1.0, 2.0, 0.0, 0.0, 9, 17)
    assert spec.grid.periodic_x1
    assert spec.C0 == pytest.approx(-7.0 / 3.0)
    assert spec.strip_flux == pytest.approx(5.0)
    assert profile.value(0.0) == pytest.approx(3.0)
    assert spec.eta.evaluate(-1.0) == 1.0
    assert spec.eta.evaluate(1.0) == 2.0


def test_couette_strip_case_needs_positive_velocity():
    with pytest.raises(ValueError):
        couette_strip_case(-1.0, 2.0, 0.0, 0.0, 9, 17)


def test_interface_second_difference_grows_with_the_slope_jump():
    C, C1, C2 = 1.0, 0.4, 0.0
    profile = couette_profile(C, C1, C2)
    for h in (1e-2, 1e-3):
        assert interface_second_difference(profile, h) == pytest.approx(-C1 / (2.0 * h) + 0.75 * C, rel=1e-6)


# ----- Concentric
def test_concentric_constants_example():
    C, C2 = concentric_constants(1.0, 2.0, 0.0)
    assert C == pytest.approx(-4.0 / (3.0 * math.log(2.0)))
    assert C2 == pytest.approx(4.0 / 3.0)


def test_concentric_rigid_rotation():
    C, C2 = concentric_constants(0.7, 0.7, 0.0)
    assert C == pytest.approx(0.0, abs=1e-14)
    r = np.linspace(0.5, 2.0, 31)
    assert_allclose(concentric_profile(C, 0.0, C2).value(r), 0.7, atol=1e-12)


def test_concentric_profile_boundary_values_and_flux():
    C1 = -0.4
    C, C2 = concentric_constants(1.0, 2.0, C1)
    g = concentric_profile(C, C1, C2)
    assert g.value(0.5) == pytest.approx(1.0)
    assert g.value(2.0) == pytest.approx(2.0)
    assert g.one_sided(1.0, "left") == pytest.approx(g.one_sided(1.0, "right"))
    inner = 2.0 * g.one_sided(1.0, "left", derivative=True)
    outer = 1.0 * g.one_sided(1.0, "right", derivative=True)
    assert inner == pytest.approx(-C / 2.0 + C1)
    assert outer == pytest.approx(-C / 2.0 + C1)


def test_concentric_ode_reproduces_the_closed_form():
    C, C2 = concentric_constants(1.0, 2.0, 0.3)
    r = np.linspace(0.5, 2.0, 61)
    closed = concentric_profile(C, 0.3, C2).value(r)
    assert_allclose(concentric_ode(concentric_viscosity(), C, 0.3, C2).value(r), closed, rtol=1e-12)


def test_concentric_profile_needs_positive_radius():
    C, C2 = concentric_constants(1.0, 2.0, 0.0)
    with pytest.raises(ValueError):
        concentric_profile(C, 0.0, C2).value(0.0)


def test_concentric_stream_derivative():
    C, C2 = concentric_constants(1.0, 2.0, 0.0)
    g = concentric_profile(C, 0.0, C2)
    stream = concentric_stream(g)
    assert stream.value(1.0) == pytest.approx(0.0, abs=1e-15)
    for r in (0.75, 1.5):
        step = 1e-6
        slope = (stream.value(r + step) - stream.value(r - step)) / (2.0 * step)
        assert slope == pytest.approx(r * g.value(r), rel=1e-6)
    assert stream.one_sided(1.0, "left") == pytest.approx(stream.one_sided(1.0, "right"))


# ----- Radial
def test_radial_example_values():
    h, rho, mu = radial_example()
    assert h.value(0.0) == pytest.approx(-math.pi / 2.0)
    assert h.value(math.pi / 2.0) == pytest.approx(-5.0 * math.pi / 4.0)
    assert h.one_sided(QUARTER, "left") == pytest.approx(-3.0 * math.pi / 4.0)
    assert h.one_sided(QUARTER, "right") == pytest.approx(-3.0 * math.pi / 4.0)
    assert rho.value(0.0) == pytest.approx(16.0 / math.pi)
    flux_left = 2.0 * h.one_sided(QUARTER, "left", derivative=True)
    flux_right = 1.0 * h.one_sided(QUARTER, "right", derivative=True)
    assert flux_left == pytest.approx(-2.0)
    assert flux_right == pytest.approx(-2.0)


def test_radial_bvp_recovers_the_example():
    h, rho, mu = radial_example()
    solved = radial_bvp(rho, mu, 0.0, -math.pi / 2.0, -5.0 * math.pi / 4.0, 512)
    theta = np.linspace(0.0, math.pi / 2.0, 513)
    assert np.max(np.abs(solved.value(theta) - h.value(theta))) <= 1e-6


def test_radial_bvp_linear_case():
    rho = PiecewiseProfile.constant("theta", 0.0, 0.0, QUARTER)
    mu = PiecewiseProfile.constant("theta", 1.0, 0.0, QUARTER)
    solved = radial_bvp(rho, mu, 0.0, 0.0, 1.0, 8192)
    theta = np.linspace(0.0, QUARTER, 8193)
    assert np.max(np.abs(solved.value(theta) - np.sin(2.0 * theta))) <= 1e-8


def test_radial_bvp_zero_data():
    rho = PiecewiseProfile.constant("theta", 1.0, 0.0, QUARTER)
    mu = PiecewiseProfile.constant("theta", 1.0, 0.0, QUARTER)
    solved = radial_bvp(rho, mu, 0.0, 0.0, 0.0, 64)
    assert_allclose(solved.value(np.linspace(0.0, QUARTER, 65)), 0.0, atol=1e-14)


def test_radial_bvp_needs_enough_intervals():
    h, rho, mu = radial_example()
    with pytest.raises(ValueError):
        radial_bvp(rho, mu, 0.0, 0.0, 0.0, 8)


# ----- Residuals
def test_closed_forms_solve_their_stream_equations():
    C, C2 = couette_constants(1.0, 2.0, 0.3)
    assert symmetric_stream_residual("couette", couette_profile(C, 0.3, C2), couette_viscosity(), C=C) <= 1e-8

    C, C2 = concentric_constants(1.0, 2.0, 0.3)
    g = concentric_profile(C, 0.3, C2)
    assert symmetric_stream_residual("concentric", g, concentric_viscosity(), C=C) <= 1e-8

    h, rho, mu = radial_example()
    assert symmetric_stream_residual("radial", h, mu, rho, C=0.0) <= 1e-8


def test_wrong_constant_leaves_a_residual():
    C, C2 = concentric_constants(1.0, 2.0, 0.0)
    g = concentric_profile(C, 0.0, C2)
    assert symmetric_stream_residual("concentric", g, concentric_viscosity(), C=C + 1.0) > 1e-2


def test_unknown_family():
    with pytest.raises(ValueError):
        symmetric_stream_residual("spiral", couette_profile(0.0, 0.0, 1.0), couette_viscosity())


# ----- Identities sampled on a grid; the defect is second order in h
def _ratio(residual, make_grid):
    return residual(make_grid(21)) / residual(make_grid(41))


def _annulus_grid(n):
    return Grid(n, n, 1.0, 1.35, 1.0, 1.35)


def _sector_grid(n):
    return Grid(n, n, 1.0, 1.5, 0.1, 0.5)


@pytest.fixture
def concentric_flow():
    C, C2 = concentric_constants(1.0, 2.0, 0.0)
    g = concentric_profile(C, 0.0, C2)
    rho = PiecewiseProfile.constant("r", 1.0, 0.5, 2.0)
    return C, g, rho, concentric_viscosity()


def test_centripetal_identity(concentric_flow):
    _, g, rho, mu = concentric_flow
    residual = lambda grid: centripetal_identity_residual(grid, g, rho, mu)  # noqa: E731
    assert residual(_annulus_grid(41)) < 1e-3
    assert _ratio(residual, _annulus_grid) > 3.0


def test_concentric_pressure_identity(concentric_flow):
    C, g, rho, mu = concentric_flow
    residual = lambda grid: concentric_pressure_identity_residual(grid, g, rho, mu, C)  # noqa: E731
    assert residual(_annulus_grid(41)) < 1e-3
    assert _ratio(residual, _annulus_grid) > 3.0


@pytest.mark.parametrize(
    "identity",
    [
        radial_convection_identity_residual,
        radial_stress_identity_residual,
        lambda grid, h, rho, mu: radial_pressure_identity_residual(grid, h, rho, mu, 0.0),
    ],
)
def test_radial_identities(identity):
    h, rho, mu = radial_example()
    residual = lambda grid: identity(grid, h, rho, mu)  # noqa: E731
    assert residual(_sector_grid(41)) < 1e-2
    assert _ratio(residual, _sector_grid) > 3.0
