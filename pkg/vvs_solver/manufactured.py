"""
Manufactured solutions on the unit square.

Φ_ex = a·P(x₁)P(x₂) with P(t) = t²(1 − t)² is clamped (zero value and
slope on every wall), so u₀ = 0. The density law is linear in Φ and the
viscosity law linear in ρ, which keeps ρ = η(Φ_ex) and μ = b(ρ) smooth; the
force is built from exact polynomial derivatives so that Φ_ex solves the
continuous problem with Π = 0.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from vvs_backend import settings

from .fields import ClosureTable, Grid, ProblemSpec, ScalarField, VectorField, l2_norm
from .picard import solve_stream
from .schemas import EpsStudyRow, MMSLevel, MMSStudy

# t²(1 − t)²
P = Polynomial([0.0, 0.0, 1.0, -2.0, 1.0])

# ρ = 1 + 256Φ on the range of Φ_ex (max a/256), μ = ½ + ½ρ
DENSITY_LAW = ClosureTable((-1.0 / 512.0, 1.0 / 128.0), (0.5, 3.0))
VISCOSITY_LAW = ClosureTable((0.5, 3.0), (0.75, 2.0))
DENSITY_SLOPE = 256.0
VISCOSITY_SLOPE = 0.5


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    spec: ProblemSpec
    exact: ScalarField
    velocity: VectorField


def _factors(x: np.ndarray, order: int) -> np.ndarray:
    return P.deriv(order)(x) if order else P(x)


def _force(x1: np.ndarray, x2: np.ndarray, amplitude: float, variable_viscosity: bool) -> np.ndarray:
    a = amplitude
    X = [_factors(x1, k) for k in range(4)]
    Y = [_factors(x2, k) for k in range(4)]
    Phi = a * X[0] * Y[0]

    u1, u2 = a * X[0] * Y[1], -a * X[1] * Y[0]
    d1u1, d2u1 = a * X[1] * Y[1], a * X[0] * Y[2]
    d1u2, d2u2 = -a * X[2] * Y[0], -a * X[1] * Y[1]
    lap_u1 = a * (X[2] * Y[1] + X[0] * Y[3])
    lap_u2 = -a * (X[3] * Y[0] + X[1] * Y[2])

    rho = 1.0 + DENSITY_SLOPE * Phi
    if variable_viscosity:
        mu = 0.5 + VISCOSITY_SLOPE * rho
        dmu1 = VISCOSITY_SLOPE * DENSITY_SLOPE * a * X[1] * Y[0]
        dmu2 = VISCOSITY_SLOPE * DENSITY_SLOPE * a * X[0] * Y[1]
    else:
        mu = np.ones_like(Phi)
        dmu1 = dmu2 = np.zeros_like(Phi)

    S11, S22, S12 = 2.0 * d1u1, 2.0 * d2u2, d2u1 + d1u2
    # div(μSu) = μΔu + S∇μ for divergence-free u
    visc1 = mu * lap_u1 + S11 * dmu1 + S12 * dmu2
    visc2 = mu * lap_u2 + S12 * dmu1 + S22 * dmu2
    conv1 = rho * (u1 * d1u1 + u2 * d2u1)
    conv2 = rho * (u1 * d1u2 + u2 * d2u2)
    return np.stack([conv1 - visc1, conv2 - visc2])


def manufactured_case(n: int, variable_viscosity: bool = True, amplitude: float = 1.0) -> ManufacturedCase:
    """Manufactured problem on an n×n node grid of the unit square, ε = 0."""
    if not 0.0 < amplitude <= 1.0:
        raise ValueError(f"Amplitude must lie in (0, 1] to stay inside the closure tables, got {amplitude}.")
    grid = Grid(n, n)
    x1, x2 = grid.coordinates()
    exact = ScalarField(grid, amplitude * P(x1) * P(x2))
    velocity = VectorField.from_components(
        grid, amplitude * P(x1) * P.deriv()(x2), -amplitude * P.deriv()(x1) * P(x2)
    )
    force = VectorField(grid, _force(x1, x2, amplitude, variable_viscosity))
    b = VISCOSITY_LAW if variable_viscosity else ClosureTable.constant(1.0)
    kind = "variable" if variable_viscosity else "constant"
    spec = ProblemSpec(
        grid=grid,
        u0=np.zeros((grid.boundary_node_count, 2)),
        force=force,
        eta=DENSITY_LAW,
        b=b,
        eps_mollify=0.0,
        tol_abs=1e-12,
        name=f"mms_{kind}_n{n}_a{amplitude:g}",
    )
    return ManufacturedCase(spec, exact, velocity)


def relative_error(case: ManufacturedCase, Phi: ScalarField) -> float:
    grid = case.spec.grid
    return l2_norm(Phi.values - case.exact.values, grid) / l2_norm(case.exact.values, grid)


def level_sizes(levels: int, coarsest: int = 17) -> List[int]:
    """Node counts of ``levels`` doubling grids starting from ``coarsest``."""
    return [(coarsest - 1) * 2**k + 1 for k in range(levels)]


def _run_level(n: int, variable_viscosity: bool) -> MMSLevel:
    case = manufactured_case(n, variable_viscosity)
    Phi, report = solve_stream(case.spec)
    error = relative_error(case, Phi)
    logging.info(f"MMS n={n}: relative L2 error {error:.3e} after {report.iterations} iterations")
    return MMSLevel(
        n=n,
        h=case.spec.grid.h1,
        error=error,
        iterations=report.iterations,
        converged=report.converged,
        wall_ms=report.wall_ms,
    )


def convergence_study(sizes: Sequence[int], variable_viscosity: bool = True) -> MMSStudy:
    """Solve the manufactured case on each grid; levels run on VVS_THREADS workers."""
    if len(sizes) < 2:
        raise ValueError("A convergence study needs at least two levels.")
    with ThreadPoolExecutor(max_workers=settings.VVS_THREADS) as pool:
        levels = list(pool.map(lambda n: _run_level(n, variable_viscosity), sizes))
    orders = [
        math.log(coarse.error / fine.error) / math.log(coarse.h / fine.h)
        for coarse, fine in zip(levels, levels[1:])
    ]
    return MMSStudy(
        case="variable" if variable_viscosity else "constant",
        levels=levels,
        orders=orders,
        min_order=min(orders),
    )


def eps_study(n: int = 33, spacings: Sequence[float] = (4.0, 2.0, 1.0, 0.0)) -> List[EpsStudyRow]:
    """Repeat the manufactured case with ε = s·h and compare against ε = 0."""
    base = manufactured_case(n)
    h = base.spec.grid.h1
    solutions = {}
    for s in spacings:
        spec = base.spec.with_changes(eps_mollify=s * h, name=f"{base.spec.name}_eps{s:g}h")
        solutions[s], _ = solve_stream(spec)
    reference = solutions[min(spacings)]
    scale = l2_norm(reference.values, base.spec.grid)
    rows = []
    for s in spacings:
        Phi = solutions[s]
        rows.append(
            EpsStudyRow(
                eps=s * h,
                change=l2_norm(Phi.values - reference.values, base.spec.grid) / scale,
                error=relative_error(base, Phi),
            )
        )
    return rows
