"""
Recovery of the physical state (u, ρ, μ, Π) from a stream function and the
momentum-balance diagnostics.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.sparse import linalg as splinalg

from vvs_backend import settings

from .errors import LinearSolveError
from .fields import (
    ClosureTable,
    Grid,
    ProblemSpec,
    RunReport,
    ScalarField,
    TensorField,
    VectorField,
    closure_eval,
)
from .lift import wall_velocity
from .operators import NormalSlopes, deformation, grad_perp, gradient, tensor_divergence
from .picard import solve_stream


def recover_state(
    Phi: ScalarField, eta: ClosureTable, b: ClosureTable, boundary: Optional[NormalSlopes] = None
) -> Tuple[VectorField, ScalarField, ScalarField]:
    """u = ∇⊥Φ, ρ = η(Φ), μ = b(ρ) (no mollification)."""
    u = grad_perp(Phi, boundary)
    rho = Phi.with_values(closure_eval(eta, Phi.values))
    mu = rho.with_values(closure_eval(b, rho.values))
    return u, rho, mu


# ---------------------------------------------------------------------------
# Momentum terms
# ---------------------------------------------------------------------------
def convective_flux_divergence(u: VectorField, rho: ScalarField) -> VectorField:
    """div(ρ u ⊗ u)."""
    T = rho.values * u.values[:, None] * u.values[None, :]
    return tensor_divergence(TensorField(u.grid, T))


def viscous_force(u: VectorField, mu: ScalarField) -> VectorField:
    """div(μ S u)."""
    S = deformation(u)
    return tensor_divergence(TensorField(u.grid, mu.values * S.values))


def pressure_target(u: VectorField, rho: ScalarField, mu: ScalarField, f: VectorField) -> VectorField:
    """G = f − div(ρu⊗u) + div(μSu), the field ∇Π has to match."""
    for field in (rho, mu, f):
        if field.grid != u.grid:
            raise ValueError("Pressure recovery needs all fields on one grid.")
    G = f.values - convective_flux_divergence(u, rho).values + viscous_force(u, mu).values
    return VectorField(u.grid, G)


# ---------------------------------------------------------------------------
# Pressure recovery
# ---------------------------------------------------------------------------
def _edge_system(grid: Grid):
    """Forward differences along x₁ and x₂ on the distinct nodes, with edge weights."""
    n1 = grid.nx - 1 if grid.periodic_x1 else grid.nx
    ny = grid.ny
    wx, wy = grid.axis_weights()
    if grid.periodic_x1:
        wx = np.ones(n1)
        fwd1 = sparse.diags([-1.0, 1.0], [0, 1], shape=(n1, n1), format="lil")
        fwd1[n1 - 1, 0] = 1.0
        avg1 = sparse.diags([0.5, 0.5], [0, 1], shape=(n1, n1), format="lil")
        avg1[n1 - 1, 0] = 0.5
        edge_wx = np.ones(n1)
    else:
        fwd1 = sparse.diags([-1.0, 1.0], [0, 1], shape=(n1 - 1, n1))
        avg1 = sparse.diags([0.5, 0.5], [0, 1], shape=(n1 - 1, n1))
        edge_wx = np.ones(n1 - 1)
    fwd2 = sparse.diags([-1.0, 1.0], [0, 1], shape=(ny - 1, ny))
    avg2 = sparse.diags([0.5, 0.5], [0, 1], shape=(ny - 1, ny))

    i1, iy = sparse.identity(n1), sparse.identity(ny)
    D1 = sparse.kron(fwd1.tocsr() / grid.h1, iy, format="csr")
    A1 = sparse.kron(avg1.tocsr(), iy, format="csr")
    D2 = sparse.kron(i1, fwd2 / grid.h2, format="csr")
    A2 = sparse.kron(i1, avg2, format="csr")
    W1 = np.outer(edge_wx, wy).ravel() * grid.h1 * grid.h2
    W2 = np.outer(wx[:n1], np.ones(ny - 1)).ravel() * grid.h1 * grid.h2
    return n1, D1, A1, W1, D2, A2, W2


def _fit_gradient(G1: np.ndarray, G2: np.ndarray, grid: Grid) -> np.ndarray:
    """Least-squares Π on the distinct nodes with ∇Π ≈ G on every edge."""
    n1, D1, A1, W1, D2, A2, W2 = _edge_system(grid)
    g1 = A1 @ G1[:n1].ravel()
    g2 = A2 @ G2[:n1].ravel()
    w1, w2 = sparse.diags(W1), sparse.diags(W2)
    laplacian = D1.T @ w1 @ D1 + D2.T @ w2 @ D2
    rhs = D1.T @ (W1 * g1) + D2.T @ (W2 * g2)
    n = laplacian.shape[0]
    ones = sparse.csr_matrix(np.ones((n, 1)))
    augmented = sparse.bmat([[laplacian, ones], [ones.T, None]], format="csc")
    solution = np.r_[rhs, 0.0]
    try:
        x = splinalg.spsolve(augmented, solution)
    except RuntimeError as exc:
        raise LinearSolveError(f"Pressure solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise LinearSolveError("Pressure solve produced non-finite values")
    return x[:n].reshape(n1, grid.ny)


def pressure_recover(
    u: VectorField, rho: ScalarField, mu: ScalarField, f: VectorField
) -> Tuple[ScalarField, float]:
    """Π with ∇Π ≈ G in the least-squares sense (natural Neumann data G·n).

    On an x₁-periodic strip Π = Π_per + s₁(x₁ − x1_min) where s₁ is the
    mean of G₁. Π is shifted to zero mean over interior nodes, each periodic
    column counted once. ``compat`` is ‖∇Π − G‖ over interior nodes, the
    curl-free defect of G.
    """
    grid = u.grid
    G = pressure_target(u, rho, mu, f)
    G1, G2 = G.v1, G.v2
    slope = 0.0
    if grid.periodic_x1:
        w = grid.quadrature_weights()
        slope = float(np.sum(w * G1) / np.sum(w))
        G1 = G1 - slope
    core = _fit_gradient(G1, G2, grid)

    Pi = np.empty(grid.shape)
    Pi[: core.shape[0]] = core
    if grid.periodic_x1:
        Pi[-1] = core[0]
        x1, _ = grid.coordinates()
        Pi = Pi + slope * (x1 - grid.x1_min)

    interior = grid.interior_mask(1)
    distinct = interior.copy()
    if grid.periodic_x1:
        distinct[-1] = False  # the last column repeats the first
    Pi -= np.mean(Pi[distinct])
    pressure = ScalarField(grid, Pi)

    grad = gradient(pressure).values
    defect = np.sum((grad - G.values) ** 2, axis=0)
    w = grid.quadrature_weights()
    compat = math.sqrt(float(np.sum(w[interior] * defect[interior])))
    logging.info(f"Pressure recovered: mean slope {slope:.6e}, compatibility defect {compat:.3e}")
    return pressure, compat


def momentum_residual(
    u: VectorField, rho: ScalarField, mu: ScalarField, Pi: ScalarField, f: VectorField
) -> Tuple[float, float]:
    """L² and max norms of div(ρu⊗u) − div(μSu) + ∇Π − f two node layers inside."""
    grid = u.grid
    r = (
        convective_flux_divergence(u, rho).values
        - viscous_force(u, mu).values
        + gradient(Pi).values
        - f.values
    )
    mask = grid.interior_mask(2)
    pointwise = np.hypot(r[0], r[1])[mask]
    if pointwise.size == 0:
        return 0.0, 0.0
    w = grid.quadrature_weights()[mask]
    return math.sqrt(float(np.sum(w * pointwise**2))), float(np.max(pointwise))


# ---------------------------------------------------------------------------
# Full case pipeline and state table
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class CaseResult:
    spec: ProblemSpec
    Phi: ScalarField
    report: RunReport
    u: VectorField
    rho: ScalarField
    mu: ScalarField
    Pi: ScalarField
    compat: float


def run_case(spec: ProblemSpec, matrix_path: Optional[Path] = None) -> CaseResult:
    """solve_stream followed by state and pressure recovery."""
    Phi, report = solve_stream(spec, matrix_path)
    slopes = NormalSlopes.from_velocity(spec.grid, wall_velocity(spec.u0, spec.grid))
    u, rho, mu = recover_state(Phi, spec.eta, spec.b, slopes)
    Pi, compat = pressure_recover(u, rho, mu, spec.force)
    return CaseResult(spec, Phi, report, u, rho, mu, Pi, compat)


def state_frame(result: CaseResult) -> pd.DataFrame:
    x1, x2 = result.spec.grid.coordinates()
    return pd.DataFrame(
        {
            "x1": x1.ravel(),
            "x2": x2.ravel(),
            "Phi": result.Phi.values.ravel(),
            "u1": result.u.v1.ravel(),
            "u2": result.u.v2.ravel(),
            "rho": result.rho.values.ravel(),
            "mu": result.mu.values.ravel(),
            "Pi": result.Pi.values.ravel(),
        }
    )


def write_state_csv(result: CaseResult, path: Path) -> Path:
    path = Path(path)
    state_frame(result).to_csv(path, index=False, float_format=settings.CSV_FLOAT_FORMAT, lineterminator="\n")
    return path
