"""
Discrete differential operators on the node grid and the sparse assembly of
the variable-coefficient fourth-order energy form, its inner product and the
Oseen convection form.

Boundary rows follow one of two conventions:

* ghost convention (``boundary`` is a :class:`NormalSlopes`): a ghost layer is
  filled with ``mirror + 2h·g`` where g is the outward normal derivative. Zero
  slopes give the clamped (∂φ/∂n = 0) reflection used for the unknowns;
* one-sided convention (``boundary is None``): second-order one-sided
  differences, exact on quadratics (first derivatives) and cubics (second).
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import io as spio
from scipy import sparse

from .fields import Grid, ScalarField, TensorField, VectorField


# ---------------------------------------------------------------------------
# 1. Ghost layer
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class NormalSlopes:
    """Outward normal derivative of a stream function on each wall.

    ``x1_lo``/``x1_hi`` have one entry per x₂ node (left/right walls) and are
    ``None`` on an x₁-periodic grid; ``x2_lo``/``x2_hi`` have one entry per
    x₁ node (bottom/top walls).
    """

    x1_lo: Optional[np.ndarray]
    x1_hi: Optional[np.ndarray]
    x2_lo: np.ndarray
    x2_hi: np.ndarray

    @classmethod
    def zero(cls, grid: Grid) -> "NormalSlopes":
        side = None if grid.periodic_x1 else np.zeros(grid.ny)
        return cls(side, side, np.zeros(grid.nx), np.zeros(grid.nx))

    @classmethod
    def from_velocity(cls, grid: Grid, u_wall: np.ndarray) -> "NormalSlopes":
        """Slopes ∂Φ/∂n = u·τ from a velocity array (2, nx, ny) read on the walls."""
        u1, u2 = u_wall[0], u_wall[1]
        x1_lo = x1_hi = None
        if not grid.periodic_x1:
            x1_lo = u2[0, :].copy()  # τ = (0, 1)
            x1_hi = -u2[-1, :]  # τ = (0, −1)
        return cls(x1_lo, x1_hi, -u1[:, 0], u1[:, -1].copy())


def _extend(arr: np.ndarray, periodic: bool) -> np.ndarray:
    if periodic:
        return np.concatenate([arr[-2:-1], arr, arr[1:2]])
    return np.concatenate([arr[:1], arr, arr[-1:]])


def pad_with_ghosts(values: np.ndarray, grid: Grid, boundary: NormalSlopes) -> np.ndarray:
    """Return values on the (nx+2, ny+2) lattice including one ghost layer."""
    h1, h2 = grid.h1, grid.h2
    if grid.periodic_x1:
        lo, hi = values[-2], values[1]
    else:
        lo = values[1] + 2.0 * h1 * boundary.x1_lo
        hi = values[-2] + 2.0 * h1 * boundary.x1_hi
    rows = np.vstack([lo[None, :], values, hi[None, :]])
    g_lo = _extend(boundary.x2_lo, grid.periodic_x1)
    g_hi = _extend(boundary.x2_hi, grid.periodic_x1)
    bottom = rows[:, 1] + 2.0 * h2 * g_lo
    top = rows[:, -2] + 2.0 * h2 * g_hi
    return np.hstack([bottom[:, None], rows, top[:, None]])


# ---------------------------------------------------------------------------
# 2. Difference kernels
# ---------------------------------------------------------------------------
def _ghost_derivatives(values: np.ndarray, grid: Grid, boundary: NormalSlopes) -> Dict[str, np.ndarray]:
    p = pad_with_ghosts(values, grid, boundary)
    h1, h2 = grid.h1, grid.h2
    c = p[1:-1, 1:-1]
    return {
        "d1": (p[2:, 1:-1] - p[:-2, 1:-1]) / (2.0 * h1),
        "d2": (p[1:-1, 2:] - p[1:-1, :-2]) / (2.0 * h2),
        "d11": (p[2:, 1:-1] - 2.0 * c + p[:-2, 1:-1]) / h1**2,
        "d22": (p[1:-1, 2:] - 2.0 * c + p[1:-1, :-2]) / h2**2,
        "d12": (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / (4.0 * h1 * h2),
    }


def _periodic_wrap(fn, values: np.ndarray) -> np.ndarray:
    out = fn(values[:-1])
    return np.concatenate([out, out[:1]], axis=0)


def _first_difference(values: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    if periodic and axis == 0:
        return _periodic_wrap(
            lambda v: (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) / (2.0 * h), values
        )
    return np.gradient(values, h, axis=axis, edge_order=2)


def _second_difference(values: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    if periodic and axis == 0:
        return _periodic_wrap(
            lambda v: (np.roll(v, -1, axis=0) - 2.0 * v + np.roll(v, 1, axis=0)) / h**2, values
        )
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    # one-sided rows, exact on cubics
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h**2
    out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def _one_sided_derivatives(values: np.ndarray, grid: Grid) -> Dict[str, np.ndarray]:
    per = grid.periodic_x1
    d1 = _first_difference(values, grid.h1, 0, per)
    d2 = _first_difference(values, grid.h2, 1, False)
    return {
        "d1": d1,
        "d2": d2,
        "d11": _second_difference(values, grid.h1, 0, per),
        "d22": _second_difference(values, grid.h2, 1, False),
        "d12": _first_difference(d2, grid.h1, 0, per),
    }


def _derivatives(values: np.ndarray, grid: Grid, boundary: Optional[NormalSlopes]) -> Dict[str, np.ndarray]:
    if boundary is None:
        return _one_sided_derivatives(values, grid)
    return _ghost_derivatives(values, grid, boundary)


# ---------------------------------------------------------------------------
# 3. Field operators
# ---------------------------------------------------------------------------
def first_derivatives(phi: ScalarField, boundary: Optional[NormalSlopes] = None) -> Tuple[np.ndarray, np.ndarray]:
    d = _derivatives(phi.values, phi.grid, boundary)
    return d["d1"], d["d2"]


def second_derivatives(
    phi: ScalarField, boundary: Optional[NormalSlopes] = None
) -> Tuple[ScalarField, ScalarField, ScalarField]:
    """Central second differences and the cross difference D1∘D2."""
    d = _derivatives(phi.values, phi.grid, boundary)
    g = phi.grid
    return ScalarField(g, d["d11"]), ScalarField(g, d["d22"]), ScalarField(g, d["d12"])


def grad_perp(phi: ScalarField, boundary: Optional[NormalSlopes] = None) -> VectorField:
    """u = ∇⊥φ = (∂₂φ, −∂₁φ)."""
    d = _derivatives(phi.values, phi.grid, boundary)
    return VectorField.from_components(phi.grid, d["d2"], -d["d1"])


def gradient(phi: ScalarField) -> VectorField:
    """∇φ with one-sided rows at the walls.

    On an x₁-periodic grid φ may carry a linear drift in x₁ (its last column
    minus its first); the drift is removed before the periodic x₁ difference
    and added back as a constant slope.
    """
    g = phi.grid
    values = phi.values
    if not g.periodic_x1:
        d = _one_sided_derivatives(values, g)
        return VectorField.from_components(g, d["d1"], d["d2"])
    drift = (values[-1] - values[0]) / (g.x1_max - g.x1_min)
    periodic_part = values - np.outer(g.x1 - g.x1_min, drift)
    d1 = _first_difference(periodic_part, g.h1, 0, True) + drift[None, :]
    d2 = _first_difference(values, g.h2, 1, False)
    return VectorField.from_components(g, d1, d2)


def divergence(u: VectorField) -> ScalarField:
    g = u.grid
    div = _first_difference(u.v1, g.h1, 0, g.periodic_x1) + _first_difference(u.v2, g.h2, 1, False)
    return ScalarField(g, div)


def deformation(u: VectorField) -> TensorField:
    """Su = ∇u + ∇uᵀ."""
    g = u.grid
    grad = np.empty((2, 2) + g.shape)
    for a in range(2):
        grad[a, 0] = _first_difference(u.values[a], g.h1, 0, g.periodic_x1)
        grad[a, 1] = _first_difference(u.values[a], g.h2, 1, False)
    return TensorField(g, grad + grad.transpose(1, 0, 2, 3))


def tensor_divergence(T: TensorField) -> VectorField:
    """(div T)_a = Σ_b ∂_b T_ab."""
    g = T.grid
    out = np.empty((2,) + g.shape)
    for a in range(2):
        out[a] = _first_difference(T.values[a, 0], g.h1, 0, g.periodic_x1) + _first_difference(
            T.values[a, 1], g.h2, 1, False
        )
    return VectorField(g, out)


def discrete_laplacian(phi: ScalarField, boundary: Optional[NormalSlopes] = None) -> ScalarField:
    """Δ_h φ with the clamped ghost convention unless other slopes are given."""
    boundary = boundary or NormalSlopes.zero(phi.grid)
    d = _ghost_derivatives(phi.values, phi.grid, boundary)
    return ScalarField(phi.grid, d["d11"] + d["d22"])


def cell_cross_difference(values: np.ndarray, grid: Grid) -> np.ndarray:
    """δ₁⁺δ₂⁺ on cell centres, shape (nx−1, ny−1)."""
    return (values[1:, 1:] - values[:-1, 1:] - values[1:, :-1] + values[:-1, :-1]) / (grid.h1 * grid.h2)


def cell_average(values: np.ndarray) -> np.ndarray:
    return 0.25 * (values[1:, 1:] + values[:-1, 1:] + values[1:, :-1] + values[:-1, :-1])


# ---------------------------------------------------------------------------
# 4. Sparse stencils on the clamped space
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class _Stencils:
    prolong: sparse.csr_matrix  # free dofs -> all nodes
    free_nodes: np.ndarray
    d1: sparse.csr_matrix  # node -> node, reflection ghosts
    d2: sparse.csr_matrix
    d11: sparse.csr_matrix
    d22: sparse.csr_matrix
    d12: sparse.csr_matrix
    cell: sparse.csr_matrix  # node -> cell centre, δ₁⁺δ₂⁺
    weights: np.ndarray  # trapezoidal node weights incl. h1·h2


def _axis_operators(n: int, h: float, periodic: bool):
    ghost_rows = np.r_[np.arange(1, n + 1), 0, n + 1]
    ghost_cols = np.r_[np.arange(n), (n - 2, 1) if periodic else (1, n - 2)]
    ghost = sparse.csr_matrix((np.ones(n + 2), (ghost_rows, ghost_cols)), shape=(n + 2, n))
    d1 = sparse.diags([-1.0, 1.0], [0, 2], shape=(n, n + 2)) / (2.0 * h)
    d11 = sparse.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(n, n + 2)) / h**2
    forward = sparse.diags([-1.0, 1.0], [0, 1], shape=(n - 1, n)) / h
    return (d1 @ ghost).tocsr(), (d11 @ ghost).tocsr(), forward.tocsr()


@functools.lru_cache(maxsize=16)
def _stencils(grid: Grid) -> _Stencils:
    nx, ny = grid.shape
    d1x, d11x, fx = _axis_operators(nx, grid.h1, grid.periodic_x1)
    d1y, d11y, fy = _axis_operators(ny, grid.h2, False)
    ix = sparse.identity(nx, format="csr")
    iy = sparse.identity(ny, format="csr")

    node = np.arange(grid.size).reshape(grid.shape)
    if grid.periodic_x1:
        free = node[: nx - 1, 1 : ny - 1].ravel()
        rows = np.r_[free, node[nx - 1, 1 : ny - 1]]
        cols = np.r_[np.arange(free.size), np.arange(ny - 2)]
    else:
        free = node[1 : nx - 1, 1 : ny - 1].ravel()
        rows, cols = free, np.arange(free.size)
    prolong = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(grid.size, free.size))

    return _Stencils(
        prolong=prolong,
        free_nodes=free,
        d1=sparse.kron(d1x, iy, format="csr"),
        d2=sparse.kron(ix, d1y, format="csr"),
        d11=sparse.kron(d11x, iy, format="csr"),
        d22=sparse.kron(ix, d11y, format="csr"),
        d12=sparse.kron(d1x, d1y, format="csr"),
        cell=sparse.kron(fx, fy, format="csr"),
        weights=grid.quadrature_weights().ravel(),
    )


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """Sparse matrix acting on the free (clamped) degrees of freedom."""

    grid: Grid
    matrix: sparse.csr_matrix
    free_nodes: np.ndarray
    prolongation: sparse.csr_matrix

    @property
    def size(self) -> int:
        return self.free_nodes.size

    def restrict(self, phi: ScalarField) -> np.ndarray:
        return phi.values.ravel()[self.free_nodes]

    def prolong(self, vec: np.ndarray) -> ScalarField:
        return ScalarField(self.grid, (self.prolongation @ vec).reshape(self.grid.shape))

    def apply(self, phi: ScalarField) -> np.ndarray:
        return self.matrix @ self.restrict(phi)

    def form(self, phi: ScalarField, psi: ScalarField) -> float:
        return float(self.restrict(psi) @ self.apply(phi))

    def write_matrix_market(self, path: Path) -> Path:
        path = Path(path)
        spio.mmwrite(str(path), self.matrix, comment="vvs clamped-space operator")
        return path


def clamped_space(grid: Grid) -> Tuple[sparse.csr_matrix, np.ndarray]:
    st = _stencils(grid)
    return st.prolong, st.free_nodes


def _wrap(grid: Grid, matrix) -> LinearOperator:
    st = _stencils(grid)
    return LinearOperator(grid, sparse.csr_matrix(matrix), st.free_nodes, st.prolong)


# ---------------------------------------------------------------------------
# 5. Energy form  ⟨φ,ψ⟩ = ½ Σ μ[(D22−D11)φ (D22−D11)ψ + (2D12φ)(2D12ψ)] h1h2
# ---------------------------------------------------------------------------
def _check_viscosity(mu: ScalarField, grid: Grid, mu_lower: Optional[float]) -> None:
    if mu.grid != grid:
        raise ValueError("Viscosity field lives on a different grid than the operator.")
    floor = 0.0 if mu_lower is None else mu_lower
    lowest = float(np.min(mu.values))
    if lowest <= 0.0 or (mu_lower is not None and lowest < floor * (1.0 - 1e-12)):
        raise ValueError(
            f"Viscosity must stay above its lower bound {floor}, found min(mu)={lowest:.6e}."
        )


def assemble_energy_operator(mu: ScalarField, grid: Grid, mu_lower: Optional[float] = None) -> LinearOperator:
    """Aᵀ M(μ) A on the clamped space.

    Normal-stress rows (D22−D11) sit on nodes with trapezoidal weights, the
    shear rows 2·δ₁⁺δ₂⁺ sit on cell centres with cell-averaged μ. Both carry
    the factor ½ of the inner product.
    """
    _check_viscosity(mu, grid, mu_lower)
    st = _stencils(grid)
    normal = (st.d22 - st.d11) @ st.prolong
    shear = 2.0 * (st.cell @ st.prolong)
    m_node = sparse.diags(0.5 * st.weights * mu.values.ravel())
    m_cell = sparse.diags(0.5 * grid.h1 * grid.h2 * cell_average(mu.values).ravel())
    matrix = normal.T @ m_node @ normal + shear.T @ m_cell @ shear
    return _wrap(grid, matrix)


def energy_product(
    mu: ScalarField,
    phi: ScalarField,
    psi: ScalarField,
    phi_boundary: Optional[NormalSlopes] = None,
    psi_boundary: Optional[NormalSlopes] = None,
) -> float:
    grid = mu.grid
    zero = NormalSlopes.zero(grid)
    dp = _ghost_derivatives(phi.values, grid, phi_boundary or zero)
    dq = _ghost_derivatives(psi.values, grid, psi_boundary or zero)
    w = grid.quadrature_weights()
    node = np.sum(w * mu.values * (dp["d22"] - dp["d11"]) * (dq["d22"] - dq["d11"]))
    cell = np.sum(
        grid.h1 * grid.h2
        * cell_average(mu.values)
        * (2.0 * cell_cross_difference(phi.values, grid))
        * (2.0 * cell_cross_difference(psi.values, grid))
    )
    return 0.5 * float(node + cell)


def energy_functional(mu: ScalarField, phi: ScalarField, boundary: Optional[NormalSlopes] = None) -> np.ndarray:
    """Vector v on the free dofs with v·ψ = ⟨φ, ψ⟩ for every clamped ψ."""
    grid = mu.grid
    st = _stencils(grid)
    d = _ghost_derivatives(phi.values, grid, boundary or NormalSlopes.zero(grid))
    normal = 0.5 * st.weights * mu.values.ravel() * (d["d22"] - d["d11"]).ravel()
    shear = (
        0.5 * grid.h1 * grid.h2
        * cell_average(mu.values).ravel()
        * 2.0 * cell_cross_difference(phi.values, grid).ravel()
    )
    return st.prolong.T @ ((st.d22 - st.d11).T @ normal + 2.0 * (st.cell.T @ shear))


# ---------------------------------------------------------------------------
# 6. Convection form  Σ ρ (w ⊗ ∇⊥φ) : ∇∇⊥ψ h1h2
# ---------------------------------------------------------------------------
def _check_convection_inputs(rho: ScalarField, w: VectorField, grid: Grid) -> None:
    if rho.grid != grid or w.grid != grid:
        raise ValueError("Density and advecting field must live on the operator grid.")
    if np.min(rho.values) < 0.0:
        raise ValueError(f"Density must be nonnegative, found min(rho)={np.min(rho.values):.6e}.")


def assemble_convection(rho: ScalarField, w: VectorField, grid: Grid) -> LinearOperator:
    """Oseen operator K with (Kφ)·ψ = trilinear(ρ, w, φ, ψ); rows index ψ."""
    _check_convection_inputs(rho, w, grid)
    st = _stencils(grid)
    P = st.prolong
    c = sparse.diags(st.weights * rho.values.ravel())
    w1 = sparse.diags(w.v1.ravel())
    w2 = sparse.diags(w.v2.ravel())
    along_v1 = (w1 @ st.d12 + w2 @ st.d22) @ P  # ψ ↦ (w·∇)(∂₂ψ)
    along_v2 = (w1 @ st.d11 + w2 @ st.d12) @ P  # ψ ↦ (w·∇)(∂₁ψ)
    matrix = along_v1.T @ c @ (st.d2 @ P) + along_v2.T @ c @ (st.d1 @ P)
    return _wrap(grid, matrix)


def trilinear(
    rho: ScalarField,
    w: VectorField,
    phi: ScalarField,
    psi: ScalarField,
    phi_boundary: Optional[NormalSlopes] = None,
    psi_boundary: Optional[NormalSlopes] = None,
) -> float:
    grid = rho.grid
    _check_convection_inputs(rho, w, grid)
    zero = NormalSlopes.zero(grid)
    v = grad_perp(phi, phi_boundary or zero).values
    d = _ghost_derivatives(psi.values, grid, psi_boundary or zero)
    q = grid.quadrature_weights() * rho.values
    a = w.v1 * d["d12"] + w.v2 * d["d22"]
    b = w.v1 * d["d11"] + w.v2 * d["d12"]
    return float(np.sum(q * (v[0] * a - v[1] * b)))


def convection_functional(
    rho: ScalarField, w: VectorField, phi: ScalarField, boundary: Optional[NormalSlopes] = None
) -> np.ndarray:
    """Vector v on the free dofs with v·ψ = trilinear(ρ, w, φ, ψ) for clamped ψ."""
    grid = rho.grid
    _check_convection_inputs(rho, w, grid)
    st = _stencils(grid)
    v = grad_perp(phi, boundary or NormalSlopes.zero(grid)).values
    c = st.weights * rho.values.ravel()
    w1, w2 = w.v1.ravel(), w.v2.ravel()
    first = c * v[0].ravel()
    second = c * v[1].ravel()
    out = st.d12.T @ (w1 * first) + st.d22.T @ (w2 * first)
    out -= st.d11.T @ (w1 * second) + st.d12.T @ (w2 * second)
    return st.prolong.T @ out


def force_functional(f: VectorField) -> np.ndarray:
    """Vector v on the free dofs with v·ψ = Σ f·∇⊥ψ h1h2."""
    st = _stencils(f.grid)
    q1 = st.weights * f.v1.ravel()
    q2 = st.weights * f.v2.ravel()
    return st.prolong.T @ (st.d2.T @ q1 - st.d1.T @ q2)
