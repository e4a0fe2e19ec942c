"""
Core data types of the stream-function solver: the node grid, node-collocated
fields, piecewise-linear closure tables for the density law ρ = η(Φ) and the
viscosity law μ = b(ρ), the full problem description and the run report.

All arrays are indexed [i1, i2] (x₁ index first) and flattened in C order,
so the x₂ index runs fastest. Lengths are in domain units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, validator

from vvs_backend import settings

from .errors import ClosureError

ArrayLike = Union[float, np.ndarray]


# ---------------------------------------------------------------------------
# 1. Grid
# ---------------------------------------------------------------------------
MIN_NODES = 5  # two boundary layers plus interior for the fourth-order stencils


@dataclass(frozen=True)
class Grid:
    """Uniform node lattice over a rectangle, optionally periodic in x₁.

    With ``periodic_x1`` the last node column is a copy of column 0.
    """

    nx: int
    ny: int
    x1_min: float = 0.0
    x1_max: float = 1.0
    x2_min: float = 0.0
    x2_max: float = 1.0
    periodic_x1: bool = False

    def __post_init__(self):
        if self.nx < MIN_NODES or self.ny < MIN_NODES:
            raise ValueError(
                f"Grid needs at least {MIN_NODES} nodes per axis, got nx={self.nx}, ny={self.ny}."
            )
        if not (self.x1_max > self.x1_min and self.x2_max > self.x2_min):
            raise ValueError(
                "Domain bounds must satisfy x1_min < x1_max and x2_min < x2_max, got "
                f"[{self.x1_min}, {self.x1_max}] x [{self.x2_min}, {self.x2_max}]."
            )

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def h1(self) -> float:
        return (self.x1_max - self.x1_min) / (self.nx - 1)

    @property
    def h2(self) -> float:
        return (self.x2_max - self.x2_min) / (self.ny - 1)

    @property
    def min_spacing(self) -> float:
        return min(self.h1, self.h2)

    @property
    def min_extent(self) -> float:
        return min(self.x1_max - self.x1_min, self.x2_max - self.x2_min)

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(self.x1_min, self.x1_max, self.nx)

    @property
    def x2(self) -> np.ndarray:
        return np.linspace(self.x2_min, self.x2_max, self.ny)

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def axis_weights(self) -> Tuple[np.ndarray, np.ndarray]:
        """Trapezoidal weights per axis, without the spacing factor."""
        wx = np.ones(self.nx)
        wy = np.ones(self.ny)
        wx[0] = wx[-1] = 0.5  # on a periodic axis the two halves make one node
        wy[0] = wy[-1] = 0.5
        return wx, wy

    def quadrature_weights(self) -> np.ndarray:
        wx, wy = self.axis_weights()
        return np.outer(wx, wy) * self.h1 * self.h2

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[:, 0] = mask[:, -1] = True
        if not self.periodic_x1:
            mask[0, :] = mask[-1, :] = True
        return mask

    def interior_mask(self, layers: int = 1) -> np.ndarray:
        """Nodes at least ``layers`` rows away from every wall."""
        mask = np.zeros(self.shape, dtype=bool)
        if self.periodic_x1:
            mask[:, layers : self.ny - layers] = True
        else:
            mask[layers : self.nx - layers, layers : self.ny - layers] = True
        return mask

    def enforce_periodic(self, values: np.ndarray) -> np.ndarray:
        if self.periodic_x1:
            values = np.array(values, dtype=float, copy=True)
            values[-1, ...] = values[0, ...]
        return values

    def boundary_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        """Boundary nodes in traversal order (tangent τ = (n₂, −n₁)).

        On a rectangle the traversal starts at the (x1_min, x2_min) corner and
        runs up the left side, along the top, down the right side and back
        along the bottom, visiting every boundary node once. On a periodic
        strip it lists the bottom wall then the top wall, distinct columns only.
        """
        nx, ny = self.nx, self.ny
        if self.periodic_x1:
            cols = np.arange(nx - 1)
            i = np.concatenate([cols, cols])
            j = np.concatenate([np.zeros(nx - 1, int), np.full(nx - 1, ny - 1)])
            return i, j
        left_j = np.arange(0, ny - 1)
        top_i = np.arange(0, nx - 1)
        right_j = np.arange(ny - 1, 0, -1)
        bottom_i = np.arange(nx - 1, 0, -1)
        i = np.concatenate([np.zeros_like(left_j), top_i, np.full_like(right_j, nx - 1), bottom_i])
        j = np.concatenate([left_j, np.full_like(top_i, ny - 1), right_j, np.zeros_like(bottom_i)])
        return i, j

    @property
    def boundary_node_count(self) -> int:
        if self.periodic_x1:
            return 2 * (self.nx - 1)
        return 2 * (self.nx - 1) + 2 * (self.ny - 1)


# ---------------------------------------------------------------------------
# 2. Fields
# ---------------------------------------------------------------------------
def _frozen_values(values: np.ndarray, expected: Tuple[int, ...], kind: str) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.shape != expected:
        raise ValueError(f"{kind} expects values of shape {expected}, got {arr.shape}.")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{kind} values must be finite.")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_values(self.values, self.grid.shape, "ScalarField"))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "ScalarField":
        x1, x2 = grid.coordinates()
        values = np.broadcast_to(fn(x1, x2), grid.shape)
        return cls(grid, grid.enforce_periodic(values))

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return self.with_values(self.values - other.values)

    def scaled(self, factor: float) -> "ScalarField":
        return self.with_values(factor * self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Two components per node, stored as values[c, i1, i2]."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", _frozen_values(self.values, (2,) + self.grid.shape, "VectorField")
        )

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((2,) + grid.shape))

    @classmethod
    def uniform(cls, grid: Grid, v1: float, v2: float) -> "VectorField":
        values = np.empty((2,) + grid.shape)
        values[0] = v1
        values[1] = v2
        return cls(grid, values)

    @classmethod
    def from_components(cls, grid: Grid, v1: np.ndarray, v2: np.ndarray) -> "VectorField":
        return cls(grid, np.stack([np.broadcast_to(v1, grid.shape), np.broadcast_to(v2, grid.shape)]))

    @property
    def v1(self) -> np.ndarray:
        return self.values[0]

    @property
    def v2(self) -> np.ndarray:
        return self.values[1]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.values[0], self.values[1])

    def scaled(self, factor: float) -> "VectorField":
        return VectorField(self.grid, factor * self.values)


@dataclass(frozen=True, eq=False)
class TensorField:
    """2×2 entries per node, stored as values[a, b, i1, i2]."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", _frozen_values(self.values, (2, 2) + self.grid.shape, "TensorField")
        )

    def trace(self) -> np.ndarray:
        return self.values[0, 0] + self.values[1, 1]


# ---------------------------------------------------------------------------
# 3. Closure tables  (ρ = η(Φ), μ = b(ρ))
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ClosureTable:
    """Clamped piecewise-linear map y ↦ value.

    ``lo_clamp``/``hi_clamp`` default to the end values; they must equal them,
    otherwise the closure would jump at the ends of the table.
    """

    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]
    lo_clamp: Optional[float] = None
    hi_clamp: Optional[float] = None
    declared_min: Optional[float] = None
    declared_max: Optional[float] = None

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(bp) == 0 or len(bp) != len(vals):
            raise ClosureError(
                f"A closure table needs matching non-empty breakpoints and values, "
                f"got {len(bp)} breakpoints and {len(vals)} values."
            )
        if not all(math.isfinite(v) for v in bp + vals):
            raise ClosureError("Closure breakpoints and values must be finite.")
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise ClosureError(f"Closure breakpoints must be strictly increasing, got {bp}.")

        for name, default in (
            ("lo_clamp", vals[0]),
            ("hi_clamp", vals[-1]),
            ("declared_min", min(vals)),
            ("declared_max", max(vals)),
        ):
            if getattr(self, name) is None:
                object.__setattr__(self, name, default)
            else:
                object.__setattr__(self, name, float(getattr(self, name)))

        if self.lo_clamp != vals[0] or self.hi_clamp != vals[-1]:
            raise ClosureError(
                "Clamp values must equal the end values of the table so that evaluation "
                f"stays continuous (lo_clamp={self.lo_clamp}, hi_clamp={self.hi_clamp})."
            )
        if self.declared_min > self.declared_max:
            raise ClosureError("declared_min exceeds declared_max.")
        if min(vals) < self.declared_min or max(vals) > self.declared_max:
            raise ClosureError(
                f"Table values span [{min(vals)}, {max(vals)}], outside the declared range "
                f"[{self.declared_min}, {self.declared_max}]."
            )

    # ----- Constructors
    @classmethod
    def constant(cls, value: float, declared_min: Optional[float] = None,
                 declared_max: Optional[float] = None) -> "ClosureTable":
        return cls((0.0,), (value,), declared_min=declared_min, declared_max=declared_max)

    @classmethod
    def step(cls, threshold: float, low: float, high: float, width: float,
             declared_min: Optional[float] = None,
             declared_max: Optional[float] = None) -> "ClosureTable":
        """Step from ``low`` (y ≤ threshold) to ``high``, ramped linearly over ``width``."""
        if not width > 0:
            raise ClosureError(f"Ramp width of a step closure must be positive, got {width}.")
        half = 0.5 * width
        return cls(
            (threshold - half, threshold + half),
            (low, high),
            declared_min=declared_min,
            declared_max=declared_max,
        )

    # ----- Evaluation
    def evaluate(self, y: ArrayLike) -> ArrayLike:
        return np.interp(y, self.breakpoints, self.values, left=self.lo_clamp, right=self.hi_clamp)

    @property
    def lipschitz(self) -> float:
        """Smallest L with |η(y) − η(y′)| ≤ L|y − y′|."""
        if len(self.breakpoints) < 2:
            return 0.0
        slopes = np.diff(self.values) / np.diff(self.breakpoints)
        return float(np.max(np.abs(slopes)))

    def inverse(self, level: float) -> float:
        """Preimage of ``level`` on the ramp part of a strictly monotone table."""
        vals = np.asarray(self.values)
        bp = np.asarray(self.breakpoints)
        diffs = np.diff(vals)
        if len(vals) < 2 or not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ClosureError("Only strictly monotone tables can be inverted.")
        if diffs[0] < 0:
            vals, bp = vals[::-1], bp[::-1]
        if not vals[0] <= level <= vals[-1]:
            raise ClosureError(f"Level {level} lies outside the table range [{vals[0]}, {vals[-1]}].")
        return float(np.interp(level, vals, bp))

    def translated(self, shift: float) -> "ClosureTable":
        return replace(self, breakpoints=tuple(b + shift for b in self.breakpoints))

    # ----- Role checks
    def check_viscosity(self) -> None:
        if not self.declared_min > 0:
            raise ClosureError(
                f"A viscosity law needs a positive lower bound, got declared_min={self.declared_min}."
            )

    def check_density(self) -> None:
        if self.declared_min < 0:
            raise ClosureError(
                f"A density law must be nonnegative, got declared_min={self.declared_min}."
            )


def closure_eval(table: ClosureTable, y: ArrayLike) -> ArrayLike:
    """Evaluate a closure table, rejecting non-finite arguments."""
    arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ClosureError("Closure evaluation received a non-finite argument.")
    out = table.evaluate(arr)
    if np.ndim(out) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# 4. Problem description
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Everything a stream solve needs.

    ``u0`` holds one velocity pair per boundary node in the order of
    :meth:`Grid.boundary_indices`. ``strip_flux`` is the jump of the stream
    function from the bottom wall to the top wall and is only read on
    x₁-periodic strips.
    """

    grid: Grid
    u0: np.ndarray
    force: VectorField
    eta: ClosureTable
    b: ClosureTable
    C0: float = 0.0
    strip_flux: float = 0.0
    delta: Optional[float] = None
    eps_mollify: Optional[float] = None
    omega: float = settings.DEFAULT_OMEGA
    tol_rel: float = settings.DEFAULT_TOL_REL
    tol_abs: float = settings.DEFAULT_TOL_ABS
    max_iter: int = settings.DEFAULT_MAX_ITER
    flux_tol: float = settings.DEFAULT_FLUX_TOL
    name: str = field(default="case")

    def __post_init__(self):
        grid = self.grid
        u0 = np.array(self.u0, dtype=float, copy=True)
        if u0.shape != (grid.boundary_node_count, 2):
            raise ValueError(
                f"Boundary velocity must list {grid.boundary_node_count} (u1, u2) pairs, "
                f"got an array of shape {u0.shape}."
            )
        if not np.all(np.isfinite(u0)):
            raise ValueError("Boundary velocity samples must be finite.")
        u0.setflags(write=False)
        object.__setattr__(self, "u0", u0)
        if self.force.grid != grid:
            raise ValueError("Force field lives on a different grid than the problem.")

        if self.delta is None:
            object.__setattr__(self, "delta", settings.DELTA_FRACTION * grid.min_extent)
        if self.eps_mollify is None:
            object.__setattr__(self, "eps_mollify", settings.EPS_SPACINGS * grid.min_spacing)

        if not self.delta > 0:
            raise ValueError(f"Cutoff width delta must be positive, got {self.delta}.")
        if not self.eps_mollify >= 0:
            raise ValueError(f"Mollifier radius must be nonnegative, got {self.eps_mollify}.")
        if not 0 < self.omega <= 1:
            raise ValueError(f"Relaxation must lie in (0, 1], got {self.omega}.")
        if not (self.tol_rel > 0 and self.tol_abs > 0 and self.flux_tol > 0):
            raise ValueError("Tolerances must be positive.")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}.")
        self.eta.check_density()
        self.b.check_viscosity()

    @property
    def mu_lower(self) -> float:
        return self.b.declared_min

    @property
    def mu_upper(self) -> float:
        return self.b.declared_max

    @property
    def rho_upper(self) -> float:
        return self.eta.declared_max

    def with_changes(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# 5. Run report
# ---------------------------------------------------------------------------
class RunReport(BaseModel):
    """Iteration history and diagnostics of one stream solve."""

    iterations: int = Field(0, ge=0, description="Number of Oseen steps taken")
    update_norms: List[float] = Field(
        default_factory=list, description="‖φ_{k+1} − φ_k‖_{H²} per iteration"
    )
    energy: List[float] = Field(default_factory=list, description="⟨φ_k, φ_k⟩ with μ_k")
    linear_residuals: List[float] = Field(
        default_factory=list, description="Relative residual of each sparse solve"
    )
    relaxation: List[float] = Field(default_factory=list, description="ω used per iteration")
    contraction_ratios: List[float] = Field(
        default_factory=list, description="Ratio of consecutive update norms"
    )
    apriori_bound: Optional[float] = Field(None, description="Energy bound for the clamped part")
    apriori_ok: bool = Field(True, description="Final energy below bound × safety factor")
    converged: bool = False
    wall_ms: float = Field(0.0, ge=0)
    mu_min: Optional[float] = None
    mu_max: Optional[float] = None
    rho_max: Optional[float] = None

    @validator("update_norms", "energy", "linear_residuals", "contraction_ratios", each_item=True)
    def _finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("Recorded norms must be finite.")
        return v


# ---------------------------------------------------------------------------
# 6. Discrete norms
# ---------------------------------------------------------------------------
def discrete_norms(phi: ScalarField, boundary=None) -> Tuple[float, float, float]:
    """Trapezoidal L² norm and H¹/H² seminorms.

    ``boundary`` selects the ghost convention of the difference operators
    (see :func:`vvs_solver.operators.second_derivatives`).
    """
    from .operators import first_derivatives, second_derivatives

    w = phi.grid.quadrature_weights()
    d1, d2 = first_derivatives(phi, boundary)
    p11, p22, p12 = second_derivatives(phi, boundary)
    l2 = math.sqrt(float(np.sum(w * phi.values**2)))
    h1 = math.sqrt(float(np.sum(w * (d1**2 + d2**2))))
    h2 = math.sqrt(float(np.sum(w * (p11.values**2 + 2.0 * p12.values**2 + p22.values**2))))
    return l2, h1, h2


def h2_norm(phi: ScalarField, boundary=None) -> float:
    l2, h1, h2 = discrete_norms(phi, boundary)
    return math.sqrt(l2**2 + h1**2 + h2**2)


def l2_norm(values: np.ndarray, grid: Grid) -> float:
    return math.sqrt(float(np.sum(grid.quadrature_weights() * values**2)))
