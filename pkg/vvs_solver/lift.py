"""
Boundary stream data and the lifted stream function.

The boundary velocity u₀ is integrated along the boundary (tangent
τ = (n₂, −n₁)) into stream-function values Φ₀, extended into a collar of
width δ with a smoothstep cutoff, and the coefficient fields are smoothed by a
truncated-Gaussian mollifier.
"""
from __future__ import annotations

import math
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from vvs_backend import settings

from .errors import FluxViolationError
from .fields import Grid, ScalarField
from .operators import NormalSlopes


# ---------------------------------------------------------------------------
# 1. Boundary trace
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Φ₀ at the boundary nodes, in the traversal order of the grid.

    ``slopes`` carries ∂Φ₀/∂n = u₀·τ on each wall so the lifted stream
    function reproduces the tangential velocity as well as the normal one.
    """

    grid: Grid
    arc: np.ndarray
    values: np.ndarray
    C0: float
    slopes: NormalSlopes
    closure_defect: float = 0.0

    def on_grid(self) -> np.ndarray:
        """Trace values scattered onto a node array (zero off the boundary)."""
        out = np.zeros(self.grid.shape)
        i, j = self.grid.boundary_indices()
        out[i, j] = self.values
        return self.grid.enforce_periodic(out)

    def arc_on_grid(self) -> np.ndarray:
        out = np.full(self.grid.shape, np.inf)
        i, j = self.grid.boundary_indices()
        out[i, j] = self.arc
        if self.grid.periodic_x1:
            out[-1, :] = out[0, :]
        return out


def _check_samples(u0_samples: np.ndarray, grid: Grid) -> np.ndarray:
    u0 = np.asarray(u0_samples, dtype=float)
    if u0.shape != (grid.boundary_node_count, 2):
        raise ValueError(
            f"Boundary samples must cover all {grid.boundary_node_count} boundary nodes "
            f"with (u1, u2) pairs, got shape {u0.shape}."
        )
    return u0


def _boundary_points(grid: Grid) -> np.ndarray:
    i, j = grid.boundary_indices()
    return np.stack([grid.x1[i], grid.x2[j]], axis=1)


def _segment_increments(u0: np.ndarray, grid: Grid) -> np.ndarray:
    """∫ u₀·n ds over each segment between consecutive traversal nodes (loop)."""
    pts = _boundary_points(grid)
    nxt = np.roll(pts, -1, axis=0)
    step = nxt - pts
    length = np.hypot(step[:, 0], step[:, 1])
    tangent = step / length[:, None]
    normal = np.stack([-tangent[:, 1], tangent[:, 0]], axis=1)  # from τ = (n₂, −n₁)
    u_mid = 0.5 * (u0 + np.roll(u0, -1, axis=0))
    return np.sum(u_mid * normal, axis=1) * length


def _wall_flux_increments(u0: np.ndarray, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """Per-wall increments of −∫u₂ dx₁ on a periodic strip (bottom, top)."""
    m = grid.nx - 1
    out = []
    for wall in (u0[:m], u0[m:]):
        u2 = wall[:, 1]
        out.append(-0.5 * (u2 + np.roll(u2, -1)) * grid.h1)
    return out[0], out[1]


def wall_fluxes(u0_samples, grid: Grid) -> List[float]:
    """Flux ∮u₀·n ds of each connected boundary component."""
    u0 = _check_samples(u0_samples, grid)
    if grid.periodic_x1:
        bottom, top = _wall_flux_increments(u0, grid)
        # outward normals: −e₂ at the bottom, +e₂ at the top
        return [float(np.sum(bottom)), float(-np.sum(top))]
    return [float(np.sum(_segment_increments(u0, grid)))]


def check_flux(u0_samples, grid: Grid) -> float:
    """Trapezoidal ∮u₀·n ds; on a strip, the wall with the largest |flux|."""
    fluxes = wall_fluxes(u0_samples, grid)
    return max(fluxes, key=abs)


def wall_velocity(u0: np.ndarray, grid: Grid) -> np.ndarray:
    """Boundary samples scattered onto a (2, nx, ny) array, zero inside."""
    out = np.zeros((2,) + grid.shape)
    i, j = grid.boundary_indices()
    out[0, i, j] = u0[:, 0]
    out[1, i, j] = u0[:, 1]
    if grid.periodic_x1:
        out[:, -1, :] = out[:, 0, :]
    return out


def boundary_stream(
    u0_samples,
    grid: Grid,
    C0: float = 0.0,
    flux_tol: float = settings.DEFAULT_FLUX_TOL,
    strip_flux: float = 0.0,
) -> BoundaryTrace:
    """Φ₀(σ) = C₀ − ∫₀^σ u₀·n ds along the boundary.

    On an x₁-periodic strip each wall is integrated in +x₁ from its first
    column; the top wall starts at C₀ + ``strip_flux``.
    """
    u0 = _check_samples(u0_samples, grid)
    for k, flux in enumerate(wall_fluxes(u0, grid)):
        if abs(flux) > flux_tol:
            where = "boundary" if not grid.periodic_x1 else ("bottom wall", "top wall")[k]
            raise FluxViolationError(flux, flux_tol, where)

    slopes = NormalSlopes.from_velocity(grid, wall_velocity(u0, grid))
    if grid.periodic_x1:
        m = grid.nx - 1
        bottom, top = _wall_flux_increments(u0, grid)
        x = grid.x1[:m] - grid.x1_min
        values = np.concatenate([
            C0 + np.r_[0.0, np.cumsum(bottom[:-1])],
            C0 + strip_flux + np.r_[0.0, np.cumsum(top[:-1])],
        ])
        arc = np.concatenate([x, x + (grid.x1_max - grid.x1_min)])
        defect = max(abs(np.sum(bottom)), abs(np.sum(top)))
    else:
        inc = _segment_increments(u0, grid)
        values = C0 - np.r_[0.0, np.cumsum(inc[:-1])]
        pts = _boundary_points(grid)
        seg = np.hypot(*np.diff(pts, axis=0).T)
        arc = np.r_[0.0, np.cumsum(seg)]
        defect = abs(float(np.sum(inc)))

    logging.info(f"Boundary trace built: {values.size} nodes, closure defect {defect:.3e}")
    return BoundaryTrace(grid, arc, values, float(C0), slopes, float(defect))


# ---------------------------------------------------------------------------
# 2. Cutoff and lift
# ---------------------------------------------------------------------------
def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return 1.0 - (3.0 * t**2 - 2.0 * t**3)


def _wall_distances(grid: Grid) -> List[np.ndarray]:
    """Distances to the left, top, right and bottom walls (strip: top, bottom)."""
    x1, x2 = grid.coordinates()
    top = grid.x2_max - x2
    bottom = x2 - grid.x2_min
    if grid.periodic_x1:
        return [top, bottom]
    return [x1 - grid.x1_min, top, grid.x1_max - x1, bottom]


def boundary_distance(grid: Grid) -> np.ndarray:
    return np.min(np.stack(_wall_distances(grid)), axis=0)


def cutoff(grid: Grid, delta: float) -> ScalarField:
    """ζ(x; δ): 1 on the boundary, 0 beyond distance δ, smoothstep in between."""
    if not delta > 0:
        raise ValueError(f"Cutoff width must be positive, got {delta}.")
    return ScalarField(grid, _smoothstep(boundary_distance(grid) / delta))


def _nearest_wall_data(trace: BoundaryTrace) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distance, trace value and normal slope at the nearest boundary node.

    Ties between walls go to the candidate with the smallest arc coordinate.
    """
    grid = trace.grid
    nx, ny = grid.shape
    values = trace.on_grid()
    arc = trace.arc_on_grid()
    s = trace.slopes
    rows = np.arange(nx)[:, None] * np.ones((1, ny), int)
    cols = np.ones((nx, 1), int) * np.arange(ny)[None, :]

    top = (rows, np.full_like(cols, ny - 1), np.broadcast_to(s.x2_hi[:, None], grid.shape))
    bottom = (rows, np.zeros_like(cols), np.broadcast_to(s.x2_lo[:, None], grid.shape))
    if grid.periodic_x1:
        candidates = [top, bottom]
    else:
        left = (np.zeros_like(rows), cols, np.broadcast_to(s.x1_lo[None, :], grid.shape))
        right = (np.full_like(rows, nx - 1), cols, np.broadcast_to(s.x1_hi[None, :], grid.shape))
        candidates = [left, top, right, bottom]

    dist = np.stack(_wall_distances(grid))
    sigma = np.stack([arc[pi, pj] for pi, pj, _ in candidates])
    trace_val = np.stack([values[pi, pj] for pi, pj, _ in candidates])
    slope = np.stack([g for _, _, g in candidates])

    dmin = np.min(dist, axis=0)
    tol = 1e-12 * max(grid.x1_max - grid.x1_min, grid.x2_max - grid.x2_min)
    eligible = dist <= dmin + tol
    choice = np.argmin(np.where(eligible, sigma, np.inf), axis=0)
    pick = lambda arr: np.take_along_axis(arr, choice[None], axis=0)[0]  # noqa: E731
    return dmin, pick(trace_val), pick(slope)


def build_lift(trace: BoundaryTrace, grid: Grid, delta: float) -> ScalarField:
    """Φ₀^δ = [Φ₀(p) − d·∂ₙΦ₀(p)]·ζ with p the nearest boundary node."""
    if trace.grid != grid:
        raise ValueError("Boundary trace belongs to a different grid.")
    zeta = cutoff(grid, delta).values
    dist, phi0, slope = _nearest_wall_data(trace)
    extension = phi0 - dist * slope
    return ScalarField(grid, grid.enforce_periodic(extension * zeta))


# ---------------------------------------------------------------------------
# 3. Mollifier
# ---------------------------------------------------------------------------
def gaussian_kernel(eps: float, h: float) -> np.ndarray:
    """Normalized truncated Gaussian (σ = ε/2) on the nodes within radius ε."""
    radius = int(math.floor(eps / h + 1e-9))
    if radius == 0:
        return np.ones(1)
    offsets = np.arange(-radius, radius + 1) * h
    sigma = 0.5 * eps
    weights = np.exp(-0.5 * (offsets / sigma) ** 2)
    return weights / weights.sum()


def _smooth_axis(values: np.ndarray, kernel: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    if kernel.size == 1:
        return values
    if periodic:
        core = ndimage.correlate1d(values[:-1], kernel, axis=axis, mode="wrap")
        return np.concatenate([core, core[:1]], axis=0)
    num = ndimage.correlate1d(values, kernel, axis=axis, mode="constant", cval=0.0)
    den = ndimage.correlate1d(np.ones_like(values), kernel, axis=axis, mode="constant", cval=0.0)
    return num / den


def mollify(field: ScalarField, eps: float) -> ScalarField:
    """Separable truncated-Gaussian smoothing; weights renormalized at walls."""
    if eps < 0:
        raise ValueError(f"Mollifier radius must be nonnegative, got {eps}.")
    if eps == 0:
        return field
    grid = field.grid
    out = _smooth_axis(field.values, gaussian_kernel(eps, grid.h1), 0, grid.periodic_x1)
    out = _smooth_axis(out, gaussian_kernel(eps, grid.h2), 1, False)
    return field.with_values(out)
