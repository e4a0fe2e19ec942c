"""
Pydantic models for JSON case files and for the tables written by the CLI.
"""
from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, root_validator, validator

from vvs_backend import settings

from .fields import ClosureTable, Grid, ProblemSpec, VectorField


# ---------------------------------------------------------------------------
# 1. Case configuration
# ---------------------------------------------------------------------------
class DomainConfig(BaseModel):
    x1_min: float = 0.0
    x1_max: float = 1.0
    x2_min: float = 0.0
    x2_max: float = 1.0

    @root_validator
    def _ordered(cls, values):
        if not (values.get("x1_min", 0.0) < values.get("x1_max", 1.0)):
            raise ValueError("domain needs x1_min < x1_max")
        if not (values.get("x2_min", 0.0) < values.get("x2_max", 1.0)):
            raise ValueError("domain needs x2_min < x2_max")
        return values


class GridConfig(BaseModel):
    nx: int = Field(..., ge=5, description="Nodes along x1, boundary nodes included")
    ny: int = Field(..., ge=5, description="Nodes along x2, boundary nodes included")
    periodic_x1: bool = False


class SideVelocities(BaseModel):
    """Constant velocity per wall; the bottom and top walls own the corners."""

    bottom: Tuple[float, float] = (0.0, 0.0)
    top: Tuple[float, float] = (0.0, 0.0)
    left: Tuple[float, float] = (0.0, 0.0)
    right: Tuple[float, float] = (0.0, 0.0)


class BoundaryVelocity(BaseModel):
    sides: Optional[SideVelocities] = None
    nodes: Optional[List[Tuple[float, float]]] = Field(
        None, description="(u1, u2) per boundary node in traversal order"
    )
    csv: Optional[str] = Field(None, description="CSV with columns u1,u2 in traversal order")

    @root_validator
    def _one_source(cls, values):
        given = [k for k in ("sides", "nodes", "csv") if values.get(k) is not None]
        if len(given) > 1:
            raise ValueError(f"u0 takes exactly one of sides, nodes or csv, got {given}")
        if not given:
            values["sides"] = SideVelocities()
        return values

    def samples(self, grid: Grid, base_dir: Path) -> np.ndarray:
        if self.nodes is not None:
            return np.asarray(self.nodes, dtype=float)
        if self.csv is not None:
            frame = pd.read_csv(base_dir / self.csv)
            return frame[["u1", "u2"]].to_numpy(dtype=float)
        i, j = grid.boundary_indices()
        sides = self.sides
        out = np.empty((i.size, 2))
        for k, (ii, jj) in enumerate(zip(i, j)):
            if jj == 0:
                out[k] = sides.bottom
            elif jj == grid.ny - 1:
                out[k] = sides.top
            elif ii == 0:
                out[k] = sides.left
            else:
                out[k] = sides.right
        return out


class BoundaryConfig(BaseModel):
    u0: BoundaryVelocity = Field(default_factory=BoundaryVelocity)
    C0: float = 0.0
    flux: float = Field(0.0, description="Stream-function jump between the walls of a periodic strip")


class ForceConfig(BaseModel):
    f1: float = 0.0
    f2: float = 0.0
    csv: Optional[str] = Field(None, description="CSV with columns x1,x2,v1,v2, one row per node")

    def field(self, grid: Grid, base_dir: Path) -> VectorField:
        if self.csv is None:
            return VectorField.uniform(grid, self.f1, self.f2)
        frame = pd.read_csv(base_dir / self.csv).sort_values(["x1", "x2"], kind="mergesort")
        if len(frame) != grid.size:
            raise ValueError(f"Force table has {len(frame)} rows, the grid has {grid.size} nodes.")
        x1, x2 = grid.coordinates()
        coords = frame[["x1", "x2"]].to_numpy(dtype=float)
        if not np.allclose(coords, np.stack([x1.ravel(), x2.ravel()], axis=1), atol=1e-9):
            raise ValueError("Force table coordinates do not match the grid nodes.")
        v1 = frame["v1"].to_numpy(dtype=float).reshape(grid.shape)
        v2 = frame["v2"].to_numpy(dtype=float).reshape(grid.shape)
        return VectorField.from_components(grid, v1, v2)


class StepConfig(BaseModel):
    threshold: float
    low: float
    high: float
    width: Optional[float] = Field(None, gt=0, description="Ramp width; defaults to two grid spacings")


class ClosureConfig(BaseModel):
    breakpoints: Optional[List[float]] = None
    values: Optional[List[float]] = None
    declared_min: Optional[float] = None
    declared_max: Optional[float] = None
    step: Optional[StepConfig] = None

    @root_validator
    def _table_or_step(cls, values):
        has_table = values.get("breakpoints") is not None or values.get("values") is not None
        if has_table == (values.get("step") is not None):
            raise ValueError("a closure is either {breakpoints, values} or {step}")
        return values

    def table(self, grid: Grid) -> ClosureTable:
        if self.step is not None:
            width = self.step.width or settings.STEP_WIDTH_SPACINGS * grid.min_spacing
            return ClosureTable.step(
                self.step.threshold,
                self.step.low,
                self.step.high,
                width,
                declared_min=self.declared_min,
                declared_max=self.declared_max,
            )
        return ClosureTable(
            tuple(self.breakpoints or ()),
            tuple(self.values or ()),
            declared_min=self.declared_min,
            declared_max=self.declared_max,
        )


class ClosuresConfig(BaseModel):
    eta: ClosureConfig
    b: ClosureConfig


class SolverConfig(BaseModel):
    delta: Optional[float] = Field(None, gt=0, description="Cutoff width of the boundary lift")
    eps: Optional[float] = Field(None, ge=0, description="Mollifier radius")
    omega: float = Field(settings.DEFAULT_OMEGA, gt=0, le=1)
    tol_rel: float = Field(settings.DEFAULT_TOL_REL, gt=0)
    tol_abs: float = Field(settings.DEFAULT_TOL_ABS, gt=0)
    max_iter: int = Field(settings.DEFAULT_MAX_ITER, ge=1)
    flux_tol: float = Field(settings.DEFAULT_FLUX_TOL, gt=0)


class CaseConfig(BaseModel):
    name: Optional[str] = None
    domain: DomainConfig = Field(default_factory=DomainConfig)
    grid: GridConfig
    boundary: BoundaryConfig = Field(default_factory=BoundaryConfig)
    force: ForceConfig = Field(default_factory=ForceConfig)
    closures: ClosuresConfig
    solver: SolverConfig = Field(default_factory=SolverConfig)

    class Config:
        extra = "forbid"

    def to_problem(self, base_dir: Path, default_name: str = "case") -> ProblemSpec:
        d = self.domain
        grid = Grid(
            self.grid.nx, self.grid.ny, d.x1_min, d.x1_max, d.x2_min, d.x2_max, self.grid.periodic_x1
        )
        s = self.solver
        return ProblemSpec(
            grid=grid,
            u0=self.boundary.u0.samples(grid, base_dir),
            force=self.force.field(grid, base_dir),
            eta=self.closures.eta.table(grid),
            b=self.closures.b.table(grid),
            C0=self.boundary.C0,
            strip_flux=self.boundary.flux,
            delta=s.delta,
            eps_mollify=s.eps,
            omega=s.omega,
            tol_rel=s.tol_rel,
            tol_abs=s.tol_abs,
            max_iter=s.max_iter,
            flux_tol=s.flux_tol,
            name=self.name or default_name,
        )


def load_case(path: Path) -> ProblemSpec:
    """Parse and validate a JSON case file; relative CSV paths resolve next to it."""
    path = Path(path)
    config = CaseConfig.parse_file(path)
    return config.to_problem(path.parent, default_name=path.stem)


# ---------------------------------------------------------------------------
# 2. Output tables
# ---------------------------------------------------------------------------
class MMSLevel(BaseModel):
    n: int
    h: float
    error: float = Field(..., ge=0, description="Relative L2 error of the stream function")
    iterations: int
    converged: bool
    wall_ms: float


class MMSStudy(BaseModel):
    case: str
    levels: List[MMSLevel]
    orders: List[float] = Field(..., description="Observed order between consecutive levels")
    min_order: float


class EpsStudyRow(BaseModel):
    eps: float = Field(..., ge=0)
    change: float = Field(..., description="Relative L2 distance to the smallest-eps solution")
    error: float = Field(..., description="Relative L2 error against the manufactured solution")


class SymmetricReport(BaseModel):
    family: str
    constants: Dict[str, float] = Field(default_factory=dict)
    residual: float = Field(..., description="Scaled residual of the 1D stream-function equation")
    profile_csv: Optional[str] = None


class CriterionResult(BaseModel):
    criterion: int
    name: str
    passed: bool
    detail: str = ""
    wall_ms: float = 0.0


class VerificationSummary(BaseModel):
    results: List[CriterionResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @validator("results")
    def _sorted(cls, v):
        return sorted(v, key=lambda r: r.criterion)
