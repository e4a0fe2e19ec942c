"""
Acceptance suite: each check returns a CriterionResult and never raises.
"""
from __future__ import annotations

import filecmp
import logging
import math
import tempfile
import time
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import linalg as splinalg

from .fields import ClosureTable, Grid, ProblemSpec, ScalarField, VectorField, closure_eval, h2_norm, l2_norm
from .lift import wall_velocity
from .manufactured import DENSITY_LAW, P, convergence_study, manufactured_case
from .operators import (
    NormalSlopes,
    assemble_energy_operator,
    clamped_space,
    discrete_laplacian,
    energy_product,
    grad_perp,
    trilinear,
)
from .picard import solve_stream
from .reconstruct import run_case, write_state_csv
from .schemas import CriterionResult, VerificationSummary
from .symmetric import (
    PiecewiseProfile,
    concentric_constants,
    concentric_profile,
    couette_constants,
    couette_profile,
    couette_strip_case,
    radial_bvp,
    radial_example,
)

SEED = 20240607

Check = Callable[[], Tuple[bool, str]]


# ---------------------------------------------------------------------------
# 1-3. One-dimensional oracles
# ---------------------------------------------------------------------------
def check_couette_oracle() -> Tuple[bool, str]:
    C, C2 = couette_constants(1.0, 2.0, 0.0)
    profile = couette_profile(C, 0.0, C2)
    values = [profile.value(x) for x in (-1.0, 0.0, 1.0)]
    exact = (C, C2) == (-4.0, 3.0) and max(abs(v - e) for v, e in zip(values, (1.0, 3.0, 2.0))) <= 1e-14

    rng = np.random.default_rng(SEED)
    worst = 0.0
    for a_minus, a_plus, C1 in rng.uniform(-2.0, 2.0, size=(100, 3)):
        C, C2 = couette_constants(a_minus, a_plus, C1)
        p = couette_profile(C, C1, C2)
        below = 1.0 * p.one_sided(0.0, "left", derivative=True)
        above = 2.0 * p.one_sided(0.0, "right", derivative=True)
        walls = max(abs(p.value(-1.0) - a_minus), abs(p.value(1.0) - a_plus))
        worst = max(worst, abs(below - C1), abs(above - C1), walls)
    return exact and worst <= 1e-12, f"wall values {values}, worst flux/wall defect {worst:.2e}"


def check_concentric_oracle() -> Tuple[bool, str]:
    rng = np.random.default_rng(SEED + 1)
    worst = 0.0
    for g_minus, g_plus, C1 in rng.uniform(-2.0, 2.0, size=(100, 3)):
        C, C2 = concentric_constants(g_minus, g_plus, C1)
        p = concentric_profile(C, C1, C2)
        worst = max(worst, abs(p.value(0.5) - g_minus), abs(p.value(2.0) - g_plus))
    C, C2 = concentric_constants(0.7, 0.7, 0.0)
    rigid = concentric_profile(C, 0.0, C2)
    r = np.linspace(0.5, 2.0, 31)
    rigid_ok = abs(C) <= 1e-14 and np.max(np.abs(rigid.value(r) - 0.7)) <= 1e-12
    return worst <= 1e-12 and rigid_ok, f"worst boundary defect {worst:.2e}, rigid C={C:.1e}"


def check_radial_oracle() -> Tuple[bool, str]:
    h, rho, mu = radial_example()
    solved = radial_bvp(rho, mu, 0.0, -math.pi / 2.0, -5.0 * math.pi / 4.0, 512)
    theta = np.linspace(0.0, math.pi / 2.0, 513)
    example_err = float(np.max(np.abs(solved.value(theta) - h.value(theta))))

    quarter = math.pi / 4.0
    linear = radial_bvp(
        PiecewiseProfile.constant("theta", 0.0, 0.0, quarter),
        PiecewiseProfile.constant("theta", 1.0, 0.0, quarter),
        0.0,
        0.0,
        1.0,
        8192,
    )
    t = np.linspace(0.0, quarter, 8193)
    linear_err = float(np.max(np.abs(linear.value(t) - np.sin(2.0 * t))))
    return example_err <= 1e-6 and linear_err <= 1e-8, (
        f"example max error {example_err:.2e}, sin(2θ) max error {linear_err:.2e}"
    )


# ---------------------------------------------------------------------------
# 4-5. Two-dimensional solver against exact solutions
# ---------------------------------------------------------------------------
def couette_profile_error(spec: ProblemSpec, Phi: ScalarField, profile: PiecewiseProfile) -> float:
    """Relative L² error of the x₁-averaged u₁ against the 1D profile."""
    grid = spec.grid
    slopes = NormalSlopes.from_velocity(grid, wall_velocity(spec.u0, grid))
    u1 = grad_perp(Phi, slopes).v1
    mean = u1[:-1].mean(axis=0)
    exact = np.asarray(profile.value(grid.x2))
    _, wy = grid.axis_weights()
    return math.sqrt(float(np.sum(wy * (mean - exact) ** 2)) / float(np.sum(wy * exact**2)))


def check_couette_strip(sizes: Sequence[Tuple[int, int]] = ((65, 129), (129, 257))) -> Tuple[bool, str]:
    errors = []
    for nx, ny in sizes:
        spec, profile = couette_strip_case(1.0, 2.0, 0.0, 0.0, nx, ny)
        Phi, report = solve_stream(spec)
        if not report.converged:
            return False, f"{nx}x{ny} did not converge in {report.iterations} iterations"
        errors.append(couette_profile_error(spec, Phi, profile))
    decreasing = all(fine < coarse for coarse, fine in zip(errors, errors[1:]))
    return errors[0] <= 0.05 and decreasing, "relative L2 errors " + ", ".join(f"{e:.3e}" for e in errors)


def check_manufactured(sizes: Sequence[int] = (17, 33, 65)) -> Tuple[bool, str]:
    study = convergence_study(sizes)
    return study.min_order >= 1.9, "observed orders " + ", ".join(f"{p:.3f}" for p in study.orders)


# ---------------------------------------------------------------------------
# 6-8. Discrete structure
# ---------------------------------------------------------------------------
def _random_clamped(grid: Grid, rng: np.random.Generator) -> ScalarField:
    prolong, free = clamped_space(grid)
    return ScalarField(grid, (prolong @ rng.standard_normal(free.size)).reshape(grid.shape))


def check_norm_equivalence(mu_lower: float = 0.5, mu_upper: float = 2.0) -> Tuple[bool, str]:
    rng = np.random.default_rng(SEED + 6)
    grid = Grid(17, 13, 0.0, 1.0, 0.0, 0.75)
    worst = math.inf
    for _ in range(200):
        phi = _random_clamped(grid, rng)
        mu = ScalarField(grid, rng.uniform(mu_lower, mu_upper, grid.shape))
        root = math.sqrt(energy_product(mu, phi, phi))
        lap = l2_norm(discrete_laplacian(phi).values, grid)
        lower = math.sqrt(mu_lower / 2.0) * lap
        upper = math.sqrt(mu_upper / 2.0) * lap
        slack = min(root - lower, upper - root) / root
        worst = min(worst, slack)
    return worst >= -1e-12, f"smallest relative slack {worst:.3e}"


def _skew_ratio(n: int) -> float:
    grid = Grid(n, n)
    x1, x2 = grid.coordinates()
    base = ScalarField(grid, P(x1) * P(x2) * (1.0 + 0.5 * x1 * x2))
    phi = ScalarField(grid, np.sin(np.pi * x1) ** 2 * np.sin(np.pi * x2) ** 2 * (1.0 + x1 + 2.0 * x2))
    rho = base.with_values(closure_eval(DENSITY_LAW, base.values))
    w = grad_perp(base, NormalSlopes.zero(grid))
    return abs(trilinear(rho, w, phi, phi)) / h2_norm(phi, NormalSlopes.zero(grid)) ** 2


def check_skew_symmetry(sizes: Sequence[int] = (17, 33, 65)) -> Tuple[bool, str]:
    ratios = [_skew_ratio(n) for n in sizes]
    factors = [coarse / fine for coarse, fine in zip(ratios, ratios[1:])]
    return min(factors) >= 1.8, "decay factors " + ", ".join(f"{f:.2f}" for f in factors)


def lid_cavity_case(n: int = 17) -> ProblemSpec:
    grid = Grid(n, n)
    i, j = grid.boundary_indices()
    u0 = np.zeros((i.size, 2))
    u0[j == grid.ny - 1, 0] = 1.0
    return ProblemSpec(
        grid=grid,
        u0=u0,
        force=VectorField.zeros(grid),
        eta=ClosureTable.constant(1.0),
        b=ClosureTable.constant(1.0),
        name=f"lid_cavity_n{n}",
    )


def check_spd_and_determinism(out_dir: Optional[Path] = None) -> Tuple[bool, str]:
    rng = np.random.default_rng(SEED + 8)
    grid = Grid(17, 17)
    mu = ScalarField(grid, rng.uniform(0.5, 2.0, grid.shape))
    operator = assemble_energy_operator(mu, grid, 0.5)
    splinalg.splu(operator.matrix.tocsc())
    positive = all(energy_product(mu, phi, phi) > 0 for phi in (_random_clamped(grid, rng) for _ in range(100)))

    spec = lid_cavity_case()
    with tempfile.TemporaryDirectory(dir=out_dir) as tmp:
        first = write_state_csv(run_case(spec), Path(tmp) / "first.csv")
        second = write_state_csv(run_case(spec), Path(tmp) / "second.csv")
        identical = filecmp.cmp(first, second, shallow=False)
    return positive and identical, f"energy positive: {positive}, byte-identical CSV: {identical}"


# ---------------------------------------------------------------------------
# 9. A-priori bound
# ---------------------------------------------------------------------------
def check_apriori_bound(fractions: Sequence[float] = (0.25, 0.5, 1.0), n: int = 33) -> Tuple[bool, str]:
    case = manufactured_case(n)
    details = []
    ok = True
    for s in fractions:
        spec = case.spec.with_changes(force=case.spec.force.scaled(s), name=f"{case.spec.name}_f{s:g}")
        _, report = solve_stream(spec)
        norms = report.update_norms
        significant = [
            later / earlier
            for earlier, later in zip(norms, norms[1:])
            if earlier > 1e-9 * norms[0]
        ]
        geometric = all(ratio < 1.0 for ratio in significant)
        ok = ok and report.converged and report.apriori_ok and geometric
        details.append(f"f x{s:g}: energy {report.energy[-1]:.3e} vs bound {report.apriori_bound:.3e}")
    return ok, "; ".join(details)


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------
CRITERIA: List[Tuple[int, str, Check]] = [
    (1, "Couette oracle", check_couette_oracle),
    (2, "Concentric oracle", check_concentric_oracle),
    (3, "Radial oracle", check_radial_oracle),
    (4, "2D solver vs. Couette", check_couette_strip),
    (5, "Manufactured-solution convergence", check_manufactured),
    (6, "Discrete norm equivalence", check_norm_equivalence),
    (7, "Skew-symmetry decay", check_skew_symmetry),
    (8, "Energy operator SPD and determinism", check_spd_and_determinism),
    (9, "A-priori bound diagnostic", check_apriori_bound),
]


def run_criterion(number: int, name: str, check: Check) -> CriterionResult:
    started = time.perf_counter()
    try:
        passed, detail = check()
    except Exception as exc:  # a crashing check is a failed criterion
        logging.exception(f"Criterion {number} ({name}) raised")
        passed, detail = False, f"{type(exc).__name__}: {exc}"
    wall_ms = 1000.0 * (time.perf_counter() - started)
    status = "PASS" if passed else "FAIL"
    logging.info(f"[{status}] {number}. {name}: {detail}")
    return CriterionResult(criterion=number, name=name, passed=bool(passed), detail=detail, wall_ms=wall_ms)


def run_verification(only: Optional[Sequence[int]] = None) -> VerificationSummary:
    selected = [c for c in CRITERIA if only is None or c[0] in only]
    return VerificationSummary(results=[run_criterion(*c) for c in selected])
