"""
Picard (Oseen) fixed-point driver for the lifted stream function.

Each step freezes ρ_k = η(Φ_k), μ_k = mollify(b(ρ_k), ε) and the advecting
velocity w_k = ∇⊥Φ_k, then solves for the clamped part φ:

    [2E(μ_k) − K(ρ_k, w_k)] φ = F(f) + K(ρ_k, w_k)Φ₀^δ − 2E(μ_k)Φ₀^δ

with E the energy operator (⟨·,·⟩ with its leading ½) and K the Oseen
convection operator. The update is relaxed and μ is rebuilt from the new Φ.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from pydantic import ValidationError
from scipy.sparse import linalg as splinalg

from vvs_backend import settings

from .errors import DivergenceError, LinearSolveError
from .fields import ProblemSpec, RunReport, ScalarField, closure_eval, h2_norm, l2_norm
from .lift import BoundaryTrace, boundary_stream, build_lift, mollify
from .operators import (
    LinearOperator,
    NormalSlopes,
    assemble_convection,
    assemble_energy_operator,
    convection_functional,
    energy_functional,
    energy_product,
    first_derivatives,
    force_functional,
    grad_perp,
)


# ---------------------------------------------------------------------------
# 1. Iterate state
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class OseenContext:
    """Data that stays fixed over a whole solve."""

    trace: BoundaryTrace
    lift: ScalarField
    force: np.ndarray

    @property
    def slopes(self) -> NormalSlopes:
        return self.trace.slopes


@dataclass(frozen=True, eq=False)
class IterateState:
    phi: ScalarField  # clamped part
    Phi: ScalarField  # lift + phi
    rho: ScalarField
    mu: ScalarField
    k: int = 0
    linear_residual: float = 0.0
    operator: Optional[LinearOperator] = None


def coefficients(spec: ProblemSpec, Phi: ScalarField) -> Tuple[ScalarField, ScalarField]:
    """ρ = η(Φ) and μ = mollify(b(ρ), ε) at the nodes."""
    rho = Phi.with_values(closure_eval(spec.eta, Phi.values))
    mu = mollify(rho.with_values(closure_eval(spec.b, rho.values)), spec.eps_mollify)
    return rho, mu


def prepare(spec: ProblemSpec) -> OseenContext:
    trace = boundary_stream(spec.u0, spec.grid, spec.C0, spec.flux_tol, spec.strip_flux)
    lift = build_lift(trace, spec.grid, spec.delta)
    return OseenContext(trace, lift, force_functional(spec.force))


def initial_state(spec: ProblemSpec, context: OseenContext) -> IterateState:
    phi = ScalarField.zeros(spec.grid)
    rho, mu = coefficients(spec, context.lift)
    return IterateState(phi, context.lift, rho, mu, 0)


# ---------------------------------------------------------------------------
# 2. One Oseen step
# ---------------------------------------------------------------------------
def _solve_sparse(operator: LinearOperator, rhs: np.ndarray) -> Tuple[np.ndarray, float]:
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return np.zeros_like(rhs), 0.0
    matrix = operator.matrix.tocsc()
    try:
        lu = splinalg.splu(matrix)
    except RuntimeError as exc:
        raise LinearSolveError(f"Sparse factorization failed: {exc}") from exc
    x = lu.solve(rhs)
    residual = float(np.linalg.norm(matrix @ x - rhs)) / rhs_norm
    if residual > settings.LINEAR_RTOL:
        # one step of iterative refinement
        x = x + lu.solve(rhs - matrix @ x)
        residual = float(np.linalg.norm(matrix @ x - rhs)) / rhs_norm
    if not np.all(np.isfinite(x)) or residual > settings.LINEAR_RTOL:
        raise LinearSolveError("Oseen solve missed the residual tolerance", residual)
    return x, residual


def oseen_step(
    spec: ProblemSpec,
    state: IterateState,
    context: Optional[OseenContext] = None,
    omega: Optional[float] = None,
) -> IterateState:
    """Solve the linearized problem with coefficients frozen at ``state``."""
    context = context or prepare(spec)
    omega = spec.omega if omega is None else omega
    grid = spec.grid
    slopes = context.slopes

    w = grad_perp(state.Phi, slopes)
    E = assemble_energy_operator(state.mu, grid, spec.mu_lower)
    K = assemble_convection(state.rho, w, grid)
    operator = LinearOperator(grid, 2.0 * E.matrix - K.matrix, E.free_nodes, E.prolongation)

    rhs = (
        context.force
        + convection_functional(state.rho, w, context.lift, slopes)
        - 2.0 * energy_functional(state.mu, context.lift, slopes)
    )
    solved, residual = _solve_sparse(operator, rhs)

    current = operator.restrict(state.phi)
    relaxed = (1.0 - omega) * current + omega * solved
    if not np.all(np.isfinite(relaxed)):
        raise DivergenceError(f"Non-finite stream iterate at step {state.k + 1}.")
    phi = operator.prolong(relaxed)
    Phi = context.lift + phi
    rho, mu = coefficients(spec, Phi)
    return IterateState(phi, Phi, rho, mu, state.k + 1, residual, operator)


# ---------------------------------------------------------------------------
# 3. A-priori energy bound
# ---------------------------------------------------------------------------
def _lowest_clamped_eigenvalue(spec: ProblemSpec) -> float:
    """Smallest eigenvalue of −Δ_h on the clamped space (non-periodic axes only)."""
    g = spec.grid
    axes = [(g.h2, g.x2_max - g.x2_min)]
    if not g.periodic_x1:
        axes.append((g.h1, g.x1_max - g.x1_min))
    return sum((4.0 / h**2) * math.sin(math.pi * h / (2.0 * L)) ** 2 for h, L in axes)


def apriori_bound(spec: ProblemSpec, context: OseenContext, mu: ScalarField) -> float:
    """Bound on ⟨φ, φ⟩ from the force, the lift and the coefficient bounds."""
    grid = spec.grid
    scale = math.sqrt(2.0 / spec.mu_lower)
    force_part = l2_norm(spec.force.magnitude(), grid) * scale / math.sqrt(_lowest_clamped_eigenvalue(spec))

    lift_velocity = grad_perp(context.lift, context.slopes)
    d1, d2 = first_derivatives(context.lift, context.slopes)
    transport = lift_velocity.magnitude() * np.hypot(d1, d2)
    convection_part = spec.rho_upper * l2_norm(transport, grid) * scale

    lift_energy = energy_product(mu, context.lift, context.lift, context.slopes, context.slopes)
    root = 0.5 * (force_part + convection_part) + math.sqrt(max(lift_energy, 0.0))
    return root**2


# ---------------------------------------------------------------------------
# 4. Fixed-point loop
# ---------------------------------------------------------------------------
def solve_stream(spec: ProblemSpec, matrix_path: Optional[Path] = None) -> Tuple[ScalarField, RunReport]:
    """Iterate Oseen steps from φ₀ = 0 until the H² update norm stalls.

    Running out of iterations gives a report with ``converged=False``;
    blow-up raises :class:`DivergenceError`.
    """
    started = time.perf_counter()
    context = prepare(spec)
    state = initial_state(spec, context)
    bound = apriori_bound(spec, context, state.mu)
    zero = NormalSlopes.zero(spec.grid)

    report = RunReport(apriori_bound=bound)
    omega = spec.omega
    first_norm: Optional[float] = None
    increases = 0

    for k in range(1, spec.max_iter + 1):
        new = oseen_step(spec, state, context, omega)
        update = h2_norm(new.phi - state.phi, zero)
        norm = h2_norm(new.phi, zero)
        energy = energy_product(new.mu, new.phi, new.phi)
        if not (math.isfinite(update) and math.isfinite(norm)):
            raise DivergenceError(f"Non-finite update norm at iteration {k}.")

        if report.update_norms:
            previous = report.update_norms[-1]
            if previous > 0:
                report.contraction_ratios.append(update / previous)
            increases = increases + 1 if update > previous else 0
        report.update_norms.append(update)
        report.energy.append(energy)
        report.linear_residuals.append(new.linear_residual)
        report.relaxation.append(omega)
        report.iterations = k
        logging.info(
            f"[{spec.name}] iteration {k}: update {update:.3e}, norm {norm:.3e}, "
            f"energy {energy:.3e}, omega {omega:g}, residual {new.linear_residual:.1e}"
        )

        if first_norm is None:
            first_norm = norm
        if norm > settings.DIVERGENCE_ABS:
            raise DivergenceError(
                f"Stream iterate norm {norm:.3e} exceeds the ceiling {settings.DIVERGENCE_ABS:g} at iteration {k}."
            )
        if first_norm > 0 and norm > settings.DIVERGENCE_FACTOR * first_norm:
            raise DivergenceError(
                f"Stream iterate norm {norm:.3e} exceeds {settings.DIVERGENCE_FACTOR:g} times "
                f"the first iterate norm {first_norm:.3e} at iteration {k}."
            )

        state = new
        if update <= spec.tol_rel * norm + spec.tol_abs:
            report.converged = True
            break

        if increases >= 2 and omega > settings.MIN_OMEGA:
            omega = max(0.5 * omega, settings.MIN_OMEGA)
            increases = 0
            logging.warning(f"[{spec.name}] update norm grew twice in a row; relaxation lowered to {omega:g}")

    if not report.converged:
        logging.warning(f"[{spec.name}] no convergence after {spec.max_iter} iterations")

    final_energy = report.energy[-1] if report.energy else 0.0
    report.apriori_ok = final_energy <= settings.APRIORI_SAFETY * bound
    if not report.apriori_ok:
        logging.warning(
            f"[{spec.name}] energy {final_energy:.3e} exceeds {settings.APRIORI_SAFETY:g} x a-priori bound {bound:.3e}"
        )
    report.mu_min = float(np.min(state.mu.values))
    report.mu_max = float(np.max(state.mu.values))
    report.rho_max = float(np.max(state.rho.values))
    report.wall_ms = 1000.0 * (time.perf_counter() - started)
    try:
        # list appends bypass the field validators
        report = RunReport(**report.dict())
    except ValidationError as exc:
        raise DivergenceError(f"[{spec.name}] non-finite entry in the iteration history: {exc}") from exc

    if matrix_path is not None and state.operator is not None:
        state.operator.write_matrix_market(matrix_path)
        logging.info(f"[{spec.name}] Oseen matrix written to {matrix_path}")
    return state.Phi, report
