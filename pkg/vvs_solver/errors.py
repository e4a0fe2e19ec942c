"""Exception types raised by the solver modules."""
from __future__ import annotations

from typing import List, Optional


class FluxViolationError(ValueError):
    """Boundary velocity carries net flux, so no single-valued stream function exists."""

    def __init__(self, flux: float, tol: float, where: str = "boundary"):
        self.flux = flux
        self.tol = tol
        super().__init__(
            f"Net flux through the {where} is {flux:.6e}, which exceeds flux_tol={tol:.1e}. "
            "The boundary velocity must satisfy the zero-flux condition."
        )


class ClosureError(ValueError):
    """Invalid closure table or closure evaluation input."""


class LinearSolveError(RuntimeError):
    def __init__(self, message: str, residual: Optional[float] = None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (relative residual {residual:.3e})"
        super().__init__(message)


class DivergenceError(RuntimeError):
    """Picard iterates blew up or became non-finite."""


class NewtonError(RuntimeError):
    def __init__(self, message: str, residuals: List[float]):
        self.residuals = list(residuals)
        trace = ", ".join(f"{r:.3e}" for r in self.residuals[-5:])
        super().__init__(f"{message}; last residuals: [{trace}]")
