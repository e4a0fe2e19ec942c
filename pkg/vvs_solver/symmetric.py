"""
Closed-form and one-dimensional solutions of the three symmetric flow families
with piecewise-constant viscosity, used as verification oracles.

* Couette:    u = u₁(x₂)e₁ on −1 ≤ x₂ ≤ 1, ∂₂(μ∂₂u₁) = C
* concentric: u = r·g(r)e_θ on ½ ≤ r ≤ 2,  ∂_r(r³μ∂_r g) = −Cr
* radial:     u = (h(θ)/r)e_r,             ρh² + ∂_θ(μ∂_θh) + 4μh = C

Here e_r = (x₁, x₂)/r and e_θ = (x₂, −x₁)/r; θ is the usual polar angle.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import solve_banded

from vvs_backend import settings

from .errors import NewtonError
from .fields import ClosureTable, Grid, ProblemSpec, ScalarField, TensorField, VectorField
from .operators import deformation, gradient, tensor_divergence


# ---------------------------------------------------------------------------
# 1. Piecewise profiles
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PolynomialPiece:
    poly: Polynomial

    def value(self, x):
        return self.poly(x)

    def derivative(self, x):
        return self.poly.deriv()(x)

    @property
    def is_constant(self) -> bool:
        return self.poly.trim().degree() == 0

    def constant_value(self) -> float:
        return float(self.poly.coef[0])


@dataclass(frozen=True)
class LogPiece:
    """a·ln r + b/r² + c."""

    a: float
    b: float
    c: float

    def value(self, r):
        r = _positive(r)
        return self.a * np.log(r) + self.b / r**2 + self.c

    def derivative(self, r):
        r = _positive(r)
        return self.a / r - 2.0 * self.b / r**3


@dataclass(frozen=True)
class RationalPiece:
    """m / p(x)."""

    m: float
    denominator: Polynomial

    def value(self, x):
        return self.m / self.denominator(x)

    def derivative(self, x):
        p = self.denominator(x)
        return -self.m * self.denominator.deriv()(x) / p**2


@dataclass(frozen=True, eq=False)
class SampledPiece:
    """Cubic Hermite interpolant through sampled values and slopes."""

    nodes: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_spline", CubicHermiteSpline(self.nodes, self.values, self.slopes))

    def value(self, x):
        return self._spline(x)

    def derivative(self, x):
        return self._spline.derivative()(x)


def _positive(r):
    arr = np.asarray(r, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("Radial profiles are only defined for r > 0.")
    return arr


@dataclass(frozen=True, eq=False)
class PiecewiseProfile:
    """Profile over ``breakpoints`` with one piece per interval.

    ``right_closed`` puts an interior breakpoint into the piece on its left
    (intervals (b_k, b_{k+1}]); otherwise intervals are [b_k, b_{k+1}).
    Evaluation outside the outer breakpoints extends the end pieces.
    """

    kind: str
    breakpoints: Tuple[float, ...]
    pieces: Tuple
    right_closed: bool = False

    def __post_init__(self):
        if self.kind not in ("x2", "r", "theta"):
            raise ValueError(f"Unknown profile coordinate {self.kind!r}.")
        if len(self.breakpoints) != len(self.pieces) + 1:
            raise ValueError("A profile needs exactly one more breakpoint than pieces.")
        if any(b1 <= b0 for b0, b1 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("Profile breakpoints must be strictly increasing.")

    @classmethod
    def constant(cls, kind: str, value: float, lo: float, hi: float) -> "PiecewiseProfile":
        return cls(kind, (lo, hi), (PolynomialPiece(Polynomial([value])),))

    @property
    def interval(self) -> Tuple[float, float]:
        return self.breakpoints[0], self.breakpoints[-1]

    @property
    def interior_breakpoints(self) -> Tuple[float, ...]:
        return self.breakpoints[1:-1]

    def piece_index(self, x) -> np.ndarray:
        side = "left" if self.right_closed else "right"
        return np.searchsorted(np.asarray(self.interior_breakpoints), x, side=side)

    def _dispatch(self, x, method: str):
        arr = np.asarray(x, dtype=float)
        flat = arr.ravel()
        idx = self.piece_index(flat)
        out = np.zeros_like(flat)
        for k, piece in enumerate(self.pieces):
            sel = idx == k
            if np.any(sel):
                out[sel] = getattr(piece, method)(flat[sel])
        return out.reshape(arr.shape) if arr.ndim else float(out[0])

    def value(self, x):
        return self._dispatch(x, "value")

    def derivative(self, x):
        return self._dispatch(x, "derivative")

    def one_sided(self, x: float, side: str, derivative: bool = False) -> float:
        """Limit at a breakpoint from the piece on the given side."""
        k = list(self.breakpoints).index(x)
        piece = self.pieces[k - 1] if side == "left" else self.pieces[k]
        return float(piece.derivative(x) if derivative else piece.value(x))

    def to_frame(self, n: int = 201) -> pd.DataFrame:
        lo, hi = self.interval
        x = np.linspace(lo, hi, n)
        return pd.DataFrame({"coordinate": x, "value": self.value(x), "derivative": self.derivative(x)})


def _const(value: float) -> PolynomialPiece:
    return PolynomialPiece(Polynomial([value]))


# ---------------------------------------------------------------------------
# 2. Couette family  ρ = ρ(x₂)
# ---------------------------------------------------------------------------
def couette_viscosity() -> PiecewiseProfile:
    """μ = 2 for x₂ > 0 and 1 for x₂ ≤ 0."""
    return PiecewiseProfile("x2", (-1.0, 0.0, 1.0), (_const(1.0), _const(2.0)), right_closed=True)


def couette_constants(a_minus: float, a_plus: float, C1: float) -> Tuple[float, float]:
    """(C, C₂) for wall speeds u₁(−1) = a₋, u₁(1) = a₊ and free constant C₁."""
    C = 4.0 * (a_minus - a_plus) + 6.0 * C1
    C2 = 2.0 * a_plus - a_minus - 2.0 * C1
    return C, C2


def couette_profile(C: float, C1: float, C2: float) -> PiecewiseProfile:
    lower = Polynomial([C2, C1, C / 2.0])
    upper = Polynomial([C2, C1 / 2.0, C / 4.0])
    return PiecewiseProfile(
        "x2", (-1.0, 0.0, 1.0), (PolynomialPiece(lower), PolynomialPiece(upper)), right_closed=True
    )


def couette_stream(C: float, C1: float, C2: float, C3: float) -> PiecewiseProfile:
    """Φ(x₂) with ∂₂Φ = u₁ and Φ(0) = C₃."""
    lower = Polynomial([C3, C2, C1 / 2.0, C / 6.0])
    upper = Polynomial([C3, C2, C1 / 4.0, C / 12.0])
    return PiecewiseProfile(
        "x2", (-1.0, 0.0, 1.0), (PolynomialPiece(lower), PolynomialPiece(upper)), right_closed=True
    )


def classical_couette_profile(a_minus: float, a_plus: float, C: float, nu: float = 1.0) -> PiecewiseProfile:
    """Constant viscosity ν: u₁ = (C/2ν)x₂² + C₁x₂ + C₂ through both wall speeds."""
    C1 = 0.5 * (a_plus - a_minus)
    C2 = 0.5 * (a_plus + a_minus) - C / (2.0 * nu)
    return PiecewiseProfile("x2", (-1.0, 1.0), (PolynomialPiece(Polynomial([C2, C1, C / (2.0 * nu)])),))


def _integrate_outward(
    mu_profile: PiecewiseProfile,
    anchor: float,
    anchor_value: float,
    exact_piece,
    integrand,
    samples: int,
) -> PiecewiseProfile:
    """Integrate y′ = integrand(s)/μ(s) piece by piece away from the anchor.

    ``exact_piece(m, start, value)`` returns the closed-form piece for a
    constant viscosity m passing through (start, value).
    """
    bps = mu_profile.breakpoints
    n = len(mu_profile.pieces)
    pieces: List = [None] * n
    starts = [min(max(anchor, bps[k]), bps[k + 1]) for k in range(n)]
    order = sorted(range(n), key=lambda k: abs(starts[k] - anchor))
    known = {anchor: anchor_value}
    for k in order:
        start = starts[k]
        value = known[start]
        mu_piece = mu_profile.pieces[k]
        if isinstance(mu_piece, PolynomialPiece) and mu_piece.is_constant:
            piece = exact_piece(mu_piece.constant_value(), start, value)
        else:
            s = np.linspace(bps[k], bps[k + 1], samples)
            slope = integrand(s) / mu_piece.value(s)
            y = cumulative_trapezoid(slope, s, initial=0.0)
            y += value - np.interp(start, s, y)
            piece = SampledPiece(s, y, slope)
        pieces[k] = piece
        known[bps[k]] = float(piece.value(bps[k]))
        known[bps[k + 1]] = float(piece.value(bps[k + 1]))
    return PiecewiseProfile(mu_profile.kind, bps, tuple(pieces), mu_profile.right_closed)


def couette_ode(
    mu_profile: PiecewiseProfile, C: float, C1: float, C2: float, anchor: float = 0.0, samples: int = 2001
) -> PiecewiseProfile:
    """u₁(x₂) = C₂ + ∫_anchor^{x₂} (C·s + C₁)/μ(s) ds."""
    if np.min(mu_profile.value(np.linspace(*mu_profile.interval, 257))) <= 0:
        raise ValueError("Viscosity profile must be positive.")

    def exact(m: float, start: float, value: float) -> PolynomialPiece:
        q = Polynomial([C1 / m, C / m]).integ()
        return PolynomialPiece(q - q(start) + value)

    return _integrate_outward(mu_profile, anchor, C2, exact, lambda s: C * s + C1, samples)


def _couette_stream_levels(a_minus: float, a_plus: float, C1: float, C3: float) -> Tuple[float, float]:
    phi_minus = 1.5 * C1 + C3 - (4.0 / 3.0) * a_plus + (1.0 / 3.0) * a_minus
    phi_plus = -1.25 * C1 + C3 + (5.0 / 3.0) * a_plus - (2.0 / 3.0) * a_minus
    return phi_minus, phi_plus


def _identity_viscosity_law() -> ClosureTable:
    # b(ρ) = ρ on [1, 2]; b⁻¹(1) = 1, b⁻¹(2) = 2
    return ClosureTable((1.0, 2.0), (1.0, 2.0))


def couette_eta_table(
    a_minus: float,
    a_plus: float,
    C1: float,
    C3: float,
    b: Optional[ClosureTable] = None,
    width: Optional[float] = None,
) -> Tuple[ClosureTable, float, float]:
    """Density law η with ρ = b⁻¹(2) above the interface and b⁻¹(1) below.

    Returns the ramped step table and the wall values (Φ₋, Φ₊).
    """
    if not (a_plus < a_minus < 2.0 * a_plus and 0.0 < C1 < (2.0 * a_plus - a_minus) / 2.0):
        raise ValueError(
            "Couette density construction needs a₊ < a₋ < 2a₊ and 0 < C₁ < (2a₊ − a₋)/2 "
            f"so that u₁ > 0 on [−1, 1]; got a₋={a_minus}, a₊={a_plus}, C₁={C1}."
        )
    b = b or _identity_viscosity_law()
    phi_minus, phi_plus = _couette_stream_levels(a_minus, a_plus, C1, C3)
    width = width if width is not None else 0.02 * (phi_plus - phi_minus)
    table = ClosureTable.step(C3, b.inverse(1.0), b.inverse(2.0), width)
    return table, phi_minus, phi_plus


def couette_strip_case(
    a_minus: float,
    a_plus: float,
    C1: float,
    C3: float,
    nx: int,
    ny: int,
    b: Optional[ClosureTable] = None,
    **solver_options,
) -> Tuple[ProblemSpec, PiecewiseProfile]:
    """Strip [0,1]×[−1,1], periodic in x₁, whose exact solution is the Couette profile.

    The density step is ramped over two grid spacings in x₂, i.e. over
    2·h₂·u₁(0) in stream-function units. Only positivity of u₁ on [−1, 1]
    is required here.
    """
    C, C2 = couette_constants(a_minus, a_plus, C1)
    profile = couette_profile(C, C1, C2)
    if np.min(profile.value(np.linspace(-1.0, 1.0, 2001))) <= 0:
        raise ValueError("The Couette profile must be positive for a monotone stream function.")
    stream = couette_stream(C, C1, C2, C3)
    phi_minus, phi_plus = float(stream.value(-1.0)), float(stream.value(1.0))

    grid = Grid(nx, ny, 0.0, 1.0, -1.0, 1.0, periodic_x1=True)
    b = b or _identity_viscosity_law()
    width = settings.STEP_WIDTH_SPACINGS * grid.h2 * abs(C2)
    eta = ClosureTable.step(C3, b.inverse(1.0), b.inverse(2.0), width)

    m = grid.nx - 1
    u0 = np.zeros((2 * m, 2))
    u0[:m, 0] = a_minus
    u0[m:, 0] = a_plus
    spec = ProblemSpec(
        grid=grid,
        u0=u0,
        force=VectorField.zeros(grid),
        eta=eta,
        b=b,
        C0=phi_minus,
        strip_flux=phi_plus - phi_minus,
        name=f"couette_am{a_minus:g}_ap{a_plus:g}_c1{C1:g}",
        **solver_options,
    )
    return spec, profile


def interface_second_difference(profile: PiecewiseProfile, h: float, at: float = 0.0) -> float:
    """Central second difference across an interface; grows like the slope jump / h."""
    return float((profile.value(at + h) - 2.0 * profile.value(at) + profile.value(at - h)) / h**2)


# ---------------------------------------------------------------------------
# 3. Concentric family  ρ = ρ(r)
# ---------------------------------------------------------------------------
R_INNER = 0.5
R_OUTER = 2.0


def concentric_viscosity() -> PiecewiseProfile:
    """μ = 2 for r < 1 and 1 for r ≥ 1 on the annulus ½ ≤ r ≤ 2."""
    return PiecewiseProfile("r", (R_INNER, 1.0, R_OUTER), (_const(2.0), _const(1.0)))


def concentric_constants(g_minus: float, g_plus: float, C1: float) -> Tuple[float, float]:
    """(C, C₂) for g(½) = g₋, g(2) = g₊."""
    C = ((9.0 / 8.0) * C1 - g_plus + g_minus) / (3.0 * math.log(2.0) / 4.0)
    C2 = ((9.0 / 8.0) * C1 + g_plus + 2.0 * g_minus) / 3.0
    return C, C2


def concentric_profile(C: float, C1: float, C2: float) -> PiecewiseProfile:
    inner = LogPiece(-C / 4.0, -C1 / 4.0, C2 + C1 / 4.0)
    outer = LogPiece(-C / 2.0, -C1 / 2.0, C2 + C1 / 2.0)
    return PiecewiseProfile("r", (R_INNER, 1.0, R_OUTER), (inner, outer))


def concentric_ode(
    mu_profile: PiecewiseProfile, C: float, C1: float, C2: float, anchor: float = 1.0, samples: int = 2001
) -> PiecewiseProfile:
    """g with ∂_r g = (−(C/2)r² + C₁)/(μr³) and g(anchor) = C₂."""
    if mu_profile.interval[0] <= 0:
        raise ValueError("Concentric profiles need r_in > 0.")

    def exact(m: float, start: float, value: float) -> LogPiece:
        a, b = -C / (2.0 * m), -C1 / (2.0 * m)
        return LogPiece(a, b, value - a * math.log(start) - b / start**2)

    return _integrate_outward(
        mu_profile, anchor, C2, exact, lambda r: (-0.5 * C * r**2 + C1) / r**3, samples
    )


@dataclass(frozen=True)
class ConcentricStreamPiece:
    """Antiderivative of r·(a ln r + b/r² + c) plus d."""

    a: float
    b: float
    c: float
    d: float

    def value(self, r):
        r = _positive(r)
        return self.a * (0.5 * r**2 * np.log(r) - 0.25 * r**2) + self.b * np.log(r) + 0.5 * self.c * r**2 + self.d

    def derivative(self, r):
        r = _positive(r)
        return r * (self.a * np.log(r) + self.b / r**2 + self.c)


def concentric_stream(g_profile: PiecewiseProfile, anchor: float = 1.0, value: float = 0.0) -> PiecewiseProfile:
    """Φ(r) with ∂_rΦ = r·g(r), continuous across breakpoints and Φ(anchor) = value."""
    if not all(isinstance(p, LogPiece) for p in g_profile.pieces):
        raise ValueError("concentric_stream needs a closed-form profile built from LogPiece pieces.")
    bps = g_profile.breakpoints
    n = len(g_profile.pieces)
    pieces: List = [None] * n
    starts = [min(max(anchor, bps[k]), bps[k + 1]) for k in range(n)]
    known = {anchor: value}
    for k in sorted(range(n), key=lambda k: abs(starts[k] - anchor)):
        g = g_profile.pieces[k]
        raw = ConcentricStreamPiece(g.a, g.b, g.c, 0.0)
        piece = ConcentricStreamPiece(g.a, g.b, g.c, known[starts[k]] - float(raw.value(starts[k])))
        pieces[k] = piece
        known[bps[k]] = float(piece.value(bps[k]))
        known[bps[k + 1]] = float(piece.value(bps[k + 1]))
    return PiecewiseProfile("r", bps, tuple(pieces), g_profile.right_closed)


# ---------------------------------------------------------------------------
# 4. Radial family  ρ = ρ(θ)
# ---------------------------------------------------------------------------
def radial_example() -> Tuple[PiecewiseProfile, PiecewiseProfile, PiecewiseProfile]:
    """h, ρ = −4μ/h and μ on [0, π/2] with the viscosity jump at π/4."""
    bps = (0.0, math.pi / 4.0, math.pi / 2.0)
    h_lo = Polynomial([-math.pi / 2.0, -1.0])
    h_hi = Polynomial([-math.pi / 4.0, -2.0])
    h = PiecewiseProfile("theta", bps, (PolynomialPiece(h_lo), PolynomialPiece(h_hi)))
    rho = PiecewiseProfile("theta", bps, (RationalPiece(-8.0, h_lo), RationalPiece(-4.0, h_hi)))
    mu = PiecewiseProfile("theta", bps, (_const(2.0), _const(1.0)))
    return h, rho, mu


def _radial_residual(h, theta, mu_half, mu_node, rho_node, C, dtheta):
    flux = mu_half * np.diff(h) / dtheta
    hi = h[1:-1]
    return np.diff(flux) + dtheta * (rho_node * hi**2 + 4.0 * mu_node * hi - C)


def radial_bvp(
    rho_profile: PiecewiseProfile,
    mu_profile: PiecewiseProfile,
    C: float,
    h_left: float,
    h_right: float,
    n_theta: int,
    theta_left: Optional[float] = None,
    theta_right: Optional[float] = None,
) -> PiecewiseProfile:
    """Damped Newton for ρh² + ∂_θ(μ∂_θh) + 4μh = C with Dirichlet ends.

    Conservative differencing with μ at cell midpoints; the residual is
    the cell-integrated balance (scaled by Δθ).
    """
    if n_theta < 16:
        raise ValueError(f"n_theta must be at least 16, got {n_theta}.")
    lo, hi = mu_profile.interval
    theta_left = lo if theta_left is None else theta_left
    theta_right = hi if theta_right is None else theta_right
    theta = np.linspace(theta_left, theta_right, n_theta + 1)
    dtheta = theta[1] - theta[0]
    mu_half = np.asarray(mu_profile.value(0.5 * (theta[1:] + theta[:-1])))
    mu_node = np.asarray(mu_profile.value(theta[1:-1]))
    rho_node = np.asarray(rho_profile.value(theta[1:-1]))
    if np.min(mu_half) <= 0 or np.min(mu_node) <= 0:
        raise ValueError("Viscosity profile must be positive.")

    h = np.linspace(h_left, h_right, n_theta + 1)
    res = _radial_residual(h, theta, mu_half, mu_node, rho_node, C, dtheta)
    history = [float(np.max(np.abs(res)))]
    for step in range(settings.NEWTON_MAX_STEPS):
        if history[-1] <= settings.NEWTON_TOL:
            break
        ab = np.zeros((3, n_theta - 1))
        ab[0, 1:] = mu_half[1:-1] / dtheta
        ab[1] = -(mu_half[1:] + mu_half[:-1]) / dtheta + dtheta * (2.0 * rho_node * h[1:-1] + 4.0 * mu_node)
        ab[2, :-1] = mu_half[1:-1] / dtheta
        delta = solve_banded((1, 1), ab, -res)

        lam = 1.0
        while True:
            trial = h.copy()
            trial[1:-1] += lam * delta
            trial_res = _radial_residual(trial, theta, mu_half, mu_node, rho_node, C, dtheta)
            trial_norm = float(np.max(np.abs(trial_res)))
            if trial_norm < history[-1] or lam < 1.0 / 1024.0:
                break
            lam *= 0.5
        h, res = trial, trial_res
        history.append(trial_norm)
        logging.info(f"radial Newton step {step + 1}: residual {trial_norm:.3e}, damping {lam:g}")
    if history[-1] > settings.NEWTON_TOL:
        raise NewtonError(
            f"Radial BVP did not converge in {settings.NEWTON_MAX_STEPS} damped Newton steps", history
        )

    slopes = np.gradient(h, dtheta, edge_order=2)
    return PiecewiseProfile("theta", (theta_left, theta_right), (SampledPiece(theta, h, slopes),))


# ---------------------------------------------------------------------------
# 5. Stream-function residuals and auxiliary identities
# ---------------------------------------------------------------------------
def _off_interface(x: np.ndarray, breaks: Sequence[float], dx: float) -> np.ndarray:
    keep = np.ones(x.shape, dtype=bool)
    for b in breaks:
        keep &= np.abs(x - b) > 1.0001 * dx
    return keep


def symmetric_stream_residual(
    kind: str,
    profile: PiecewiseProfile,
    mu_profile: PiecewiseProfile,
    rho_profile: Optional[PiecewiseProfile] = None,
    C: float = 0.0,
    samples: int = 401,
) -> float:
    """Scaled max-norm residual of the 1D stream-function equation.

    The flux q (μ∂u₁, μr³∂_r g or μ∂_θh) is taken from the profile's exact
    derivative and differenced conservatively; stencils touching an
    interface are skipped. The result is divided by 1 + |C| + max|q|.
    """
    lo, hi = profile.interval
    x = np.linspace(lo, hi, samples)
    dx = x[1] - x[0]
    mu = np.asarray(mu_profile.value(x))
    dprof = np.asarray(profile.derivative(x))
    breaks = set(profile.interior_breakpoints) | set(mu_profile.interior_breakpoints)

    if kind == "couette":
        q = mu * dprof
        res = (q[2:] - 2.0 * q[1:-1] + q[:-2]) / dx**2
    elif kind == "concentric":
        q = mu * x**3 * dprof
        res = (q[2:] - 2.0 * q[1:-1] + q[:-2]) / dx**2 + C
    elif kind == "radial":
        if rho_profile is None:
            raise ValueError("The radial residual needs a density profile.")
        h = np.asarray(profile.value(x))
        rho = np.asarray(rho_profile.value(x))
        q = mu * dprof
        core = rho * h**2 + 4.0 * mu * h - C
        res = (q[2:] - q[:-2]) / (2.0 * dx) + core[1:-1]
        breaks |= set(rho_profile.interior_breakpoints)
    else:
        raise ValueError(f"Unknown symmetric family {kind!r}.")

    keep = _off_interface(x[1:-1], sorted(breaks), dx)
    if not np.any(keep):
        return 0.0
    scale = 1.0 + abs(C) + float(np.max(np.abs(q)))
    return float(np.max(np.abs(res[keep]))) / scale


def sector_fields(
    kind: str,
    grid: Grid,
    profile: PiecewiseProfile,
    rho_profile: PiecewiseProfile,
    mu_profile: PiecewiseProfile,
) -> Tuple[VectorField, ScalarField, ScalarField]:
    """Sample a concentric (g(r)) or radial (h(θ)) flow on a grid in the first quadrant."""
    x1, x2 = grid.coordinates()
    r = np.hypot(x1, x2)
    if kind == "concentric":
        coord = r
        g = np.asarray(profile.value(r))
        u1, u2 = g * x2, -g * x1  # r·g·e_θ
    elif kind == "radial":
        coord = np.arctan2(x2, x1)
        h = np.asarray(profile.value(coord))
        u1, u2 = h * x1 / r**2, h * x2 / r**2
    else:
        raise ValueError(f"Unknown sector family {kind!r}.")
    rho = ScalarField(grid, np.asarray(rho_profile.value(coord)) * np.ones(grid.shape))
    mu = ScalarField(grid, np.asarray(mu_profile.value(coord)) * np.ones(grid.shape))
    return VectorField.from_components(grid, u1, u2), rho, mu


def _advective_acceleration(u: VectorField, rho: ScalarField) -> np.ndarray:
    out = np.empty((2,) + u.grid.shape)
    for a in range(2):
        grad = gradient(ScalarField(u.grid, u.values[a]))
        out[a] = rho.values * (u.v1 * grad.v1 + u.v2 * grad.v2)
    return out


def _relative_interior_error(numeric: np.ndarray, exact: np.ndarray, grid: Grid) -> float:
    mask = grid.interior_mask(2)
    err = np.max(np.abs(numeric[:, mask] - exact[:, mask]))
    return float(err / max(1.0, np.max(np.abs(exact[:, mask]))))


def centripetal_identity_residual(
    grid: Grid, g_profile: PiecewiseProfile, rho_profile: PiecewiseProfile, mu_profile: PiecewiseProfile
) -> float:
    """ρ(u·∇)u = −rρg²e_r for u = r·g(r)e_θ, checked at interior nodes."""
    u, rho, _ = sector_fields("concentric", grid, g_profile, rho_profile, mu_profile)
    x1, x2 = grid.coordinates()
    g = np.asarray(g_profile.value(np.hypot(x1, x2)))
    exact = np.stack([-rho.values * g**2 * x1, -rho.values * g**2 * x2])
    return _relative_interior_error(_advective_acceleration(u, rho), exact, grid)


def radial_convection_identity_residual(
    grid: Grid, h_profile: PiecewiseProfile, rho_profile: PiecewiseProfile, mu_profile: PiecewiseProfile
) -> float:
    """ρ(u·∇)u = −ρh²/r³ e_r for u = (h(θ)/r)e_r."""
    u, rho, _ = sector_fields("radial", grid, h_profile, rho_profile, mu_profile)
    x1, x2 = grid.coordinates()
    r = np.hypot(x1, x2)
    h = np.asarray(h_profile.value(np.arctan2(x2, x1)))
    factor = -rho.values * h**2 / r**4
    exact = np.stack([factor * x1, factor * x2])
    return _relative_interior_error(_advective_acceleration(u, rho), exact, grid)


def _viscous_force(u: VectorField, mu: ScalarField) -> np.ndarray:
    S = deformation(u)
    return tensor_divergence(TensorField(u.grid, mu.values * S.values)).values


def _polar_frame(grid: Grid):
    x1, x2 = grid.coordinates()
    r = np.hypot(x1, x2)
    e_r = np.stack([x1 / r, x2 / r])
    e_t = np.stack([x2 / r, -x1 / r])
    return r, np.arctan2(x2, x1), e_r, e_t


def _theta_derivatives(theta: np.ndarray, h_profile: PiecewiseProfile, mu_profile: PiecewiseProfile):
    """∂_θ(μ∂_θh) and ∂_θ(μh) at the given angles, from a fine θ sampling."""
    t = np.linspace(float(np.min(theta)), float(np.max(theta)), 4001)
    mu_t = np.asarray(mu_profile.value(t))
    flux = np.gradient(mu_t * np.asarray(h_profile.derivative(t)), t, edge_order=2)
    mh = np.gradient(mu_t * np.asarray(h_profile.value(t)), t, edge_order=2)
    return np.interp(theta, t, flux), np.interp(theta, t, mh)


def radial_stress_identity_residual(
    grid: Grid, h_profile: PiecewiseProfile, rho_profile: PiecewiseProfile, mu_profile: PiecewiseProfile
) -> float:
    """div(μSu) = ∂_θ(μ∂_θh)/r³ e_r − 2∂_θ(μh)/r³ e_θ for u = (h(θ)/r)e_r."""
    u, _, mu = sector_fields("radial", grid, h_profile, rho_profile, mu_profile)
    r, theta, e_r, e_t = _polar_frame(grid)
    flux, mh = _theta_derivatives(theta, h_profile, mu_profile)
    exact = (flux / r**3) * e_r - (2.0 * mh / r**3) * e_t
    return _relative_interior_error(_viscous_force(u, mu), exact, grid)


def _pressure_gradient(u: VectorField, rho: ScalarField, mu: ScalarField) -> np.ndarray:
    # ∇Π = −ρ(u·∇)u + div(μSu) for a force-free symmetric flow
    return -_advective_acceleration(u, rho) + _viscous_force(u, mu)


def concentric_pressure_identity_residual(
    grid: Grid,
    g_profile: PiecewiseProfile,
    rho_profile: PiecewiseProfile,
    mu_profile: PiecewiseProfile,
    C: float,
) -> float:
    """∇Π = rρg²e_r − (C/r)e_θ for the concentric family."""
    u, rho, mu = sector_fields("concentric", grid, g_profile, rho_profile, mu_profile)
    r, _, e_r, e_t = _polar_frame(grid)
    g = np.asarray(g_profile.value(r))
    exact = (r * rho.values * g**2) * e_r - (C / r) * e_t
    return _relative_interior_error(_pressure_gradient(u, rho, mu), exact, grid)


def radial_pressure_identity_residual(
    grid: Grid,
    h_profile: PiecewiseProfile,
    rho_profile: PiecewiseProfile,
    mu_profile: PiecewiseProfile,
    C: float,
) -> float:
    """∇Π = ((C − 4μh)/r³)e_r − (2∂_θ(μh)/r³)e_θ for a radial solution."""
    u, rho, mu = sector_fields("radial", grid, h_profile, rho_profile, mu_profile)
    r, theta, e_r, e_t = _polar_frame(grid)
    _, mh = _theta_derivatives(theta, h_profile, mu_profile)
    h = np.asarray(h_profile.value(theta))
    exact = ((C - 4.0 * mu.values * h) / r**3) * e_r - (2.0 * mh / r**3) * e_t
    return _relative_interior_error(_pressure_gradient(u, rho, mu), exact, grid)
