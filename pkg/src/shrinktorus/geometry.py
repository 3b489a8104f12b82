"""Profile-curve geometry for rotationally symmetric self-shrinkers.

A surface of revolution around the x1-axis, generated by a curve
(x1(t), x2(t)) in the upper half-plane {x2 > 0}, shrinks homothetically
under mean curvature flow iff the curve is a geodesic of the conformal
half-plane metric

    lambda(x, y)^2 (dx^2 + dy^2),    lambda = y * exp(-(x^2 + y^2)/4),

the classical metric of Angenent's torus construction.  This module holds
the curve-level machinery: the second-order right-hand sides of the
shrinker equation in four charts (graphs over either axis, polar
coordinates on the sphere, and arc-length parametrization), the induced
geometric quantities (speed, |A|^2, conformal Gauss curvature, mean
curvature), and sup-norm residual certification of sampled curve pieces.

Exact reference solutions used throughout the test suite: the cylinder of
radius sqrt(2) and the sphere of radius 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.interpolate import CubicHermiteSpline

SQRT2 = math.sqrt(2.0)

# Chart-switch hysteresis: leave a graph chart when the slope magnitude
# exceeds SLOPE_SWITCH, re-enter only below SLOPE_RETURN.
SLOPE_SWITCH = 2.0
SLOPE_RETURN = 1.5
# Hard validity limit for a graph chart (escape error beyond this).
SLOPE_LIMIT = 4.0
# Below this polar angle, 1/tan(phi) is replaced by its two-term expansion.
POLAR_POLE_GUARD = 1e-3


class DomainError(ValueError):
    """State left the geometric domain (axis touch, nonpositive radius)."""


class ChartEscapeError(RuntimeError):
    """State left the chart's validity region; a chart switch is required."""


class Chart(Enum):
    GRAPH_X1 = "GraphX1"   # ordinate u(x1), rotation-axis graph
    GRAPH_X2 = "GraphX2"   # abscissa f(x2), graph over the vertical axis
    POLAR = "Polar"        # rho(phi), polar coordinates about the origin
    ARC = "ArcParam"       # (x, y, dx, dy), constant-speed parametrization


@dataclass(frozen=True)
class CurveState:
    """One point of a profile curve with derivative data.

    ``t`` is the curve parameter in chart-dependent units; ``dx`` and
    ``dy`` are derivatives with respect to ``t``.  The rotation axis
    (y = 0) is excluded and the parametrization must be regular.
    """

    t: float
    x: float
    y: float
    dx: float
    dy: float

    def __post_init__(self):
        if not self.y > 0.0:
            raise DomainError(f"profile point off the half-plane: y = {self.y}")
        if not self.dx * self.dx + self.dy * self.dy > 0.0:
            raise DomainError("degenerate parametrization: dx = dy = 0")

    @property
    def omega(self) -> float:
        return self.dx * self.dx + self.dy * self.dy

    def reflected(self) -> "CurveState":
        """Mirror image under x1 -> -x1 (the profile symmetry plane)."""
        return CurveState(self.t, -self.x, self.y, -self.dx, self.dy)


@dataclass(frozen=True)
class GeomQuantities:
    omega: float   # squared parametrization speed
    a_sq: float    # |A|^2, squared norm of the second fundamental form
    k_ang: float   # Gauss curvature of the conformal half-plane metric
    h: float       # mean curvature, h = <X, nu>/2 on shrinker states


# ---------------------------------------------------------------------------
# Second-order right-hand sides (graph charts)
# ---------------------------------------------------------------------------

def curvature_rhs_x1(u, p, x1):
    """u'' for a shrinker graph u(x1) over the rotation axis.

    Returns [(x1*p - u)/2 + 1/u] * (1 + p^2); u > 0 required.
    """
    if np.any(np.asarray(u) <= 0.0):
        raise DomainError("axis touch: u <= 0 in the x1-graph chart")
    return ((x1 * p - u) / 2.0 + 1.0 / u) * (1.0 + p * p)


def curvature_rhs_x2(f, q, x2):
    """f'' for a shrinker graph x1 = f(x2) over the vertical axis.

    Returns [(x2/2 - 1/x2) q - f/2] * (1 + q^2); x2 > 0 required.
    """
    if np.any(np.asarray(x2) <= 0.0):
        raise DomainError("axis touch: x2 <= 0 in the x2-graph chart")
    return ((x2 / 2.0 - 1.0 / x2) * q - f / 2.0) * (1.0 + q * q)


# Partial derivatives of the two graph right-hand sides.  These drive both
# the linearized (Jacobi) coefficients and the envelope integrands of the
# certified gap propagation.

def d_rhs_x1_du(u, p):
    return (-0.5 - 1.0 / (u * u)) * (1.0 + p * p)


def d_rhs_x1_dp(u, p, x1):
    return (x1 / 2.0) * (1.0 + p * p) + 2.0 * p * ((x1 * p - u) / 2.0 + 1.0 / u)


def d_rhs_x2_df(f, q, x2):
    del f
    return -0.5 * (1.0 + q * q)


def d_rhs_x2_dq(f, q, x2):
    return (x2 / 2.0 - 1.0 / x2) * (1.0 + 3.0 * q * q) - f * q


# ---------------------------------------------------------------------------
# Polar and arc-length charts
# ---------------------------------------------------------------------------

def cot_guarded(phi):
    """1/tan(phi) with a two-term expansion near the pole phi = 0.

    The regular solution through the pole is analytic although the
    coefficient is singular, so the guarded expansion keeps integrators
    well behaved on |phi| < POLAR_POLE_GUARD.
    """
    phi = np.asarray(phi, dtype=float)
    small = np.abs(phi) < POLAR_POLE_GUARD
    safe = np.where(small, 1.0, phi)
    out = np.where(small, 1.0 / np.where(phi == 0.0, np.inf, phi) - phi / 3.0,
                   1.0 / np.tan(safe))
    return out if out.ndim else float(out)


def polar_rhs(rho, drho, phi):
    """rho'' for a shrinker curve rho(phi) in polar coordinates."""
    if rho <= 0.0:
        raise DomainError("nonpositive radius in the polar chart")
    if not 0.0 < phi < math.pi:
        raise ChartEscapeError("polar angle outside (0, pi)")
    r2 = rho * rho
    s2 = r2 + drho * drho
    return (r2 + 2.0 * drho * drho
            + (1.0 - r2 / 2.0 - drho * cot_guarded(phi) / rho) * s2) / rho


def shrinker_rhs(t, w, chart: Chart):
    """First-order right-hand side of the shrinker ODE in the given chart.

    State vectors: GRAPH_X1 (u, u'), GRAPH_X2 (f, f'), POLAR (rho, rho'),
    ARC (x, y, dx, dy).  In the arc chart the returned second derivatives
    satisfy x''y' - y''x' = [(y x' - x y')/2 - x'/y] * omega together with
    constant speed; in particular any constant-speed parametrization is
    preserved exactly.
    """
    if chart is Chart.GRAPH_X1:
        u, p = w
        if abs(p) > SLOPE_LIMIT:
            raise ChartEscapeError("slope beyond x1-graph validity; switch charts")
        return [p, curvature_rhs_x1(u, p, t)]
    if chart is Chart.GRAPH_X2:
        f, q = w
        if abs(q) > SLOPE_LIMIT:
            raise ChartEscapeError("slope beyond x2-graph validity; switch charts")
        return [q, curvature_rhs_x2(f, q, t)]
    if chart is Chart.POLAR:
        rho, drho = w
        return [drho, polar_rhs(rho, drho, t)]
    if chart is Chart.ARC:
        x, y, dx, dy = w
        if y <= 0.0:
            raise DomainError("axis touch in arc-length integration")
        curv = (y * dx - x * dy) / 2.0 - dx / y
        return [dx, dy, curv * dy, -curv * dx]
    raise ValueError(f"unknown chart {chart!r}")


def mode0_coeffs_x1(u, p, x1):
    """(P, Q) with omega*L0 v = v'' + P v' + Q v for an x1-graph shrinker."""
    p_coef = -(x1 / 2.0) * (1.0 + p * p)
    q_coef = ((u - x1 * p) / 2.0 - 1.0 / u) ** 2 + 1.0 / (u * u) \
        + (1.0 + p * p) / 2.0
    return p_coef, q_coef


def mode0_coeffs_x2(f, q, x2):
    """(R, S) with omega*L0 g = g'' + R g' + S g for an x2-graph shrinker."""
    r_coef = (1.0 / x2 - x2 / 2.0) * (1.0 + q * q)
    s_coef = ((x2 * q - f) / 2.0 - q / x2) ** 2 + q * q / (x2 * x2) \
        + (1.0 + q * q) / 2.0
    return r_coef, s_coef


# ---------------------------------------------------------------------------
# Induced geometric quantities
# ---------------------------------------------------------------------------

def angenent_factor(x, y):
    """Conformal factor lambda = y exp(-(x^2+y^2)/4) of the half-plane metric."""
    return y * np.exp(-(x * x + y * y) / 4.0)


def angenent_curvature(x, y):
    """Gauss curvature of the conformal metric, exp((x^2+y^2)/2)/y^2 (1 + 1/y^2)."""
    return np.exp((x * x + y * y) / 2.0) / (y * y) * (1.0 + 1.0 / (y * y))


def mean_curvature(x, y, dx, dy):
    """h = <X, nu>/2 with nu the rotation of the unit tangent, (dy, -dx)/sqrt(omega).

    This convention gives h = +1 on the radius-2 sphere with outward normal.
    The sign flips with the traversal direction of the curve.
    """
    return (x * dy - y * dx) / (2.0 * np.sqrt(dx * dx + dy * dy))


def geom_quantities(state: CurveState) -> GeomQuantities:
    """Speed, |A|^2, conformal Gauss curvature and mean curvature at a state.

    The |A|^2 expression uses the shrinker equation to eliminate second
    derivatives, so it is meaningful on (approximate) shrinker curves only.
    Both a_sq and k_ang are invariant under reparametrization.
    """
    x, y, dx, dy = state.x, state.y, state.dx, state.dy
    om = state.omega
    curv = (y * dx - x * dy) / 2.0 - dx / y
    a_sq = (curv * curv + dx * dx / (y * y)) / om
    return GeomQuantities(
        omega=om,
        a_sq=a_sq,
        k_ang=float(angenent_curvature(x, y)),
        h=float(mean_curvature(x, y, dx, dy)),
    )


# ---------------------------------------------------------------------------
# Sampled curve pieces with certified residuals
# ---------------------------------------------------------------------------

_CHART_RESIDUAL = {
    Chart.GRAPH_X1: curvature_rhs_x1,
    Chart.GRAPH_X2: curvature_rhs_x2,
}


@dataclass
class ProfileSegment:
    """A curve piece in one graph/polar chart with dense cubic output.

    Stores the dependent variable and its first derivative as a cubic
    Hermite interpolant on the sample grid; ``epsilon`` is a certified
    sup-norm bound for the shrinker-equation residual u'' - M(u, u') on
    the domain (filled by :func:`residual_sup`).
    """

    chart: Chart
    grid: np.ndarray
    spline: CubicHermiteSpline
    epsilon: float | None = None

    @classmethod
    def from_samples(cls, chart, grid, values, slopes):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if chart in (Chart.GRAPH_X1, Chart.POLAR) and np.any(values <= 0.0):
            raise DomainError("dependent variable leaves the chart validity region")
        if chart is Chart.GRAPH_X2 and np.any(grid <= 0.0):
            raise DomainError("x2-graph domain touches the axis")
        if grid[0] > grid[-1]:
            grid, values, slopes = grid[::-1], values[::-1], np.asarray(slopes)[::-1]
        spline = CubicHermiteSpline(grid, values, slopes)
        return cls(chart=chart, grid=grid, spline=spline)

    @property
    def domain(self):
        return float(self.grid[0]), float(self.grid[-1])

    def value(self, x):
        return self.spline(x)

    def slope(self, x):
        return self.spline(x, 1)

    def residual(self, x):
        """Pointwise shrinker-equation residual u''(x) - M(u, u', x)."""
        u = self.spline(x)
        du = self.spline(x, 1)
        d2u = self.spline(x, 2)
        if self.chart is Chart.POLAR:
            rhs = np.array([polar_rhs(ui, dui, xi)
                            for ui, dui, xi in zip(np.atleast_1d(u),
                                                   np.atleast_1d(du),
                                                   np.atleast_1d(x))])
            return d2u - (rhs if np.ndim(x) else rhs[0])
        return d2u - _CHART_RESIDUAL[self.chart](u, du, x)


def residual_sup(segment: ProfileSegment, n: int = 4096) -> float:
    """Certified sup-norm bound of the shrinker residual on the segment.

    Node-wise maximum padded by L*h, where L is a sampled Lipschitz
    estimate of the residual and h the node spacing; node evaluation alone
    gives only a pointwise bound.  The result is stored on the segment.
    """
    a, b = segment.domain
    xs = np.linspace(a, b, n)
    res = np.abs(segment.residual(xs))
    h = (b - a) / (n - 1)
    lip = float(np.max(np.abs(np.diff(res)))) / h if n > 1 else 0.0
    eps = float(res.max() + lip * h)
    segment.epsilon = eps
    return eps
