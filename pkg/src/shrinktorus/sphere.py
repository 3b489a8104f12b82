"""Closed-form kernel analysis on the spherical pieces.

On the radius-2 sphere the rotationally symmetric stability kernel
equation in the polar angle is

    w'' + w'/tan(phi) + 4 w = 0,

Legendre's equation after x = cos(phi), of non-integer degree
l0 = (sqrt(17)-1)/2, the positive root of l(l+1) = 4.  General solutions
are C1 P_l0(cos phi) + C2 Q_l0(cos phi); Q has a logarithmic pole at the
axis (phi = 0), so regularity at the pole forces C2 = 0 there.

Kernel triviality of the three sphere pieces then reduces to explicit
special-function margins: the equator derivative of P_l0 (a closed-form
gamma-function value) for the Neumann hemisphere, positivity of P_l0 at
the certified torus crossing angle for the polar cap, and positivity of
the equator-normalized solution at the crossing angle for the top cap.

The non-integer degree rules out the classical polynomial recurrences, so
P is evaluated by a hypergeometric series about the pole; Q by the
reflection identity.  Direct integration of the polar equation from a
regular series start at the pole provides the independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .geometry import DomainError, cot_guarded, polar_rhs

SQRT17 = math.sqrt(17.0)
DEGREE = (SQRT17 - 1.0) / 2.0       # positive root of l(l+1) = 4

# Equator derivative of P_degree(cos phi): closed gamma-function form.
EQUATOR_DERIVATIVE = (math.sqrt(math.pi) / 2.0) * (SQRT17 + 1.0) / (
    math.gamma((1.0 - SQRT17) / 4.0) * math.gamma((5.0 + SQRT17) / 4.0))

SPHERE_PIECES = ("S1", "S3", "S4")
ANGLE_CENTER = 1.1
ANGLE_HALFWIDTH = 5e-3
SERIES_TOL = 1e-16


@dataclass(frozen=True)
class LegendrePair:
    """Coefficients of P and Q of the fixed non-integer degree."""

    degree: float
    c1: float
    c2: float

    def __post_init__(self):
        if abs(self.degree * (self.degree + 1.0) - 4.0) > 1e-14:
            raise ValueError("degree must solve l(l+1) = 4")

    def __call__(self, phi):
        val_p, _ = legendre_eval("P", self.degree, np.cos(phi))
        val_q, _ = legendre_eval("Q", self.degree, np.cos(phi))
        return self.c1 * val_p + self.c2 * val_q


def _hyp2f1_series(a, b, z, max_terms=200000):
    """2F1(a, b; 1; z) with first and second z-derivatives, by summation.

    Terms are c_n z^n with c_n = (a)_n (b)_n / (n!)^2; the parameters
    satisfy c - a - b = 0, so convergence is logarithmically slow as
    z -> 1 (the Q pole); fine on z < 1.
    """
    term = 1.0     # c_n z^n
    total = 1.0
    dtotal = 0.0   # sum n c_n z^(n-1)
    d2total = 0.0  # sum n(n-1) c_n z^(n-2)
    n = 0
    while n < max_terms:
        term *= (a + n) * (b + n) * z / ((n + 1.0) ** 2)
        total += term
        zsafe = z if z != 0.0 else 1.0
        dtotal += (n + 1.0) * term / zsafe
        if n >= 1:
            d2total += (n + 1.0) * n * term / (zsafe * zsafe)
        n += 1
        if abs(term) < SERIES_TOL * (abs(total) + 1.0) and n > 8:
            break
    else:
        raise DomainError("hypergeometric series did not converge; "
                          "argument too close to the pole")
    return total, dtotal, d2total


def _legendre_p_scalar(degree, x):
    """P_degree(x) and dP/dx from the series about x = 1."""
    z = (1.0 - x) / 2.0
    if z < 0.0 or z >= 1.0:
        raise DomainError(f"Legendre argument {x} outside (-1, 1]")
    if z == 0.0:
        return 1.0, degree * (degree + 1.0) / 2.0
    val, dval_dz, _ = _hyp2f1_series(-degree, degree + 1.0, z)
    return val, -0.5 * dval_dz


def _legendre_q_scalar(degree, x):
    """Q_degree(x) and dQ/dx on (-1, 1) by the reflection identity."""
    if not -1.0 < x < 1.0:
        raise DomainError(f"Q is singular at the endpoints; got x = {x}")
    s = math.sin(degree * math.pi)
    c = math.cos(degree * math.pi)
    p_pos, dp_pos = _legendre_p_scalar(degree, x)
    p_neg, dp_neg = _legendre_p_scalar(degree, -x)
    val = math.pi / (2.0 * s) * (c * p_pos - p_neg)
    dval = math.pi / (2.0 * s) * (c * dp_pos + dp_neg)
    return val, dval


def legendre_eval(kind, degree, x):
    """Legendre function value and its derivative with respect to phi.

    ``x`` is cos(phi); the returned derivative is d/dphi of
    P_degree(cos phi) (resp. Q), i.e. -sin(phi) times the x-derivative.
    P is regular at x = 1, Q has a pole there.
    """
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, float))
    vals = np.empty_like(xs)
    dphis = np.empty_like(xs)
    fn = _legendre_p_scalar if kind == "P" else _legendre_q_scalar
    if kind not in ("P", "Q"):
        raise ValueError(f"kind must be 'P' or 'Q', got {kind!r}")
    for i, xi in enumerate(xs):
        v, dv_dx = fn(degree, xi)
        vals[i] = v
        dphis[i] = -math.sqrt(max(1.0 - xi * xi, 0.0)) * dv_dx
    if scalar:
        return float(vals[0]), float(dphis[0])
    return vals, dphis


def polar_shrinker_rhs(rho, drho, phi):
    """Second derivative of the polar-chart shrinker equation (shared form)."""
    return polar_rhs(rho, drho, phi)


def integrate_polar_kernel(phi_end, phi_start=1e-6, rtol=1e-12, atol=1e-14):
    """ODE oracle for the regular solution of the polar kernel equation.

    Starts at the regular singular point with the series expansion of the
    analytic solution, w = 1 - phi^2 + O(phi^4), and integrates
    w'' + w'/tan(phi) + 4 w = 0 outward.  Up to normalization this is
    P_degree(cos phi).
    """

    def rhs(phi, w):
        return (w[1], -cot_guarded(phi) * w[1] - 4.0 * w[0])

    w0 = (1.0 - phi_start ** 2, -2.0 * phi_start)
    sol = solve_ivp(rhs, (phi_start, phi_end), w0, method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True)
    return sol.sol


def polar_equation_residual(phis, degree=DEGREE):
    """Sup residual of P_degree(cos phi) against the polar kernel equation.

    All three derivatives come from the hypergeometric series, so this
    checks the series implementation itself against the equation it is
    supposed to solve (summation accuracy, coefficient recurrences).
    """
    worst = 0.0
    for phi in np.atleast_1d(np.asarray(phis, float)):
        x = math.cos(phi)
        z = (1.0 - x) / 2.0
        val, d1, d2 = _hyp2f1_series(-degree, degree + 1.0, z)
        dp_dx = -0.5 * d1
        d2p_dx2 = 0.25 * d2
        s = math.sin(phi)
        w = val
        dw = -s * dp_dx
        d2w = s * s * d2p_dx2 - x * dp_dx
        res = d2w + cot_guarded(phi) * dw + 4.0 * w
        worst = max(worst, abs(res))
    return worst


def equator_pinned_solution():
    """LegendrePair with w(pi/2) = 1 and w'(pi/2) = 0.

    Solves the 2x2 system given by the values and phi-derivatives of P and
    Q at the equator (their Wronskian matrix there).
    """
    p0, dp0 = legendre_eval("P", DEGREE, 0.0)
    q0, dq0 = legendre_eval("Q", DEGREE, 0.0)
    mat = np.array([[p0, q0], [dp0, dq0]])
    c = np.linalg.solve(mat, np.array([1.0, 0.0]))
    return LegendrePair(degree=DEGREE, c1=float(c[0]), c2=float(c[1]))


def sphere_kernel_check(piece, angle_center=ANGLE_CENTER,
                        angle_halfwidth=ANGLE_HALFWIDTH,
                        budget=1e-9, n=201) -> dict:
    """Kernel verdict for one spherical piece.

    S1 (Neumann hemisphere): the regular solution is forced to a multiple
    of P, and its equator derivative is bounded away from zero.
    S3 (polar cap, Dirichlet at the crossing circle): P stays positive on
    the whole certified crossing-angle interval; the displaced reference
    angle 10/11 + 50e-3 is evaluated and reported alongside.
    S4 (top cap, Neumann at the equator plane, Dirichlet at the crossing):
    the equator-pinned solution exceeds 1/2 on the certified interval.
    Margins must exceed twice the budget, else the verdict is
    ``inconclusive``; a false ``trivial`` is never produced.
    """
    if piece not in SPHERE_PIECES:
        raise ValueError(f"unknown sphere piece {piece!r}")
    angles = np.linspace(angle_center - angle_halfwidth,
                         angle_center + angle_halfwidth, n)
    report = {"piece": piece, "budget": budget,
              "angle_interval": [angles[0], angles[-1]]}
    if piece == "S1":
        _, dphi = legendre_eval("P", DEGREE, 0.0)
        margin = abs(dphi)
        report.update({
            "equator_derivative": dphi,
            "gamma_formula": EQUATOR_DERIVATIVE,
            "margin": margin,
            "threshold": 0.0,
        })
    elif piece == "S3":
        vals, _ = legendre_eval("P", DEGREE, np.cos(angles))
        alt_angle = 10.0 / 11.0 + 50.0 * 1e-3
        alt_val, _ = legendre_eval("P", DEGREE, math.cos(alt_angle))
        margin = float(vals.min())
        report.update({
            "min_value": margin,
            "reference_threshold": 3.0 / 50.0,
            "exceeds_reference": bool(margin > 3.0 / 50.0),
            "displaced_angle": alt_angle,
            "displaced_angle_value": float(alt_val),
            "margin": margin,
            "threshold": 0.0,
        })
    else:
        pair = equator_pinned_solution()
        vals = pair(angles)
        margin = float(np.min(vals) - 0.5)
        report.update({
            "min_value": float(np.min(vals)),
            "coefficients": [pair.c1, pair.c2],
            "reference_threshold": 0.5,
            "margin": margin,
            "threshold": 0.5,
        })
    report["verdict"] = "trivial" if report["margin"] > 2.0 * budget \
        else "inconclusive"
    return report
