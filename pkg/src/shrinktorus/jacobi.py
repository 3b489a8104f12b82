"""Stability-operator kernels on the torus pieces.

The second-variation (stability) operator of the shrinker functional on a
surface of revolution,

    L u = Lap u + |A|^2 u - (X . grad u - u)/2,

separates over Fourier modes in the rotation angle.  For mode m and a
profile curve in Euclidean arc length s the radial equation is

    v'' + [y'/y - (x x' + y y')/2] v' + (|A|^2 + 1/2 - m^2/y^2) v = 0,

which on the radius-2 sphere reduces to the classical polar equation
w'' + w'/tan(phi) + 4 w = 0.  Mean curvature H is an exact eigenfunction
with eigenvalue one, the regression anchor of the whole integration stack.

Kernel triviality on the torus pieces is decided from shot endpoint data:
Dirichlet pieces need the endpoint value bounded away from zero, and the
Neumann problem on the half-torus reduces to nonsingularity of the 2x2
matching matrix of the top and bottom mode solutions at the sphere
crossing.  Endpoint derivatives are reported in the isothermal convention
(d/dtau with dtau = ds/y), the normalization in which the reference
endpoint tables and the matching matrix are stated.  Modes at or above
the cutoff M0 = sup y sqrt(1/2 + |A|^2) are trivial outright by the
maximum principle.  Verdict margins must exceed twice the propagated
error budget; otherwise the verdict is inconclusive, never falsely
trivial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .geometry import (
    SQRT2,
    Chart,
    CurveState,
    angenent_curvature,
    angenent_factor,
    mode0_coeffs_x1,
    mode0_coeffs_x2,
)
from . import gronwall
from .shooting import HalfProfile

PIECES = ("S2", "S5", "S6")


# ---------------------------------------------------------------------------
# Traversal views of the half-profile
# ---------------------------------------------------------------------------

class PieceView:
    """One side of the half-profile in its own traversal parametrization.

    ``top`` runs from the upper axis point toward the junction; ``bottom``
    from the lower axis point through the junction up to the sphere
    crossing (its tail rides the top shot's dense output, reversed).
    """

    def __init__(self, profile: HalfProfile, name: str):
        self.profile = profile
        self.name = name
        t_jt = profile.top.t_cross
        t_jb = profile.bottom.t_cross
        t_s = profile.sigma_sphere
        if name == "top":
            self.tau_sphere = t_s
            self.tau_end = t_jt
        elif name == "bottom":
            self.tau_junction = t_jb
            self.tau_sphere = t_jb + (t_jt - t_s)
            self.tau_end = self.tau_sphere
        elif name == "full":
            # coherent traversal of the whole half-profile, top to bottom
            self.tau_sphere = t_s
            self.tau_end = profile.length
        else:
            raise ValueError(f"unknown piece {name!r}")

    def state(self, tau):
        if self.name == "top":
            return self.profile.top.sol(tau)
        if self.name == "full":
            return self.profile.state(tau)
        if tau <= self.tau_junction:
            return self.profile.bottom.sol(tau)
        st = self.profile.top.sol(self.profile.top.t_cross
                                  - (tau - self.tau_junction))
        st = np.asarray(st, float).copy()
        st[2:] = -st[2:]
        return st


def _a_sq(st):
    x, y, dx, dy = st
    om = dx * dx + dy * dy
    return (((y * dx - x * dy) / 2.0 - dx / y) ** 2 + dx * dx / (y * y)) / om


def _mode_rhs(view: PieceView, m: int):
    msq = float(m * m)

    def rhs(tau, w):
        x, y, dx, dy = view.state(tau)
        c1 = dy / y - (x * dx + y * dy) / 2.0
        c0 = _a_sq((x, y, dx, dy)) + 0.5 - msq / (y * y)
        return (w[1], -c1 * w[1] - c0 * w[0])

    return rhs


# ---------------------------------------------------------------------------
# Mode problems and solutions
# ---------------------------------------------------------------------------

@dataclass
class ModeProblem:
    m: int
    profile: HalfProfile
    piece: str = "top"             # "top" | "bottom" | "full"
    bc_start: str = "neumann"      # normalization at the axis point
    tau_end: float | None = None   # default: the sphere crossing

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("Fourier mode must be nonnegative")
        if self.bc_start not in ("neumann", "dirichlet"):
            raise ValueError(f"unknown boundary condition {self.bc_start!r}")


@dataclass
class ModeSolution:
    m: int
    piece: str
    endpoint_value: float
    endpoint_derivative: float        # isothermal convention, y * dv/ds
    endpoint_arc_derivative: float    # dv/ds at the endpoint
    zero_count: int
    residual: float
    taus: np.ndarray = field(repr=False, default=None)
    values: np.ndarray = field(repr=False, default=None)
    slopes: np.ndarray = field(repr=False, default=None)


def count_zeros(taus, values, slopes):
    """Interior sign changes with a derivative-based tangency guard."""
    count = 0
    scale = float(np.max(np.abs(values)))
    for i in range(len(taus) - 1):
        a, b = values[i], values[i + 1]
        if a == 0.0 and 0 < i:
            count += 1
        elif a * b < 0.0:
            count += 1
        elif abs(a) < 1e-13 * scale and 0 < i and abs(slopes[i]) < 1e-10 * scale:
            # tangential touch: excluded by ODE uniqueness, flag loudly
            raise RuntimeError("tangential zero of a nontrivial mode solution")
    return count


def integrate_mode(problem: ModeProblem, rtol=1e-12, atol=1e-13,
                   n_dense=2000) -> ModeSolution:
    """Integrate the mode equation along the located curve.

    Starts from the axis point with v = 1, v' = 0 (Neumann normalization)
    or v = 0, v' = 1 (Dirichlet normalization), records endpoint data at
    the requested parameter (by default the sphere crossing), the interior
    zero count, and a certified sup-norm residual of the mode equation on
    the dense output.
    """
    view = PieceView(problem.profile, problem.piece)
    tau_end = problem.tau_end if problem.tau_end is not None else view.tau_sphere
    w0 = (1.0, 0.0) if problem.bc_start == "neumann" else (0.0, 1.0)
    sol = solve_ivp(_mode_rhs(view, problem.m), (0.0, tau_end), w0,
                    method="DOP853", rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"mode integration failed: {sol.message}")
    taus = np.linspace(0.0, tau_end, n_dense)
    vals, slopes = sol.sol(taus)
    x, y, dx, dy = view.state(tau_end)
    v_end, dv_end = sol.sol(tau_end)

    # certified residual of the dense output against the mode equation
    spline = CubicHermiteSpline(taus, vals, slopes)
    rhs = _mode_rhs(view, problem.m)
    res = np.abs(spline(taus, 2)
                 - np.array([rhs(t, (v, s))[1]
                             for t, v, s in zip(taus, vals, slopes)]))
    h = tau_end / (n_dense - 1)
    lip = float(np.max(np.abs(np.diff(res)))) / h
    delta = float(res.max() + lip * h)

    return ModeSolution(
        m=problem.m, piece=problem.piece,
        endpoint_value=float(v_end),
        endpoint_derivative=float(y * dv_end),
        endpoint_arc_derivative=float(dv_end),
        zero_count=count_zeros(taus, vals, slopes),
        residual=delta, taus=taus, values=vals, slopes=slopes)


# ---------------------------------------------------------------------------
# Operator application and identities
# ---------------------------------------------------------------------------

def stability_apply(profile: HalfProfile, u, du, d2u, sigma, m=0):
    """Apply the stability operator to rotationally symmetric samples.

    ``u``, ``du``, ``d2u`` are callables of the coherent arc-length
    parameter (mode-m radial part); returns L u on the grid ``sigma``.
    """
    sigma = np.asarray(sigma, float)
    x, y, dx, dy = profile.state(sigma)
    c1 = dy / y - (x * dx + y * dy) / 2.0
    c0 = _a_sq((x, y, dx, dy)) + 0.5 - (m * m) / (y * y)
    return d2u(sigma) + c1 * du(sigma) + c0 * u(sigma)


def mode_operator_coeffs(m, state: CurveState, chart: Chart):
    """(first-order, zeroth-order) coefficients of the mode-m radial ODE.

    Graph charts return the linearized-equation coefficients with the
    -m^2/y^2 correction folded in (v'' + P v' + Q_m v = 0 and the x2-graph
    analogue).  The arc chart returns the substituted self-adjoint form of
    the order-zero equation in conformal arc length, whose zeroth
    coefficient is exactly the conformal Gauss curvature.
    """
    if m < 0:
        raise ValueError("Fourier mode must be nonnegative")
    if chart is Chart.GRAPH_X1:
        u, p = state.y, state.dy / state.dx
        pc, qc = mode0_coeffs_x1(u, p, state.x)
        return pc, qc - m * m * (1.0 + p * p) / (u * u)
    if chart is Chart.GRAPH_X2:
        f, q = state.x, state.dx / state.dy
        rc, sc = mode0_coeffs_x2(f, q, state.y)
        return rc, sc - m * m * (1.0 + q * q) / (state.y * state.y)
    if chart is Chart.ARC:
        if m != 0:
            raise ValueError("the substituted conformal form is order-zero only")
        return 0.0, float(angenent_curvature(state.x, state.y))
    raise ValueError(f"mode coefficients undefined in chart {chart!r}")


def _h_and_derivatives(profile: HalfProfile, sigma):
    """Closed-form H, H', H'' along the coherent unit-speed profile."""
    x, y, dx, dy = profile.state(sigma)
    curv = (y * dx - x * dy) / 2.0 - dx / y
    h = (x * dy - y * dx) / 2.0
    xdd = curv * dy
    ydd = -curv * dx
    dh = -curv * (x * dx + y * dy) / 2.0
    dcurv = -dh - (xdd * y - dx * dy) / (y * y)
    d2h = -(dcurv * (x * dx + y * dy)
            + curv * (1.0 + x * xdd + y * ydd)) / 2.0
    return h, dh, d2h


def eigen_residual(profile: HalfProfile, n=800, margin=1e-6):
    """sup |L H - H| along the profile; H is the eigenvalue-one eigenfunction."""
    sigma = np.linspace(margin, profile.length - margin, n)
    x, y, dx, dy = profile.state(sigma)
    h, dh, d2h = _h_and_derivatives(profile, sigma)
    c1 = dy / y - (x * dx + y * dy) / 2.0
    c0 = _a_sq((x, y, dx, dy)) + 0.5
    lh = d2h + c1 * dh + c0 * h
    return float(np.max(np.abs(lh - h)))


def h_zero_count(profile: HalfProfile, n=4000):
    """Interior zeros of H along the coherent half-profile."""
    sigma = np.linspace(0.0, profile.length, n)
    h = profile.mean_curvature(sigma)
    sign = np.sign(h)
    return int(np.sum(sign[:-1] * sign[1:] < 0.0))


def conjugation_residual(profile: HalfProfile, w, dw, d2w, n=400):
    """Numeric check of the conjugation identity relating the two operators.

    Compares exp(-|X|^2/8) L (exp(|X|^2/8) w) against
    (Lap + |A|^2 - (|X|^2 + |X_perp|^2)/16 + 1) w with |X_perp| = 2|H|,
    on the supplied smooth rotationally symmetric samples.
    """
    sigma = np.linspace(1e-4, profile.length - 1e-4, n)
    x, y, dx, dy = profile.state(sigma)
    r2 = x * x + y * y
    phi = (x * dx + y * dy) / 4.0
    curv = (y * dx - x * dy) / 2.0 - dx / y
    xdd, ydd = curv * dy, -curv * dx
    dphi = (1.0 + x * xdd + y * ydd) / 4.0
    wv, dwv, d2wv = w(sigma), dw(sigma), d2w(sigma)

    u = wv
    du = dwv + phi * wv
    d2u = d2wv + 2.0 * phi * dwv + (phi * phi + dphi) * wv
    c1 = dy / y - (x * dx + y * dy) / 2.0
    asq = _a_sq((x, y, dx, dy))
    lhs = d2u + c1 * du + (asq + 0.5) * u   # exp factors cancel termwise

    h = (x * dy - y * dx) / 2.0
    lap = d2wv + (dy / y) * dwv
    rhs = lap + asq * wv - (r2 + 4.0 * h * h) / 16.0 * wv + wv
    return float(np.max(np.abs(lhs - rhs)))


def wronskian_drift(profile: HalfProfile, tau_end=None, rtol=1e-12,
                    atol=1e-13, n=400):
    """Relative Wronskian drift of two substituted-form Jacobi solutions.

    The substituted field w = lambda * v solves the self-adjoint equation
    w'' + K w = 0 in conformal arc length, so the Wronskian of any two
    solutions, evaluated with conformal-arc-length derivatives, must be
    constant; the drift measures integration quality.
    """
    view = PieceView(profile, "top")
    tau_end = view.tau_end if tau_end is None else tau_end

    def rhs(tau, w):
        x, y, dx, dy = view.state(tau)
        lam = angenent_factor(x, y)
        dlam = lam * (dy / y - (x * dx + y * dy) / 2.0)
        kang = angenent_curvature(x, y)
        out = np.empty(4)
        out[0] = w[1]
        out[1] = (dlam / lam) * w[1] - lam * lam * kang * w[0]
        out[2] = w[3]
        out[3] = (dlam / lam) * w[3] - lam * lam * kang * w[2]
        return out

    sol = solve_ivp(rhs, (0.0, tau_end), [1.0, 0.0, 0.0, 1.0],
                    method="DOP853", rtol=rtol, atol=atol, dense_output=True)
    taus = np.linspace(0.0, tau_end, n)
    w1, dw1, w2, dw2 = sol.sol(taus)
    x, y, dx, dy = profile.top.sol(taus)
    lam = angenent_factor(x, y)
    wr = (w1 * dw2 - w2 * dw1) / lam
    return float(np.max(np.abs(wr - wr[0])) / np.abs(wr[0]))


def loop_state(profile: HalfProfile, sigma):
    """State on the closed doubled profile, period 2 * profile.length.

    The second half is the mirror image across {x1 = 0}, traversed so the
    tangent is continuous; the closed loop supports mode integration past
    the axis points (conjugate distances here exceed the half-length).
    """
    two_l = 2.0 * profile.length
    s = sigma % two_l
    if s <= profile.length:
        return np.asarray(profile.state(s), float)
    st = np.asarray(profile.state(two_l - s), float).copy()
    return np.array([-st[0], st[1], st[2], -st[3]])


def first_conjugate_point(profile: HalfProfile, m, rtol=1e-12, atol=1e-13,
                          max_loops=2):
    """First zero of the Dirichlet-normalized mode solution from the top axis.

    Integrates around the closed doubled profile, so conjugate points
    beyond the half-length are found as well; returns None only if no
    zero occurs within ``max_loops`` circuits.
    """
    msq = float(m * m)

    def rhs(tau, w):
        x, y, dx, dy = loop_state(profile, tau)
        c1 = dy / y - (x * dx + y * dy) / 2.0
        c0 = _a_sq((x, y, dx, dy)) + 0.5 - msq / (y * y)
        return (w[1], -c1 * w[1] - c0 * w[0])

    t_max = max_loops * 2.0 * profile.length
    sol = solve_ivp(rhs, (0.0, t_max), (0.0, 1.0), method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True)
    taus = np.linspace(1e-9, t_max, 8000 * max_loops)
    vals = sol.sol(taus)[0]
    idx = np.nonzero(vals[:-1] * vals[1:] < 0.0)[0]
    if len(idx) == 0:
        return None
    i = idx[0]
    return brentq(lambda t: sol.sol(t)[0], taus[i], taus[i + 1], xtol=1e-13)


# ---------------------------------------------------------------------------
# Cutoff, matching matrix, verdicts
# ---------------------------------------------------------------------------

def mode_cutoff(profile: HalfProfile, n=4000):
    """Certified upper bound for M0 = sup y sqrt(1/2 + |A|^2) along the curve.

    Kernel verdicts for every mode m >= ceil(M0) are trivial without
    integration, by the maximum principle.
    """
    sigma = np.linspace(0.0, profile.length, n)
    st = profile.state(sigma)
    vals = st[1] * np.sqrt(0.5 + _a_sq(st))
    h = profile.length / (n - 1)
    lip = float(np.max(np.abs(np.diff(vals)))) / h
    return float(vals.max() + lip * h)


@dataclass
class EndpointMatrix:
    entries: np.ndarray
    det: float

    @classmethod
    def from_solutions(cls, top: ModeSolution, bot: ModeSolution):
        """Matching matrix of Neumann-normalized solutions at the sphere crossing.

        Columns are (top solution, minus bottom solution); a kernel element
        on the half-torus exists iff some combination matches value and
        (orientation-flipped) derivative, i.e. iff the matrix is singular.
        """
        n_mat = np.array([
            [top.endpoint_value, -bot.endpoint_value],
            [top.endpoint_derivative, bot.endpoint_derivative],
        ])
        det = (top.endpoint_value * bot.endpoint_derivative
               + bot.endpoint_value * top.endpoint_derivative)
        return cls(entries=n_mat, det=float(det))


def endpoint_matrix(top: ModeSolution, bot: ModeSolution) -> EndpointMatrix:
    return EndpointMatrix.from_solutions(top, bot)


def sturm_zero_check(solution: ModeSolution, h_zeros: int) -> dict:
    """Oscillation consistency of a Neumann mode-zero solution.

    H solves the eigenvalue-one problem with Neumann data and changes sign
    exactly once, so a kernel candidate (eigenvalue zero) must oscillate
    at least twice on the full half-profile; a solution with fewer zeros
    cannot be a kernel element.
    """
    can_be_kernel = solution.zero_count >= 2
    return {
        "h_zero_count": h_zeros,
        "solution_zero_count": solution.zero_count,
        "verdict": ("needs endpoint check" if can_be_kernel
                    else "cannot be kernel element"),
    }


def attach_mode_data(curve: gronwall.CurveData, profile: HalfProfile,
                     rtol=1e-12, atol=1e-13):
    """Register graph-chart views of the order-zero mode solutions.

    Feeds the recompute-only ledger stages and the pointwise envelope
    checks of the Jacobi assumptions; also records |v'| bounds at the
    chart switches for the derivative-gap conversions.
    """
    an = curve.anchors
    top_view = PieceView(profile, "top")
    bot_view = PieceView(profile, "bottom")
    sols = {}
    for name, view in (("top", top_view), ("bottom", bot_view)):
        sol = solve_ivp(_mode_rhs(view, 0), (0.0, view.tau_end), (1.0, 0.0),
                        method="DOP853", rtol=rtol, atol=atol,
                        dense_output=True)
        sols[name] = sol.sol

    def chart_interp(sol_dense, view, coord_kind, lo, hi, n=3000):
        taus = np.linspace(0.0, view.tau_end, n)
        st = np.array([view.state(t) for t in taus]).T
        coord = st[0] if coord_kind == "x" else st[1]
        dcoord = st[2] if coord_kind == "x" else st[3]
        v, dv = sol_dense(taus)
        keep = np.abs(dcoord) > 0.15
        coord, v, dv, dcoord = (coord[keep], v[keep], dv[keep], dcoord[keep])
        order = np.argsort(coord)
        coord, v, slope = coord[order], v[order], (dv / dcoord)[order]
        keep = np.concatenate([[True], np.diff(coord) > 1e-12])
        sp = CubicHermiteSpline(coord[keep], v[keep], slope[keep])
        return (lambda xx: sp(np.clip(xx, lo, hi))), \
               (lambda xx: sp(np.clip(xx, lo, hi), 1))

    ys, ut = an.y_sphere, an.u_top_switch
    curve.mode["TopX1"] = chart_interp(sols["top"], top_view, "x", 0.0, 0.62)
    curve.mode["TopX2ToSphere"] = chart_interp(sols["top"], top_view, "y",
                                               ys, ut)
    curve.mode["TopX2SphereToCyl"] = chart_interp(sols["top"], top_view, "y",
                                                  SQRT2, ys)
    curve.mode["BotX1"] = chart_interp(sols["bottom"], bot_view, "x", 0.0, 0.52)
    curve.mode["BotX2ToCyl"] = chart_interp(sols["bottom"], bot_view, "y",
                                            an.a0_bottom, SQRT2)
    curve.mode["ContinuationToSphere"] = chart_interp(sols["bottom"], bot_view,
                                                      "y", SQRT2, ys)
    vfun, dvfun = curve.mode["TopX1"]
    curve.mode["vprime_top_switch"] = abs(float(dvfun(0.6))) * 1.01
    vfun, dvfun = curve.mode["BotX1"]
    curve.mode["vprime_bottom_switch"] = abs(float(dvfun(0.5))) * 1.01
    return curve


def error_budgets(profile: HalfProfile, curve: gronwall.CurveData,
                  certificate, top_sol: ModeSolution, bot_sol: ModeSolution,
                  rtol=1e-10) -> dict:
    """Compose endpoint error budgets for the kernel verdicts.

    Budget = integration-tolerance floor plus the certified gap chains
    evaluated at the measured inputs: the located-bracket half-widths as
    initial value gaps, the certified segment residuals as the stage
    eps inputs, and the certified mode-equation residuals as the delta
    inputs.
    """
    if "ContinuationToSphere" not in curve.mode:
        attach_mode_data(curve, profile)
    seg_eps = {"eps1_top": 0.0, "eps2_top": 0.0, "eps3_top": 0.0,
               "eps1_bot": 0.0, "eps2_bot": 0.0}
    for rec in certificate.segment_residuals:
        key = None
        if rec["piece"] == "top":
            key = "eps1_top" if rec["chart"] == "GraphX1" else "eps2_top"
        else:
            key = "eps1_bot" if rec["chart"] == "GraphX1" else "eps2_bot"
        seg_eps[key] = max(seg_eps[key], rec["epsilon"])
    seg_eps["eps3_top"] = seg_eps["eps2_top"]
    delta0 = 0.5 * (certificate.a_hi - certificate.a_lo) \
        + 0.5 * abs(certificate.b_hi - certificate.b_lo)
    inputs = gronwall.default_inputs(
        delta0=delta0,
        delta1_top=top_sol.residual, delta2_top=top_sol.residual,
        delta1_bot=bot_sol.residual, delta2_bot=bot_sol.residual,
        **seg_eps)
    vp = {"top_switch": curve.mode["vprime_top_switch"],
          "bottom_switch": curve.mode["vprime_bottom_switch"]}
    results = gronwall.chain_gaps(curve, inputs, vprime_bounds=vp)
    floor = 50.0 * rtol
    top_j = results[("TopX2ToSphere", "jacobi")]
    bot_j = results[("ContinuationToSphere", "jacobi")]
    ys = curve.anchors.y_sphere
    budgets = {
        "top_value": top_j.value_gap_end + floor,
        "top_derivative": ys * top_j.deriv_gap_end + floor,
        "bottom_value": bot_j.value_gap_end + floor,
        "bottom_derivative": ys * bot_j.deriv_gap_end + floor,
    }
    tv, td = abs(top_sol.endpoint_value), abs(top_sol.endpoint_derivative)
    bv, bd = abs(bot_sol.endpoint_value), abs(bot_sol.endpoint_derivative)
    budgets["det"] = (tv * budgets["bottom_derivative"]
                      + bd * budgets["top_value"]
                      + bv * budgets["top_derivative"]
                      + td * budgets["bottom_value"])
    return budgets


def kernel_verdict(profile: HalfProfile, piece: str, budgets: dict,
                   rtol=1e-12, atol=1e-13) -> dict:
    """Kernel triviality report for one torus piece.

    Mode zero uses the endpoint data (Dirichlet pieces: endpoint value;
    the Neumann half-torus: the matching-matrix determinant); modes below
    the cutoff are integrated individually; the rest are trivial by the
    cutoff proposition.  A verdict is ``trivial`` only when the decisive
    margin exceeds twice the error budget, else ``inconclusive``.
    """
    if piece not in PIECES:
        raise ValueError(f"unknown piece {piece!r}; expected one of {PIECES}")
    m0 = mode_cutoff(profile)
    m_top = int(math.ceil(m0))
    rows = []
    overall = True
    for m in range(m_top):
        top = integrate_mode(ModeProblem(m, profile, "top"), rtol, atol)
        if piece == "S5":
            margin = abs(top.endpoint_value)
            budget = budgets["top_value"]
            detail = {"endpoint_value": top.endpoint_value}
        elif piece == "S6":
            bot = integrate_mode(ModeProblem(m, profile, "bottom"), rtol, atol)
            margin = abs(bot.endpoint_value)
            budget = budgets["bottom_value"]
            detail = {"endpoint_value": bot.endpoint_value}
        else:
            bot = integrate_mode(ModeProblem(m, profile, "bottom"), rtol, atol)
            em = endpoint_matrix(top, bot)
            margin = abs(em.det)
            budget = budgets["det"]
            detail = {"det": em.det,
                      "top": [top.endpoint_value, top.endpoint_derivative],
                      "bottom": [bot.endpoint_value, bot.endpoint_derivative]}
        ok = margin >= 2.0 * budget
        overall = overall and ok
        rows.append({"m": m, "margin": margin, "budget": budget,
                     "verdict": "trivial" if ok else "inconclusive",
                     **detail})
    return {
        "piece": piece,
        "mode_cutoff": m0,
        "modes_integrated": list(range(m_top)),
        "modes_by_cutoff": f"m >= {m_top}",
        "rows": rows,
        "verdict": "trivial" if overall else "inconclusive",
    }
