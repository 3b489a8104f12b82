"""Sesqui-shooting location of the self-shrinking torus.

Geodesics of the conformal half-plane metric are shot from the vertical
axis with horizontal initial direction.  A shot from height a > sqrt(2)
falls onto the reference cylinder line {x2 = sqrt(2)}; a shot from
d < sqrt(2) rises onto it.  The crossing abscissa of the rising shots is
continuous and strictly increasing in d, so the lower start height is
always recovered from the upper shot's crossing abscissa by monotone
bisection ("sesqui": the second shooting parameter is eliminated by the
compatibility condition at the cylinder).  The residual one-parameter
problem bisects the signed tangent mismatch Phi(a) at the common
crossing; its root is the closed torus profile.

The located torus is packaged as a :class:`TorusCertificate` carrying the
bracket, the located heights, the crossing of the radius-2 sphere, chart
segment residual certificates and pass/fail verdicts against the target
intervals, plus CSV/SVG/JSON emission of the closed profile.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .geometry import (
    SQRT2,
    SLOPE_RETURN,
    SLOPE_SWITCH,
    Chart,
    CurveState,
    ProfileSegment,
    angenent_factor,
    geom_quantities,
    mean_curvature,
    residual_sup,
)

SCHEMA_VERSION = 1

# Target intervals for the certificate verdicts.
A_TOP_CENTER = 4034.0 / 1217.0
A_TOP_HALFWIDTH = 2.5e-3
B_BOT_CENTER = 7.0 / 16.0
B_BOT_HALFWIDTH = 3.0 / 98.0
SPHERE_POINT = (29.0 / 32.0, 41.0 / 23.0)
SPHERE_TOL = 5e-3
ANGLE_CENTER = 11.0 / 10.0
ANGLE_TOL = 5e-3

# Default bracket: twice the target half-width, robust to integration error.
DEFAULT_BRACKET = (A_TOP_CENTER - 5e-3, A_TOP_CENTER + 5e-3)


class InadmissibleShotError(RuntimeError):
    """Shot produced no usable cylinder crossing (numerical-parameter signal)."""


class BracketError(RuntimeError):
    """Bisection bracket does not enclose a sign change / target value."""


def _arc_rhs(t, s):
    x, y, dx, dy = s
    curv = (y * dx - x * dy) / 2.0 - dx / y
    return (dx, dy, curv * dy, -curv * dx)


def _cylinder_event(t, s):
    return s[1] - SQRT2


_cylinder_event.terminal = True


def _sphere_event(t, s):
    return s[0] * s[0] + s[1] * s[1] - 4.0


_sphere_event.terminal = False


@dataclass
class ShotTrajectory:
    """A single geodesic shot from (0, start_height) with direction (1, 0)."""

    start_height: float
    sol: object                    # scipy OdeSolution (dense output)
    t_cross: float                 # parameter of the first cylinder crossing
    crossing: tuple                # (x1*, sqrt(2))
    tangent_at_crossing: np.ndarray
    t_sphere: float | None = None  # first radius-2 sphere crossing, if any
    path: list = field(default_factory=list)  # chart-split ProfileSegments

    def state(self, t) -> np.ndarray:
        return self.sol(t)

    def curve_state(self, t) -> CurveState:
        x, y, dx, dy = self.sol(t)
        return CurveState(t=float(t), x=float(x), y=float(y),
                          dx=float(dx), dy=float(dy))


def integrate_shot(start_height, max_param=10.0, rtol=1e-10, atol=1e-12,
                   want_sphere=False) -> ShotTrajectory:
    """Integrate one shot and locate its first cylinder crossing.

    The crossing is event-located on the dense output (sign-change scan
    with root polish).  A shot that exhausts ``max_param`` without
    crossing raises :class:`InadmissibleShotError`; by the maximum
    principle this can only signal an inadequate numerical parameter.
    """
    if start_height <= 0.0:
        raise InadmissibleShotError("start height must be positive")
    if start_height == SQRT2:
        # Degenerate coincidence with the cylinder geodesic itself.
        sol = solve_ivp(_arc_rhs, (0.0, 1.0), [0.0, SQRT2, 1.0, 0.0],
                        method="DOP853", rtol=rtol, atol=atol, dense_output=True)
        return ShotTrajectory(start_height, sol.sol, 0.0, (0.0, SQRT2),
                              np.array([1.0, 0.0]))
    events = [_cylinder_event] + ([_sphere_event] if want_sphere else [])
    sol = solve_ivp(_arc_rhs, (0.0, max_param), [0.0, start_height, 1.0, 0.0],
                    method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True, events=events)
    if len(sol.t_events[0]) == 0:
        raise InadmissibleShotError(
            f"no cylinder crossing before parameter {max_param}")
    t0 = float(sol.t_events[0][0])
    x, y, dx, dy = sol.sol(t0)
    tangent = np.array([dx, dy]) / math.hypot(dx, dy)
    t_sphere = None
    if want_sphere and len(sol.t_events) > 1 and len(sol.t_events[1]):
        t_sphere = float(sol.t_events[1][0])
    return ShotTrajectory(start_height, sol.sol, t0, (float(x), SQRT2),
                          tangent, t_sphere=t_sphere)


def crossing_map(d, rtol=1e-10, atol=1e-12):
    """Abscissa of the first cylinder crossing of the shot from height d.

    Continuous and strictly increasing on (0, sqrt(2)); d = sqrt(2) is the
    degenerate coincidence with the cylinder (crossing at the axis) and is
    treated as a closure point only.
    """
    if not 0.0 <= d <= SQRT2:
        raise BracketError(f"height {d} outside [0, sqrt(2)]")
    return integrate_shot(d, rtol=rtol, atol=atol).crossing[0]


def invert_crossing(target_x1, image_tol=1e-10, bracket=None,
                    rtol=1e-10, atol=1e-12):
    """Height b with |crossing_map(b) - target_x1| < image_tol, by bisection."""
    if target_x1 == 0.0:
        return SQRT2   # degenerate: only the cylinder geodesic crosses at the axis
    if bracket is None:
        lo, hi = 1e-8, SQRT2 - 1e-9
    else:
        lo, hi = bracket
    f_lo = crossing_map(lo, rtol, atol) - target_x1
    f_hi = crossing_map(hi, rtol, atol) - target_x1
    if f_lo >= 0.0 or f_hi <= 0.0:
        if bracket is not None:   # stale warm bracket; fall back to the full range
            return invert_crossing(target_x1, image_tol, None, rtol, atol)
        raise BracketError(f"target abscissa {target_x1} outside the sampled range")
    while True:
        mid = 0.5 * (lo + hi)
        f_mid = crossing_map(mid, rtol, atol) - target_x1
        if abs(f_mid) < image_tol or hi - lo < 1e-15:
            return mid
        if f_mid < 0.0:
            lo = mid
        else:
            hi = mid


def angle_mismatch(a, rtol=1e-10, atol=1e-12, invert_tol=1e-10,
                   warm_bracket=None, full=False):
    """Signed tangent mismatch Phi(a) of the sesqui-shooting problem.

    The upper shot from height a and the recovered lower shot meet on the
    cylinder; Phi is the z-component of the cross product of the lower
    tangent with the upper tangent (the sine of the oriented angle from
    the lower to the upper tangent).  Phi is continuous and increasing in
    a near the torus, with Phi = 0 exactly at a closed profile.
    """
    shot = integrate_shot(a, rtol=rtol, atol=atol)
    x1s = shot.crossing[0]
    if not 0.0 < x1s <= SQRT2:
        raise InadmissibleShotError(
            f"first crossing abscissa {x1s} outside (0, sqrt(2)]")
    b = invert_crossing(x1s, image_tol=invert_tol, bracket=warm_bracket,
                        rtol=rtol, atol=atol)
    lower = integrate_shot(b, rtol=rtol, atol=atol)
    ta = shot.tangent_at_crossing
    tb = lower.tangent_at_crossing
    phi = float(tb[0] * ta[1] - tb[1] * ta[0])
    if full:
        return phi, x1s, b, shot, lower
    return phi


# ---------------------------------------------------------------------------
# Chart splitting of a trajectory into certified graph segments
# ---------------------------------------------------------------------------

def split_into_graph_charts(shot: ShotTrajectory, t_end=None, n=4000):
    """Cut a trajectory into alternating x1/x2-graph segments.

    Switches away from a graph chart when the slope magnitude exceeds
    SLOPE_SWITCH and only returns below SLOPE_RETURN (hysteresis keeps
    both charts well conditioned).  Each segment is resampled on its own
    graph coordinate and carries a certified shrinker residual.
    """
    t_end = shot.t_cross if t_end is None else t_end
    ts = np.linspace(0.0, t_end, n)
    x, y, dx, dy = shot.sol(ts)
    slope = np.abs(np.divide(dy, dx, out=np.full_like(dy, np.inf),
                             where=dx != 0.0))
    segments = []
    chart = Chart.GRAPH_X1 if slope[0] <= SLOPE_SWITCH else Chart.GRAPH_X2
    start = 0

    def emit(chart, t_lo, t_hi):
        tseg = np.linspace(t_lo, t_hi, n)
        xs, ys_, dxs, dys = shot.sol(tseg)
        if chart is Chart.GRAPH_X1:
            seg = ProfileSegment.from_samples(chart, xs, ys_, dys / dxs)
        else:
            seg = ProfileSegment.from_samples(chart, ys_, xs, dxs / dys)
        residual_sup(seg)
        segments.append(seg)

    for i in range(1, n):
        switch = (chart is Chart.GRAPH_X1 and slope[i] > SLOPE_SWITCH) or \
                 (chart is Chart.GRAPH_X2 and slope[i] < SLOPE_RETURN)
        if switch or i == n - 1:
            stop = i if i == n - 1 else i - 1
            if stop > start:
                emit(chart, ts[start], ts[stop])
            chart = Chart.GRAPH_X2 if chart is Chart.GRAPH_X1 else Chart.GRAPH_X1
            start = stop
    return segments


# ---------------------------------------------------------------------------
# The closed half-profile
# ---------------------------------------------------------------------------

class HalfProfile:
    """The located half-profile, coherently parametrized from top to bottom.

    sigma in [0, length] runs from the upper axis point (0, a0) through the
    cylinder junction to the lower axis point (0, b0); the bottom shot is
    traversed backward with its tangent negated so that tangent and normal
    fields are continuous across the junction.
    """

    def __init__(self, top: ShotTrajectory, bottom: ShotTrajectory):
        self.top = top
        self.bottom = bottom
        self.sigma_junction = top.t_cross
        self.length = top.t_cross + bottom.t_cross
        self.sigma_sphere = top.t_sphere
        self.a0 = top.start_height
        self.b0 = bottom.start_height

    def state(self, sigma):
        """Coherent (x, y, dx, dy) at sigma; vectorized over sigma."""
        sigma = np.asarray(sigma, dtype=float)
        scalar = sigma.ndim == 0
        sigma = np.atleast_1d(sigma)
        out = np.empty((4, sigma.size))
        on_top = sigma <= self.sigma_junction
        if np.any(on_top):
            out[:, on_top] = self.top.sol(sigma[on_top])
        if np.any(~on_top):
            st = self.bottom.sol(self.length - sigma[~on_top])
            st[2:] = -st[2:]
            out[:, ~on_top] = st
        return out[:, 0] if scalar else out

    def mean_curvature(self, sigma):
        x, y, dx, dy = self.state(sigma)
        return mean_curvature(x, y, dx, dy)

    def sphere_point(self):
        x, y, _, _ = self.state(self.sigma_sphere)
        return float(x), float(y)


def build_half_profile(a0, b0, rtol=1e-12, atol=1e-13) -> HalfProfile:
    top = integrate_shot(a0, rtol=rtol, atol=atol, want_sphere=True)
    bottom = integrate_shot(b0, rtol=rtol, atol=atol)
    return HalfProfile(top, bottom)


# ---------------------------------------------------------------------------
# Torus certificate
# ---------------------------------------------------------------------------

@dataclass
class TorusCertificate:
    """Bracketing data, located crossings and target-interval verdicts."""

    a_lo: float
    a_hi: float
    phi_lo: float
    phi_hi: float
    a0: float
    b0: float
    b_lo: float
    b_hi: float
    x1_junction: float
    sphere_x: float
    sphere_y: float
    angle: float
    anchors: dict
    segment_residuals: list
    verdicts: dict
    tolerances: dict
    meta: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "bracket": {"a_lo": self.a_lo, "a_hi": self.a_hi,
                        "phi_lo": self.phi_lo, "phi_hi": self.phi_hi},
            "located": {"a0": self.a0, "b0": self.b0,
                        "b_lo": self.b_lo, "b_hi": self.b_hi},
            "junction": {"x1": self.x1_junction},
            "sphere_crossing": {"x": self.sphere_x, "y": self.sphere_y,
                                "angle": self.angle},
            "anchors": self.anchors,
            "segment_residuals": self.segment_residuals,
            "verdicts": self.verdicts,
            "tolerances": self.tolerances,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TorusCertificate":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported certificate schema: "
                             f"{d.get('schema_version')!r}")
        return cls(
            a_lo=d["bracket"]["a_lo"], a_hi=d["bracket"]["a_hi"],
            phi_lo=d["bracket"]["phi_lo"], phi_hi=d["bracket"]["phi_hi"],
            a0=d["located"]["a0"], b0=d["located"]["b0"],
            b_lo=d["located"]["b_lo"], b_hi=d["located"]["b_hi"],
            x1_junction=d["junction"]["x1"],
            sphere_x=d["sphere_crossing"]["x"], sphere_y=d["sphere_crossing"]["y"],
            angle=d["sphere_crossing"]["angle"],
            anchors=d["anchors"], segment_residuals=d["segment_residuals"],
            verdicts=d["verdicts"], tolerances=d["tolerances"],
            meta=d.get("meta", {}),
        )

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read_json(cls, path) -> "TorusCertificate":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def find_torus(bracket_lo=None, bracket_hi=None, bisect_tol=1e-8,
               locate_tol=1e-11, rtol=1e-10, atol=1e-12,
               invert_tol=1e-10) -> TorusCertificate:
    """Bisection on the tangent mismatch, then certificate assembly.

    The sign bracket on Phi is preserved at every iteration; bisection
    stops at ``bisect_tol`` width for the reported bracket and continues
    to ``locate_tol`` for the located height a0.  The lower height b0 is
    always recovered through the monotone crossing inversion, never
    searched independently.
    """
    lo = DEFAULT_BRACKET[0] if bracket_lo is None else bracket_lo
    hi = DEFAULT_BRACKET[1] if bracket_hi is None else bracket_hi
    warm = None

    def phi(a):
        nonlocal warm
        p, x1s, b, _, _ = angle_mismatch(a, rtol=rtol, atol=atol,
                                         invert_tol=invert_tol,
                                         warm_bracket=warm, full=True)
        warm = (max(b - 2e-3, 1e-8), min(b + 2e-3, SQRT2 - 1e-9))
        return p

    phi_lo = phi(lo)
    phi_hi = phi(hi)
    if not phi_lo * phi_hi < 0.0:
        raise BracketError(
            f"no sign change of the tangent mismatch on [{lo}, {hi}]: "
            f"Phi = {phi_lo:.3e}, {phi_hi:.3e}")
    bracket = None
    while hi - lo > locate_tol:
        mid = 0.5 * (lo + hi)
        pm = phi(mid)
        if (pm < 0.0) == (phi_lo < 0.0):
            lo, phi_lo = mid, pm
        else:
            hi, phi_hi = mid, pm
        if bracket is None and hi - lo < bisect_tol:
            bracket = (lo, hi, phi_lo, phi_hi)
    if bracket is None:
        bracket = (lo, hi, phi_lo, phi_hi)
    a0 = 0.5 * (lo + hi)

    # Assemble the certificate from a tightly integrated profile at a0.
    _, x1s, b0, top, _ = angle_mismatch(a0, rtol=1e-12, atol=1e-13,
                                        invert_tol=1e-12, full=True)
    # the recovered height decreases as the shot height increases, so the
    # bracket images come back in reversed order
    b_ends = sorted(
        invert_crossing(
            integrate_shot(a_end, rtol=rtol, atol=atol).crossing[0],
            image_tol=invert_tol, rtol=rtol, atol=atol)
        for a_end in (bracket[0], bracket[1]))
    b_lo, b_hi = b_ends
    profile = build_half_profile(a0, b0)
    px, py = profile.sphere_point()
    angle = math.atan2(py, px)

    # Anchor values consumed by the gap-bound ledger stages.
    t35 = brentq(lambda t: profile.top.sol(t)[0] - 0.6, 0.0,
                 profile.sigma_sphere, xtol=1e-14)
    st35 = profile.top.sol(t35)
    thalf = brentq(lambda t: profile.bottom.sol(t)[0] - 0.5, 0.0,
                   profile.bottom.t_cross, xtol=1e-14)
    sth = profile.bottom.sol(thalf)
    anchors = {
        "y_sphere": py,
        "u_top_switch": float(st35[1]),
        "slope_top_switch": float(st35[3] / st35[2]),
        "a0_bottom": float(sth[1]),
        "slope_bottom_switch": float(sth[3] / sth[2]),
    }

    seg_residuals = []
    for name, shot in (("top", profile.top), ("bottom", profile.bottom)):
        for seg in split_into_graph_charts(shot):
            lo_d, hi_d = seg.domain
            seg_residuals.append({
                "piece": name, "chart": seg.chart.value,
                "domain": [lo_d, hi_d], "epsilon": seg.epsilon,
            })

    dist = math.hypot(px - SPHERE_POINT[0], py - SPHERE_POINT[1])
    verdicts = {
        "upper_crossing": abs(a0 - A_TOP_CENTER) < A_TOP_HALFWIDTH,
        "lower_crossing": abs(b0 - B_BOT_CENTER) < B_BOT_HALFWIDTH,
        "sphere_crossing": dist <= SPHERE_TOL,
        "crossing_angle": abs(angle - ANGLE_CENTER) <= ANGLE_TOL,
    }
    tolerances = {
        "bisect_tol": bisect_tol, "locate_tol": locate_tol,
        "integration_rtol": rtol, "integration_atol": atol,
        "invert_tol": invert_tol,
    }
    return TorusCertificate(
        a_lo=bracket[0], a_hi=bracket[1], phi_lo=bracket[2], phi_hi=bracket[3],
        a0=a0, b0=b0, b_lo=b_lo, b_hi=b_hi, x1_junction=x1s,
        sphere_x=px, sphere_y=py, angle=angle, anchors=anchors,
        segment_residuals=seg_residuals, verdicts=verdicts,
        tolerances=tolerances,
    )


# ---------------------------------------------------------------------------
# Profile emission: CSV and SVG
# ---------------------------------------------------------------------------

def closed_profile_samples(profile: HalfProfile, n=2000):
    """Sampled closed profile, doubled across {x1 = 0}: columns t,x1,x2,dx1,dx2.

    The doubled curve runs the half-profile forward and its mirror image
    backward, giving one closed loop with continuous tangent.
    """
    sig = np.linspace(0.0, profile.length, n)
    st = profile.state(sig)
    fwd = np.column_stack([sig, st[0], st[1], st[2], st[3]])
    mirrored = np.column_stack([
        2.0 * profile.length - sig[::-1],
        -st[0, ::-1], st[1, ::-1], st[2, ::-1], -st[3, ::-1]])
    return np.vstack([fwd, mirrored[1:]])


def write_profile_csv(path, profile: HalfProfile, n=2000):
    rows = closed_profile_samples(profile, n)
    with open(path, "w") as fh:
        fh.write("t,x1,x2,dx1,dx2\n")
        for row in rows:
            fh.write(",".join(format(v, ".12g") for v in row) + "\n")


def write_profile_svg(path, profile: HalfProfile, n=1200, size=640):
    """Profile curves of the sphere-torus union in the half-plane."""
    rows = closed_profile_samples(profile, n)
    theta = np.linspace(0.0, math.pi, 200)
    sphere = np.column_stack([2.0 * np.cos(theta), 2.0 * np.sin(theta)])
    xs = np.concatenate([rows[:, 1], sphere[:, 0]])
    ys = np.concatenate([rows[:, 2], sphere[:, 1]])
    x_min, x_max = xs.min() - 0.3, xs.max() + 0.3
    y_min, y_max = 0.0, ys.max() + 0.3
    scale = size / max(x_max - x_min, y_max - y_min)

    def pt(x, y):
        return (f"{(x - x_min) * scale:.2f}",
                f"{(y_max - y) * scale:.2f}")

    def path_of(points):
        return "M " + " L ".join(",".join(pt(x, y)) for x, y in points)

    w = (x_max - x_min) * scale
    h = (y_max - y_min) * scale
    with open(path, "w") as fh:
        fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" '
                 f'height="{h:.0f}" viewBox="0 0 {w:.0f} {h:.0f}">\n')
        ax_y = pt(0, 0)[1]
        fh.write(f'<line x1="0" y1="{ax_y}" x2="{w:.0f}" y2="{ax_y}" '
                 'stroke="#999" stroke-width="1"/>\n')
        ax_x = pt(0, 0)[0]
        fh.write(f'<line x1="{ax_x}" y1="0" x2="{ax_x}" y2="{h:.0f}" '
                 'stroke="#999" stroke-width="1"/>\n')
        fh.write(f'<path d="{path_of(sphere)}" fill="none" stroke="#1f77b4" '
                 'stroke-width="2"/>\n')
        fh.write(f'<path d="{path_of(rows[:, 1:3])} Z" fill="none" '
                 'stroke="#d62728" stroke-width="2"/>\n')
        fh.write("</svg>\n")
