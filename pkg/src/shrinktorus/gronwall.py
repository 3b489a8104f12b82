"""Certified Gronwall-Bellman gap propagation and constant-chain replay.

An approximate profile curve with sup-norm equation residual eps (an
"eps-geodesic") and an approximate linearized field with residual delta
(a "delta-Jacobi field") admit explicit endpoint gap bounds against the
true objects: the gap derivative satisfies a scalar integral inequality
whose coefficients are integrals of the equation's partial derivatives,
and the integral form of the Gronwall-Bellman inequality turns assumed
envelope bounds for those integrals into closed-form endpoint bounds.

This module provides

* one-sided (upper) certified quadrature,
* the generic Gronwall bound ``alpha(t) exp(int beta)``,
* the five half-profile stages (top x1-graph, top x2-graph down to the
  sphere, top x2-graph from sphere to cylinder, bottom x1-graph, bottom
  x2-graph up to the cylinder), each in a geodesic and a Jacobi variant,
  with the stage envelopes and the chain wiring fixed as in the reference
  constant chains,
* a replay audit that recomputes every displayed reference constant with
  certified quadrature and reports pass/fail at a stated slack factor,
* envelope verification of the assumed bounds against actual curve data.

All outputs are monotone nondecreasing in every nonnegative input, and
upper bounds are one-sided by construction: quadrature over-estimates,
never under-estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .geometry import (
    SQRT2,
    ProfileSegment,
    d_rhs_x1_du,
    d_rhs_x1_dp,
    d_rhs_x2_df,
    d_rhs_x2_dq,
    mode0_coeffs_x2,
)

STAGE_REGIONS = ("TopX1", "TopX2ToSphere", "TopX2SphereToCyl",
                 "BotX1", "BotX2ToCyl")
STAGE_KINDS = ("geodesic", "jacobi")
DEFAULT_SLACK = 1.10

INPUT_NAMES = ("delta0", "eps1_top", "eps2_top", "eps3_top",
               "eps1_bot", "eps2_bot",
               "delta1_top", "delta2_top", "delta1_bot", "delta2_bot")


class PreconditionError(ValueError):
    """A Gronwall precondition (monotone alpha, nonnegative beta) failed."""


class DependencyError(RuntimeError):
    """A stage was propagated without its prerequisite stage outputs."""


# ---------------------------------------------------------------------------
# One-sided quadrature
# ---------------------------------------------------------------------------

def _cum_upper(xs, fs):
    """Cumulative certified upper integral of smooth samples.

    Per cell, max-endpoint times width plus a curvature pad |f''| h^3 / 8
    estimated from second differences; exact upper bound for cellwise
    monotone or convex integrands, one-sided over-estimate otherwise.
    """
    xs = np.asarray(xs, float)
    fs = np.asarray(fs, float)
    h = np.diff(xs)
    cell = np.maximum(fs[1:], fs[:-1]) * h
    if len(fs) > 2:
        d2 = np.abs(np.diff(fs, 2))
        pad = np.zeros_like(h)
        pad[1:] = d2
        pad[:-1] = np.maximum(pad[:-1], d2)
        cell = cell + pad * h / 8.0
    return np.concatenate([[0.0], np.cumsum(cell)])


def upper_integral(f, a, b, n=2048):
    """Certified upper bound for the integral of a smooth f over [a, b]."""
    if b == a:
        return 0.0
    xs = np.linspace(a, b, n)
    return float(_cum_upper(xs, np.asarray(f(xs), float))[-1])


def gronwall_bound(alpha, beta, interval, n=2048):
    """Return t -> alpha(t) * exp(int_a^t beta), the Gronwall-Bellman bound.

    alpha must be nondecreasing on the interval and beta nonnegative,
    both checked on the quadrature grid; the exponential integral is a
    certified upper bound, so the returned function dominates the true
    solution of the underlying integral inequality.
    """
    a, b = interval
    xs = np.linspace(a, b, n)
    avals = np.asarray(alpha(xs), float)
    if np.any(np.diff(avals) < -1e-12 * (1.0 + np.abs(avals[:-1]))):
        raise PreconditionError("alpha is decreasing on the interval")
    bvals = np.asarray(beta(xs), float)
    if np.any(bvals < 0.0):
        raise PreconditionError("beta is negative on the interval")
    cum = _cum_upper(xs, bvals)

    def bound(t):
        return alpha(t) * np.exp(np.interp(t, xs, cum))

    return bound


# ---------------------------------------------------------------------------
# Curve data consumed by the stages
# ---------------------------------------------------------------------------

def _branch_interpolant(coord, vals, slopes):
    """Monotone-coordinate cubic Hermite (value, slope) pair of callables."""
    coord = np.asarray(coord, float)
    if coord[0] > coord[-1]:
        coord, vals, slopes = coord[::-1], vals[::-1], slopes[::-1]
    sp = CubicHermiteSpline(coord, vals, slopes)
    return (lambda x: sp(x)), (lambda x: sp(x, 1))


@dataclass
class CurveAnchors:
    y_sphere: float
    u_top_switch: float        # top graph ordinate at x1 = 3/5
    slope_top_switch: float
    a0_bottom: float           # bottom graph ordinate at x1 = 1/2
    slope_bottom_switch: float

    @classmethod
    def from_dict(cls, d):
        return cls(y_sphere=d["y_sphere"], u_top_switch=d["u_top_switch"],
                   slope_top_switch=d["slope_top_switch"],
                   a0_bottom=d["a0_bottom"],
                   slope_bottom_switch=d["slope_bottom_switch"])


@dataclass
class CurveData:
    """Graph-chart views of the located half-profile.

    ``u_top``/``u_bot`` are the x1-graph ordinates on the two axis pieces,
    ``f_top``/``f_bot`` the x2-graph abscissas on the corresponding
    vertical-graph regions.  ``mode`` optionally carries per-region
    (value, slope) interpolants of a normalized order-zero Jacobi field in
    the region's own graph coordinate; they feed the recompute-only stage
    and the pointwise envelope checks of the Jacobi assumptions.
    """

    anchors: CurveAnchors
    u_top: object
    du_top: object
    f_top: object
    df_top: object
    u_bot: object
    du_bot: object
    f_bot: object
    df_bot: object
    mode: dict = field(default_factory=dict)

    @classmethod
    def from_profile(cls, profile, n=6000):
        top = profile.top
        bot = profile.bottom
        ts = np.linspace(0.0, top.t_cross, n)
        x, y, dx, dy = top.sol(ts)
        keep = (dx > 0.2) & (x <= 0.68)
        u_top, du_top = _branch_interpolant(x[keep], y[keep],
                                            dy[keep] / dx[keep])
        keep = dy < -0.2
        f_top, df_top = _branch_interpolant(y[keep], x[keep],
                                            dx[keep] / dy[keep])
        ts = np.linspace(0.0, bot.t_cross, n)
        x, y, dx, dy = bot.sol(ts)
        keep = (dx > 0.2) & (x <= 0.58)
        u_bot, du_bot = _branch_interpolant(x[keep], y[keep],
                                            dy[keep] / dx[keep])
        keep = dy > 0.2
        f_bot, df_bot = _branch_interpolant(y[keep], x[keep],
                                            dx[keep] / dy[keep])
        anchors = CurveAnchors(
            y_sphere=float(profile.sphere_point()[1]),
            u_top_switch=float(u_top(0.6)),
            slope_top_switch=float(du_top(0.6)),
            a0_bottom=float(u_bot(0.5)),
            slope_bottom_switch=float(du_bot(0.5)),
        )
        return cls(anchors=anchors, u_top=u_top, du_top=du_top,
                   f_top=f_top, df_top=df_top, u_bot=u_bot, du_bot=du_bot,
                   f_bot=f_bot, df_bot=df_bot)


# ---------------------------------------------------------------------------
# Envelope specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeSpec:
    """A named assumed bound over a chart-coordinate domain.

    ``bound`` is the closed-form envelope; ``integrand`` maps
    (x, value, slope) curve data to the quantity whose cumulative integral
    (or pointwise value, for ``cumulative=False``) the envelope claims to
    dominate.  ``domain`` is ordered in the direction of accumulation.
    """

    name: str
    bound: object
    domain: tuple
    integrand: object = None
    cumulative: bool = True

    def check_nonnegative(self, n=512):
        xs = np.linspace(self.domain[0], self.domain[1], n)
        vals = np.asarray(self.bound(xs), float)
        return bool(np.all(np.isfinite(vals)) and np.all(vals >= 0.0))


def stage_envelopes(region, anchors: CurveAnchors):
    """The geodesic-stage envelopes (assumed integral bounds) by region."""
    ys = anchors.y_sphere
    ut = anchors.u_top_switch
    a0b = anchors.a0_bottom
    if region == "TopX1":
        return [
            EnvelopeSpec("top_x1_du", lambda x: 0.8 * x, (0.0, 0.6),
                         lambda x, u, du: np.abs(d_rhs_x1_du(u, du))),
            EnvelopeSpec("top_x1_dp", lambda x: (8.0 / 3.0) * x * x, (0.0, 0.6),
                         lambda x, u, du: np.abs(d_rhs_x1_dp(u, du, x))),
        ]
    if region == "TopX2ToSphere":
        return [
            EnvelopeSpec("top_x2s_du", lambda x: 13.0 / 8.0 - x / 2.0, (ut, ys),
                         lambda x, f, q: np.abs(d_rhs_x2_df(f, q, x))),
            EnvelopeSpec("top_x2s_dq",
                         lambda x: 7.0 / 4.0 - 0.9 * (x - ys) ** 2, (ut, ys),
                         lambda x, f, q: np.abs(d_rhs_x2_dq(f, q, x))),
        ]
    if region == "TopX2SphereToCyl":
        return [
            EnvelopeSpec("top_x2c_du", lambda x: 0.25 * (ys - x), (ys, SQRT2),
                         lambda x, f, q: np.abs(d_rhs_x2_df(f, q, x))),
            EnvelopeSpec("top_x2c_dq", lambda x: 0.54 * (ys - x), (ys, SQRT2),
                         lambda x, f, q: np.abs(d_rhs_x2_dq(f, q, x))),
        ]
    if region == "BotX1":
        return [
            EnvelopeSpec("bot_x1_du", lambda x: 5.8 * x + 0.05, (0.0, 0.5),
                         lambda x, u, du: np.abs(d_rhs_x1_du(u, du))),
            EnvelopeSpec("bot_x1_dp", lambda x: 4.0 * x * x + 0.2 * x, (0.0, 0.5),
                         lambda x, u, du: np.abs(d_rhs_x1_dp(u, du, x))),
        ]
    if region == "BotX2ToCyl":
        return [
            EnvelopeSpec("bot_x2_du", lambda x: 0.64 * x - 3.0 / 7.0,
                         (a0b, SQRT2),
                         lambda x, f, q: np.abs(d_rhs_x2_df(f, q, x))),
            EnvelopeSpec("bot_x2_dq",
                         lambda x: 0.9 - 1.1 * (x - 1.5) ** 2, (a0b, SQRT2),
                         lambda x, f, q: np.abs(d_rhs_x2_dq(f, q, x))),
        ]
    raise ValueError(f"unknown stage region {region!r}")


def verify_envelopes(segment: ProfileSegment, specs, n=2048):
    """Certify assumed envelopes against actual curve data.

    For cumulative specs the certified upper cumulative integral of the
    integrand must stay below the envelope at every grid point of the
    spec's domain; for pointwise specs the integrand itself must.
    Returns one verdict dict per spec; a spec whose domain is not covered
    by the segment raises DomainError via the segment evaluation.
    """
    lo, hi = segment.domain
    out = []
    for spec in specs:
        a, b = spec.domain
        if not (min(lo, hi) - 1e-9 <= min(a, b)
                and max(a, b) <= max(lo, hi) + 1e-9):
            raise ValueError(
                f"segment domain {segment.domain} does not cover "
                f"envelope domain {spec.domain} for {spec.name!r}")
        xs = np.linspace(a, b, n)
        vals = spec.integrand(xs, segment.value(xs), segment.slope(xs))
        lhs = _cum_upper(xs, vals) if spec.cumulative else np.asarray(vals)
        rhs = np.asarray(spec.bound(xs), float)
        gap = rhs - lhs
        out.append({
            "name": spec.name,
            "passed": bool(np.all(gap >= 0.0)),
            "margin": float(gap.min()),
            "max_violation": float(max(0.0, -gap.min())),
        })
    return out


# ---------------------------------------------------------------------------
# Stage propagation
# ---------------------------------------------------------------------------

@dataclass
class StageResult:
    region: str
    kind: str
    coord: np.ndarray          # chart coordinate grid, traversal order
    xi: np.ndarray             # progress variable |coord - start|
    deriv_gap: np.ndarray      # pointwise certified derivative-gap bound
    value_gap: np.ndarray      # pointwise certified value-gap bound
    value_increment: float

    @property
    def deriv_gap_end(self):
        return float(self.deriv_gap[-1])

    @property
    def value_gap_end(self):
        return float(self.value_gap[-1])


@dataclass
class BoundLedger:
    """Named inputs, assumed envelopes, and propagated outputs of a stage."""

    region: str
    kind: str
    inputs: dict
    envelopes: dict
    outputs: dict = field(default_factory=dict)


def _stage_interval(region, anchors):
    ys = anchors.y_sphere
    if region == "TopX1":
        return 0.0, 0.6
    if region == "TopX2ToSphere":
        return anchors.u_top_switch, ys
    if region == "TopX2SphereToCyl":
        return ys, SQRT2
    if region == "ContinuationToSphere":   # junction -> sphere, bottom field
        return SQRT2, ys
    if region == "BotX1":
        return 0.0, 0.5
    if region == "BotX2ToCyl":
        return anchors.a0_bottom, SQRT2
    raise ValueError(f"unknown stage region {region!r}")


def _recomputed_geo_envelopes(region, anchors, curve, n=2048):
    """Cumulative |d_f M|, |d_q M| bounds from the actual curve data."""
    start, end = _stage_interval(region, anchors)
    coord = np.linspace(start, end, n)
    f = np.asarray(curve.f_top(coord), float)
    q = np.asarray(curve.df_top(coord), float)
    xi = np.abs(coord - start)
    cum_u = _cum_upper(xi, np.abs(d_rhs_x2_df(f, q, coord))) * 1.000001 + 1e-12
    cum_p = _cum_upper(xi, np.abs(d_rhs_x2_dq(f, q, coord))) * 1.000001 + 1e-12

    def env_u(x):
        return np.interp(np.abs(np.asarray(x) - start), xi, cum_u)

    def env_p(x):
        return np.interp(np.abs(np.asarray(x) - start), xi, cum_p)

    return env_u, env_p


def _geodesic_env_funcs(region, anchors, curve=None):
    if region == "ContinuationToSphere":
        if curve is None:
            raise DependencyError("continuation stage needs curve data")
        return _recomputed_geo_envelopes(region, anchors, curve)
    specs = stage_envelopes(region, anchors)
    return specs[0].bound, specs[1].bound


def _propagate_geodesic_core(region, anchors, gap0, dgap0, eps, n=2048,
                             curve=None):
    start, end = _stage_interval(region, anchors)
    env_u, env_p = _geodesic_env_funcs(region, anchors, curve)
    coord = np.linspace(start, end, n)
    xi = np.abs(coord - start)
    eu = np.asarray(env_u(coord), float)
    ep = np.asarray(env_p(coord), float)
    alpha = dgap0 + eu * gap0 + eps * xi
    big_e = np.exp(ep + eu * xi)
    deriv = alpha * big_e
    inc = _cum_upper(xi, deriv)
    return StageResult(region, "geodesic", coord, xi, deriv,
                       gap0 + inc, float(inc[-1]))


def _eta_top(x, anchors):
    """Piecewise pointwise bound for the |d2 S| |g| term of the top x2 stage."""
    ys = anchors.y_sphere
    x = np.asarray(x, float)
    d = x - ys
    low = 41.0 / 200.0 - 0.3 * d * d
    high = 0.75 - 2.5 * d + 2.1 * d * d
    return np.where(x <= 2.5, low, high)


def _jacobi_stage_funcs(region, anchors, curve: CurveData | None):
    """(w1, w2, envP, envQ) pointwise/cumulative bounds for a Jacobi stage.

    w1 bounds |d3 P||v'| + |d3 Q||v| (coefficient sensitivity to the slope
    gap), w2 bounds |d2 Q||v| (sensitivity to the value gap); envP/envQ are
    cumulative bounds for the zeroth/first order coefficient integrals.
    Stages whose reference envelopes are unusable recompute them from the
    actual curve and mode data.
    """
    ys = anchors.y_sphere

    if region == "TopX1":
        return (lambda x: x * (2.0 * x * x + 3.0),
                lambda x: 1.6 - 1.5 * x * x,
                lambda x: 0.35 * x * x * (x * x + 1.0),
                lambda x: (16.0 / 15.0) * x ** 3 + 2.5 * x)
    if region == "BotX1":
        return (lambda x: 2.0 + 0.0 * np.asarray(x),
                lambda x: 41.0 - 80.0 * np.asarray(x),
                lambda x: (4.0 / 9.0) * np.asarray(x) ** 2,
                lambda x: 4.0 - 16.0 * (np.asarray(x) - 0.5) ** 2)
    if region == "BotX2ToCyl":
        return (lambda x: 0.8 + 8.0 * (np.asarray(x) - SQRT2) ** 2,
                lambda x: 0.48 - 0.75 * (np.asarray(x) - SQRT2) ** 2,
                lambda x: 0.45 - 0.75 * (np.asarray(x) - SQRT2) ** 2,
                lambda x: np.asarray(x) - 0.4)
    if region == "TopX2ToSphere":
        if curve is None:
            raise DependencyError("stage needs curve data for recomputed "
                                  "coefficient envelopes")
        env_p, env_q = _recomputed_pq_envelopes(region, anchors, curve)
        return (lambda x: 0.3 + 1.65 * (np.asarray(x) - ys) ** 5,
                lambda x: _eta_top(x, anchors),
                env_p, env_q)
    if region in ("TopX2SphereToCyl", "ContinuationToSphere"):
        if curve is None or region not in curve.mode:
            raise DependencyError("recompute-only stage needs curve and "
                                  "mode data")
        env_p, env_q = _recomputed_pq_envelopes(region, anchors, curve)
        w1, w2 = _recomputed_w_bounds(region, anchors, curve)
        return w1, w2, env_p, env_q
    raise ValueError(f"unknown stage region {region!r}")


def _recomputed_pq_envelopes(region, anchors, curve, n=2048):
    start, end = _stage_interval(region, anchors)
    coord = np.linspace(start, end, n)
    f = np.asarray(curve.f_top(coord), float)
    q = np.asarray(curve.df_top(coord), float)
    r, s = mode0_coeffs_x2(f, q, coord)
    cum_r = _cum_upper(np.abs(coord - start), np.abs(r)) * 1.000001 + 1e-12
    cum_s = _cum_upper(np.abs(coord - start), np.abs(s)) * 1.000001 + 1e-12

    def env_p(x):
        return np.interp(np.abs(np.asarray(x) - start),
                         np.abs(coord - start), cum_r)

    def env_q(x):
        return np.interp(np.abs(np.asarray(x) - start),
                         np.abs(coord - start), cum_s)

    return env_p, env_q


def _recomputed_w_bounds(region, anchors, curve, n=2048):
    """Pointwise w1/w2 bounds from actual curve and mode data, padded."""
    start, end = _stage_interval(region, anchors)
    coord = np.linspace(start, end, n)
    f = np.asarray(curve.f_top(coord), float)
    q = np.asarray(curve.df_top(coord), float)
    vfun, dvfun = curve.mode[region]
    g = np.abs(np.asarray(vfun(coord), float))
    dg = np.abs(np.asarray(dvfun(coord), float))
    d3r = 2.0 * np.abs(1.0 / coord - coord / 2.0) * np.abs(q)
    d3s = np.abs((1.0 / coord - coord / 2.0) * (coord * q - f)
                 + 4.0 * q / (coord * coord))
    d2s = np.abs((1.0 / coord - coord / 2.0) * q + f / 2.0)
    w1v = (d3r * dg + d3s * g) * 1.02 + 1e-9
    w2v = d2s * g * 1.02 + 1e-9

    def w1(x):
        return np.interp(np.asarray(x, float), coord, w1v)

    def w2(x):
        return np.interp(np.asarray(x, float), coord, w2v)

    return w1, w2


def _propagate_jacobi_core(region, anchors, geo: StageResult,
                           vgap0, dvgap0, delta, curve=None, n=2048):
    w1, w2, env_p, env_q = _jacobi_stage_funcs(region, anchors, curve)
    coord, xi = geo.coord, geo.xi
    w1v = np.asarray(w1(coord), float)
    w2v = np.asarray(w2(coord), float)
    epv = np.asarray(env_p(coord), float)
    eqv = np.asarray(env_q(coord), float)
    alpha = (dvgap0 + eqv * vgap0 + _cum_upper(xi, w1v * geo.deriv_gap)
             + _cum_upper(xi, w2v * geo.value_gap) + delta * xi)
    big_e = np.exp(epv + xi * eqv)
    deriv = alpha * big_e
    inc = _cum_upper(xi, deriv)
    return StageResult(region, "jacobi", coord, xi, deriv,
                       vgap0 + inc, float(inc[-1]))


def default_inputs(**overrides):
    inputs = {name: 0.0 for name in INPUT_NAMES}
    inputs.update(overrides)
    return inputs


_EPS_OF_REGION = {
    "TopX1": "eps1_top", "TopX2ToSphere": "eps2_top",
    "TopX2SphereToCyl": "eps3_top",
    "BotX1": "eps1_bot", "BotX2ToCyl": "eps2_bot",
}
_DELTA_OF_REGION = {
    "TopX1": "delta1_top", "TopX2ToSphere": "delta2_top",
    "TopX2SphereToCyl": "delta2_top",
    "BotX1": "delta1_bot", "BotX2ToCyl": "delta2_bot",
}


def chain_gaps(curve: CurveData, inputs=None, n=2048, vprime_bounds=None):
    """Propagate both chains (top and bottom, geodesic and Jacobi).

    Chart-switch conversions divide value gaps by the certified slope
    magnitude at the switch and derivative gaps by its square; Jacobi
    value gaps transfer unchanged (the field is a scalar along the
    curve) while Jacobi derivative gaps pick up a cross term from the
    geodesic slope gap when a bound for |v'| at the switch is supplied.
    Returns {(region, kind): StageResult}.
    """
    inputs = default_inputs() if inputs is None else dict(inputs)
    anchors = curve.anchors
    vprime_bounds = vprime_bounds or {}
    d0 = inputs["delta0"]
    s_top = abs(anchors.slope_top_switch)
    s_bot = abs(anchors.slope_bottom_switch)
    out = {}

    # --- top geodesic chain ---
    g1 = _propagate_geodesic_core("TopX1", anchors, d0, 0.0,
                                  inputs["eps1_top"], n)
    g2 = _propagate_geodesic_core(
        "TopX2ToSphere", anchors, g1.value_gap_end / s_top,
        g1.deriv_gap_end / s_top ** 2, inputs["eps2_top"], n)
    g3 = _propagate_geodesic_core(
        "TopX2SphereToCyl", anchors, g2.value_gap_end, g2.deriv_gap_end,
        inputs["eps3_top"], n)
    out[("TopX1", "geodesic")] = g1
    out[("TopX2ToSphere", "geodesic")] = g2
    out[("TopX2SphereToCyl", "geodesic")] = g3

    # --- bottom geodesic chain ---
    b1 = _propagate_geodesic_core("BotX1", anchors, d0, 0.0,
                                  inputs["eps1_bot"], n)
    b2 = _propagate_geodesic_core(
        "BotX2ToCyl", anchors, b1.value_gap_end / s_bot,
        b1.deriv_gap_end / s_bot ** 2, inputs["eps2_bot"], n)
    out[("BotX1", "geodesic")] = b1
    out[("BotX2ToCyl", "geodesic")] = b2

    # --- top Jacobi chain ---
    j1 = _propagate_jacobi_core("TopX1", anchors, g1, 0.0, 0.0,
                                inputs["delta1_top"], curve, n)
    vp = vprime_bounds.get("top_switch", 0.0)
    j2 = _propagate_jacobi_core(
        "TopX2ToSphere", anchors, g2, j1.value_gap_end,
        j1.deriv_gap_end / s_top + vp * g1.deriv_gap_end / s_top ** 2,
        inputs["delta2_top"], curve, n)
    out[("TopX1", "jacobi")] = j1
    out[("TopX2ToSphere", "jacobi")] = j2

    # --- bottom Jacobi chain ---
    jb1 = _propagate_jacobi_core("BotX1", anchors, b1, 0.0, 0.0,
                                 inputs["delta1_bot"], curve, n)
    vpb = vprime_bounds.get("bottom_switch", 0.0)
    jb2 = _propagate_jacobi_core(
        "BotX2ToCyl", anchors, b2, jb1.value_gap_end,
        jb1.deriv_gap_end / s_bot + vpb * b1.deriv_gap_end / s_bot ** 2,
        inputs["delta2_bot"], curve, n)
    out[("BotX1", "jacobi")] = jb1
    out[("BotX2ToCyl", "jacobi")] = jb2

    # --- recompute-only stage, forward direction, when mode data present ---
    if "TopX2SphereToCyl" in curve.mode:
        j3 = _propagate_jacobi_core(
            "TopX2SphereToCyl", anchors, g3, j2.value_gap_end,
            j2.deriv_gap_end, inputs["delta2_top"], curve, n)
        out[("TopX2SphereToCyl", "jacobi")] = j3

    # --- bottom-field continuation past the junction up to the sphere ---
    if "ContinuationToSphere" in curve.mode:
        gc = _propagate_geodesic_core(
            "ContinuationToSphere", anchors, b2.value_gap_end,
            b2.deriv_gap_end, inputs["eps3_top"], n, curve)
        jc = _propagate_jacobi_core(
            "ContinuationToSphere", anchors, gc, jb2.value_gap_end,
            jb2.deriv_gap_end, inputs["delta2_bot"], curve, n)
        out[("ContinuationToSphere", "geodesic")] = gc
        out[("ContinuationToSphere", "jacobi")] = jc
    return out


def make_ledger(region, kind, curve: CurveData, inputs=None) -> BoundLedger:
    inputs = default_inputs() if inputs is None else dict(inputs)
    envs = {s.name: s for s in stage_envelopes(region, curve.anchors)}
    return BoundLedger(region=region, kind=kind, inputs=inputs, envelopes=envs)


def propagate_stage(ledger: BoundLedger, curve: CurveData, n=2048) -> BoundLedger:
    """Fill a ledger's endpoint gap outputs by running its chain.

    The stage graph is fixed: prior stages of the same chain are always
    propagated first from the same inputs, so the outputs are endpoint
    bounds in terms of the original named inputs.
    """
    for v in ledger.inputs.values():
        if v < 0.0:
            raise PreconditionError("ledger inputs must be nonnegative")
    results = chain_gaps(curve, ledger.inputs, n)
    key = (ledger.region, ledger.kind)
    if key not in results:
        raise DependencyError(f"stage {key} missing prerequisite data")
    res = results[key]
    ledger.outputs = {
        "value_gap": res.value_gap_end,
        "derivative_gap": res.deriv_gap_end,
        "value_gap_increment": res.value_increment,
    }
    return ledger


def stage_coefficients(curve: CurveData, region, kind, n=2048):
    """Linear coefficients of each named input in the stage outputs."""
    coeffs = {"value_gap": {}, "derivative_gap": {}, "value_gap_increment": {}}
    for name in INPUT_NAMES:
        res = chain_gaps(curve, default_inputs(**{name: 1.0}), n)
        key = (region, kind)
        if key not in res:
            continue
        r = res[key]
        for out_name, val in (("value_gap", r.value_gap_end),
                              ("derivative_gap", r.deriv_gap_end),
                              ("value_gap_increment", r.value_increment)):
            if val > 1e-15:
                coeffs[out_name][name] = val
    return coeffs


# ---------------------------------------------------------------------------
# Replay of the reference constant chains
# ---------------------------------------------------------------------------

@dataclass
class ReplayItem:
    stage: str
    kind: str
    name: str
    ref: float | None          # displayed reference constant, None = none given
    ours: float                # certified recomputation
    verdict: str = ""
    note: str = ""

    def finish(self, slack):
        if self.ref is None:
            self.verdict = "recompute-only"
        elif self.ours <= self.ref * slack + 1e-15:
            self.verdict = "pass"
        else:
            self.verdict = "FAIL"
        return self


def _q(f, a, b, n=4096):
    return upper_integral(f, a, b, n)


def _replay_top_x1_geo(items, an):
    ex = math.exp(156.0 / 125.0)
    items.append(ReplayItem("TopX1", "geodesic", "exp_exponent",
                            156.0 / 125.0, (8.0 / 3.0 + 0.8) * 0.36))
    items.append(ReplayItem("TopX1", "geodesic", "deriv_coeff_eps1",
                            0.6 * ex, 0.6 * math.exp(8.0 / 3.0 * 0.36
                                                     + 0.8 * 0.36)))
    items.append(ReplayItem("TopX1", "geodesic", "deriv_coeff_delta0",
                            0.8 * 0.6 * ex, 0.48 * math.exp(52.0 / 15.0 * 0.36)))
    i_se = _q(lambda s: s * np.exp(52.0 / 15.0 * s * s), 0.0, 0.6)
    items.append(ReplayItem("TopX1", "geodesic", "int_s_exp",
                            15.0 / 104.0 * (ex - 1.0), i_se))
    items.append(ReplayItem("TopX1", "geodesic", "value_incr_delta0",
                            23.0 / 80.0, 0.8 * i_se,
                            note="increment over the initial gap"))
    items.append(ReplayItem("TopX1", "geodesic", "value_incr_eps1",
                            9.0 / 25.0, i_se))
    return i_se


def _replay_top_x2s_geo(items, an):
    ys, ut = an.y_sphere, an.u_top_switch
    ell = ut - ys

    def big_e(x):
        return np.exp(7.0 / 4.0 - 0.9 * (x - ys) ** 2
                      + (13.0 / 8.0 - x / 2.0) * (ut - x))

    e_end = float(big_e(ys))
    items.append(ReplayItem("TopX2ToSphere", "geodesic", "deriv_coeff_gapF",
                            59.0 / 4.0, (13.0 / 8.0 - ys / 2.0) * e_end))
    items.append(ReplayItem("TopX2ToSphere", "geodesic", "deriv_coeff_dgapF",
                            54.0 / 5.0, e_end,
                            note="reference columns appear swapped"))
    items.append(ReplayItem("TopX2ToSphere", "geodesic", "deriv_coeff_eps2",
                            377.0 / 20.0, ell * e_end))
    items.append(ReplayItem("TopX2ToSphere", "geodesic", "switch_slope_recip",
                            10.0 / 11.0, 1.0 / abs(an.slope_top_switch)))
    ex = math.exp(156.0 / 125.0)
    dcoef = 0.6 * ex
    items.append(ReplayItem(
        "TopX2ToSphere", "geodesic", "endpoint_delta0", 27.0,
        (59.0 / 4.0) * (10.0 / 11.0) * (23.0 / 80.0)
        + (54.0 / 5.0) * (10.0 / 11.0) ** 2 * dcoef * 0.8,
        note="route uses the displayed prior-stage constants"))
    items.append(ReplayItem(
        "TopX2ToSphere", "geodesic", "endpoint_eps1", 34.0,
        (59.0 / 4.0) * (10.0 / 11.0) * (9.0 / 25.0)
        + (54.0 / 5.0) * (10.0 / 11.0) ** 2 * dcoef))
    items.append(ReplayItem("TopX2ToSphere", "geodesic", "endpoint_eps2",
                            19.0, 377.0 / 20.0))
    v_gapF = 1.0 + _q(lambda x: (13.0 / 8.0 - x / 2.0) * big_e(x), ys, ut)
    v_dgapF = _q(big_e, ys, ut)
    v_eps = _q(lambda x: (ut - x) * big_e(x), ys, ut)
    items.append(ReplayItem("TopX2ToSphere", "geodesic", "value_coeff_gapF",
                            1.0 + 63.0 / 8.0, v_gapF))
    items.append(ReplayItem("TopX2ToSphere", "geodesic", "value_coeff_dgapF",
                            83.0 / 20.0, v_dgapF,
                            note="reference columns appear swapped"))
    items.append(ReplayItem("TopX2ToSphere", "geodesic", "value_coeff_eps2",
                            137.0 / 20.0, v_eps))
    vd = (1.0 + 63.0 / 8.0) * (10.0 / 11.0) * (23.0 / 80.0) \
        + (83.0 / 20.0) * (10.0 / 11.0) ** 2 * dcoef * 0.8
    ve1 = (1.0 + 63.0 / 8.0) * (10.0 / 11.0) * (9.0 / 25.0) \
        + (83.0 / 20.0) * (10.0 / 11.0) ** 2 * dcoef
    items.append(ReplayItem("TopX2ToSphere", "geodesic", "value_endpoint_delta0",
                            12.0, vd))
    items.append(ReplayItem("TopX2ToSphere", "geodesic", "value_endpoint_eps1",
                            15.0, ve1))
    items.append(ReplayItem("TopX2ToSphere", "geodesic", "value_endpoint_eps2",
                            7.0, 137.0 / 20.0))
    items.append(ReplayItem("TopX2ToSphere", "geodesic",
                            "sphere_recall_delta0", 317.0 / 25.0, vd))
    items.append(ReplayItem("TopX2ToSphere", "geodesic",
                            "sphere_recall_eps1", 11.0, ve1))
    items.append(ReplayItem("TopX2ToSphere", "geodesic",
                            "sphere_recall_eps2", 27.0 / 5.0, 137.0 / 20.0))
    return big_e


def _replay_top_x2c_geo(items, an):
    ys = an.y_sphere
    ell = ys - SQRT2

    def big_e(x):
        return np.exp(0.54 * (ys - x) + 0.25 * (ys - x) ** 2)

    e_end = float(big_e(SQRT2))
    items.append(ReplayItem("TopX2SphereToCyl", "geodesic", "deriv_coeff_gapF",
                            1.0 / 8.0, 0.25 * ell * e_end))
    items.append(ReplayItem("TopX2SphereToCyl", "geodesic", "deriv_coeff_dgapF",
                            4.0 / 3.0, e_end))
    items.append(ReplayItem("TopX2SphereToCyl", "geodesic", "deriv_coeff_eps3",
                            0.5, ell * e_end))
    items.append(ReplayItem("TopX2SphereToCyl", "geodesic", "endpoint_delta0",
                            36.0, 12.0 / 8.0 + (4.0 / 3.0) * 27.0))
    items.append(ReplayItem("TopX2SphereToCyl", "geodesic", "endpoint_eps1",
                            45.0, 15.0 / 8.0 + (4.0 / 3.0) * 34.0))
    items.append(ReplayItem("TopX2SphereToCyl", "geodesic", "endpoint_eps2",
                            25.0, 7.0 / 8.0 + (4.0 / 3.0) * 19.0))
    items.append(ReplayItem("TopX2SphereToCyl", "geodesic", "endpoint_eps3",
                            0.5, 0.5))
    v_gapF = 1.0 + _q(lambda x: 0.25 * (ys - x) * big_e(x), SQRT2, ys)
    v_dgapF = _q(big_e, SQRT2, ys)
    v_eps = _q(lambda x: (ys - x) * big_e(x), SQRT2, ys)
    items.append(ReplayItem("TopX2SphereToCyl", "geodesic", "value_coeff_gapF",
                            51.0 / 50.0, v_gapF))
    items.append(ReplayItem("TopX2SphereToCyl", "geodesic", "value_coeff_dgapF",
                            33.0 / 80.0, v_dgapF))
    items.append(ReplayItem("TopX2SphereToCyl", "geodesic", "value_coeff_eps3",
                            2.0 / 25.0, v_eps))
    items.append(ReplayItem(
        "TopX2SphereToCyl", "geodesic", "value_endpoint_delta0", 24.0,
        (51.0 / 50.0) * 12.0 + (33.0 / 80.0) * 27.0))
    items.append(ReplayItem(
        "TopX2SphereToCyl", "geodesic", "value_endpoint_eps1", 30.0,
        (51.0 / 50.0) * 15.0 + (33.0 / 80.0) * 34.0))
    items.append(ReplayItem(
        "TopX2SphereToCyl", "geodesic", "value_endpoint_eps2", 15.0,
        (51.0 / 50.0) * 7.0 + (33.0 / 80.0) * 19.0))


def _replay_bot_x1_geo(items, an):
    items.append(ReplayItem("BotX1", "geodesic", "exp_exponent_quad",
                            49.0 / 5.0, 29.0 / 5.0 + 4.0))
    items.append(ReplayItem("BotX1", "geodesic", "exp_exponent_lin",
                            0.25, 1.0 / 20.0 + 1.0 / 5.0))

    def big_e(x):
        return np.exp(9.8 * x * x + 0.25 * x)

    e_end = float(big_e(0.5))
    items.append(ReplayItem("BotX1", "geodesic", "deriv_coeff_delta0",
                            39.0, 2.95 * e_end))
    items.append(ReplayItem("BotX1", "geodesic", "deriv_coeff_eps1",
                            28.0 / 5.0, 0.5 * e_end,
                            note="reference under-evaluates its own product"))
    i_du = _q(lambda s: (5.8 * s + 0.05) * big_e(s), 0.0, 0.5)
    i_e1 = _q(lambda s: s * big_e(s), 0.0, 0.5)
    items.append(ReplayItem("BotX1", "geodesic", "value_coeff_delta0",
                            23.0 / 5.0, 1.0 + i_du))
    items.append(ReplayItem("BotX1", "geodesic", "value_coeff_eps1",
                            3.0 / 5.0, i_e1))
    return big_e, i_du, i_e1


def _replay_bot_x2_geo(items, an):
    a0b = an.a0_bottom

    def big_e(x):
        return np.exp(0.9 - 1.1 * (x - 1.5) ** 2
                      + (x - a0b) * (0.64 * x - 3.0 / 7.0))

    e_end = float(big_e(SQRT2))
    ell = SQRT2 - a0b
    items.append(ReplayItem("BotX2ToCyl", "geodesic", "anchor_a0",
                            1e-3, abs(a0b - 28.0 / 39.0),
                            note="distance of the switch ordinate from 28/39"))
    items.append(ReplayItem("BotX2ToCyl", "geodesic", "deriv_coeff_gapF",
                            13.0 / 8.0, (0.64 * SQRT2 - 3.0 / 7.0) * e_end))
    items.append(ReplayItem("BotX2ToCyl", "geodesic", "deriv_coeff_dgapF",
                            17.0 / 5.0, e_end))
    items.append(ReplayItem("BotX2ToCyl", "geodesic", "deriv_coeff_eps2",
                            69.0 / 29.0, ell * e_end))
    items.append(ReplayItem("BotX2ToCyl", "geodesic", "switch_slope_recip",
                            10.0 / 12.0, 1.0 / abs(an.slope_bottom_switch)))
    items.append(ReplayItem(
        "BotX2ToCyl", "geodesic", "endpoint_delta0", 100.0,
        (13.0 / 8.0) * (10.0 / 12.0) * (23.0 / 5.0)
        + (17.0 / 5.0) * (10.0 / 12.0) ** 2 * 39.0))
    items.append(ReplayItem(
        "BotX2ToCyl", "geodesic", "endpoint_eps1", 15.0,
        (13.0 / 8.0) * (10.0 / 12.0) * (3.0 / 5.0)
        + (17.0 / 5.0) * (10.0 / 12.0) ** 2 * (28.0 / 5.0)))
    items.append(ReplayItem("BotX2ToCyl", "geodesic", "endpoint_eps2",
                            5.0 / 2.0, 69.0 / 29.0))
    v_gapF = 1.0 + _q(lambda x: (0.64 * x - 3.0 / 7.0) * big_e(x), a0b, SQRT2)
    v_dgapF = _q(big_e, a0b, SQRT2)
    v_eps = _q(lambda x: (x - a0b) * big_e(x), a0b, SQRT2)
    items.append(ReplayItem("BotX2ToCyl", "geodesic", "value_coeff_gapF",
                            73.0 / 50.0, v_gapF))
    items.append(ReplayItem("BotX2ToCyl", "geodesic", "value_coeff_dgapF",
                            14.0 / 9.0, v_dgapF))
    items.append(ReplayItem("BotX2ToCyl", "geodesic", "value_coeff_eps2",
                            2.0 / 3.0, v_eps))
    items.append(ReplayItem(
        "BotX2ToCyl", "geodesic", "value_endpoint_delta0", 48.0,
        (73.0 / 50.0) * (10.0 / 12.0) * (23.0 / 5.0)
        + (14.0 / 9.0) * (10.0 / 12.0) ** 2 * 39.0))
    items.append(ReplayItem(
        "BotX2ToCyl", "geodesic", "value_endpoint_eps1", 7.0,
        (73.0 / 50.0) * (10.0 / 12.0) * (3.0 / 5.0)
        + (14.0 / 9.0) * (10.0 / 12.0) ** 2 * (28.0 / 5.0)))
    return big_e


def _replay_top_x1_jac(items, an, curve, n):
    c = 52.0 / 15.0
    i_sq = _q(lambda s: s * s * (2.0 * s * s + 3.0) * np.exp(c * s * s),
              0.0, 0.6)
    items.append(ReplayItem("TopX1", "jacobi", "slopegap_weight_delta0",
                            9.0 / 20.0, 0.8 * i_sq))
    items.append(ReplayItem("TopX1", "jacobi", "slopegap_weight_eps1",
                            14.0 / 25.0, i_sq))

    def inner(x):
        return 0.8 * (15.0 / 104.0) * (np.exp(c * x * x) - 1.0)

    d1 = _q(lambda x: (1.6 - 1.5 * x * x) * (1.0 + inner(x)), 0.0, 0.6)
    d2 = _q(lambda x: (1.6 - 1.5 * x * x) * inner(x) / 0.8, 0.0, 0.6)
    items.append(ReplayItem("TopX1", "jacobi", "double_int_delta0",
                            23.0 / 25.0, d1))
    items.append(ReplayItem("TopX1", "jacobi", "double_int_eps1",
                            7.0 / 100.0, d2))
    items.append(ReplayItem("TopX1", "jacobi", "bracket_delta0",
                            137.0 / 100.0, 9.0 / 20.0 + 23.0 / 25.0))
    items.append(ReplayItem("TopX1", "jacobi", "bracket_eps1",
                            63.0 / 100.0, 14.0 / 25.0 + 7.0 / 100.0))
    co = stage_coefficients(curve, "TopX1", "jacobi", n)
    items.append(ReplayItem("TopX1", "jacobi", "deriv_endpoint_delta0",
                            23.0 / 5.0, co["derivative_gap"]["delta0"]))
    items.append(ReplayItem("TopX1", "jacobi", "deriv_endpoint_eps1",
                            11.0 / 5.0, co["derivative_gap"]["eps1_top"]))
    items.append(ReplayItem("TopX1", "jacobi", "deriv_endpoint_delta1",
                            51.0 / 25.0, co["derivative_gap"]["delta1_top"]))
    items.append(ReplayItem("TopX1", "jacobi", "value_endpoint_delta0",
                            13.0 / 10.0, co["value_gap"]["delta0"]))
    items.append(ReplayItem("TopX1", "jacobi", "value_endpoint_eps1",
                            3.0 / 5.0, co["value_gap"]["eps1_top"]))
    items.append(ReplayItem("TopX1", "jacobi", "value_endpoint_delta1",
                            11.0 / 50.0, co["value_gap"]["delta1_top"],
                            note="certified route exceeds the displayed value"))


def _replay_top_x2s_jac(items, an, curve, n, big_e_geo):
    ys, ut = an.y_sphere, an.u_top_switch

    def geo_d(x, d0, e1, e2):
        gap_f = (10.0 / 12.0) * ((9.0 / 25.0) * e1 + (23.0 / 80.0) * d0)
        dgap_f = (10.0 / 12.0) ** 2 * (e1 + 0.8 * d0) * 0.6 * math.exp(156.0 / 125.0)
        return ((13.0 / 8.0 - x / 2.0) * gap_f + dgap_f
                + e2 * (ut - x)) * big_e_geo(x)

    def w1(x):
        return 0.3 + 1.65 * (x - ys) ** 5

    for name, ref, unit in (("slopegap_delta0", 80.0 / 25.0, (1, 0, 0)),
                            ("slopegap_eps1", 6.0, (0, 1, 0)),
                            ("slopegap_eps2", 27.0 / 10.0, (0, 0, 1))):
        val = _q(lambda x: w1(x) * geo_d(x, *unit), ys, ut)
        items.append(ReplayItem("TopX2ToSphere", "jacobi", name, ref, val,
                                note="route uses displayed prior constants"))

    def eta(x):
        return _eta_top(x, an)

    def env_e(s):
        return (13.0 / 8.0 - s / 2.0) * big_e_geo(s)

    d1 = _q(lambda x: eta(x) * (1.0 + _inner_cum(env_e, x, ut)), ys, ut)
    items.append(ReplayItem("TopX2ToSphere", "jacobi", "double_int_1",
                            29.0 / 50.0, d1))
    d2 = _q(lambda x: eta(x) * _inner_cum(big_e_geo, x, ut), ys, ut)
    items.append(ReplayItem("TopX2ToSphere", "jacobi", "double_int_2",
                            29.0 / 50.0, d2))
    d3 = _q(lambda x: eta(x) * _inner_cum(lambda s: (ut - s) * big_e_geo(s),
                                          x, ut), ys, ut)
    items.append(ReplayItem("TopX2ToSphere", "jacobi", "double_int_3",
                            19.0 / 50.0, d3))
    for name, ref, unit in (("value_weight_delta0", 0.5, (1, 0, 0)),
                            ("value_weight_eps1", 29.0 / 50.0, (0, 1, 0)),
                            ("value_weight_eps2", 19.0 / 50.0, (0, 0, 1))):
        gap_f = (10.0 / 12.0) * ((9.0 / 25.0) * unit[1] + (23.0 / 80.0) * unit[0])
        dgap_f = (10.0 / 12.0) ** 2 * (unit[1] + 0.8 * unit[0]) \
            * 0.6 * math.exp(156.0 / 125.0)

        def geo_v(x):
            inner1 = _inner_cum(env_e, x, ut)
            inner2 = _inner_cum(big_e_geo, x, ut)
            inner3 = _inner_cum(lambda s: (ut - s) * big_e_geo(s), x, ut)
            return gap_f * (1.0 + inner1) + dgap_f * inner2 + unit[2] * inner3

        val = _q(lambda x: eta(x) * geo_v(x), ys, ut, n=1024)
        items.append(ReplayItem("TopX2ToSphere", "jacobi", name, ref, val))
    co = stage_coefficients(curve, "TopX2ToSphere", "jacobi", n)
    for inp in ("delta0", "eps1_top", "eps2_top", "delta1_top", "delta2_top"):
        items.append(ReplayItem(
            "TopX2ToSphere", "jacobi", f"deriv_endpoint_{inp}", None,
            co["derivative_gap"].get(inp, 0.0),
            note="chain ends without displayed endpoint constants"))


def _inner_cum(f, x, ut):
    """Upper bound for the inner integral from x to ut (scalar or array x)."""
    x_arr = np.atleast_1d(np.asarray(x, float))
    out = np.array([upper_integral(f, xi, ut, 256) for xi in x_arr])
    return out if np.ndim(x) else float(out[0])


def _replay_bot_x1_jac(items, an, curve, n, big_e, i_du, i_e1):
    items.append(ReplayItem("BotX1", "jacobi", "slopegap_delta0",
                            36.0 / 5.0, 2.0 * i_du))
    items.append(ReplayItem("BotX1", "jacobi", "slopegap_eps1",
                            6.0 / 5.0, 2.0 * i_e1))
    d1 = _q(lambda x: (41.0 - 80.0 * x)
            * (1.0 + _inner_cum_lo(lambda s: (5.8 * s + 0.05) * big_e(s), x)),
            0.0, 0.5, n=1024)
    d2 = _q(lambda x: (41.0 - 80.0 * x)
            * _inner_cum_lo(lambda s: s * big_e(s), x), 0.0, 0.5, n=1024)
    items.append(ReplayItem("BotX1", "jacobi", "double_int_delta0",
                            67.0 / 5.0, d1))
    items.append(ReplayItem("BotX1", "jacobi", "double_int_eps1",
                            12.0 / 25.0, d2))
    items.append(ReplayItem("BotX1", "jacobi", "bracket_delta0",
                            103.0 / 5.0, 36.0 / 5.0 + 67.0 / 5.0))
    items.append(ReplayItem("BotX1", "jacobi", "bracket_eps1",
                            42.0 / 25.0, 6.0 / 5.0 + 12.0 / 25.0))
    co = stage_coefficients(curve, "BotX1", "jacobi", n)
    items.append(ReplayItem("BotX1", "jacobi", "deriv_endpoint_delta0",
                            171.0, co["derivative_gap"]["delta0"]))
    items.append(ReplayItem("BotX1", "jacobi", "deriv_endpoint_eps1",
                            14.0, co["derivative_gap"]["eps1_bot"]))
    items.append(ReplayItem("BotX1", "jacobi", "deriv_endpoint_delta1",
                            38.0 / 9.0, co["derivative_gap"]["delta1_bot"]))
    items.append(ReplayItem("BotX1", "jacobi", "value_endpoint_delta0",
                            31.0, co["value_gap"]["delta0"]))
    items.append(ReplayItem("BotX1", "jacobi", "value_endpoint_eps1",
                            51.0 / 20.0, co["value_gap"]["eps1_bot"]))
    items.append(ReplayItem("BotX1", "jacobi", "value_endpoint_delta1",
                            11.0 / 5.0, co["value_gap"]["delta1_bot"]))


def _inner_cum_lo(f, x):
    x_arr = np.atleast_1d(np.asarray(x, float))
    out = np.array([upper_integral(f, 0.0, xi, 256) for xi in x_arr])
    return out if np.ndim(x) else float(out[0])


def _inner_cum_ab(f, a, x):
    x_arr = np.atleast_1d(np.asarray(x, float))
    out = np.array([upper_integral(f, a, xi, 256) for xi in x_arr])
    return out if np.ndim(x) else float(out[0])


def _replay_bot_x2_jac(items, an, curve, n, big_e_geo):
    a0b = an.a0_bottom
    ell = SQRT2 - a0b

    def geo_d(x, d0, e1, e2):
        gap_f = (10.0 / 12.0) * ((3.0 / 5.0) * e1 + (23.0 / 5.0) * d0)
        dgap_f = (10.0 / 12.0) ** 2 * (39.0 * d0 + (28.0 / 5.0) * e1)
        return ((0.64 * x - 3.0 / 7.0) * gap_f + dgap_f
                + e2 * (x - a0b)) * big_e_geo(x)

    def w1(x):
        return 0.8 + 8.0 * (x - SQRT2) ** 2

    for name, ref, unit in (("slopegap_delta0", 78.0, (1, 0, 0)),
                            ("slopegap_eps1", 12.0, (0, 1, 0)),
                            ("slopegap_eps2", 9.0 / 10.0, (0, 0, 1))):
        val = _q(lambda x: w1(x) * geo_d(x, *unit), a0b, SQRT2)
        items.append(ReplayItem("BotX2ToCyl", "jacobi", name, ref, val,
                                note="route uses displayed prior constants"))

    def eta2(x):
        return 0.48 - 0.75 * (x - SQRT2) ** 2

    d1 = _q(lambda x: eta2(x)
            * (1.0 + _inner_cum_ab(lambda s: (0.64 * s - 3.0 / 7.0)
                                   * big_e_geo(s), a0b, x)),
            a0b, SQRT2, n=1024)
    d2 = _q(lambda x: eta2(x) * _inner_cum_ab(big_e_geo, a0b, x),
            a0b, SQRT2, n=1024)
    d3 = _q(lambda x: eta2(x) * _inner_cum_ab(lambda s: (s - a0b)
                                              * big_e_geo(s), a0b, x),
            a0b, SQRT2, n=1024)
    items.append(ReplayItem("BotX2ToCyl", "jacobi", "double_int_1",
                            3.0 / 10.0, d1))
    items.append(ReplayItem("BotX2ToCyl", "jacobi", "double_int_2",
                            1.0 / 5.0, d2))
    items.append(ReplayItem("BotX2ToCyl", "jacobi", "double_int_3",
                            7.0 / 125.0, d3))
    for name, ref, unit in (("value_weight_delta0", 197.0 / 30.0, (1, 0, 0)),
                            ("value_weight_eps1", 47.0 / 50.0, (0, 1, 0)),
                            ("value_weight_eps2", 7.0 / 125.0, (0, 0, 1))):
        gap_f = (10.0 / 12.0) * ((3.0 / 5.0) * unit[1] + (23.0 / 5.0) * unit[0])
        dgap_f = (10.0 / 12.0) ** 2 * (39.0 * unit[0] + (28.0 / 5.0) * unit[1])

        def geo_v(x):
            i1 = _inner_cum_ab(lambda s: (0.64 * s - 3.0 / 7.0)
                               * big_e_geo(s), a0b, x)
            i2 = _inner_cum_ab(big_e_geo, a0b, x)
            i3 = _inner_cum_ab(lambda s: (s - a0b) * big_e_geo(s), a0b, x)
            return gap_f * (1.0 + i1) + dgap_f * i2 + unit[2] * i3

        val = _q(lambda x: eta2(x) * geo_v(x), a0b, SQRT2, n=1024)
        items.append(ReplayItem("BotX2ToCyl", "jacobi", name, ref, val))
    pref = math.exp(0.45 + ell * (SQRT2 - 0.4))
    items.append(ReplayItem("BotX2ToCyl", "jacobi", "exp_prefactor",
                            63.0 / 20.0, pref))
    slope_b = 6.0 / 5.0
    bracket = {
        "delta0": 31.0 + 78.0 + 197.0 / 30.0 + 171.0 / slope_b,
        "eps1_bot": 51.0 / 20.0 + 12.0 + 47.0 / 50.0 + 14.0 / slope_b,
        "eps2_bot": 9.0 / 10.0 + 7.0 / 125.0,
        "delta1_bot": 11.0 / 5.0 + (38.0 / 9.0) / slope_b,
        "delta2_bot": ell,
    }
    refs = {"delta0": 813.0, "eps1_bot": 86.0, "eps2_bot": 3.0,
            "delta1_bot": 95.0 / 27.0, "delta2_bot": ell}
    notes = {"delta1_bot": "reference omits the exponential prefactor",
             "delta2_bot": "reference omits the exponential prefactor"}
    for kname, bval in bracket.items():
        items.append(ReplayItem("BotX2ToCyl", "jacobi",
                                f"deriv_endpoint_{kname}", refs[kname],
                                (63.0 / 20.0) * bval, note=notes.get(kname, "")))
    iq = _q(big_e_jac_bot(a0b), a0b, SQRT2)
    vrefs = {"delta0": 522.0, "eps1_bot": 56.0, "eps2_bot": 2.0,
             "delta1_bot": 11.0, "delta2_bot": 9.0 / 10.0}
    vstart = {"delta0": 31.0, "eps1_bot": 51.0 / 20.0, "eps2_bot": 0.0,
              "delta1_bot": 11.0 / 5.0, "delta2_bot": 0.0}
    for kname in bracket:
        items.append(ReplayItem("BotX2ToCyl", "jacobi",
                                f"value_endpoint_{kname}", vrefs[kname],
                                vstart[kname] + bracket[kname] * iq))


def big_e_jac_bot(a0b):
    def f(x):
        return np.exp(0.45 - 0.75 * (x - SQRT2) ** 2 + (x - a0b) * (x - 0.4))
    return f


def replay_ledger(curve: CurveData, slack=DEFAULT_SLACK, regions=None, n=1024):
    """Recompute every displayed reference constant; report at slack.

    Two Jacobi stages end mid-chain without displayed endpoint constants
    and are reported recompute-only.  Failed comparisons are listed,
    never silently absorbed; the known failures trace to arithmetic slips
    in the reference chain (see the item notes).
    """
    an = curve.anchors
    items: list[ReplayItem] = []
    _replay_top_x1_geo(items, an)
    big_e_ts = _replay_top_x2s_geo(items, an)
    _replay_top_x2c_geo(items, an)
    big_e_b, i_du, i_e1 = _replay_bot_x1_geo(items, an)
    big_e_b2 = _replay_bot_x2_geo(items, an)
    _replay_top_x1_jac(items, an, curve, n)
    _replay_top_x2s_jac(items, an, curve, n, big_e_ts)
    _replay_bot_x1_jac(items, an, curve, n, big_e_b, i_du, i_e1)
    _replay_bot_x2_jac(items, an, curve, n, big_e_b2)
    if "TopX2SphereToCyl" in curve.mode:
        co = stage_coefficients(curve, "TopX2SphereToCyl", "jacobi", n)
        for inp, val in sorted(co["derivative_gap"].items()):
            items.append(ReplayItem(
                "TopX2SphereToCyl", "jacobi", f"deriv_endpoint_{inp}",
                None, val, note="no displayed constants for this stage"))
    else:
        items.append(ReplayItem(
            "TopX2SphereToCyl", "jacobi", "deriv_endpoint", None, float("nan"),
            note="no displayed constants; attach mode data to recompute"))
    for it in items:
        it.finish(slack)
    if regions is not None:
        items = [it for it in items if it.stage in regions]
    return items


def render_replay_table(items):
    lines = []
    header = (f"{'stage':18s} {'kind':9s} {'constant':26s} "
              f"{'reference':>12s} {'recomputed':>12s} {'verdict':>14s}")
    lines.append(header)
    lines.append("-" * len(header))
    for it in items:
        ref = "-" if it.ref is None else f"{it.ref:12.6g}"
        lines.append(f"{it.stage:18s} {it.kind:9s} {it.name:26s} "
                     f"{ref:>12s} {it.ours:12.6g} {it.verdict:>14s}")
    n_fail = sum(1 for it in items if it.verdict == "FAIL")
    n_rec = sum(1 for it in items if it.verdict == "recompute-only")
    lines.append(f"{len(items)} constants audited: "
                 f"{len(items) - n_fail - n_rec} pass, {n_fail} fail, "
                 f"{n_rec} recompute-only")
    return "\n".join(lines)
