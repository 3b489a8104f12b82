"""Chart right-hand sides, induced quantities, residual certification."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from shrinktorus import geometry
from shrinktorus.geometry import (
    SQRT2,
    Chart,
    ChartEscapeError,
    CurveState,
    DomainError,
    ProfileSegment,
    angenent_curvature,
    cot_guarded,
    curvature_rhs_x1,
    curvature_rhs_x2,
    geom_quantities,
    polar_rhs,
    residual_sup,
    shrinker_rhs,
)


# ---------------------------------------------------------------------------
# Graph right-hand sides
# ---------------------------------------------------------------------------

def test_rhs_x1_cylinder_is_exact():
    # radius sqrt(2) cylinder: (-sqrt2/2 + 1/sqrt2) * 1 = 0
    assert curvature_rhs_x1(SQRT2, 0.0, 0.3) == pytest.approx(0.0, abs=1e-15)


def test_rhs_x1_direct_substitution():
    assert curvature_rhs_x1(2.0, 0.0, 0.0) == pytest.approx(-0.5)


def test_rhs_x1_axis_touch_raises():
    with pytest.raises(DomainError):
        curvature_rhs_x1(0.0, 0.0, 0.1)
    with pytest.raises(DomainError):
        curvature_rhs_x1(-1.0, 0.0, 0.1)


def test_rhs_x2_sphere_is_exact():
    # x1 = f(x2) = sqrt(4 - x2^2) parametrizes the radius-2 sphere profile
    for x2 in (0.5, 1.0, SQRT2, 1.9):
        f = math.sqrt(4.0 - x2 * x2)
        q = -x2 / f
        d2f = -4.0 / f ** 3
        assert curvature_rhs_x2(f, q, x2) == pytest.approx(d2f, abs=1e-12)


def test_rhs_x2_trivial_point():
    assert curvature_rhs_x2(0.0, 0.0, SQRT2) == pytest.approx(0.0, abs=1e-15)


def test_rhs_x2_axis_touch_raises():
    with pytest.raises(DomainError):
        curvature_rhs_x2(1.0, 0.0, 0.0)


def test_rhs_x1_partials_match_finite_differences():
    u, p, x1 = 2.7, -0.4, 0.35
    h = 1e-6
    du_fd = (curvature_rhs_x1(u + h, p, x1) - curvature_rhs_x1(u - h, p, x1)) / (2 * h)
    dp_fd = (curvature_rhs_x1(u, p + h, x1) - curvature_rhs_x1(u, p - h, x1)) / (2 * h)
    assert geometry.d_rhs_x1_du(u, p) == pytest.approx(du_fd, rel=1e-8)
    assert geometry.d_rhs_x1_dp(u, p, x1) == pytest.approx(dp_fd, rel=1e-8)


def test_rhs_x2_partials_match_finite_differences():
    f, q, x2 = 0.8, 0.6, 1.2
    h = 1e-6
    df_fd = (curvature_rhs_x2(f + h, q, x2) - curvature_rhs_x2(f - h, q, x2)) / (2 * h)
    dq_fd = (curvature_rhs_x2(f, q + h, x2) - curvature_rhs_x2(f, q - h, x2)) / (2 * h)
    assert geometry.d_rhs_x2_df(f, q, x2) == pytest.approx(df_fd, rel=1e-8)
    assert geometry.d_rhs_x2_dq(f, q, x2) == pytest.approx(dq_fd, rel=1e-8)


# ---------------------------------------------------------------------------
# Polar and arc charts
# ---------------------------------------------------------------------------

def test_polar_sphere_equilibrium():
    for phi in (math.pi / 4, math.pi / 3, 1.5, 2.5):
        assert polar_rhs(2.0, 0.0, phi) == pytest.approx(0.0, abs=1e-12)


def test_polar_sphere_equilibrium_spec_arithmetic():
    # (1/2) * {4 + 0 + [1 - 2 - 0] * 4} = 0
    assert polar_rhs(2.0, 0.0, math.pi / 4) == pytest.approx(0.0, abs=1e-13)


def test_polar_pole_guard_matches_cotangent_at_the_seam():
    eps = geometry.POLAR_POLE_GUARD
    phi = eps * 0.999          # guarded branch
    series = cot_guarded(phi)
    assert series == pytest.approx(1.0 / math.tan(phi), abs=1e-9)
    assert cot_guarded(0.5) == pytest.approx(1.0 / math.tan(0.5), rel=1e-14)


def test_polar_pole_outside_domain_raises():
    with pytest.raises(ChartEscapeError):
        polar_rhs(2.0, 0.0, -0.1)
    with pytest.raises(DomainError):
        polar_rhs(-1.0, 0.0, 1.0)


def test_arc_cylinder_is_straight():
    out = shrinker_rhs(0.0, (0.3, SQRT2, 1.0, 0.0), Chart.ARC)
    assert out[2] == pytest.approx(0.0, abs=1e-14)
    assert out[3] == pytest.approx(0.0, abs=1e-14)


def test_arc_rhs_satisfies_curvature_identity():
    x, y, dx, dy = 0.4, 1.7, 0.8, -0.6
    _, _, xdd, ydd = shrinker_rhs(0.0, (x, y, dx, dy), Chart.ARC)
    omega = dx * dx + dy * dy
    target = ((y * dx - x * dy) / 2.0 - dx / y) * omega
    assert xdd * dy - ydd * dx == pytest.approx(target, rel=1e-13)
    assert dx * xdd + dy * ydd == pytest.approx(0.0, abs=1e-13)


def test_graph_chart_escape():
    with pytest.raises(ChartEscapeError):
        shrinker_rhs(0.5, (2.0, 5.0), Chart.GRAPH_X1)
    with pytest.raises(ChartEscapeError):
        shrinker_rhs(1.5, (0.5, -4.5), Chart.GRAPH_X2)


def test_arc_axis_touch_raises():
    with pytest.raises(DomainError):
        shrinker_rhs(0.0, (0.1, -0.2, 1.0, 0.0), Chart.ARC)


def test_cross_chart_finite_difference_consistency():
    # second differences of the x1-graph flow converge to the displayed
    # right-hand side at O(h^2)
    u0, p0, x0 = 2.4, 0.3, 0.2
    target = curvature_rhs_x1(u0, p0, x0)
    errors = []
    for h in (1e-2, 5e-3, 2.5e-3):
        sol = solve_ivp(lambda x, w: shrinker_rhs(x, w, Chart.GRAPH_X1),
                        (x0 - h, x0 + h), [u0 - p0 * h + 0.5 * target * h * h,
                                           p0 - target * h],
                        method="DOP853", rtol=1e-13, atol=1e-14,
                        t_eval=[x0 - h, x0, x0 + h])
        um, uc, up = sol.y[0]
        errors.append(abs((um - 2 * uc + up) / (h * h) - target))
    assert errors[0] < 1e-4
    assert errors[0] / errors[1] > 3.0   # O(h^2) decay
    assert errors[1] / errors[2] > 3.0


def test_reflection_symmetry_of_arc_rhs():
    state = (0.7, 2.2, 0.6, 0.8)
    reflected = (-0.7, 2.2, -0.6, 0.8)
    out = shrinker_rhs(0.0, state, Chart.ARC)
    out_r = shrinker_rhs(0.0, reflected, Chart.ARC)
    assert out_r[0] == pytest.approx(-out[0])
    assert out_r[1] == pytest.approx(out[1])
    assert out_r[2] == pytest.approx(-out[2], rel=1e-13)
    assert out_r[3] == pytest.approx(out[3], rel=1e-13)


# ---------------------------------------------------------------------------
# Curve states and induced quantities
# ---------------------------------------------------------------------------

def test_curve_state_invariants():
    with pytest.raises(DomainError):
        CurveState(0.0, 0.0, -1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        CurveState(0.0, 0.0, 1.0, 0.0, 0.0)
    st = CurveState(0.0, 0.5, 1.5, 0.6, 0.8)
    assert st.omega == pytest.approx(1.0)
    refl = st.reflected()
    assert (refl.x, refl.dx) == (-0.5, -0.6)


def test_cylinder_quantities():
    st = CurveState(0.0, 0.0, SQRT2, 1.0, 0.0)
    g = geom_quantities(st)
    assert g.a_sq == pytest.approx(0.5, abs=1e-14)
    assert g.omega == pytest.approx(1.0)


def test_sphere_mean_curvature_with_outward_normal():
    # h = <X, nu>/2 = 1 on the radius-2 sphere (the shrinker equation value)
    theta = 0.8
    st = CurveState(0.0, 2 * math.cos(theta), 2 * math.sin(theta),
                    -math.sin(theta), math.cos(theta))
    g = geom_quantities(st)
    assert g.h == pytest.approx(1.0, abs=1e-14)
    assert g.a_sq == pytest.approx(0.5, abs=1e-14)


def test_reparametrization_invariance():
    st = CurveState(0.0, 0.4, 1.8, 0.5, -0.7)
    fast = CurveState(0.0, 0.4, 1.8, 1.0, -1.4)
    g1, g2 = geom_quantities(st), geom_quantities(fast)
    assert g2.omega == pytest.approx(4.0 * g1.omega)
    assert g2.a_sq == pytest.approx(g1.a_sq, rel=1e-14)
    assert g2.k_ang == pytest.approx(g1.k_ang, rel=1e-14)


def test_conformal_curvature_peak_along_torus(profile):
    # largest conformal curvature sits at the point nearest the origin
    sigma = np.linspace(0.0, profile.length, 4000)
    x, y, _, _ = profile.state(sigma)
    kang = angenent_curvature(x, y)
    peak = float(kang.max())
    assert 35.8 < peak < 36.0      # regression value 35.893
    assert abs(peak - 30.0) <= 0.2 * 30.0
    assert sigma[int(np.argmax(kang))] == pytest.approx(profile.length,
                                                        abs=2e-3)


# ---------------------------------------------------------------------------
# Segments and residual certification
# ---------------------------------------------------------------------------

def _cylinder_segment(perturb=0.0):
    xs = np.linspace(0.0, 0.6, 2001)
    u = np.full_like(xs, SQRT2) + perturb * xs * xs
    du = 2.0 * perturb * xs
    return ProfileSegment.from_samples(Chart.GRAPH_X1, xs, u, du)


def test_exact_cylinder_segment_has_zero_residual():
    assert residual_sup(_cylinder_segment()) < 1e-12


def test_perturbed_segment_residual_band():
    # adding 1e-3 x^2 produces an almost uniform residual of 2e-3: the
    # second derivative shifts by 2e-3 while the equation change cancels
    eps = residual_sup(_cylinder_segment(perturb=1e-3))
    assert 1.9e-3 <= eps <= 2.1e-3


def test_located_top_graph_segment_residual(profile):
    # the certified sup-residual of a double-precision cubic approximant
    # floors near 2*sqrt(eps_mach |u| |u''''|) ~ 1.3e-6 on this interval
    sol = solve_ivp(lambda x, w: shrinker_rhs(x, w, Chart.GRAPH_X1),
                    (0.0, 0.6), [profile.a0, 0.0], method="DOP853",
                    rtol=1e-13, atol=1e-15, dense_output=True)
    xs = np.linspace(0.0, 0.6, 3000)
    u, du = sol.sol(xs)
    seg = ProfileSegment.from_samples(Chart.GRAPH_X1, xs, u, du)
    assert residual_sup(seg) < 2.5e-6


def test_segment_validity_checks():
    xs = np.linspace(0.0, 1.0, 11)
    with pytest.raises(DomainError):
        ProfileSegment.from_samples(Chart.GRAPH_X1, xs, xs - 0.5,
                                    np.ones_like(xs))
    with pytest.raises(DomainError):
        ProfileSegment.from_samples(Chart.GRAPH_X2, xs, xs + 1.0,
                                    np.ones_like(xs))


def test_chart_consistency_arc_vs_graph(profile):
    # integrating in the arc chart and reading off the graph reproduces
    # direct x1-graph integration within combined tolerances
    a0 = profile.a0
    sol = solve_ivp(lambda x, w: shrinker_rhs(x, w, Chart.GRAPH_X1),
                    (0.0, 0.6), [a0, 0.0], method="DOP853",
                    rtol=1e-12, atol=1e-13, dense_output=True)
    ts = np.linspace(0.0, profile.sigma_junction, 3000)
    x, y, dx, dy = profile.top.sol(ts)
    keep = (x > 0.05) & (x < 0.6)
    diff = np.abs(sol.sol(x[keep])[0] - y[keep])
    assert diff.max() < 1e-8
