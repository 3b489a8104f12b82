"""Sesqui-shooting: crossings, inversion, tangent mismatch, certificate."""

import json
import math

import numpy as np
import pytest

from shrinktorus import shooting
from shrinktorus.shooting import (
    SQRT2,
    A_TOP_CENTER,
    BracketError,
    InadmissibleShotError,
    TorusCertificate,
    angle_mismatch,
    closed_profile_samples,
    crossing_map,
    integrate_shot,
    invert_crossing,
    write_profile_csv,
    write_profile_svg,
)


def test_degenerate_cylinder_shot():
    shot = integrate_shot(SQRT2)
    assert shot.t_cross == 0.0
    assert shot.crossing == (0.0, SQRT2)


def test_crossing_map_degenerate_endpoint():
    assert crossing_map(SQRT2) == 0.0


def test_crossing_map_at_lower_center():
    # shot from 7/16 crosses the cylinder line inside (0, sqrt(2))
    val = crossing_map(7.0 / 16.0)
    assert 0.0 < val < SQRT2
    assert val == pytest.approx(0.8357138, abs=2e-6)


def test_crossing_map_strictly_increasing_on_grid():
    grid = np.linspace(0.05, SQRT2 - 1e-3, 50)
    vals = [crossing_map(d) for d in grid]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_invert_crossing_degenerate_target():
    assert invert_crossing(0.0) == SQRT2


def test_invert_crossing_round_trip():
    d = 0.7
    back = invert_crossing(crossing_map(d), image_tol=1e-10)
    assert back == pytest.approx(d, abs=1e-9)


def test_invert_crossing_out_of_range():
    with pytest.raises(BracketError):
        invert_crossing(1.8)


def test_inadmissible_when_no_crossing_before_cap():
    with pytest.raises(InadmissibleShotError):
        integrate_shot(A_TOP_CENTER, max_param=0.5)
    with pytest.raises(InadmissibleShotError):
        integrate_shot(-1.0)


def test_far_shot_behavior():
    # a start far above the bracket still reaches the cylinder line,
    # just after a long excursion
    shot = integrate_shot(10.0, max_param=10.0)
    assert 0.0 < shot.crossing[0] < SQRT2
    with pytest.raises(InadmissibleShotError):
        integrate_shot(10.0, max_param=5.0)


def test_angle_mismatch_signs_around_center():
    assert angle_mismatch(A_TOP_CENTER + 2.5e-3) > 0.0
    assert angle_mismatch(A_TOP_CENTER - 2.5e-3) < 0.0


def test_angle_mismatch_parallel_tangents_vanish():
    ta = np.array([0.6, 0.8])
    assert ta[0] * ta[1] - ta[1] * ta[0] == 0.0  # cross of parallel vectors
    # realized at the located torus: the mismatch is zero within tolerance
    p = angle_mismatch(A_TOP_CENTER, invert_tol=1e-12)
    assert abs(p) < 1e-6


def test_certificate_bracket_and_location(certificate):
    c = certificate
    assert c.phi_lo < 0.0 < c.phi_hi
    assert c.a_lo < c.a0 < c.a_hi
    assert c.a_hi - c.a_lo <= 1e-8
    assert c.b_lo < c.b0 < c.b_hi
    # frozen locations from the high-order integration oracle
    assert c.a0 == pytest.approx(3.3147082664, abs=5e-8)
    assert c.b0 == pytest.approx(0.4371239672, abs=5e-8)
    assert c.x1_junction == pytest.approx(0.8352742573, abs=5e-7)


def test_certificate_target_intervals(certificate):
    c = certificate
    assert abs(c.a0 - 4034.0 / 1217.0) < 2.5e-3
    assert abs(c.b0 - 7.0 / 16.0) < 3.0 / 98.0
    dist = math.hypot(c.sphere_x - 29.0 / 32.0, c.sphere_y - 41.0 / 23.0)
    assert dist <= 5e-3
    assert abs(c.angle - 1.1) <= 5e-3
    assert c.all_pass


def test_sphere_crossing_on_circle(certificate):
    r2 = certificate.sphere_x ** 2 + certificate.sphere_y ** 2
    assert r2 == pytest.approx(4.0, abs=1e-9)


def test_matching_invariant_at_located_torus(certificate):
    # position and tangent of the two shots agree at the common crossing
    top = integrate_shot(certificate.a0, rtol=1e-12, atol=1e-13)
    bottom = integrate_shot(certificate.b0, rtol=1e-12, atol=1e-13)
    assert top.crossing[0] == pytest.approx(bottom.crossing[0], abs=1e-8)
    cross = (bottom.tangent_at_crossing[0] * top.tangent_at_crossing[1]
             - bottom.tangent_at_crossing[1] * top.tangent_at_crossing[0])
    assert abs(cross) < 1e-7
    # opposite traversal directions: tangents are anti-parallel
    assert float(np.dot(top.tangent_at_crossing,
                        bottom.tangent_at_crossing)) == pytest.approx(-1.0,
                                                                      abs=1e-7)


def test_doubled_profile_c1_closure(profile):
    rows = closed_profile_samples(profile, n=1500)
    # closed loop: last point returns to the first
    assert rows[-1, 1] == pytest.approx(rows[0, 1], abs=1e-9)
    assert rows[-1, 2] == pytest.approx(rows[0, 2], abs=1e-9)
    # C1 at the two axis seams: chord directions vary continuously
    pts = rows[:, 1:3]
    chords = np.diff(pts, axis=0)
    norms = np.linalg.norm(chords, axis=1)
    units = chords / norms[:, None]
    turn = np.abs(np.cross(units[:-1], units[1:]))
    assert turn.max() < 5e-3      # bounded turning everywhere
    half = len(rows) // 2
    assert turn[half - 2:half + 2].max() < 5e-3   # bottom axis seam


def test_junction_tangent_continuity(profile):
    before = profile.state(profile.sigma_junction - 1e-9)
    after = profile.state(profile.sigma_junction + 1e-9)
    assert np.allclose(before, after, atol=1e-6)


def test_find_torus_rejects_bracket_without_sign_change():
    with pytest.raises(BracketError):
        shooting.find_torus(2.995, 3.005)


def test_certificate_json_round_trip(tmp_path, certificate):
    path = tmp_path / "cert.json"
    certificate.write_json(path)
    loaded = TorusCertificate.read_json(path)
    assert loaded.to_dict() == certificate.to_dict()
    bad = certificate.to_dict()
    bad["schema_version"] = 999
    with pytest.raises(ValueError):
        TorusCertificate.from_dict(bad)


def test_segment_residuals_certified(certificate):
    recs = certificate.segment_residuals
    assert {(r["piece"], r["chart"]) for r in recs} == {
        ("top", "GraphX1"), ("top", "GraphX2"),
        ("bottom", "GraphX1"), ("bottom", "GraphX2")}
    assert all(0.0 <= r["epsilon"] < 1e-4 for r in recs)


def test_profile_csv(tmp_path, profile):
    path = tmp_path / "profile.csv"
    write_profile_csv(path, profile, n=200)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x1,x2,dx1,dx2"
    assert len(lines) == 2 * 200    # header + doubled curve rows
    first = [float(v) for v in lines[1].split(",")]
    assert first[1] == pytest.approx(0.0, abs=1e-12)
    assert first[2] == pytest.approx(profile.a0)


def test_profile_svg(tmp_path, profile):
    path = tmp_path / "profile.svg"
    write_profile_svg(path, profile, n=300)
    text = path.read_text()
    assert text.startswith("<svg")
    assert text.count("<path") == 2      # sphere profile and torus profile
