import math

import numpy as np
import pytest

from belab.errors import DomainError, GeodesicTruncated
from belab.geometry import (RotSymSpace, SlicePoint, distance, distances_to, hessian_radial,
                            integrate_geodesic, laplacian_radial, ricci_radial_tangential,
                            richardson_endpoint_error, sectional_curvatures, shooting_direction,
                            sphere_area_constant, weighted_ball_volume, weighted_ball_volumes,
                            weighted_sphere_area)
from belab.profiles import (RadialProfile, capped_power, const, euclidean, hyperbolic_like,
                            sphere_taylor)
from conftest import PRESET_SPACES, flat


def test_sphere_area_constant():
    assert sphere_area_constant(2) == pytest.approx(2 * math.pi)
    assert sphere_area_constant(3) == pytest.approx(4 * math.pi)
    assert sphere_area_constant(4) == pytest.approx(2 * math.pi**2)


def test_space_validation():
    with pytest.raises(DomainError):
        RotSymSpace(1, 1.0, euclidean(), const(), 10)
    with pytest.raises(DomainError):
        RotSymSpace(2, 0.0, euclidean(), const(), 10)
    with pytest.raises(DomainError):
        RotSymSpace(2, 1.0, RadialProfile("polynomial", (0.0, 2.0)), const(), 10)
    with pytest.raises(DomainError):
        RotSymSpace(2, 1.0, euclidean(), RadialProfile("polynomial", (1.0, 1.0)), 10)
    with pytest.raises(DomainError):
        RotSymSpace(2, 1.0, sphere_taylor(), const(), 3.0)  # warp vanishes at sqrt(6)


def test_sectional_curvatures_examples():
    assert sectional_curvatures(flat(), 1.3) == pytest.approx((0.0, 0.0), abs=1e-15)
    hyp = RotSymSpace(2, 1.0, hyperbolic_like(), const(), 10)
    assert sectional_curvatures(hyp, 1.0) == pytest.approx((-1.0, -1.0), rel=1e-12)
    sph = RotSymSpace(2, 1.0, sphere_taylor(), const(), 1.2)
    k = sectional_curvatures(sph, 1e-4)
    assert k == pytest.approx((1.0, 1.0), rel=1e-6)
    with pytest.raises(DomainError):
        sectional_curvatures(flat(r_max=5), 6.0)
    with pytest.raises(DomainError):
        sectional_curvatures(flat(), 0.0)


def test_k_tan_stable_near_pole():
    hyp = RotSymSpace(3, 1.0, hyperbolic_like(), const(), 10)
    for r in (1e-8, 1e-5, 1e-3, 0.3):
        assert sectional_curvatures(hyp, r)[1] == pytest.approx(-1.0, rel=1e-9)


def test_ricci_examples():
    assert ricci_radial_tangential(flat(3), 1.0) == pytest.approx((0.0, 0.0), abs=1e-15)
    hyp = RotSymSpace(2, 1.0, hyperbolic_like(), const(), 10)
    assert ricci_radial_tangential(hyp, 1.0) == pytest.approx((-1.0, -1.0), rel=1e-12)
    cp = RotSymSpace(2, 1.0, capped_power(0.5), const(), 10)
    rr, tt = ricci_radial_tangential(cp, 0.8)
    expected = -cp.warp.d2(0.8) / cp.warp(0.8)
    assert rr == pytest.approx(expected) and tt == pytest.approx(expected)


def test_radial_ray_geodesic():
    path = integrate_geodesic(flat(), SlicePoint(1.0, 0.0), (1.0, 0.0), 2.0)
    assert path.endpoint.s == pytest.approx(3.0, abs=1e-12)
    assert path.endpoint.theta == pytest.approx(0.0, abs=1e-15)


def test_flat_tangent_geodesic_clairaut():
    path = integrate_geodesic(flat(), SlicePoint(1.0, 0.0), (0.0, 1.0), 0.5)
    assert path.clairaut[0] == pytest.approx(1.0)
    assert np.max(np.abs(path.clairaut - 1.0)) < 1e-12
    # straight line x = 1: s(t) = sqrt(1 + t^2)
    assert path.s[-1] == pytest.approx(math.sqrt(1.25), abs=1e-12)


def test_hyperbolic_energy_drift():
    hyp = RotSymSpace(2, 1.0, hyperbolic_like(), const(), 20)
    rng = np.random.default_rng(3)
    s0 = rng.uniform(0.5, 2.0)
    ang = rng.uniform(0, 2 * math.pi)
    vel = (math.cos(ang), math.sin(ang) / math.sinh(s0))
    path = integrate_geodesic(hyp, SlicePoint(s0, 0.3), vel, 5.0, 1e-3)
    e_drift, c_drift = path.drift_per_time()
    assert e_drift * 5 <= 1e-8 and c_drift * 5 <= 1e-8


def test_geodesic_through_pole_and_truncation():
    path = integrate_geodesic(flat(r_max=5), SlicePoint(1.0, 0.0), (-1.0, 0.0), 3.0)
    assert path.endpoint.s == pytest.approx(-2.0, abs=1e-12)
    assert path.endpoint.canonical() == pytest.approx((2.0, math.pi))
    with pytest.raises(GeodesicTruncated) as info:
        integrate_geodesic(flat(r_max=5), SlicePoint(1.0, 0.0), (1.0, 0.0), 10.0)
    assert info.value.path is not None and info.value.path.s[-1] > 5


def test_richardson_estimate_small():
    hyp = RotSymSpace(2, 1.0, hyperbolic_like(), const(), 20)
    assert richardson_endpoint_error(hyp, SlicePoint(1.0, 0.0), (0.6, 0.8 / math.sinh(1)), 2.0) < 1e-10


def test_distance_examples():
    sp = flat()
    assert distance(sp, SlicePoint(1, 0), SlicePoint(1, math.pi / 2), method="shoot") == pytest.approx(math.sqrt(2), abs=1e-9)
    assert distance(sp, SlicePoint(1, 0), SlicePoint(1, math.pi / 2)) == pytest.approx(math.sqrt(2), abs=1e-14)
    cp = RotSymSpace(2, 1.0, capped_power(0.5), const(), 50)
    p = SlicePoint(1.3, 0.4)
    assert distance(cp, p, p) == 0.0
    assert distance(cp, SlicePoint(0.5, 0.2), SlicePoint(2.5, 0.2)) == pytest.approx(2.0, abs=1e-9)
    assert distance(cp, SlicePoint(0.0, 0.0), SlicePoint(2.5, 1.0)) == pytest.approx(2.5, abs=1e-9)


def test_distance_shoot_matches_hyperbolic_law():
    hyp = RotSymSpace(2, 1.0, hyperbolic_like(), const(), 20)
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = SlicePoint(rng.uniform(0.1, 3), rng.uniform(0, 2 * math.pi))
        q = SlicePoint(rng.uniform(0.1, 3), rng.uniform(0, 2 * math.pi))
        assert distance(hyp, p, q, "shoot") == pytest.approx(distance(hyp, p, q, "closed"), abs=1e-9)


@pytest.mark.parametrize("a,b,delta", [
    (1.0, 1.0, 1e-7),                 # nearly tangential geodesic
    (1e-3, 1e-3, math.pi - 2.7e-6),   # passes within 1e-9 of the pole
    (1e-174, 1e-174, 1.0),            # both points at the pole to rounding
    (5e-5, 2.0, 2.0),                 # one point next to the pole
    (8.0, 8.0 + 1e-9, 1e-9),          # close points far out
])
def test_distance_degenerate_pairs(a, b, delta):
    p, q = SlicePoint(a, 0.0), SlicePoint(b, delta)
    for space in (flat(r_max=20.0), RotSymSpace(2, 1.0, hyperbolic_like(), const(1.0), 20.0)):
        assert distance(space, p, q, method="shoot") == pytest.approx(
            distance(space, p, q, method="closed"), abs=1e-10)


def test_closed_forms_resolve_short_distances():
    hyp = RotSymSpace(2, 1.0, hyperbolic_like(), const(1.0), 20.0)
    d = distance(hyp, SlicePoint(1.0, 0.0), SlicePoint(1.0, 1e-9))
    assert d == pytest.approx(math.sinh(1.0) * 1e-9, rel=1e-9)


def test_distance_through_or_around_pole():
    cp = RotSymSpace(2, 1.0, capped_power(0.5), const(), 50)
    d = distance(cp, SlicePoint(2.0, 0.0), SlicePoint(2.0, math.pi))
    assert d <= 4.0 + 1e-12
    # negative s is the antipodal ray
    assert distance(cp, SlicePoint(-2.0, 0.0), SlicePoint(2.0, math.pi)) == pytest.approx(0.0, abs=1e-12)


def test_shooting_direction_integrates_to_target():
    cp = RotSymSpace(2, 1.0, capped_power(0.5), const(), 50)
    p, q = SlicePoint(0.8, 0.1), SlicePoint(2.2, 1.9)
    vel, length = shooting_direction(cp, p, q)
    path = integrate_geodesic(cp, p, vel, length, 1e-3)
    end = path.endpoint
    assert end.s == pytest.approx(q.s, abs=1e-8)
    assert math.remainder(end.theta - q.theta, 2 * math.pi) == pytest.approx(0.0, abs=1e-8)


def test_distances_to_vectorized_matches_scalar():
    sp = flat()
    p = SlicePoint(0.7, 0.0)
    s = np.array([0.1, -0.4, 2.0])
    th = np.array([0.3, 1.0, 3.0])
    vec = distances_to(sp, p, s, th)
    for k in range(3):
        assert vec[k] == pytest.approx(distance(sp, p, SlicePoint(s[k], th[k])), abs=1e-14)


def test_distance_errors():
    with pytest.raises(DomainError):
        distance(flat(r_max=2), SlicePoint(3, 0), SlicePoint(1, 0))
    with pytest.raises(DomainError):
        distance(flat(), SlicePoint(1, 0), SlicePoint(1, 1), method="bogus")
    cp = RotSymSpace(2, 1.0, capped_power(0.5), const(), 50)
    with pytest.raises(DomainError):
        distance(cp, SlicePoint(1, 0), SlicePoint(1, 1), method="closed")


class _Quad:
    """u = r^2/2 or u = r."""

    def __init__(self, kind):
        self.kind = kind

    def d1(self, r):
        return r if self.kind == "sq" else 1.0 + 0 * r

    def d2(self, r):
        return 1.0 + 0 * r if self.kind == "sq" else 0 * r


def test_hessian_examples():
    sp = flat()
    assert hessian_radial(sp, _Quad("sq"), 0.7) == pytest.approx((1.0, 1.0))
    assert hessian_radial(sp, _Quad("sq"), 0.0) == pytest.approx((1.0, 1.0))
    assert hessian_radial(sp, _Quad("lin"), 2.0) == pytest.approx((0.0, 0.5))
    assert hessian_radial(sp, const(3.0), 1.5) == pytest.approx((0.0, 0.0))
    assert laplacian_radial(flat(3), _Quad("sq"), 1.0) == pytest.approx(3.0)


def test_hessian_matches_finite_differences_along_geodesics():
    # u = cosh r style profile on the capped warp; tangential eigenvalue from a circle of radius r
    cp = RotSymSpace(2, 1.0, capped_power(0.5), const(), 50)
    u = RadialProfile("polynomial", (0.0, 0.0, 0.5, 0.1))
    r, h = 1.1, 1e-3
    radial, tangential = hessian_radial(cp, u, r)
    assert radial == pytest.approx((u(r + h) - 2 * u(r) + u(r - h)) / h**2, abs=1e-6)
    # along the unit-speed geodesic tangent to the sphere at (r, 0)
    errs = []
    for step in (h, h / 2):
        vel = (0.0, 1.0 / cp.warp(r))
        fwd = integrate_geodesic(cp, SlicePoint(r, 0.0), vel, step, step / 4).endpoint
        bwd = integrate_geodesic(cp, SlicePoint(r, 0.0), (0.0, -vel[1]), step, step / 4).endpoint
        fd = (u(abs(fwd.s)) - 2 * u(r) + u(abs(bwd.s))) / step**2
        errs.append(abs(fd - tangential))
    assert errs[0] < 1e-5
    assert errs[1] < errs[0] / 3 or errs[1] < 1e-9


def test_volume_examples():
    assert weighted_ball_volume(flat(3), 2.0) == pytest.approx(32 * math.pi / 3, rel=1e-12)
    assert weighted_sphere_area(flat(), 1.0) == pytest.approx(2 * math.pi, rel=1e-14)
    sp = RotSymSpace(2, 1.0, euclidean(), RadialProfile("polynomial", (1.0, 0.0, 1.0)), 10)
    assert weighted_ball_volume(sp, 1.0) == pytest.approx(1.5 * math.pi, rel=1e-12)
    vols = weighted_ball_volumes(flat(), [1.0, 2.0, 3.0])
    assert vols == pytest.approx([math.pi, 4 * math.pi, 9 * math.pi], rel=1e-12)
    with pytest.raises(DomainError):
        weighted_ball_volumes(flat(), [2.0, 1.0])


@pytest.mark.parametrize("name", sorted(PRESET_SPACES))
def test_coarea_consistency(name):
    from scipy import integrate

    sp = PRESET_SPACES[name]()
    R = min(1.0, sp.r_max)
    val, _ = integrate.quad(lambda t: weighted_sphere_area(sp, t) if t > 0 else 0.0, 0, R, epsabs=1e-13)
    assert weighted_ball_volume(sp, R) == pytest.approx(val, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("name", sorted(PRESET_SPACES))
def test_drift_on_presets(name):
    sp = PRESET_SPACES[name]()
    s0 = 0.3 * min(sp.r_max, 2.0)
    T = min(1.0, 0.4 * sp.r_max)
    vel = (0.6, 0.8 / sp.warp(s0))
    path = integrate_geodesic(sp, SlicePoint(s0, 0.0), vel, T)
    e_drift, c_drift = path.drift_per_time()
    assert e_drift <= 1e-8 and c_drift <= 1e-8
