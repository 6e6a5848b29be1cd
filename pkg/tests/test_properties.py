"""Invariants as hypothesis properties."""

import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.integrate import quad

from belab.abp import BallDomain, lemma1_values, normalize_f, solve_neumann_radial, sobolev_terms
from belab.comparison import first_increase, jacobi_propagate, trace_split
from belab.curvature import bakry_emery_eigs
from belab.geometry import (RotSymSpace, SlicePoint, distance, weighted_ball_volume,
                            weighted_sphere_area)
from belab.profiles import capped_power, const, euclidean, gaussian_bump, hyperbolic_like, power_density
from belab.report import clean, dumps
from belab.scenario import build_scenario, parse_text

FLAT = RotSymSpace(2, 1.0, euclidean(), const(1.0), 50.0)
HYP = RotSymSpace(2, 1.0, hyperbolic_like(), const(1.0), 10.0)
CAPPED = RotSymSpace(2, 1.0, capped_power(0.5), const(1.0), 20.0)

points = st.builds(SlicePoint, st.floats(-3.0, 3.0), st.floats(0.0, 2 * math.pi))
ms = st.integers(2, 4)
alphas = st.floats(0.25, 4.0)


@pytest.mark.parametrize("space", [FLAT, HYP], ids=["flat", "hyperbolic"])
@given(p=points, q=points, z=points)
def test_distance_metric_axioms(space, p, q, z):
    dpq, dqp = distance(space, p, q), distance(space, q, p)
    assert dpq == pytest.approx(dqp, abs=1e-12)
    assert dpq >= 0
    assert distance(space, p, z) <= dpq + distance(space, q, z) + 1e-9


@given(p=points, q=points)
def test_shooting_symmetric_on_capped(p, q):
    assert distance(CAPPED, p, q, method="shoot") == pytest.approx(
        distance(CAPPED, q, p, method="shoot"), abs=1e-8)


@given(c=st.floats(1e-3, 1e3), r=st.floats(0.01, 8.0), q=st.floats(0.0, 3.0))
def test_eigs_invariant_under_density_scaling(c, r, q):
    a = RotSymSpace(3, 2.0, capped_power(0.5), power_density(q), 10.0)
    b = RotSymSpace(3, 2.0, capped_power(0.5), power_density(q).scaled(c), 10.0)
    for x, y in zip(bakry_emery_eigs(a, r), bakry_emery_eigs(b, r)):
        assert x == pytest.approx(y, rel=1e-10, abs=1e-12)


@given(a=st.floats(-50, 50), b=st.floats(-50, 50), n=st.integers(1, 6), alpha=alphas)
def test_trace_split_identity(a, b, n, alpha):
    main, rem = trace_split(a, b, n, alpha)
    total = -a * a / n - b * b / alpha
    assert main + rem == pytest.approx(total, rel=1e-10, abs=1e-9)
    assert rem <= 0 and main <= 0


@given(m=ms, alpha=alphas, R=st.floats(0.3, 5.0), amp=st.floats(0.0, 3.0), width=st.floats(0.2, 2.0))
def test_normalize_fixed_point(m, alpha, R, amp, width):
    space = RotSymSpace(m, alpha, euclidean(), const(1.0), 20.0)
    K = BallDomain(R)
    lam, f = normalize_f(space, K, gaussian_bump(1.0, amp, width))
    L, I = sobolev_terms(space, K, f)
    assert L == pytest.approx(space.dim * I, rel=1e-9)
    lam2, _ = normalize_f(space, K, f)
    assert lam2 == pytest.approx(1.0, rel=1e-9)


@given(m=ms, alpha=alphas, R=st.floats(0.2, 8.0))
def test_flat_neumann_is_quadratic(m, alpha, R):
    space = RotSymSpace(m, alpha, euclidean(), const(1.0), 20.0)
    K = BallDomain(R)
    _, f = normalize_f(space, K, const(1.0))
    sol = solve_neumann_radial(space, K, f, n_grid=201)
    s = np.linspace(-R, R, 17)
    assert np.allclose(sol.value(s), s**2 / (2 * R), atol=1e-10 * max(1, R))
    assert np.allclose(sol.d1(s), s / R, atol=1e-10)


@given(amp=st.floats(0.0, 2.0), width=st.floats(0.2, 1.0), R=st.floats(0.5, 2.0))
def test_lemma1_holds_for_bumps(amp, width, R):
    space = RotSymSpace(3, 2.0, capped_power(0.5), power_density(1.0), 50.0)
    K = BallDomain(R)
    _, f = normalize_f(space, K, gaussian_bump(1.0, amp, width))
    sol = solve_neumann_radial(space, K, f, n_grid=401)
    vals = lemma1_values(space, sol, sol.grid)
    in_u = np.array([sol.in_U(x) for x in sol.grid])
    assert np.all(vals[in_u] <= 1e-8)


@given(t=st.floats(0.05, 6.0), alpha=alphas)
def test_coarea(t, alpha):
    space = RotSymSpace(2, alpha, hyperbolic_like(), power_density(1.0), 10.0)
    area_integral, _ = quad(lambda x: weighted_sphere_area(space, x), 0.0, t, epsabs=0, epsrel=1e-11)
    assert weighted_ball_volume(space, t) == pytest.approx(area_integral, rel=1e-8)


@given(values=st.lists(st.floats(0.1, 10.0), min_size=3, max_size=40), at=st.integers(1, 39),
       bump=st.floats(1e-3, 1.0))
def test_first_increase_detects_injection(values, at, bump):
    v = np.sort(np.asarray(values))[::-1].copy()
    t = np.arange(len(v), dtype=float)
    assert first_increase(t, v)[0] is None
    at = min(at, len(v) - 1)
    v[at] = v[at - 1] * (1 + bump)
    hit, count = first_increase(t, v)
    assert hit is not None and hit.index == at and count >= 1


@given(s0=st.floats(0.1, 2.0), a=st.floats(0.0, 2.0), b=st.floats(0.0, 2.0), T=st.floats(0.1, 2.0))
def test_flat_jacobi_closed_form(s0, a, b, T):
    path = jacobi_propagate(FLAT, s0, 1.0, (a, b), T, step=0.01)
    expect = np.diag([1 + a * T, 1 + b * T])
    assert np.allclose(path.P[-1], expect, atol=1e-12)
    assert path.det[-1] == pytest.approx((1 + a * T) * (1 + b * T), rel=1e-12)


@given(pad=st.text(alphabet=" \t", max_size=3), comment=st.text(alphabet="abc #=", max_size=10),
       blank=st.integers(0, 3), order=st.permutations(range(6)))
def test_parser_ignores_layout(pad, comment, blank, order):
    lines = ["space.m = 3", "space.alpha = 0.5", "domain.R = 2", "seed = 4",
             "space.warp = capped_power", "space.warp.beta = 0.25"]
    messy = []
    for i in order:
        k, v = lines[i].split(" = ")
        messy.append(f"{pad}{k}{pad}={pad}{v}{pad}  # {comment}")
        messy.extend([pad] * blank)
    messy.insert(0, "#" + comment)
    a = build_scenario(parse_text("\n".join(lines)))
    b = build_scenario(parse_text("\n".join(messy)))
    assert a.canonical == b.canonical


json_leaves = st.one_of(st.floats(allow_nan=True, allow_infinity=True), st.integers(), st.booleans(),
                        st.none(), st.text(max_size=5))
json_trees = st.recursive(json_leaves, lambda kids: st.one_of(st.lists(kids, max_size=4),
                                                              st.dictionaries(st.text(max_size=4), kids, max_size=4)),
                          max_leaves=20)


@given(obj=json_trees)
def test_clean_never_emits_nan(obj):
    text = dumps(obj)
    assert "NaN" not in text and "Infinity" not in text
    assert dumps(clean(obj)) == text
