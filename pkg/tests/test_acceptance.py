"""Acceptance criteria 1-10, one PASS/FAIL line each at the stated tolerances."""

import json
import math
import time

import numpy as np
import pytest

import conftest
from belab.abp import (BallDomain, SampleSpec, inclusion_audit, isoperimetric_check, lemma1_values,
                       normalize_f, solve_neumann_radial, sobolev_audit)
from belab.cli import main
from belab.comparison import (bishop_gromov, jacobi_propagate, mean_curvature_comparison,
                              riccati_check, volume_expansion_series)
from belab.curvature import bakry_emery_eigs, cd_scan
from belab.geometry import (RotSymSpace, SlicePoint, distance, hessian_radial, integrate_geodesic,
                            sphere_area_constant)
from belab.profiles import const, euclidean, gaussian_density, hyperbolic_like, power_density
from conftest import PRESET_SPACES, flat

ROOT = conftest.__file__.rsplit("/", 2)[0]


def record(n, title, ok, detail):
    line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    conftest.SESSION["acceptance"].append(line)
    print(line)
    assert ok, line


def test_c01_flat_equality_benchmark():
    t0 = time.perf_counter()
    lam_err = u_err = l1_err = 0.0
    for m in (2, 3, 4):
        for alpha in (0.5, 1.0, 2.0):
            for R in (0.5, 1.0, 3.0):
                space = flat(m, alpha)
                K = BallDomain(R)
                lam, f = normalize_f(space, K, const(1.0))
                exact = (m / ((m + alpha) * R)) ** (m + alpha - 1)
                lam_err = max(lam_err, abs(lam - exact) / exact)
                sol = solve_neumann_radial(space, K, f)
                s = np.linspace(0.0, R, 257)
                u_err = max(u_err, float(np.max(np.abs(sol.value(s) - s**2 / (2 * R)))))
                l1_err = max(l1_err, float(np.max(np.abs(lemma1_values(space, sol, sol.grid)))))
    elapsed = time.perf_counter() - t0
    ok = lam_err <= 1e-12 and u_err <= 1e-8 and l1_err <= 1e-8 and elapsed < 5
    record(1, "flat equality benchmark", ok,
           f"lambda rel err {lam_err:.1e}, u sup err {u_err:.1e}, lemma1 |gap| {l1_err:.1e}, {elapsed:.2f}s")


def test_c02_volume_expansion_flat():
    space = flat()
    K = BallDomain(1.0)
    _, f = normalize_f(space, K, const(1.0))
    sol = solve_neumann_radial(space, K, f)
    sbar = 0.5
    path = jacobi_propagate(space, sbar, sol.d1(sbar), hessian_radial(space, sol, sbar), 2.0)
    series = volume_expansion_series(space, path, f(sbar))
    t = path.t
    closed = (1 + 2 * t / 3) ** -3 * (1 + t) ** 2
    picks = [int(np.argmin(np.abs(t - x))) for x in (0.0, 1.0, 2.0)]
    err = float(np.max(np.abs(series.normalized[picks] - closed[picks])))
    slack = float(np.max(np.diff(series.normalized)))
    ok = err <= 1e-8 and slack <= 1e-9 and series.monotone_violation is None
    vals = ", ".join(f"{v:.4f}" for v in series.normalized[picks])
    record(2, "volume expansion (flat)", ok,
           f"values at t=0,1,2: {vals}; max err {err:.1e}; max step increase {slack:.1e}")


def _riccati_pair(space, R=1.0, base=0.5, T=1.0):
    K = BallDomain(min(R, 0.8 * space.r_max))
    _, f = normalize_f(space, K, const(1.0))
    sol = solve_neumann_radial(space, K, f)
    D2u, speed = hessian_radial(space, sol, base), sol.d1(base)
    return [riccati_check(jacobi_propagate(space, base, speed, D2u, T, h)) for h in (1e-3, 5e-4)]


def test_c03_riccati_consistency():
    floor = 1e-12
    worst, weakest, bad = 0.0, math.inf, []
    for name, make in PRESET_SPACES.items():
        coarse, fine = _riccati_pair(make())
        for a, b in ((coarse.residual, fine.residual), (coarse.trace_residual, fine.trace_residual)):
            worst = max(worst, a)
            if a > floor:
                ratio = a / max(b, 1e-300)
                weakest = min(weakest, ratio)
                if ratio < 3:
                    bad.append(name)
            if a > 1e-6:
                bad.append(name)
    ok = not bad
    record(3, "Riccati/Jacobi consistency", ok,
           f"{len(PRESET_SPACES)} presets, max residual {worst:.1e}, weakest halving ratio "
           f"{weakest:.2f} (residuals under {floor:g} exempt){'; failing ' + ','.join(bad) if bad else ''}")


def test_c04_geodesic_integrity():
    drift = 0.0
    for name, make in PRESET_SPACES.items():
        space = make()
        s0 = min(1.0, 0.3 * space.r_max)
        for vel in ((0.3, 0.5), (-0.2, 1.0), (0.0, 0.8)):
            T = min(2.0, 0.3 * space.r_max)
            path = integrate_geodesic(space, SlicePoint(s0, 0.0), vel, T)
            drift = max(drift, *path.drift_per_time())
    space = flat(r_max=50.0)
    p = SlicePoint(1.3, 0.0)
    cos_err = 0.0
    for s in np.linspace(0.05, 5.0, 20):
        for th in np.linspace(0.0, math.pi, 20):
            q = SlicePoint(float(s), float(th))
            exact = math.sqrt(1.3**2 + s**2 - 2 * 1.3 * s * math.cos(th))
            cos_err = max(cos_err, abs(distance(space, p, q, method="shoot") - exact))
    rng = np.random.default_rng(2024)
    capped = PRESET_SPACES["capped2"]()
    sym = 0.0
    for _ in range(100):
        a = SlicePoint(float(rng.uniform(-4, 4)), float(rng.uniform(0, 2 * math.pi)))
        b = SlicePoint(float(rng.uniform(-4, 4)), float(rng.uniform(0, 2 * math.pi)))
        sym = max(sym, abs(distance(capped, a, b) - distance(capped, b, a)))
    ok = drift <= 1e-8 and cos_err <= 1e-6 and sym <= 1e-6
    record(4, "geodesic integrity", ok,
           f"drift per unit time {drift:.1e}, law of cosines err {cos_err:.1e} (20x20), "
           f"symmetry err {sym:.1e} (100 pairs)")


def test_c05_bishop_gromov():
    t0 = time.perf_counter()
    space = flat()
    radii = np.geomspace(0.01, 100.0, 200)
    ball = bishop_gromov(space, radii)
    ball_err = float(np.max(np.abs(ball.normalized - math.pi / radii) * radii / math.pi))
    t_grid = np.geomspace(0.01, 50.0, 800)
    mc_excess = -math.inf
    for sp in (space, RotSymSpace(2, 1.0, euclidean(), power_density(1.0), 100.0)):
        mc = mean_curvature_comparison(sp, t_grid)
        mc_excess = max(mc_excess, float(np.max(mc.normalized - (sp.m - 1 + sp.alpha))))
    hyp = bishop_gromov(RotSymSpace(2, 1.0, hyperbolic_like(), const(1.0), 20.0), np.linspace(0.5, 10, 40))
    elapsed = time.perf_counter() - t0
    ok = (ball_err <= 1e-6 and ball.monotone_violation is None and mc_excess <= 1e-9
          and hyp.monotone_violation is not None and elapsed < 30)
    where = f"r={hyp.monotone_violation.t:.3g}" if hyp.monotone_violation else "none"
    record(5, "Bishop-Gromov", ok,
           f"ball rel err vs pi/r {ball_err:.1e}, mean-curvature max excess {mc_excess:.1e}, "
           f"hyperbolic violation at {where}, {elapsed:.2f}s")


def test_c06_cd_scan_gaussian():
    space = RotSymSpace(2, 1.0, euclidean(), gaussian_density(), 8.0)
    r = np.linspace(0.01, 8.0, 400)
    radial, _ = bakry_emery_eigs(space, r)
    eig_err = float(np.max(np.abs(radial - (1 - r**2))))
    rep = cd_scan(space)
    cross = [c for c in rep.zero_crossings if abs(c - 1.0) <= 1e-4]
    ok = eig_err <= 1e-8 and bool(cross) and rep.verdict == "violated"
    record(6, "CD scan (gaussian density)", ok,
           f"radial eigenvalue err {eig_err:.1e}, crossings {[round(c, 8) for c in rep.zero_crossings]}, "
           f"verdict {rep.verdict}")


def test_c07_avr_flat():
    from belab.comparison import avr_estimate
    est = avr_estimate(flat(alpha=1.0, r_max=1e3))
    ok = est.estimate <= 1e-3 and est.covers_zero
    record(7, "AVR estimator (flat)", ok,
           f"estimate {est.estimate:.2e} +- {est.extrapolation_error:.2e}, covers zero {est.covers_zero}")


def test_c08_inclusion():
    t0 = time.perf_counter()
    space = flat()
    K = BallDomain(1.0)
    _, f = normalize_f(space, K, const(1.0))
    sol = solve_neumann_radial(space, K, f)
    cover = {}
    for r in (5.0, 10.0, 50.0):
        rep = inclusion_audit(space, sol, r, targets=64, sample_spec=SampleSpec(64, 32))
        cover[r] = (rep.coverage, len(rep.targets))
    elapsed = time.perf_counter() - t0
    ok = all(c == 1.0 and n == 64 for c, n in cover.values()) and elapsed < 60
    record(8, "inclusion lemma (flat)", ok,
           ", ".join(f"r={r:g}: {c:.3f} of {n}" for r, (c, n) in cover.items()) + f", {elapsed:.2f}s")


def test_c09_sobolev_isoperimetric_flat():
    lhs_err, labels, limits = 0.0, set(), []
    for m, alpha, R in ((2, 1.0, 1.0), (3, 0.5, 1.0), (2, 2.0, 2.0)):
        space = flat(m, alpha)
        exact = sphere_area_constant(m) * R ** (m - 1)
        rep = sobolev_audit(space, BallDomain(R), const(1.0), r_list=(10.0,), r_limit=1e3,
                            with_contact_set=False)
        iso = isoperimetric_check(space, BallDomain(R))
        lhs_err = max(lhs_err, abs(rep["lhs"] - exact) / exact, abs(iso["lhs"] - exact) / exact)
        labels |= {rep["rhs_label"], iso["rhs_label"]}
        lim = rep["limit"]
        limits.append(lim["ok"] and lim["r_limit"] == 1e3 and lim["divided_far_volume"] <= lim["U_integral"])
    ok = lhs_err <= 1e-8 and labels == {"trivial RHS"} and all(limits)
    record(9, "Sobolev/isoperimetric audits (flat)", ok,
           f"LHS rel err {lhs_err:.1e}, labels {sorted(labels)}, limit chain at r=1e3 ok {all(limits)}")


def test_c10_runtime_and_determinism(tmp_path):
    scen = f"{ROOT}/scenarios/flat.scn"
    outs = [tmp_path / "a", tmp_path / "b"]
    codes = [main(["run", scen, "--out", str(o), "--seed", "5"]) for o in outs]
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file() and p.name != "meta.json")
    same = bool(files) and all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files)
    seed = json.loads((outs[0] / "report.json").read_text())["seed"]
    elapsed = time.perf_counter() - conftest.SESSION["start"]
    ok = same and codes == [0, 0] and seed == 5 and elapsed < 300
    record(10, "runtime and determinism", ok,
           f"suite so far {elapsed:.1f}s, {len(files)} output files byte-identical {same}")
