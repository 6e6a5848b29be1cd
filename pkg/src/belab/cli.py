"""Command line: ``lab run``, ``lab explore`` and ``lab presets``.

Exit codes: 0 when every check passes (or the curvature hypothesis fails,
so nothing is required), 1 when an inequality or monotonicity statement
fails on a space whose curvature hypothesis is certified, 2 for
configuration or numerical errors.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import math
import platform
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .abp import (BallDomain, SampleSpec, inclusion_audit, isoperimetric_check, lemma1_values,
                  normalize_f, solve_neumann_radial, sobolev_audit, transport, U_points)
from .comparison import (avr_estimate, bishop_gromov, index_form_check, jacobi_propagate,
                         mean_curvature_comparison, riccati_check)
from .curvature import CERTIFIED, VIOLATED, GridSpec, cd_scan
from .errors import AuditFailure, DomainError, LabError
from .geometry import hessian_radial
from .profiles import PRESETS
from .report import write_csv, write_json, write_svg
from .scenario import Scenario, family_members, load_family, load_scenario

PASS, FAIL, HYP, ERROR = "pass", "fail", "hypothesis-violated", "error"
HYP_NOTE = "hypothesis violated, monotonicity not required"

EXIT_OK, EXIT_VIOLATION, EXIT_ERROR = 0, 1, 2

SHORT_CHART = 20.0


@dataclass
class Series:
    name: str
    rows: list
    curves: dict
    xlabel: str = "t"


@dataclass
class CheckResult:
    name: str
    status: str
    record: dict
    series: list = field(default_factory=list)

    def to_dict(self):
        out = {"check": self.name, "status": self.status,
               "series": [f"series/{s.name}.csv" for s in self.series]}
        out.update(self.record)
        return out


@dataclass
class RunContext:
    scenario: Scenario
    tol_scale: float
    seed: int
    _cache: dict = field(default_factory=dict)

    @property
    def space(self):
        return self.scenario.space

    def tol(self, name):
        return self.scenario.tol(name, self.tol_scale)

    def opt(self, key):
        return self.scenario.opt(key)

    def cd(self):
        if "cd" not in self._cache:
            o = self.opt
            self._cache["cd"] = cd_scan(self.space, GridSpec(o("cd.n"), o("cd.lo"), o("cd.hi")),
                                        self.tol("cd"))
        return self._cache["cd"]

    @property
    def holds(self) -> bool:
        return self.cd().hypothesis_holds

    def neumann(self):
        if "neumann" not in self._cache:
            K = BallDomain(self.scenario.R)
            lam, f = normalize_f(self.space, K, self.scenario.f0)
            sol = solve_neumann_radial(self.space, K, f, n_grid=self.opt("neumann.n"),
                                       tol=self.tol("neumann"))
            sol.lam = lam
            self._cache["neumann"] = sol
        return self._cache["neumann"]

    def sample_spec(self):
        return SampleSpec(self.opt("ar.n_s"), self.opt("ar.n_theta"))

    def gate(self, ok: bool) -> str:
        if ok:
            return PASS
        return FAIL if self.holds else HYP


def _series_from(name, cs, xlabel="t", label="normalized"):
    curves = {label: (cs.radii, cs.normalized)}
    if cs.bound is not None:
        curves = {"value": (cs.radii, cs.values), "bound": (cs.radii, cs.bound)}
    return Series(name, list(cs.csv_rows()), curves, xlabel)


def _downsample(n, limit=1001):
    return np.unique(np.linspace(0, n - 1, min(n, limit)).round().astype(int))


# --- checks --------------------------------------------------------------------------------


def check_cd(ctx: RunContext) -> CheckResult:
    rep = ctx.cd()
    status = PASS if rep.verdict != VIOLATED else HYP
    rows = [("r", "radial_eig", "tangential_eig", "min_eig")]
    rows += [(r, a, b, min(a, b)) for r, a, b in zip(rep.grid, rep.radial_eig, rep.tangential_eig)]
    g = np.asarray(rep.grid)
    s = Series("cd_scan", rows, {"radial": (g, rep.radial_eig), "tangential": (g, rep.tangential_eig)}, "r")
    rec = {"verdict": rep.verdict, "min_eig": rep.min_eig, "argmin_r": rep.argmin_r,
           "zero_crossings": rep.zero_crossings, "tolerance": rep.tolerance, "grid": rep.grid_spec}
    return CheckResult("cd-scan", status, rec, [s])


def check_bishop_gromov(ctx: RunContext) -> CheckResult:
    o, space = ctx.opt, ctx.space
    hi = o("bg.hi") or min(space.r_max, 50.0)
    lo = o("bg.lo") or hi * 1e-3
    radii = np.geomspace(lo, hi, o("bg.n"))
    tol = ctx.tol("mono")
    ball = bishop_gromov(space, radii, "ball", tol)
    sphere = bishop_gromov(space, radii, "sphere", tol)
    mc_hi = o("mc.hi") or min(space.r_max, 50.0)
    t = np.geomspace(o("mc.lo"), mc_hi, o("mc.n"))
    mc = mean_curvature_comparison(space, t, ctx.tol("mean_curvature"), strict=False)
    ok = ball.ok and sphere.ok and mc.ok and mc.extra["riccati_violation"] is None
    status = ctx.gate(ok)
    rec = {
        "tolerance": {"monotonicity": tol, "mean_curvature": ctx.tol("mean_curvature")},
        "grid": {"radii": [lo, hi, o("bg.n"), "geometric"], "t": [o("mc.lo"), mc_hi, o("mc.n"), "geometric"]},
        "ball_violation": ball.monotone_violation, "ball_n_violations": ball.n_violations,
        "sphere_violation": sphere.monotone_violation, "sphere_n_violations": sphere.n_violations,
        "mean_curvature_violation": mc.monotone_violation,
        "mean_curvature_max_normalized": float(np.max(mc.normalized)),
        "mean_curvature_bound": space.m - 1 + space.alpha,
        "riccati_violation": mc.extra["riccati_violation"],
        "hypothesis": ctx.cd().verdict,
    }
    if status == HYP:
        rec["note"] = HYP_NOTE
    series = [_series_from("bishop_gromov_ball", ball, "r"), _series_from("bishop_gromov_sphere", sphere, "r"),
              Series("mean_curvature", [("t", "t_times_lhs", "bound")] +
                     [(a, b, space.m - 1 + space.alpha) for a, b in zip(t, mc.normalized)],
                     {"t*lhs": (t, mc.normalized), "bound": (t, np.full_like(t, space.m - 1 + space.alpha))})]
    return CheckResult("bishop-gromov", status, rec, series)


def check_avr(ctx: RunContext) -> CheckResult:
    est = avr_estimate(ctx.space, K=ctx.opt("avr.K"))
    rec = {"estimate": est.estimate, "extrapolation_error": est.extrapolation_error,
           "upper_bound": est.upper_bound, "settled": est.settled, "order": est.order,
           "covers_zero": est.covers_zero, "grid": {"radii": list(est.radii)}, "tolerance": 1e-3}
    rows = [("r", "normalized_volume")] + list(zip(est.radii, est.values))
    s = Series("avr", rows, {"V/r^(m+alpha)": (np.log2(est.radii), est.values)}, "log2 r")
    return CheckResult("avr", PASS, rec, [s])


def check_neumann(ctx: RunContext) -> CheckResult:
    sol = ctx.neumann()
    res = sol.residual(ctx.opt("neumann.check_n"))
    tol = ctx.tol("neumann")
    ok = res <= tol and sol.boundary_error <= tol
    idx = _downsample(len(sol.grid))
    rows = [("s", "u", "uprime", "usecond")] + [
        (sol.grid[i], sol.u[i], sol.uprime[i], sol.usecond[i]) for i in idx]
    s = Series("neumann", rows, {"u": (sol.grid[idx], sol.u[idx]), "u'": (sol.grid[idx], sol.uprime[idx])}, "s")
    rec = {"lambda": sol.lam, "boundary_error": sol.boundary_error, "pde_residual": res,
           "U_set": sol.U_set, "tolerance": tol,
           "grid": {"solution_points": len(sol.grid), "residual_points": ctx.opt("neumann.check_n")}}
    # a numerical accuracy check, independent of curvature
    return CheckResult("neumann", PASS if ok else FAIL, rec, [s])


def check_lemma1(ctx: RunContext) -> CheckResult:
    sol = ctx.neumann()
    pts = U_points(sol)
    vals = lemma1_values(ctx.space, sol, pts)
    worst = float(np.max(vals)) if len(vals) else -math.inf
    tol = ctx.tol("lemma1")
    rows = [("s", "excess")] + list(zip(pts, vals))
    s = Series("lemma1", rows, {"excess": (pts, vals)}, "s")
    rec = {"max_excess": worst, "tolerance": tol, "grid": {"points_in_U": len(pts)}}
    return CheckResult("lemma1", PASS if worst <= tol else FAIL, rec, [s])


def check_transport(ctx: RunContext) -> CheckResult:
    sol, space = ctx.neumann(), ctx.space
    entries, series, bad, conjugate = [], [], False, False
    for base in ctx.opt("transport.base"):
        for r in ctx.opt("transport.r"):
            a = transport(space, sol, base, r, sample_spec=ctx.sample_spec(),
                          step=ctx.opt("transport.step"), strict=False)
            rec = a.to_dict()
            broken = bool(a.in_Ar) and (a.conjugate_t is not None or (
                ctx.holds and (not a.jacobian_bound_ok or a.monotonicity.monotone_violation is not None)))
            rec["violation"] = broken
            bad |= broken
            conjugate |= bool(a.in_Ar) and a.conjugate_t is not None
            entries.append(rec)
            if a.monotonicity is not None:
                series.append(_series_from(f"transport_s{base:g}_r{r:g}", a.monotonicity))
    # a conjugate point before r at a contact point contradicts the construction on any space
    status = FAIL if conjugate else ctx.gate(not bad)
    rec = {"audits": entries, "tolerance": {"monotonicity": 1e-9, "jacobian": 1e-9, "ar": ctx.tol("ar")},
           "grid": {"step": ctx.opt("transport.step"), "ar": ctx.sample_spec().as_dict()}}
    return CheckResult("transport", status, rec, series)


def check_riccati(ctx: RunContext) -> CheckResult:
    sol, space = ctx.neumann(), ctx.space
    base, T, step = ctx.opt("riccati.base"), ctx.opt("riccati.T"), ctx.opt("riccati.step")
    D2u = hessian_radial(space, sol, base)
    speed = sol.d1(base)
    path = jacobi_propagate(space, base, speed, D2u, T, step, on_conjugate="raise")
    fine = jacobi_propagate(space, base, speed, D2u, T, step / 2, on_conjugate="raise")
    c1, c2 = riccati_check(path), riccati_check(fine)
    tol = ctx.tol("riccati")
    floor = 1e-12
    ratio = [(a / b if b > floor else math.inf) for a, b in
             ((c1.residual, c2.residual), (c1.trace_residual, c2.trace_residual))]
    converging = all(r >= 3 for r, a in zip(ratio, (c1.residual, c1.trace_residual)) if a > floor)
    index_min, index_name = index_form_check(space, path, seed=ctx.seed)
    ok = c1.ok(tol) and converging
    rec = {"residual": c1.residual, "trace_residual": c1.trace_residual,
           "residual_half_step": c2.residual, "trace_residual_half_step": c2.trace_residual,
           "reduction": ratio, "symmetry_defect": c1.symmetry_defect,
           "index_form_min": index_min, "index_form_minimizer": index_name,
           "tolerance": tol, "grid": {"step": step, "T": T, "base": base, "speed": speed}}
    logdet = path.logdet
    s = Series("riccati_logdet", [("t", "logdetP", "traceQ")] +
               list(zip(path.t, logdet, np.trace(path.Q, axis1=1, axis2=2))),
               {"log det P": (path.t, logdet)})
    return CheckResult("riccati", PASS if ok else FAIL, rec, [s])


def check_inclusion(ctx: RunContext) -> CheckResult:
    sol = ctx.neumann()
    reports, series, ok = [], [], True
    for r in ctx.opt("inclusion.r"):
        rep = inclusion_audit(ctx.space, sol, r, ctx.opt("inclusion.targets"), ctx.sample_spec(),
                              tol=ctx.tol("ar"))
        ok &= rep.coverage >= 1.0
        reports.append(rep.to_dict())
        rows = [("rho", "preimage", "margin")] + [
            (t["rho"], t.get("preimage") if t.get("preimage") is not None else math.nan,
             t.get("margin", math.nan)) for t in rep.targets]
        if rep.targets:
            series.append(Series(f"inclusion_r{r:g}", rows,
                                 {"preimage": ([t["rho"] for t in rep.targets],
                                               [t.get("preimage") or 0.0 for t in rep.targets])}, "rho"))
    rec = {"audits": reports, "tolerance": ctx.tol("ar"), "grid": ctx.sample_spec().as_dict()}
    return CheckResult("inclusion", ctx.gate(ok), rec, series)


def _audit_status(ctx, rep):
    return {"pass": PASS, "fail": FAIL, "hypothesis-violated": HYP}[rep["verdict"]]


def _chain_series(name, rep):
    chain = rep["chain"]
    r = [c["r"] for c in chain]
    rows = [("r", "far_volume_divided", "contact_divided", "U_bound_divided")] + [
        (c["r"], c["divided"]["far_volume"], c["divided"].get("contact_integral", math.nan),
         c["divided"]["U_bound"]) for c in chain]
    return Series(name, rows, {"far set": (r, [c["divided"]["far_volume"] for c in chain]),
                               "U bound": (r, [c["divided"]["U_bound"] for c in chain])}, "r")


def _sobolev_kwargs(ctx):
    return dict(r_list=ctx.opt("sobolev.r"), r_limit=ctx.opt("sobolev.r_limit"),
                with_contact_set=ctx.opt("sobolev.contact"), tol=ctx.tol("chain"),
                cd_tol=ctx.tol("cd"), strict=False)


def check_sobolev(ctx: RunContext) -> CheckResult:
    rep = sobolev_audit(ctx.space, BallDomain(ctx.scenario.R), ctx.scenario.f0, **_sobolev_kwargs(ctx))
    return CheckResult("sobolev", _audit_status(ctx, rep), rep, [_chain_series("sobolev_chain", rep)])


def check_isoperimetric(ctx: RunContext) -> CheckResult:
    rep = isoperimetric_check(ctx.space, BallDomain(ctx.scenario.R), **_sobolev_kwargs(ctx))
    return CheckResult("isoperimetric", _audit_status(ctx, rep), rep,
                       [_chain_series("isoperimetric_chain", rep)])


def check_explore(ctx: RunContext) -> CheckResult:
    members = family_members(ctx.scenario.entries, ctx.scenario.source)
    table = explore(members, ctx.opt("explore.budget"), ctx.seed, ctx.tol("cd"))
    return CheckResult("explore", PASS, table)


CHECK_FUNCS = {
    "cd-scan": check_cd,
    "bishop-gromov": check_bishop_gromov,
    "avr": check_avr,
    "neumann": check_neumann,
    "lemma1": check_lemma1,
    "transport": check_transport,
    "riccati": check_riccati,
    "inclusion": check_inclusion,
    "sobolev": check_sobolev,
    "isoperimetric": check_isoperimetric,
    "explore": check_explore,
}


# --- explorer ------------------------------------------------------------------------------


def explore(members, budget: int, seed: int = 0, cd_tol: float = 1e-12) -> dict:
    """Evaluate up to ``budget`` family members (seeded order) and rank the certified ones.

    Rows whose curvature scan finds a negative eigenvalue are listed as
    excluded.  The table is sorted by (CD margin, AVR estimate), both
    descending; nothing is claimed beyond the rows themselves.
    """
    if budget < 1:
        raise LabError("budget must be at least 1")
    order = np.random.default_rng(seed).permutation(len(members))[:budget]
    rows, excluded = [], []
    for i in sorted(order.tolist()):
        member = members[i]
        row = {"label": member.label, "m": member.m, "alpha": member.alpha, "warp": member.warp,
               "warp_params": dict(member.warp_params), "density": member.density,
               "density_params": dict(member.density_params), "r_max": member.r_max}
        try:
            try:
                space = member.space()
            except DomainError:
                # density underflows on the full chart; a shorter chart can still refute the hypothesis
                short = replace(member, r_max=min(member.r_max, SHORT_CHART)).space()
                cd = cd_scan(short, tol=cd_tol)
                if cd.verdict != VIOLATED:
                    raise
                row.update(cd_margin=cd.min_eig, cd_verdict=cd.verdict, cd_argmin=cd.argmin_r,
                           cd_chart=short.r_max)
                excluded.append(row)
                continue
            cd = cd_scan(space, tol=cd_tol)
            row.update(cd_margin=cd.min_eig, cd_verdict=cd.verdict, cd_argmin=cd.argmin_r)
            if cd.verdict == VIOLATED:
                excluded.append(row)
                continue
            est = avr_estimate(space)
            row.update(avr=est.estimate, avr_error=est.extrapolation_error, avr_settled=est.settled,
                       avr_positive=bool(est.settled and not est.covers_zero))
        except LabError as exc:
            row.update(error=str(exc))
            excluded.append(row)
            continue
        rows.append(row)
    rows.sort(key=lambda r: (-r["cd_margin"], -r["avr"], r["label"]))
    return {"budget": budget, "evaluated": len(order), "seed": seed, "table": rows,
            "excluded": excluded, "cd_tolerance": cd_tol,
            "best_positive_avr": next((r["label"] for r in rows if r["avr_positive"]
                                       and r["cd_verdict"] == CERTIFIED), None)}


# --- driver --------------------------------------------------------------------------------


def execute(scenario: Scenario, tol_scale: float = 1.0, seed: int | None = None):
    """Run every requested check; returns ``(report, series, exit_code)``."""
    ctx = RunContext(scenario, tol_scale, scenario.seed if seed is None else seed)
    results = []
    for name in scenario.checks:
        try:
            results.append(CHECK_FUNCS[name](ctx))
        except AuditFailure as exc:
            results.append(CheckResult(name, FAIL, {"error": str(exc)}))
        except (LabError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            results.append(CheckResult(name, ERROR, {"error": f"{type(exc).__name__}: {exc}"}))
    statuses = [r.status for r in results]
    if FAIL in statuses:
        code, verdict = EXIT_VIOLATION, FAIL
    elif ERROR in statuses:
        code, verdict = EXIT_ERROR, ERROR
    else:
        code, verdict = EXIT_OK, PASS
    try:
        hypothesis = ctx.cd().verdict
    except LabError as exc:
        hypothesis = f"error: {exc}"
    report = {
        "verdict": verdict,
        "exit_code": code,
        "hypothesis": hypothesis,
        "seed": ctx.seed,
        "tol_scale": tol_scale,
        "tolerances": {k: v * tol_scale for k, v in scenario.tolerances.items()},
        "scenario": scenario.canonical,
        "checks": [r.to_dict() for r in results],
    }
    series = [s for r in results for s in r.series]
    return report, series, code


def write_outputs(out: Path, report: dict, series, meta: dict):
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", report)
    for s in series:
        write_csv(out / "series" / f"{s.name}.csv", s.rows)
        write_svg(out / "plots" / f"{s.name}.svg", s.curves, title=s.name, xlabel=s.xlabel)
    write_json(out / "meta.json", meta)


def _meta(argv, started, runtime):
    return {"version": __version__, "argv": list(argv), "started": started,
            "runtime_seconds": round(runtime, 3), "python": platform.python_version(),
            "numpy": np.__version__}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def cmd_run(args, argv) -> int:
    started, t0 = _now(), time.perf_counter()
    try:
        scenario = load_scenario(args.scenario)
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if not args.tol_scale > 0:
        print("error: --tol-scale must be positive", file=sys.stderr)
        return EXIT_ERROR
    out = Path(args.out or scenario.output_dir or Path("lab-out") / Path(args.scenario).stem)
    report, series, code = execute(scenario, args.tol_scale, args.seed)
    write_outputs(out, report, series, _meta(argv, started, time.perf_counter() - t0))
    for c in report["checks"]:
        print(f"{c['check']:<14} {c['status']}")
    print(f"verdict: {report['verdict']} (exit {code}); report in {out}")
    return code


def cmd_explore(args, argv) -> int:
    started, t0 = _now(), time.perf_counter()
    try:
        members, vals = load_family(args.family)
        seed = vals["seed"] if args.seed is None else args.seed
        budget = args.budget if args.budget is not None else vals["explore.budget"]
        table = explore(members, budget, seed, vals["tol.cd"])
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = Path(args.out or Path("lab-out") / Path(args.family).stem)
    rows = [("label", "cd_margin", "avr", "avr_error", "avr_settled", "avr_positive")] + [
        (r["label"], r["cd_margin"], r["avr"], r["avr_error"], r["avr_settled"], r["avr_positive"])
        for r in table["table"]]
    write_json(out / "report.json", {"verdict": PASS, "exit_code": EXIT_OK, "explore": table})
    write_csv(out / "series" / "explore.csv", rows)
    write_json(out / "meta.json", _meta(argv, started, time.perf_counter() - t0))
    for r in table["table"]:
        tag = "" if r["avr_settled"] else " (unsettled: upper bound)"
        print(f"{r['cd_margin']:+.3e}  avr={r['avr']:.6g} +- {r['avr_error']:.2g}{tag}  {r['label']}")
    print(f"{len(table['table'])} certified rows, {len(table['excluded'])} excluded; report in {out}")
    return EXIT_OK


def cmd_presets(args, argv) -> int:
    for name, (_, params, desc) in PRESETS.items():
        ps = f"({', '.join(params)})" if params else ""
        print(f"{name}{ps}: {desc}")
    print("spline: <key>.file = path to CSV with columns r, value")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lab", description="Audit weighted comparison inequalities on model spaces.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the checks of a scenario file")
    run.add_argument("scenario")
    run.add_argument("--out", default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--tol-scale", type=float, default=1.0)
    run.set_defaults(func=cmd_run)
    ex = sub.add_parser("explore", help="search a parameter family for certified spaces with positive volume ratio")
    ex.add_argument("family")
    ex.add_argument("--budget", type=int, default=None)
    ex.add_argument("--out", default=None)
    ex.add_argument("--seed", type=int, default=None)
    ex.set_defaults(func=cmd_explore)
    pr = sub.add_parser("presets", help="list profile presets")
    pr.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    return args.func(args, argv)


if __name__ == "__main__":
    sys.exit(main())
