"""Jacobi/Riccati matrices along transport geodesics and the volume comparison audits.

Along a radial geodesic the parallel frame is ``E_1 = d/ds`` plus unit
tangential vectors, so the curvature matrix ``S(t)`` is diagonal:
``speed^2 * diag(0, K_rad, ..., K_rad)``.  Matrices are still stored in full
(``m x m``) so nothing below assumes diagonality; the cost is negligible.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize

from .curvature import cd_scan
from .errors import AuditFailure, ConjugatePointError, DomainError, IntegratorStepError
from .geometry import (DEFAULT_STEP, RotSymSpace, _check_radius, weighted_ball_volumes,
                       weighted_sphere_area)

MONO_REL_TOL = 1e-9
AUDIT_TOL = 1e-7
RICCATI_TOL = 1e-6


@lru_cache(maxsize=256)
def hypothesis_holds(space: RotSymSpace) -> bool:
    """Whether the default curvature scan fails to refute ``Ric_w^alpha >= 0``."""
    return cd_scan(space).hypothesis_holds


# --- series --------------------------------------------------------------------


class Violation(NamedTuple):
    index: int
    t: float
    magnitude: float


@dataclass
class ComparisonSeries:
    """A radius- or time-indexed series with an optional bound.

    ``normalized`` is the quantity whose monotonicity (or bound) is audited;
    ``monotone_violation`` holds the first offending step, if any.
    """

    radii: np.ndarray
    values: np.ndarray
    normalized: np.ndarray
    bound: np.ndarray | None = None
    monotone_violation: Violation | None = None
    n_violations: int = 0
    kind: str = ""
    tolerance: float = MONO_REL_TOL
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.radii)
        arrays = [self.values, self.normalized] + ([self.bound] if self.bound is not None else [])
        if any(len(a) != n for a in arrays):
            raise ValueError("series lists must share one length")

    @property
    def ok(self) -> bool:
        return self.monotone_violation is None

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "tolerance": self.tolerance,
            "radii": np.asarray(self.radii).tolist(),
            "values": np.asarray(self.values).tolist(),
            "normalized": np.asarray(self.normalized).tolist(),
            "violation": None if self.monotone_violation is None else self.monotone_violation._asdict(),
            "n_violations": self.n_violations,
        }
        if self.bound is not None:
            out["bound"] = np.asarray(self.bound).tolist()
        if self.extra:
            out["extra"] = self.extra
        return out

    def csv_rows(self):
        third = "bound" if self.bound is not None else "normalized"
        yield ("t", "value", third)
        col = self.bound if self.bound is not None else self.normalized
        for row in zip(self.radii, self.values, col):
            yield tuple(float(x) for x in row)


def first_increase(t, values, rel_tol=MONO_REL_TOL):
    """First step where ``values`` increases by more than ``rel_tol`` times the local scale."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return None, 0
    step = np.diff(v)
    scale = np.maximum(np.maximum(np.abs(v[1:]), np.abs(v[:-1])), np.finfo(float).tiny)
    bad = np.nonzero(step > rel_tol * scale)[0]
    if len(bad) == 0:
        return None, 0
    i = int(bad[0])
    return Violation(i + 1, float(t[i + 1]), float(step[i])), int(len(bad))


def first_excess(t, lhs, bound, tol):
    """First index where ``lhs > bound + tol * max(1, |bound|)``."""
    lhs, bound = np.asarray(lhs, float), np.asarray(bound, float)
    excess = lhs - bound
    bad = np.nonzero(excess > tol * np.maximum(1.0, np.abs(bound)))[0]
    if len(bad) == 0:
        return None, 0
    i = int(bad[0])
    return Violation(i, float(t[i]), float(excess[i])), int(len(bad))


def _maybe_fail(space, series, strict, what):
    if strict and series.monotone_violation is not None and hypothesis_holds(space):
        raise AuditFailure(f"{what} violated on a space satisfying the curvature hypothesis",
                           details=series)
    return series


def trace_split(a, b, n, alpha):
    """Completing-the-square decomposition of ``-a^2/n - b^2/alpha``.

    Returns ``(main, remainder)`` with ``main = -(a+b)^2/(n+alpha)`` and
    ``remainder = -n/(alpha (n+alpha)) * (alpha a/n - b)^2``; their sum equals
    ``-a^2/n - b^2/alpha`` identically.  With ``n = m`` it is the step for
    ``trace Q``; with ``n = m-1`` the step for the mean curvature.
    """
    main = -((a + b) ** 2) / (n + alpha)
    rem = -n / (alpha * (n + alpha)) * (alpha * a / n - b) ** 2
    return main, rem


# --- Jacobi propagation ----------------------------------------------------------


@dataclass(frozen=True)
class JacobiState:
    t: float
    P: np.ndarray
    Pdot: np.ndarray
    S: np.ndarray
    Q: np.ndarray
    logdetP: float


@dataclass(eq=False)
class JacobiPath(Sequence):
    """States of ``P'' = -P S`` on a uniform grid along ``s(t) = s0 + speed t``."""

    space: RotSymSpace
    s0: float
    speed: float
    D2u: tuple
    t: np.ndarray
    P: np.ndarray
    Pdot: np.ndarray
    S: np.ndarray
    step: float

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return JacobiState(float(self.t[i]), self.P[i], self.Pdot[i], self.S[i], self.Q[i],
                           float(self.logdet[i]))

    @property
    def m(self) -> int:
        return self.P.shape[1]

    @property
    def s(self) -> np.ndarray:
        return self.s0 + self.speed * self.t

    @cached_property
    def Q(self) -> np.ndarray:
        with np.errstate(all="ignore"):
            return np.linalg.solve(self.P, self.Pdot)

    @cached_property
    def _slogdet(self):
        return np.linalg.slogdet(self.P)

    @property
    def logdet(self) -> np.ndarray:
        return self._slogdet[1]

    @property
    def det(self) -> np.ndarray:
        sign, logabs = self._slogdet
        return sign * np.exp(logabs)

    def _interp(self, i, tau):
        """Cubic Hermite interpolant of ``P`` on ``[t_i, t_{i+1}]`` at ``t_i + tau``."""
        h = self.t[i + 1] - self.t[i]
        x = tau / h
        h00 = 2 * x**3 - 3 * x**2 + 1
        h10 = x**3 - 2 * x**2 + x
        h01 = -2 * x**3 + 3 * x**2
        h11 = x**3 - x**2
        return (h00 * self.P[i] + h10 * h * self.Pdot[i]
                + h01 * self.P[i + 1] + h11 * h * self.Pdot[i + 1])

    @cached_property
    def first_conjugate(self):
        """First ``t`` in ``(0, T)`` where ``P`` becomes singular, or ``None``."""
        if len(self.t) < 2:
            return None
        sv = np.linalg.svd(self.P, compute_uv=False)
        smin = sv[:, -1]
        scale = np.maximum(sv[:, 0], 1.0)
        sign = self._slogdet[0]
        n = len(self.t)
        flips = np.nonzero((sign[:-1] * sign[1:] < 0) | (sign[1:] == 0))[0]
        interior = np.arange(1, n - 1)
        dips = interior[(smin[1:-1] <= smin[:-2]) & (smin[1:-1] <= smin[2:])
                        & (smin[1:-1] <= 1e-2 * scale[1:-1])]
        if smin[-1] <= 1e-2 * scale[-1] and n > 1:
            dips = np.append(dips, n - 1)
        for i in sorted(set(flips.tolist()) | set(dips.tolist())):
            if i in set(flips.tolist()):
                root = self._refine_sign_change(i)
                if 0 < root < self.t[-1]:
                    return root
            if i > 0:
                t_c, val = self._refine_min(i)
                if val <= 1e-8 * scale[i] and 0 < t_c < self.t[-1]:
                    return t_c
        return None

    def _refine_sign_change(self, i):
        f = lambda tau: float(np.linalg.det(self._interp(i, tau)))
        h = self.t[i + 1] - self.t[i]
        if f(h) == 0.0:
            return float(self.t[i + 1])
        return float(self.t[i] + optimize.brentq(f, 0.0, h, xtol=1e-14))

    def _refine_min(self, i):
        def smin(t):
            j = min(max(int((t - self.t[0]) // self.step), 0), len(self.t) - 2)
            return float(np.linalg.svd(self._interp(j, t - self.t[j]), compute_uv=False)[-1])
        a, b = self.t[i - 1], self.t[min(i + 1, len(self.t) - 1)]
        res = optimize.minimize_scalar(smin, bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-13})
        return float(res.x), float(res.fun)


def _curvature_matrices(space, s, speed, m):
    k = np.asarray(space.k_rad(s), dtype=float)
    S = np.zeros(k.shape + (m, m))
    idx = np.arange(1, m)
    S[..., idx, idx] = (speed**2 * k)[..., None]
    return S


def _rk4_transfer(space, s0, speed, t, h, m):
    """RK4 one-step maps for ``Y' = Y B(t)`` with ``Y = [P | P']``.

    For this linear system the classical RK4 step is ``Y_{n+1} = Y_n T_n``;
    building all ``T_n`` at once keeps the sequential loop to one product.
    """
    eye = np.eye(2 * m)

    def B(tt):
        S = _curvature_matrices(space, s0 + speed * tt, speed, m)
        out = np.zeros(S.shape[:-2] + (2 * m, 2 * m))
        out[..., :m, m:] = -S
        out[..., m:, :m] = np.eye(m)
        return out

    B1, B2, B3 = B(t), B(t + h / 2), B(t + h)
    M1 = B1
    M2 = (eye + h / 2 * M1) @ B2
    M3 = (eye + h / 2 * M2) @ B2
    M4 = (eye + h * M3) @ B3
    return eye + (h / 6) * (M1 + 2 * M2 + 2 * M3 + M4)


def jacobi_propagate(space: RotSymSpace, s0: float, speed: float, D2u, T: float,
                     step: float = DEFAULT_STEP, on_conjugate: str = "raise") -> JacobiPath:
    """Integrate ``P'' = -P S`` with ``P(0) = I`` and ``P'(0) = diag(D2u)``.

    ``D2u = (radial, tangential)`` are the Hessian eigenvalues at the base
    point; the geodesic is radial with signed speed ``speed``.  Classical RK4
    with a uniform step no larger than ``step``.  If ``det P`` vanishes inside
    ``(0, T)`` a ``ConjugatePointError`` is raised unless ``on_conjugate`` is
    ``"record"``.
    """
    if T < 0 or step <= 0:
        raise DomainError("need T >= 0 and step > 0")
    m = space.m
    end = s0 + speed * T
    if max(abs(s0), abs(end)) > space.r_max * (1 + 1e-12):
        raise DomainError("transport geodesic leaves the chart")
    radial, tangential = float(D2u[0]), float(D2u[1])
    n = max(1, int(math.ceil(T / step - 1e-9))) if T > 0 else 0
    h = T / n if n else 0.0
    t = h * np.arange(n + 1)
    Y = np.empty((n + 1, m, 2 * m))
    Y[0, :, :m] = np.eye(m)
    Y[0, :, m:] = np.diag([radial] + [tangential] * (m - 1))
    if n:
        Tn = _rk4_transfer(space, s0, speed, t[:-1], h, m)
        y = Y[0]
        for i in range(n):
            y = y @ Tn[i]
            Y[i + 1] = y
    path = JacobiPath(space, float(s0), float(speed), (radial, tangential), t,
                      Y[:, :, :m].copy(), Y[:, :, m:].copy(),
                      _curvature_matrices(space, s0 + speed * t, speed, m), h or step)
    if on_conjugate == "raise" and path.first_conjugate is not None:
        raise ConjugatePointError(f"det P vanishes at t={path.first_conjugate:.10g}",
                                  path.first_conjugate)
    return path


def conjugate_scan(states: JacobiPath):
    """First zero of ``det P`` in ``(0, T)``, or ``None``."""
    return states.first_conjugate


@dataclass(frozen=True)
class RiccatiCheck:
    residual: float
    trace_residual: float
    symmetry_defect: float
    step: float

    def ok(self, tol=RICCATI_TOL) -> bool:
        return max(self.residual, self.trace_residual) <= tol


def riccati_check(states: JacobiPath, tol: float = RICCATI_TOL, strict: bool = False) -> RiccatiCheck:
    """Residuals of ``Q' = -S - Q^2`` and ``(log det P)' = trace Q``.

    Both identities are checked in integrated form on the state grid,
    ``Q(t) - Q(0) + int_0^t (S + Q^2)`` and ``log det P(t) - int_0^t trace Q``,
    with the trapezoid rule, so the residual is ``O(step^2)``.
    """
    if states.first_conjugate is not None:
        raise DomainError("Q is undefined past a conjugate point")
    t, Q, S = states.t, states.Q, states.S
    if len(t) < 2:
        return RiccatiCheck(0.0, 0.0, float(np.max(np.abs(Q - np.swapaxes(Q, -1, -2)))), states.step)
    rhs = S + Q @ Q
    acc = integrate.cumulative_trapezoid(rhs, t, axis=0, initial=0.0)
    res = float(np.max(np.abs(Q - Q[0] + acc)))
    tr = np.trace(Q, axis1=1, axis2=2)
    tr_acc = integrate.cumulative_trapezoid(tr, t, initial=0.0)
    tr_res = float(np.max(np.abs(states.logdet - states.logdet[0] - tr_acc)))
    sym = float(np.max(np.abs(Q - np.swapaxes(Q, -1, -2))))
    out = RiccatiCheck(res, tr_res, sym, states.step)
    if strict and not out.ok(tol):
        raise IntegratorStepError(f"Riccati residual {max(res, tr_res):.3g} above {tol}",
                                  max(res, tr_res))
    return out


# --- comparison along transport geodesics -------------------------------------------


def _root_f(space, f_value):
    if f_value <= 0:
        raise DomainError("f_value must be positive")
    return f_value ** (1.0 / (space.dim - 1))


def weighted_trace_bound(space: RotSymSpace, states: JacobiPath, f_value: float,
                         tol: float = AUDIT_TOL, strict: bool = True) -> ComparisonSeries:
    """``trace Q + <D log w, gamma'>`` against ``(m+alpha) F / (1 + t F)``, ``F = f^(1/(m+alpha-1))``."""
    F = _root_f(space, f_value)
    t = states.t
    lhs = np.trace(states.Q, axis1=1, axis2=2) + states.speed * space.dlogw_signed(states.s)
    bound = space.dim * F / (1 + t * F)
    viol, n = first_excess(t, lhs, bound, tol)
    series = ComparisonSeries(t, lhs, lhs / bound, bound, viol, n, "weighted_trace_bound", tol,
                              {"initial_excess": float(lhs[0] - bound[0])})
    return _maybe_fail(space, series, strict, "trace comparison")


def volume_expansion_series(space: RotSymSpace, states: JacobiPath, f_value: float,
                            rel_tol: float = MONO_REL_TOL, strict: bool = True) -> ComparisonSeries:
    """``(1 + t F)^-(m+alpha) w(gamma(t)) det P(t)``, scaled to start at 1; should not increase."""
    F = _root_f(space, f_value)
    t = states.t
    raw = space.density(np.abs(states.s)) * states.det
    normalized = (1 + t * F) ** (-space.dim) * raw / raw[0]
    viol, n = first_increase(t, normalized, rel_tol)
    series = ComparisonSeries(t, raw, normalized, None, viol, n, "volume_expansion", rel_tol)
    return _maybe_fail(space, series, strict, "volume expansion monotonicity")


# --- index form --------------------------------------------------------------------


@dataclass(frozen=True)
class Taper:
    """Vector field ``Z(t) = zeta(t/r) * direction`` in the parallel frame, ``zeta(1) = 0``."""

    name: str
    zeta: Callable
    dzeta: Callable
    direction: tuple


def _poly_taper(name, coeffs, direction):
    # zeta(x) = (1 - x) * (1 + sum c_k x^k)
    p = np.polynomial.Polynomial([1.0] + list(coeffs)) * np.polynomial.Polynomial([1.0, -1.0])
    dp = p.deriv()
    return Taper(name, p, dp, tuple(direction))


def default_tapers(m: int, seed: int = 0, n_random: int = 5):
    """Three fixed tapers and ``n_random`` seeded polynomial tapers, each on every frame axis
    plus one seeded random direction."""
    rng = np.random.default_rng(seed)
    shapes = [
        ("linear", lambda x: 1 - x, lambda x: -np.ones_like(x)),
        ("half_cosine", lambda x: np.cos(0.5 * np.pi * x), lambda x: -0.5 * np.pi * np.sin(0.5 * np.pi * x)),
        ("quadratic", lambda x: (1 - x) ** 2, lambda x: -2 * (1 - x)),
    ]
    coeff_sets = [rng.normal(size=3) for _ in range(n_random)]
    directions = [np.eye(m)[i] for i in range(m)]
    v = rng.normal(size=m)
    directions.append(v / np.linalg.norm(v))
    family = []
    for k, e in enumerate(directions):
        for name, z, dz in shapes:
            family.append(Taper(f"{name}[{k}]", z, dz, tuple(e)))
        for j, c in enumerate(coeff_sets):
            family.append(_poly_taper(f"random{j}[{k}]", c, e))
    return family


def index_form(states: JacobiPath, taper: Taper) -> float:
    """``D2u(Z(0), Z(0)) + int_0^r (|D_t Z|^2 - Rm(gamma', Z, Z, gamma')) dt``."""
    t = states.t
    r = float(t[-1])
    if r <= 0:
        raise DomainError("index form needs r > 0")
    e = np.asarray(taper.direction, dtype=float)
    H = np.diag([states.D2u[0]] + [states.D2u[1]] * (states.m - 1))
    x = t / r
    z = np.asarray(taper.zeta(x), dtype=float)
    dz = np.asarray(taper.dzeta(x), dtype=float) / r
    curv = np.einsum("i,nij,j->n", e, states.S, e)
    integrand = dz**2 * (e @ e) - z**2 * curv
    return float(z[0] ** 2 * (e @ H @ e) + integrate.simpson(integrand, x=t))


def index_form_check(space: RotSymSpace, states: JacobiPath, Z_family=None, seed: int = 0):
    """Minimum of the index form over a family of tapered fields; returns ``(min, taper name)``."""
    family = Z_family if Z_family is not None else default_tapers(states.m, seed)
    best, name = math.inf, None
    for taper in family:
        val = index_form(states, taper)
        if val < best:
            best, name = val, taper.name
    return best, name


# --- appendix: geodesic spheres about the pole ----------------------------------------


def mean_curvature_comparison(space: RotSymSpace, t_grid, tol: float = 1e-9,
                              strict: bool = True) -> ComparisonSeries:
    """``H + <gamma', D log w>`` on spheres about the pole against ``(m-1+alpha)/t``.

    ``H = (m-1) phi'/phi``.  ``normalized`` is ``t * lhs``, audited against
    ``m - 1 + alpha``.  The differential inequality
    ``lhs' <= -lhs^2/(m-1+alpha)`` is audited too; its first failure is in
    ``extra["riccati_violation"]``.
    """
    t = _check_radius(space, np.asarray(t_grid, dtype=float))
    n1 = space.m - 1
    ratio = space.phi_ratio(t)
    lhs = n1 * ratio + space.log_w_d1(t)
    bound = (n1 + space.alpha) / t
    phi, dphi, ddphi = space.warp(t), space.warp.d1(t), space.warp.d2(t)
    dlhs = n1 * (ddphi / phi - ratio**2) + space.log_w_d2(t)
    slack = -(lhs**2) / (n1 + space.alpha) - dlhs
    normalized = t * lhs
    viol, n = first_excess(t, normalized, np.full_like(t, n1 + space.alpha), tol)
    d_viol, d_n = first_excess(t, -slack, np.zeros_like(t), tol)
    series = ComparisonSeries(t, lhs, normalized, bound, viol, n, "mean_curvature", tol, {
        "riccati_violation": None if d_viol is None else d_viol._asdict(),
        "riccati_n_violations": d_n,
        "riccati_min_slack": float(np.min(slack)),
    })
    if strict and d_viol is not None and hypothesis_holds(space):
        raise AuditFailure("mean-curvature differential inequality violated", details=series)
    return _maybe_fail(space, series, strict, "mean-curvature comparison")


def bishop_gromov(space: RotSymSpace, radii, mode: str = "ball",
                  rel_tol: float = MONO_REL_TOL) -> ComparisonSeries:
    """Normalized weighted ball volumes ``V(r)/r^(m+alpha)`` or sphere areas ``A(t)/t^(m-1+alpha)``.

    Violations of monotonicity are recorded, never raised: on spaces where
    the curvature hypothesis fails they are expected data.
    """
    radii = np.asarray(radii, dtype=float)
    if mode == "ball":
        vals = weighted_ball_volumes(space, radii)
        norm = vals / radii**space.dim
    elif mode == "sphere":
        vals = np.array([weighted_sphere_area(space, r) for r in radii])
        norm = vals / radii ** (space.dim - 1)
    else:
        raise DomainError("mode must be 'ball' or 'sphere'")
    viol, n = first_increase(radii, norm, rel_tol)
    return ComparisonSeries(radii, vals, norm, None, viol, n, f"bishop_gromov_{mode}", rel_tol)


@dataclass(frozen=True)
class AvrEstimate:
    estimate: float
    extrapolation_error: float
    upper_bound: float
    settled: bool
    order: float
    radii: tuple
    values: tuple

    def __iter__(self):
        yield self.estimate
        yield self.extrapolation_error

    @property
    def covers_zero(self) -> bool:
        return self.estimate <= self.extrapolation_error


def avr_estimate(space: RotSymSpace, alpha: float | None = None, K: int = 8,
                 settle_tol: float = 1e-3, quad_rel: float = 1e-10) -> AvrEstimate:
    """Extrapolate ``V(r)/r^(m+alpha)`` to ``r -> infinity`` from ``K`` dyadic radii ending at ``r_max``.

    The tail is modelled as ``V + c r^-p``; ``p`` comes from successive
    differences, and the error bar is the change between the last two
    extrapolants plus the quadrature tolerance.  When the differences do not
    contract geometrically the result is flagged unsettled and the last series
    value is the reported upper bound.
    """
    if K < 4:
        raise DomainError("need K >= 4 radii")
    a = space.alpha if alpha is None else float(alpha)
    radii = space.r_max * 2.0 ** (np.arange(K) - (K - 1))
    vols = weighted_ball_volumes(space, radii)
    v = vols / radii ** (space.m + a)
    d = v[:-1] - v[1:]
    noise = quad_rel * abs(v[-1]) + 1e-300

    def extrap(j):
        # extrapolant using differences d[j-1], d[j] (ending at v[j+1])
        if abs(d[j]) <= 1e-15 * abs(v[j + 1]):
            return v[j + 1], math.inf
        rho = d[j - 1] / d[j]
        if rho <= 1.0:
            return v[j + 1], rho
        return v[j + 1] - d[j] / (rho - 1.0), rho

    V1, rho1 = extrap(K - 2)
    V0, rho0 = extrap(K - 3)
    err = abs(V1 - V0) + noise
    converging = (rho1 > 1.0) and (rho0 > 1.0)
    settled = converging and err <= settle_tol * max(abs(v[-1]), noise) + noise
    if not converging and abs(d[-1]) <= 1e-15 * abs(v[-1]):
        settled = True
    order = math.log2(rho1) if (converging and math.isfinite(rho1)) else math.nan
    estimate = max(V1, 0.0) if settled else float(v[-1])
    return AvrEstimate(float(estimate), float(err), float(v[-1]), bool(settled), order,
                       tuple(radii.tolist()), tuple(v.tolist()))
