"""Transport construction on geodesic balls about the pole, with radial data.

With ``K = B_R(pole)`` and radial ``f`` the Neumann problem
``div(w f Du) = (m+alpha) w f^p - w |Df|`` (``p = (m+alpha)/(m+alpha-1)``),
``<Du, nu> = 1`` on ``dK`` reduces to one quadrature: the flux
``phi^(m-1) w f u'`` equals ``F(s) = int_0^s [(m+alpha) w f^p - w |f'|] phi^(m-1)``.
The transport map ``x -> exp_x(r Du(x))`` sends the sphere of radius ``s``
to the sphere of signed radius ``s + r u'(s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize

from .comparison import (ComparisonSeries, avr_estimate, hypothesis_holds, jacobi_propagate,
                         volume_expansion_series, weighted_trace_bound)
from .curvature import cd_scan
from .errors import AuditFailure, DomainError, NormalizationMismatchError, QuadratureError
from .geometry import (QUAD_EPSABS, QUAD_EPSREL, DEFAULT_STEP, RotSymSpace, SlicePoint, distance,
                       distances_to, hessian_radial, weighted_ball_volume)
from .profiles import RadialProfile, const

NEUMANN_TOL = 1e-8
LEMMA1_TOL = 1e-8
AR_TOL = 1e-9
CHAIN_TOL = 1e-9

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


@dataclass(frozen=True)
class BallDomain:
    """Geodesic ball ``K = B_R`` about the pole; ``dK`` is the sphere of radius ``R``, ``nu = d/dr``."""

    R: float

    def check(self, space: RotSymSpace):
        if not 0 < self.R < space.r_max:
            raise DomainError(f"ball radius {self.R} must lie in (0, r_max={space.r_max})")
        return self


def _sobolev_exponent(space):
    return space.dim / (space.dim - 1)


def _quad(fun, a, b, points=None):
    val, err = integrate.quad(fun, a, b, epsabs=QUAD_EPSABS * 1e-2, epsrel=QUAD_EPSREL,
                              limit=400, points=points)
    if err > max(QUAD_EPSABS, 1e-11 * abs(val)):
        raise QuadratureError(f"quadrature error estimate {err:.3g}", achieved=err)
    return val


def _df_roots(f: RadialProfile, R: float, n: int = 2001):
    """Zeros of ``f'`` in ``(0, R)``, where ``|f'|`` has kinks."""
    s = np.linspace(0.0, R, n)[1:]
    d = f.d1(s)
    roots = []
    for i in np.nonzero(np.signbit(d[:-1]) != np.signbit(d[1:]))[0]:
        if d[i] == 0.0:
            roots.append(float(s[i]))
        elif d[i + 1] != 0.0:
            roots.append(float(optimize.brentq(f.d1, s[i], s[i + 1], xtol=1e-15)))
    return sorted(set(roots))


def sobolev_terms(space: RotSymSpace, K: BallDomain, f: RadialProfile):
    """``(int_K w|Df| + int_dK w f, int_K w f^p)`` for radial ``f`` on the ball."""
    K.check(space)
    m, R = space.m, K.R
    p = _sobolev_exponent(space)
    kinks = _df_roots(f, R) or None
    w, phi = space.density, space.warp
    grad = _quad(lambda s: w(s) * abs(f.d1(s)) * phi(s) ** (m - 1), 0.0, R, kinks)
    boundary = w(R) * f(R) * phi(R) ** (m - 1)
    bulk = _quad(lambda s: w(s) * f(s) ** p * phi(s) ** (m - 1), 0.0, R)
    return space.sigma * (grad + boundary), space.sigma * bulk


def _check_positive(space, K, f0):
    grid = np.linspace(0.0, K.R, 2001)
    if np.any(f0(grid) <= 0):
        raise DomainError("test function must be positive on K")


def normalize_f(space: RotSymSpace, K: BallDomain, f0: RadialProfile):
    """Scale ``f0`` so that ``int_K w|Df| + int_dK w f = (m+alpha) int_K w f^p``.

    Returns ``(lam, lam * f0)`` with ``lam = (L / ((m+alpha) I))^(m+alpha-1)``.
    """
    K.check(space)
    _check_positive(space, K, f0)
    L, I = sobolev_terms(space, K, f0)
    lam = (L / (space.dim * I)) ** (space.dim - 1)
    return lam, f0.scaled(lam)


# --- Neumann problem -----------------------------------------------------------


@dataclass(eq=False)
class NeumannSolution:
    """Radial solution ``u`` of the Neumann problem on ``K``.

    ``u`` is fixed by ``u(0) = 0``.  Grid arrays hold ``u, u', u''`` on
    ``[0, R]``; the methods ``d1``/``d2``/``value`` evaluate from the exact
    flux quadrature anywhere on the slice ``[-R, R]``, where ``u`` is even.
    """

    space: RotSymSpace
    K: BallDomain
    f: RadialProfile
    lam: float
    grid: np.ndarray
    u: np.ndarray
    uprime: np.ndarray
    usecond: np.ndarray
    flux: np.ndarray
    U_set: list = field(default_factory=list)
    boundary_error: float = 0.0

    # flux F(s) from the nearest grid node at or below s
    def _flux_at(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        i = np.clip(np.searchsorted(self.grid, s, side="right") - 1, 0, len(self.grid) - 1)
        a = self.grid[i]
        half = 0.5 * (s - a)
        nodes = a[:, None] + half[:, None] * (_GL_X + 1.0)
        vals = _flux_integrand(self.space, self.f, nodes)
        return self.flux[i] + half * np.sum(_GL_W * vals, axis=1)

    def d1(self, s):
        arr = np.asarray(s, dtype=float)
        sign = np.sign(np.atleast_1d(arr))
        flat = np.abs(np.atleast_1d(arr))
        F = self._flux_at(flat)
        m = self.space.m
        with np.errstate(divide="ignore", invalid="ignore"):
            den = self.space.density(flat) * self.f(flat) * self.space.warp(flat) ** (m - 1)
            out = np.where(flat > 0, sign * F / den, 0.0)
        return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)

    def d2(self, s):
        arr = np.asarray(s, dtype=float)
        flat = np.abs(np.atleast_1d(arr))
        out = _second_derivative(self.space, self.f, flat, self.d1(flat))
        return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)

    def value(self, s):
        """``u(s)``: corrected trapezoid from the previous grid node (fourth order)."""
        arr = np.asarray(s, dtype=float)
        flat = np.abs(np.atleast_1d(arr))
        i = np.clip(np.searchsorted(self.grid, flat, side="right") - 1, 0, len(self.grid) - 1)
        a = self.grid[i]
        h = flat - a
        d1, d2 = self.d1(flat), self.d2(flat)
        out = self.u[i] + 0.5 * h * (self.uprime[i] + d1) + h**2 / 12 * (self.usecond[i] - d2)
        return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)

    __call__ = value

    def in_U(self, s) -> bool:
        return bool(abs(s) < self.K.R and abs(self.d1(s)) < 1.0)

    def residual(self, n_check: int = 401) -> float:
        """Sup-norm PDE residual with ``u''`` from fourth-order differences of ``u'``."""
        return pde_residual(self, n_check)


def _flux_integrand(space, f, s):
    m = space.m
    p = _sobolev_exponent(space)
    w = space.density(s)
    return (space.dim * w * f(s) ** p - w * np.abs(f.d1(s))) * space.warp(s) ** (m - 1)


def _rhs(space, f, s):
    w = space.density(s)
    return space.dim * w * f(s) ** _sobolev_exponent(space) - w * np.abs(f.d1(s))


def _second_derivative(space, f, s, u1):
    """``u''`` from the radial ODE ``(phi^(m-1) w f u')' = phi^(m-1) RHS``."""
    m = space.m
    w, w1 = space.density(s), space.density.d1(s)
    fv, f1 = f(s), f.d1(s)
    rhs = _rhs(space, f, s)
    safe = np.where(s > 0, s, 1.0)
    ratio = np.where(s > 0, space.warp.d1(safe) / space.warp(safe), 0.0)
    out = rhs / (w * fv) - u1 * ((m - 1) * ratio + w1 / w + f1 / fv)
    at_pole = rhs / (m * w * fv)
    return np.where(s > 0, out, at_pole)


def _find_U(sol: NeumannSolution):
    """Maximal intervals of ``[0, R)`` where ``|u'| < 1`` (endpoints with ``|u'| = 1`` excluded)."""
    g = np.abs(sol.uprime) - 1.0
    s = sol.grid
    cuts = []
    for i in np.nonzero(np.signbit(g[:-1]) != np.signbit(g[1:]))[0]:
        fa = abs(sol.d1(s[i])) - 1
        fb = abs(sol.d1(s[i + 1])) - 1
        if fa == 0 or fb == 0:
            cuts.append(float(s[i] if fa == 0 else s[i + 1]))
            continue
        cuts.append(float(optimize.brentq(lambda x: abs(sol.d1(x)) - 1.0, s[i], s[i + 1], xtol=1e-15)))
    R = sol.K.R
    # |u'(R)| = 1 up to rounding; a crossing in the last ulps is not a cut
    cuts = [c for c in cuts if R - c > 1e-9 * R]
    edges = [0.0] + cuts + [R]
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a and abs(sol.d1(0.5 * (a + b))) < 1.0:
            out.append((a, b))
    return out


def solve_neumann_radial(space: RotSymSpace, K: BallDomain, f: RadialProfile,
                         n_grid: int = 1001, tol: float = NEUMANN_TOL) -> NeumannSolution:
    """Solve the Neumann problem on ``K`` for normalized ``f`` by flux quadrature.

    Raises ``NormalizationMismatchError`` when ``|u'(R) - 1| > tol``, i.e.
    when ``f`` does not satisfy the integrability condition.
    """
    K.check(space)
    _check_positive(space, K, f)
    R = K.R
    grid = np.union1d(np.linspace(0.0, R, n_grid), _df_roots(f, R))
    a, b = grid[:-1], grid[1:]
    half = 0.5 * (b - a)
    nodes = a[:, None] + half[:, None] * (_GL_X + 1.0)
    pieces = half * np.sum(_GL_W * _flux_integrand(space, f, nodes), axis=1)
    flux = np.concatenate([[0.0], np.cumsum(pieces)])
    m = space.m
    with np.errstate(divide="ignore", invalid="ignore"):
        den = space.density(grid) * f(grid) * space.warp(grid) ** (m - 1)
        u1 = np.where(grid > 0, flux / den, 0.0)
    u2 = _second_derivative(space, f, grid, u1)
    h = np.diff(grid)
    steps = 0.5 * h * (u1[:-1] + u1[1:]) + h**2 / 12 * (u2[:-1] - u2[1:])
    u = np.concatenate([[0.0], np.cumsum(steps)])
    sol = NeumannSolution(space, K, f, 1.0, grid, u, u1, u2, flux)
    sol.boundary_error = float(abs(u1[-1] - 1.0))
    if sol.boundary_error > tol:
        raise NormalizationMismatchError(
            f"|u'(R) - 1| = {sol.boundary_error:.3g} > {tol}: f is not normalized")
    sol.U_set = _find_U(sol)
    return sol


def pde_residual(sol: NeumannSolution, n_check: int = 401) -> float:
    space, f, R = sol.space, sol.f, sol.K.R
    h = R / (n_check - 1)
    s = np.linspace(0.0, R, n_check)[2:-2]
    kinks = np.asarray(_df_roots(f, R))
    if len(kinks):
        s = s[np.min(np.abs(s[:, None] - kinks[None, :]), axis=1) > 2.5 * h]
    d1 = lambda x: sol.d1(x)
    u2_fd = (-d1(s + 2 * h) + 8 * d1(s + h) - 8 * d1(s - h) + d1(s - 2 * h)) / (12 * h)
    u1 = d1(s)
    m = space.m
    w, w1 = space.density(s), space.density.d1(s)
    fv, f1 = f(s), f.d1(s)
    lap = u2_fd + (m - 1) * space.warp.d1(s) / space.warp(s) * u1
    div = w * fv * lap + (w1 * fv + w * f1) * u1
    return float(np.max(np.abs(div - _rhs(space, f, s))))


def lemma1_values(space: RotSymSpace, sol: NeumannSolution, s):
    """``w Lap u + <Dw, Du> - (m+alpha) w f^(1/(m+alpha-1))`` at radii ``s``."""
    s = np.asarray(s, dtype=float)
    u1, u2 = sol.d1(s), sol.d2(s)
    m = space.m
    safe = np.where(s > 0, s, 1.0)
    tang = np.where(s > 0, u1 * space.warp.d1(safe) / space.warp(safe), u2)
    lap = u2 + (m - 1) * tang
    w, w1 = space.density(s), space.density.d1(s)
    return w * lap + w1 * u1 - space.dim * w * sol.f(s) ** (1.0 / (space.dim - 1))


def U_points(sol: NeumannSolution):
    """Solution grid points lying in ``U``."""
    s = sol.grid
    mask = (s < sol.K.R) & (np.abs(sol.uprime) < 1.0)
    return s[mask]


def verify_lemma1(space: RotSymSpace, sol: NeumannSolution, tol: float = LEMMA1_TOL,
                  strict: bool = True) -> float:
    """Maximum over ``U`` of ``w Lap u + <Dw, Du> - (m+alpha) w f^(1/(m+alpha-1))``.

    The inequality needs only Cauchy-Schwarz, so a positive maximum beyond
    ``tol`` raises ``AuditFailure`` on any space.
    """
    pts = U_points(sol)
    if len(pts) == 0:
        return -math.inf
    vals = lemma1_values(space, sol, pts)
    worst = float(np.max(vals))
    scale = float(np.max(space.dim * space.density(pts) * sol.f(pts) ** (1.0 / (space.dim - 1))))
    if strict and worst > tol * max(1.0, scale):
        i = int(np.argmax(vals))
        raise AuditFailure(f"Laplacian bound fails at s={pts[i]:.6g} by {worst:.3g}",
                           details={"s": float(pts[i]), "excess": worst})
    return worst


# --- contact set and transport -----------------------------------------------------


@dataclass(frozen=True)
class SampleSpec:
    """Slice grid over ``K``: ``n_s`` radii in ``[0, R]`` times ``n_theta`` angles in ``[0, pi]``.

    The pair (base point, image) lies on one ray through the pole, and the
    rotations fixing that ray act transitively on the missing coordinates,
    so a half-plane slice covers ``K``.
    """

    n_s: int = 64
    n_theta: int = 32
    refine: bool = True

    def as_dict(self):
        return {"n_s": self.n_s, "n_theta": self.n_theta, "refine": self.refine}


class ArResult(NamedTuple):
    flag: bool
    margin: float
    worst: SlicePoint | None


def ar_membership(space: RotSymSpace, sol: NeumannSolution, sbar: float, r: float,
                  sample_spec: SampleSpec | None = None, tol: float = AR_TOL) -> ArResult:
    """Sampled certificate for ``sbar`` in the contact set ``A_r``.

    Checks ``r u(x) + d(x, p)^2 / 2 >= r u(sbar) + r^2 |u'(sbar)|^2 / 2`` with
    ``p = exp_sbar(r Du(sbar))`` over the slice grid, then refines around the
    worst sample.  ``margin`` is the minimum of left minus right side; the
    flag allows ``-tol * max(1, rhs)``.  Points outside ``U`` are rejected
    without sampling.
    """
    spec = sample_spec or SampleSpec()
    if not sol.in_U(sbar):
        return ArResult(False, math.nan, None)
    u1 = sol.d1(sbar)
    p = SlicePoint(sbar + r * u1, 0.0)
    rhs = r * sol.value(sbar) + 0.5 * r * r * u1 * u1
    R = sol.K.R
    ss = np.linspace(0.0, R, spec.n_s)
    th = np.linspace(0.0, math.pi, spec.n_theta)
    S, TH = np.meshgrid(ss, th, indexing="ij")
    d = distances_to(space, p, S.ravel(), TH.ravel()).reshape(S.shape)
    lhs = r * sol.value(ss)[:, None] + 0.5 * d**2
    margins = lhs - rhs
    i, j = np.unravel_index(int(np.argmin(margins)), margins.shape)
    worst_m = float(margins[i, j])
    worst = SlicePoint(float(ss[i]), float(th[j]))
    if spec.refine and r > 0:
        def fun(x):
            s_, t_ = float(np.clip(x[0], 0, R)), float(np.clip(x[1], 0, math.pi))
            return r * sol.value(s_) + 0.5 * distance(space, SlicePoint(s_, t_), p) ** 2 - rhs
        ds, dt = R / max(spec.n_s - 1, 1), math.pi / max(spec.n_theta - 1, 1)
        bounds = [(max(0.0, ss[i] - ds), min(R, ss[i] + ds)), (max(0.0, th[j] - dt), min(math.pi, th[j] + dt))]
        res = optimize.minimize(fun, x0=[ss[i], th[j]], method="L-BFGS-B", bounds=bounds,
                                options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 200})
        if res.fun < worst_m:
            worst_m = float(res.fun)
            worst = SlicePoint(float(res.x[0]), float(res.x[1]))
    return ArResult(bool(worst_m >= -tol * max(1.0, abs(rhs))), worst_m, worst)


@dataclass
class TransportAudit:
    base: float
    r: float
    image: float
    in_U: bool
    in_Ar: bool | None
    ar_margin: float | None
    ar_grid: dict
    detJ: float
    detJ_fd: float
    jacobian_bound_ok: bool | None
    jacobian_slack: float
    conjugate_t: float | None
    monotonicity: ComparisonSeries | None
    trace_series: ComparisonSeries | None

    def to_dict(self, with_series: bool = False) -> dict:
        out = {k: getattr(self, k) for k in (
            "base", "r", "image", "in_U", "in_Ar", "ar_margin", "ar_grid", "detJ", "detJ_fd",
            "jacobian_bound_ok", "jacobian_slack", "conjugate_t")}
        out["monotone_violation"] = (None if self.monotonicity is None
                                     or self.monotonicity.monotone_violation is None
                                     else self.monotonicity.monotone_violation._asdict())
        if with_series and self.monotonicity is not None:
            out["monotonicity"] = self.monotonicity.to_dict()
        return out


def image_radius(sol: NeumannSolution, s, r):
    return s + r * sol.d1(s)


def fd_jacobian(space: RotSymSpace, sol: NeumannSolution, sbar: float, r: float, h: float = 1e-5):
    """``|det D Phi_r|`` from a central difference of the image radius times the sphere-area factor."""
    R = sol.K.R
    a, b = max(sbar - h, 0.0), min(sbar + h, R)
    drho = (image_radius(sol, b, r) - image_radius(sol, a, r)) / (b - a)
    rho = image_radius(sol, sbar, r)
    tangential = abs(space.phi(rho) / space.phi(sbar)) if sbar > 0 else abs(drho)
    return abs(drho) * tangential ** (space.m - 1)


def transport(space: RotSymSpace, sol: NeumannSolution, sbar: float, r: float,
              certify: bool = True, sample_spec: SampleSpec | None = None,
              step: float = DEFAULT_STEP, strict: bool = True) -> TransportAudit:
    """Follow ``Phi_t(x) = exp_x(t Du(x))`` from radius ``sbar`` for ``t`` in ``[0, r]``.

    The Jacobian determinant comes from Jacobi propagation with initial
    Hessian ``D2u(sbar)``; for certified contact points the volume-expansion
    series must not increase and ``w(Phi_r) |det D Phi_r| <= (1 + r F)^(m+alpha) w``.
    """
    R = sol.K.R
    if not 0 <= sbar < R or r < 0:
        raise DomainError("need 0 <= sbar < R and r >= 0")
    u1 = sol.d1(sbar)
    image = sbar + r * u1
    in_U = sol.in_U(sbar)
    f_value = float(sol.f(sbar))
    F = f_value ** (1.0 / (space.dim - 1))
    if r == 0:
        return TransportAudit(sbar, 0.0, sbar, in_U, in_U, 0.0 if in_U else None, {}, 1.0, 1.0,
                              True if in_U else None, 0.0, None, None, None)
    D2u = hessian_radial(space, sol, sbar)
    path = jacobi_propagate(space, sbar, u1, D2u, r, step=step, on_conjugate="record")
    detJ = float(abs(path.det[-1]))
    mono = volume_expansion_series(space, path, f_value, strict=False)
    trace = weighted_trace_bound(space, path, f_value, strict=False)
    in_Ar, margin, grid = None, None, {}
    if certify and in_U:
        spec = sample_spec or SampleSpec()
        res = ar_membership(space, sol, sbar, r, spec)
        in_Ar, margin, grid = res.flag, res.margin, spec.as_dict()
    elif not in_U:
        in_Ar = False
    bound_ok, slack = None, math.nan
    if in_Ar:
        lhs = float(space.density(abs(image))) * detJ
        rhs = (1 + r * F) ** space.dim * float(space.density(sbar))
        slack = float((rhs - lhs) / rhs)
        bound_ok = slack >= -CHAIN_TOL
    audit = TransportAudit(sbar, r, image, in_U, in_Ar, margin, grid, detJ,
                           float(fd_jacobian(space, sol, sbar, r)), bound_ok, float(slack),
                           path.first_conjugate, mono, trace)
    if strict and in_Ar:
        if path.first_conjugate is not None:
            raise AuditFailure(f"conjugate point at t={path.first_conjugate:.6g} < r for a contact point",
                               details=audit)
        if hypothesis_holds(space) and (not bound_ok or mono.monotone_violation is not None):
            raise AuditFailure("volume expansion bound fails at a contact point", details=audit)
    return audit


# --- inclusion lemma -----------------------------------------------------------------


def far_set_radius(space: RotSymSpace, R: float, r: float) -> float:
    """Radius of ``{p : d(x, p) < r for all x in B_R}``, a ball about the pole.

    The farthest point of ``B_R`` from ``(rho, 0)`` is taken to be the
    antipodal boundary point ``(R, pi)``; the radius solves
    ``d((rho, 0), (R, pi)) = r``.
    """
    if r <= R:
        return 0.0
    h = lambda rho: distance(space, SlicePoint(rho, 0.0), SlicePoint(R, math.pi)) - r
    lo, hi = r - R, min(r + R, space.r_max)
    if h(lo) >= 0:
        return lo
    if h(hi) < 0:
        raise DomainError("far set extends beyond the chart; increase r_max")
    return float(optimize.brentq(h, lo, hi, xtol=1e-13))


@dataclass
class InclusionReport:
    r: float
    far_radius: float
    targets: list
    coverage: float
    sample_grid: dict

    def to_dict(self):
        return {"r": self.r, "far_radius": self.far_radius, "coverage": self.coverage,
                "sample_grid": self.sample_grid, "targets": self.targets}


def preimage_radius(sol: NeumannSolution, r: float, rho: float) -> float:
    """``s`` in ``[0, R]`` with ``s + r u'(s) = rho`` (bisection)."""
    if rho == 0.0:
        return 0.0
    R = sol.K.R
    g = lambda s: image_radius(sol, s, r) - rho
    if g(R) < 0:
        raise DomainError(f"no preimage bracketed for rho={rho}")
    return float(optimize.brentq(g, 0.0, R, xtol=1e-15))


def inclusion_audit(space: RotSymSpace, sol: NeumannSolution, r: float, targets: int = 64,
                    sample_spec: SampleSpec | None = None, tol: float = AR_TOL) -> InclusionReport:
    """Check that far-set radii are hit by ``Phi_r`` from certified contact points."""
    spec = sample_spec or SampleSpec()
    R = sol.K.R
    far = far_set_radius(space, R, r)
    if far <= 0:
        return InclusionReport(r, 0.0, [], 1.0, spec.as_dict())
    rows, hit = [], 0
    for rho in far * np.arange(targets) / targets:
        row = {"rho": float(rho)}
        try:
            s = preimage_radius(sol, r, float(rho))
        except (DomainError, ValueError) as exc:
            row.update(preimage=None, covered=False, error=str(exc))
            rows.append(row)
            continue
        res = ar_membership(space, sol, s, r, spec, tol)
        row.update(preimage=s, in_U=sol.in_U(s), in_Ar=res.flag, margin=res.margin,
                   covered=bool(res.flag))
        hit += res.flag
        rows.append(row)
    return InclusionReport(r, far, rows, hit / targets, spec.as_dict())


# --- Sobolev and isoperimetric audits ------------------------------------------------------


def _integrate_over(intervals, fun):
    return sum(_quad(fun, a, b) for a, b in intervals)


def contact_set_integral(space, sol, r, n_nodes=48, sample_spec=None, tol=AR_TOL):
    """``int_{A_r} |det D Phi_r| w(Phi_r)`` with ``A_r`` certified at Gauss nodes of ``U``."""
    spec = sample_spec or SampleSpec(32, 16)
    total, certified, count = 0.0, 0, 0
    x, wts = np.polynomial.legendre.leggauss(n_nodes)
    m = space.m
    for a, b in sol.U_set:
        half = 0.5 * (b - a)
        for xi, wi in zip(x, wts):
            s = a + half * (xi + 1)
            count += 1
            if not ar_membership(space, sol, s, r, spec, tol).flag:
                continue
            certified += 1
            rho = image_radius(sol, s, r)
            drho = 1 + r * sol.d2(s)
            integrand = abs(drho) * space.density(abs(rho)) * abs(space.phi(rho)) ** (m - 1)
            total += half * wi * float(integrand)
    return space.sigma * total, certified, count


def _u_integral(space, sol, fun):
    m = space.m
    return space.sigma * _integrate_over(
        sol.U_set, lambda s: fun(s) * space.density(s) * space.warp(s) ** (m - 1))


def sobolev_audit(space: RotSymSpace, K: BallDomain, f0: RadialProfile, r_list=(10.0, 100.0),
                  r_limit: float | None = None, avr=None, with_contact_set: bool = True,
                  tol: float = CHAIN_TOL, cd_tol: float | None = None, strict: bool = True) -> dict:
    """Audit the weighted Sobolev inequality and the chain of estimates behind it.

    Reports the two sides of the inequality, the finite-``r`` chain
    ``far-set volume <= int_{A_r} J w(Phi) <= int_U (1 + r F)^(m+alpha) w``
    (raw and divided by ``r^(m+alpha)``), and the limit comparison
    ``V_alpha <= int_U w f^p`` with the divided far-set volume at ``r_limit``.
    When the volume-ratio error bar covers zero the right side is reported
    as trivial.
    """
    K.check(space)
    cd = cd_scan(space) if cd_tol is None else cd_scan(space, tol=cd_tol)
    holds = cd.hypothesis_holds
    N = space.dim
    p = _sobolev_exponent(space)
    L0, I0 = sobolev_terms(space, K, f0)
    lam, f = normalize_f(space, K, f0)
    sol = solve_neumann_radial(space, K, f)
    avr = avr or avr_estimate(space)
    trivial = avr.covers_zero
    V = 0.0 if trivial else avr.estimate
    rhs = N * V ** (1 / N) * I0 ** ((N - 1) / N)
    rhs_upper = N * (V + avr.extrapolation_error) ** (1 / N) * I0 ** ((N - 1) / N)
    ratio = math.inf if rhs == 0 else L0 / rhs
    F = lambda s: f(s) ** (1.0 / (N - 1))
    failures = []

    chain = []
    for r in r_list:
        far = far_set_radius(space, K.R, r)
        far_vol = weighted_ball_volume(space, far) if far > 0 else 0.0
        upper = _u_integral(space, sol, lambda s: (1 + r * F(s)) ** N)
        row = {"r": float(r), "far_radius": far, "far_volume": far_vol, "U_bound": upper,
               "scale": float(r) ** N}
        ok = far_vol <= upper * (1 + tol)
        if with_contact_set:
            mid, cert, cnt = contact_set_integral(space, sol, r)
            row.update(contact_integral=mid, contact_nodes_certified=cert, contact_nodes=cnt)
            ok = ok and far_vol <= mid * (1 + tol) and mid <= upper * (1 + tol)
        row["divided"] = {k: row[k] / row["scale"] for k in ("far_volume", "U_bound", "contact_integral")
                          if k in row}
        row["ok"] = bool(ok)
        if not ok:
            failures.append(f"chain link at r={r}")
        chain.append(row)

    u_int = _u_integral(space, sol, lambda s: f(s) ** p)
    k_int = space.sigma * _quad(lambda s: f(s) ** p * space.density(s) * space.warp(s) ** (space.m - 1),
                                0.0, K.R)
    r_lim = r_limit if r_limit is not None else min(1e3, space.r_max - K.R)
    far_lim = far_set_radius(space, K.R, r_lim)
    divided_far = (weighted_ball_volume(space, far_lim) if far_lim > 0 else 0.0) / r_lim**N
    limit = {
        "r_limit": r_lim,
        "divided_far_volume": divided_far,
        "avr": V,
        "avr_error": avr.extrapolation_error,
        "U_integral": u_int,
        "K_integral": k_int,
        "ok": bool(divided_far <= u_int * (1 + tol) and V <= u_int * (1 + tol)
                   and u_int <= k_int * (1 + tol)),
    }
    if not limit["ok"]:
        failures.append("limit comparison")
    sobolev_ok = rhs == 0 or L0 >= rhs * (1 - tol)
    if not sobolev_ok:
        failures.append("Sobolev inequality")

    if failures and holds:
        verdict = "fail"
    elif not holds:
        verdict = "hypothesis-violated"
    else:
        verdict = "pass"
    report = {
        "verdict": verdict,
        "hypothesis": cd.verdict,
        "lhs": L0,
        "lhs_normalized": lam * L0,
        "bulk_integral": I0,
        "lambda": lam,
        "rhs": rhs,
        "rhs_upper": rhs_upper,
        "rhs_label": "trivial RHS" if trivial else "estimated",
        "ratio": ratio,
        "chain": chain,
        "limit": limit,
        "failures": failures,
        "tolerance": tol,
        "neumann_grid": len(sol.grid),
    }
    if strict and verdict == "fail":
        raise AuditFailure("; ".join(failures), details=report)
    return report


def isoperimetric_check(space: RotSymSpace, K: BallDomain, **kwargs) -> dict:
    """The ``f = 1`` case: ``int_dK w >= (m+alpha) V_alpha^(1/(m+alpha)) (int_K w)^((m+alpha-1)/(m+alpha))``."""
    report = sobolev_audit(space, K, const(1.0), **kwargs)
    report["boundary_weight"] = report["lhs"]
    report["volume"] = report["bulk_integral"]
    return report
