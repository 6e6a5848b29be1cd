"""Radial profiles: smooth functions of the radius with three derivatives.

A profile is used as a warp ``phi``, a density ``w`` or a test function ``f``.
Analytic kinds carry exact derivatives (built once with sympy and lambdified);
spline profiles are C2 cubic interpolants and are flagged ``lower_trust``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import sympy
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline

from .errors import DomainError

KINDS = ("polynomial", "rational", "exp", "power", "spline")

_R = sympy.Symbol("r", real=True)


def _freeze(obj):
    if isinstance(obj, (list, tuple, np.ndarray)):
        return tuple(_freeze(o) for o in obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _like(value, r):
    """Broadcast ``value`` to the shape of ``r``; scalars stay Python floats."""
    out = np.asarray(value, dtype=float) + np.zeros(np.shape(r))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RadialProfile:
    """A smooth radial function ``r -> value`` with derivatives up to order 3.

    Parameters
    ----------
    kind : str
        One of ``polynomial`` (ascending coefficients), ``rational``
        (``(numerator, denominator)`` coefficient lists), ``exp`` (terms
        ``(a, b, c)`` meaning ``a*exp(b*r + c*r**2)``), ``power`` (``(a, k, e)``
        meaning ``a * r**k * (1 + r**2)**e``) or ``spline`` (``(radii, values)``).
    params : tuple
        Kind-specific coefficients.
    r_max : float
        Validity radius; analytic presets extend to infinity.
    name : str
        Preset tag, informational; also used to recognize closed-form distances.
    scale : float
        Constant factor applied to the value and every derivative.
    """

    kind: str
    params: tuple
    r_max: float = math.inf
    name: str = ""
    scale: float = 1.0
    meta: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown profile kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "params", _freeze(self.params))
        if not (self.r_max > 0):
            raise DomainError("r_max must be positive")
        if self.kind == "spline":
            radii, values = self.params
            if len(radii) < 4 or len(radii) != len(values):
                raise DomainError("spline profile needs >= 4 (r, value) pairs of equal length")
            if np.any(np.diff(radii) <= 0):
                raise DomainError("spline radii must be strictly increasing")

    @property
    def lower_trust(self) -> bool:
        return self.kind == "spline"

    def expression(self):
        """Sympy expression in the symbol ``r`` (analytic kinds only)."""
        p = self.params
        if self.kind == "polynomial":
            expr = sum(sympy.Float(c) * _R**i for i, c in enumerate(p))
        elif self.kind == "rational":
            num, den = p
            expr = sum(sympy.Float(c) * _R**i for i, c in enumerate(num)) / sum(
                sympy.Float(c) * _R**i for i, c in enumerate(den)
            )
        elif self.kind == "exp":
            expr = sum(
                sympy.Float(a) * sympy.exp(sympy.Float(b) * _R + sympy.Float(c) * _R**2)
                for a, b, c in p
            )
        elif self.kind == "power":
            a, k, e = p
            expr = sympy.Float(a) * _R ** sympy.nsimplify(k) * (1 + _R**2) ** sympy.Float(e)
        else:
            raise DomainError("spline profiles have no symbolic expression")
        return sympy.Float(self.scale) * expr if self.scale != 1.0 else expr

    @cached_property
    def _funcs(self):
        if self.kind == "polynomial":
            poly = Polynomial(np.asarray(self.params, dtype=float) * self.scale)
            return tuple(poly.deriv(k) if k else poly for k in range(4))
        if self.kind == "spline":
            radii, values = self.params
            spl = CubicSpline(np.asarray(radii, float), self.scale * np.asarray(values, float))
            return tuple(spl.derivative(k) if k else spl for k in range(4))
        expr = self.expression()
        return tuple(
            sympy.lambdify(_R, sympy.diff(expr, _R, k), modules="numpy") for k in range(4)
        )

    def derivative(self, r, n: int = 1):
        if not 0 <= n <= 3:
            raise DomainError("derivatives available up to order 3")
        return _like(self._funcs[n](np.asarray(r, dtype=float)), r)

    def __call__(self, r):
        return self.derivative(r, 0)

    def d1(self, r):
        return self.derivative(r, 1)

    def d2(self, r):
        return self.derivative(r, 2)

    def d3(self, r):
        return self.derivative(r, 3)

    def derivs(self, r):
        """Value and first three derivatives at ``r``."""
        return tuple(self.derivative(r, k) for k in range(4))

    def scaled(self, factor: float) -> "RadialProfile":
        return replace(self, scale=self.scale * float(factor))

    def is_constant(self) -> bool:
        if self.kind == "polynomial":
            return all(c == 0 for c in self.params[1:])
        return False


# --- presets -----------------------------------------------------------------


def euclidean() -> RadialProfile:
    return RadialProfile("polynomial", (0.0, 1.0), name="euclidean")


def hyperbolic_like() -> RadialProfile:
    """sinh r, the warp of hyperbolic space."""
    return RadialProfile("exp", ((0.5, 1.0, 0.0), (-0.5, -1.0, 0.0)), name="hyperbolic_like")


def capped_power(beta: float = 0.5) -> RadialProfile:
    """r (1 + r^2)^((beta - 1)/2): smooth at the pole, grows like r^beta."""
    if not 0 < beta <= 1:
        raise DomainError("capped_power needs beta in (0, 1]")
    return RadialProfile("power", (1.0, 1, (beta - 1.0) / 2.0), name="capped_power", meta=(("beta", beta),))


def gaussian_density() -> RadialProfile:
    return RadialProfile("exp", ((1.0, 0.0, -0.5),), name="gaussian_density")


def power_density(q: float = 1.0) -> RadialProfile:
    """(1 + r^2)^(q/2)."""
    return RadialProfile("power", (1.0, 0, q / 2.0), name="power_density", meta=(("q", q),))


def const(value: float = 1.0) -> RadialProfile:
    if value <= 0:
        raise DomainError("const profile must be positive")
    return RadialProfile("polynomial", (float(value),), name="const", meta=(("value", value),))


def gaussian_bump(base: float = 1.0, amp: float = 1.0, width: float = 0.5) -> RadialProfile:
    """base + amp * exp(-r^2 / (2 width^2)); a positive test function with f'(0) = 0."""
    if base <= 0 or base + amp <= 0 or width <= 0:
        raise DomainError("gaussian_bump must stay positive with positive width")
    return RadialProfile(
        "exp",
        ((base, 0.0, 0.0), (amp, 0.0, -0.5 / width**2)),
        name="gaussian_bump",
        meta=(("base", base), ("amp", amp), ("width", width)),
    )


def sphere_taylor() -> RadialProfile:
    """r - r^3/6, the cubic truncation of the round-sphere warp sin r."""
    return RadialProfile("polynomial", (0.0, 1.0, 0.0, -1.0 / 6.0), name="sphere_taylor")


PRESETS = {
    "euclidean": (euclidean, (), "warp phi(r) = r"),
    "hyperbolic_like": (hyperbolic_like, (), "warp phi(r) = sinh r"),
    "capped_power": (capped_power, ("beta",), "warp r (1+r^2)^((beta-1)/2), ~ r^beta at infinity"),
    "sphere_taylor": (sphere_taylor, (), "warp r - r^3/6 (valid near the pole)"),
    "gaussian_density": (gaussian_density, (), "density exp(-r^2/2)"),
    "power_density": (power_density, ("q",), "density (1+r^2)^(q/2)"),
    "const": (const, ("value",), "constant profile"),
    "gaussian_bump": (gaussian_bump, ("base", "amp", "width"), "base + amp exp(-r^2/(2 width^2))"),
}


def preset(name: str, **params) -> RadialProfile:
    """Build a named preset; unknown names or parameters raise ``DomainError``."""
    try:
        builder, allowed, _ = PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None
    extra = set(params) - set(allowed)
    if extra:
        raise DomainError(f"preset {name!r} takes {allowed or 'no parameters'}, got {sorted(extra)}")
    return builder(**{k: float(v) for k, v in params.items()})


def load_spline_csv(path, r_max=None, name="spline") -> RadialProfile:
    """Spline profile from a CSV with columns ``r, value`` (header optional)."""
    radii, values = [], []
    with open(Path(path), newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                r, v = float(row[0]), float(row[1])
            except ValueError:
                continue  # header
            radii.append(r)
            values.append(v)
    if r_max is None:
        r_max = radii[-1] if radii else 1.0
    return RadialProfile("spline", (tuple(radii), tuple(values)), r_max=r_max, name=name)
