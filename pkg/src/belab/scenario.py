"""Scenario files: flat ``dotted.key = value`` text, one assignment per line.

Example::

    # flat benchmark
    space.m = 2
    space.alpha = 1
    space.warp = euclidean
    space.density = const
    space.density.value = 1
    space.r_max = 1000
    domain.R = 1
    f = const
    checks = cd-scan, neumann, lemma1

Blank lines are ignored, and ``#`` starts a comment at the beginning of a
line or after whitespace.  Lists are comma
separated.  Preset parameters hang off the preset key
(``space.warp.beta = 0.5``); ``<profile>.file`` names a CSV spline.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ScenarioError
from .geometry import RotSymSpace
from .profiles import PRESETS, RadialProfile, load_spline_csv, preset

CHECKS = ("cd-scan", "bishop-gromov", "avr", "neumann", "lemma1", "transport", "inclusion",
          "riccati", "sobolev", "isoperimetric", "explore")

TOLERANCES = {
    "cd": 1e-12,
    "mono": 1e-9,
    "audit": 1e-7,
    "mean_curvature": 1e-9,
    "riccati": 1e-6,
    "neumann": 1e-8,
    "lemma1": 1e-8,
    "ar": 1e-9,
    "chain": 1e-9,
}

_INT, _FLOAT, _STR, _BOOL = "int", "float", "str", "bool"
_FLOATS, _STRS, _INTS = "floats", "strs", "ints"

# key -> (type, default)
SCHEMA = {
    "space.m": (_INT, None),
    "space.alpha": (_FLOAT, None),
    "space.r_max": (_FLOAT, 100.0),
    "space.warp": (_STR, "euclidean"),
    "space.density": (_STR, "const"),
    "domain.R": (_FLOAT, 1.0),
    "f": (_STR, "const"),
    "checks": (_STRS, ()),
    "seed": (_INT, 0),
    "output_dir": (_STR, ""),
    "cd.n": (_INT, 512),
    "cd.lo": (_FLOAT, None),
    "cd.hi": (_FLOAT, None),
    "bg.lo": (_FLOAT, None),
    "bg.hi": (_FLOAT, None),
    "bg.n": (_INT, 64),
    "mc.lo": (_FLOAT, 0.01),
    "mc.hi": (_FLOAT, None),
    "mc.n": (_INT, 400),
    "avr.K": (_INT, 8),
    "neumann.n": (_INT, 1001),
    "neumann.check_n": (_INT, 401),
    "transport.base": (_FLOATS, (0.5,)),
    "transport.r": (_FLOATS, (1.0,)),
    "transport.step": (_FLOAT, 1e-3),
    "riccati.base": (_FLOAT, 0.5),
    "riccati.T": (_FLOAT, 1.0),
    "riccati.step": (_FLOAT, 1e-3),
    "inclusion.r": (_FLOATS, (5.0, 10.0)),
    "inclusion.targets": (_INT, 64),
    "ar.n_s": (_INT, 64),
    "ar.n_theta": (_INT, 32),
    "sobolev.r": (_FLOATS, (10.0, 100.0)),
    "sobolev.r_limit": (_FLOAT, None),
    "sobolev.contact": (_BOOL, True),
    "explore.budget": (_INT, 16),
    "family.m": (_INTS, (2,)),
    "family.alpha": (_FLOATS, (1.0,)),
    "family.r_max": (_FLOAT, 1000.0),
    "family.warp": (_STRS, ("capped_power",)),
    "family.density": (_STRS, ("power_density",)),
}
SCHEMA.update({f"tol.{k}": (_FLOAT, v) for k, v in TOLERANCES.items()})

_PROFILE_KEYS = ("space.warp", "space.density", "f")


class _Entry:
    __slots__ = ("value", "line")

    def __init__(self, value, line):
        self.value, self.line = value, line


def _convert(kind, raw, where):
    try:
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _BOOL:
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if kind == _STR:
            return raw
        items = [x.strip() for x in raw.split(",") if x.strip()]
        if kind == _FLOATS:
            return tuple(float(x) for x in items)
        if kind == _INTS:
            return tuple(int(x) for x in items)
        return tuple(items)
    except ValueError:
        raise ScenarioError(f"{where}: cannot read {raw!r} as {kind}") from None


_COMMENT = re.compile(r"(^|\s)#.*$")


def parse_text(text: str, source: str = "<scenario>") -> dict:
    """Parse scenario text into ``{key: value}``; errors carry ``source:line``."""
    entries: dict[str, _Entry] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = _COMMENT.sub("", raw_line).strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise ScenarioError(f"{where}: expected 'key = value', got {line!r}")
        key, raw = (x.strip() for x in line.split("=", 1))
        if not key or not raw:
            raise ScenarioError(f"{where}: empty key or value")
        if key in entries:
            raise ScenarioError(f"{where}: duplicate key {key!r} (first set on line {entries[key].line})")
        if key in SCHEMA:
            entries[key] = _Entry(_convert(SCHEMA[key][0], raw, where), lineno)
            continue
        base, _, leaf = key.rpartition(".")
        if base in _PROFILE_KEYS or base in ("family.warp", "family.density"):
            kind = _STR if leaf == "file" else (_FLOATS if base.startswith("family.") else _FLOAT)
            entries[key] = _Entry(_convert(kind, raw, where), lineno)
            continue
        raise ScenarioError(f"{where}: unknown key {key!r}")
    return entries


def _profile_params(entries, base):
    return {k[len(base) + 1:]: e.value for k, e in entries.items()
            if k.startswith(base + ".") and k.count(".") == base.count(".") + 1}


def _build_profile(entries, base, name, source, root: Path):
    params = _profile_params(entries, base)
    line = entries[base].line if base in entries else 0
    where = f"{source}:{line}" if line else source
    if name == "spline" or "file" in params:
        path = params.pop("file", None)
        if path is None:
            raise ScenarioError(f"{where}: spline profile {base!r} needs {base}.file")
        r_max = params.pop("r_max", None)
        if params:
            raise ScenarioError(f"{where}: unexpected spline parameters {sorted(params)}")
        path = Path(path)
        if not path.is_absolute():
            path = root / path
        if not path.exists():
            raise ScenarioError(f"{where}: spline file {str(path)!r} not found")
        return load_spline_csv(path, r_max=r_max)
    if name not in PRESETS:
        raise ScenarioError(f"{where}: unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
    try:
        return preset(name, **params)
    except Exception as exc:  # noqa: BLE001 - reported as a diagnostic
        raise ScenarioError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class Scenario:
    """A validated scenario: the space, the ball ``K = B_R``, the test function and the run options."""

    space: RotSymSpace
    R: float
    f0: RadialProfile
    checks: tuple
    seed: int
    output_dir: str
    options: dict = field(default_factory=dict, compare=False)
    tolerances: dict = field(default_factory=dict, compare=False)
    canonical: dict = field(default_factory=dict, compare=False)
    entries: dict = field(default_factory=dict, compare=False, repr=False)
    source: str = ""

    def opt(self, key):
        return self.options[key]

    def tol(self, name, scale: float = 1.0):
        return self.tolerances[name] * scale


def _require(entries, key, source):
    if key not in entries and SCHEMA[key][1] is None:
        raise ScenarioError(f"{source}: missing required key {key!r}")


def _values(entries):
    out = {k: d for k, (_, d) in SCHEMA.items()}
    out.update({k: e.value for k, e in entries.items() if k in SCHEMA})
    return out


def _validate_common(entries, vals, source):
    for key in (k for k in entries if k.startswith("tol.")):
        if not vals[key] > 0:
            raise ScenarioError(f"{source}:{entries[key].line}: tolerance {key} must be positive")
    for key in ("checks",):
        for name in vals[key]:
            if name not in CHECKS:
                raise ScenarioError(f"{source}:{entries[key].line}: unknown check {name!r}; "
                                    f"known: {', '.join(CHECKS)}")


def build_scenario(entries: dict, source: str = "<scenario>", root: Path | None = None) -> Scenario:
    root = root or Path(".")
    for key in ("space.m", "space.alpha"):
        _require(entries, key, source)
    vals = _values(entries)
    _validate_common(entries, vals, source)
    warp = _build_profile(entries, "space.warp", vals["space.warp"], source, root)
    density = _build_profile(entries, "space.density", vals["space.density"], source, root)
    f0 = _build_profile(entries, "f", vals["f"], source, root)
    try:
        space = RotSymSpace(vals["space.m"], vals["space.alpha"], warp, density, vals["space.r_max"])
    except Exception as exc:  # noqa: BLE001
        raise ScenarioError(f"{source}: invalid space: {exc}") from None
    R = vals["domain.R"]
    if not 0 < R < space.r_max:
        line = entries["domain.R"].line if "domain.R" in entries else 0
        raise ScenarioError(f"{source}:{line}: domain.R = {R} must lie in (0, space.r_max)")
    canonical = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vals.items())}
    canonical.update({k: e.value for k, e in sorted(entries.items()) if k not in SCHEMA})
    return Scenario(
        space=space, R=R, f0=f0, checks=tuple(vals["checks"]), seed=vals["seed"],
        output_dir=vals["output_dir"],
        options={k: v for k, v in vals.items() if not k.startswith("tol.")},
        tolerances={k[4:]: v for k, v in vals.items() if k.startswith("tol.")},
        canonical=canonical, entries=entries, source=source)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror})") from None
    return build_scenario(parse_text(text, str(path)), str(path), path.parent)


# --- parameter families for the explorer --------------------------------------------


@dataclass(frozen=True)
class FamilyMember:
    m: int
    alpha: float
    warp: str
    warp_params: tuple
    density: str
    density_params: tuple
    r_max: float

    @property
    def label(self) -> str:
        wp = ",".join(f"{k}={v:g}" for k, v in self.warp_params)
        dp = ",".join(f"{k}={v:g}" for k, v in self.density_params)
        return f"m={self.m} alpha={self.alpha:g} warp={self.warp}({wp}) density={self.density}({dp})"

    def space(self) -> RotSymSpace:
        return RotSymSpace(self.m, self.alpha, preset(self.warp, **dict(self.warp_params)),
                           preset(self.density, **dict(self.density_params)), self.r_max)


def _grid(entries, base, name, source):
    if name not in PRESETS:
        raise ScenarioError(f"{source}: unknown preset {name!r} in {base}")
    allowed = PRESETS[name][1]
    params = {k: v for k, v in _profile_params(entries, base).items() if k in allowed}
    missing = [k for k in allowed if k not in params]
    if missing:
        raise ScenarioError(f"{source}: preset {name!r} needs {base}.{missing[0]} = <values>")
    keys = sorted(params)
    return [tuple(zip(keys, combo)) for combo in itertools.product(*(params[k] for k in keys))]


def family_members(entries: dict, source: str = "<family>") -> list:
    """Cartesian product of the ``family.*`` lists, in a fixed order."""
    vals = _values(entries)
    _validate_common(entries, vals, source)
    out = []
    for m, alpha in itertools.product(vals["family.m"], vals["family.alpha"]):
        for warp in vals["family.warp"]:
            for wp in _grid(entries, "family.warp", warp, source):
                for dens in vals["family.density"]:
                    for dp in _grid(entries, "family.density", dens, source):
                        out.append(FamilyMember(m, alpha, warp, wp, dens, dp, vals["family.r_max"]))
    if not out:
        raise ScenarioError(f"{source}: family is empty")
    return out


def load_family(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read family file ({exc.strerror})") from None
    entries = parse_text(text, str(path))
    return family_members(entries, str(path)), _values(entries)
