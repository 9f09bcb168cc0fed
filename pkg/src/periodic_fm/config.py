"""Run configuration: a plain ``key = value`` file plus command-line overrides.

Values are numbers, names, lists or small arithmetic expressions such as
``pi/2`` or ``1+0.75j``.  ``#`` starts a comment.  The ``profile`` key
selects a base set of defaults (``desk`` or ``full``) that the remaining
keys override.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .errors import ParseError, ValidationError
from .lattice import LatticeParams
from .materials import (
    GEOMETRY_NAMES,
    MaterialCoefficients,
    preset_geometry,
    preset_materials,
    scaled_geometry,
)

_NAMES = {"pi": math.pi, "e": math.e, "j": 1j, "true": True, "false": False}
_FUNCS = {"sqrt": math.sqrt}
_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: operator.pow,
}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
        return node.value
    if isinstance(node, ast.Name) and node.id.lower() in _NAMES:
        return _NAMES[node.id.lower()]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval(node.operand))
    if isinstance(node, (ast.List, ast.Tuple)):
        return [_eval(e) for e in node.elts]
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
        return _FUNCS[node.func.id](_eval(node.args[0]))
    raise ValueError("unsupported expression")


def evaluate(text: str):
    """Evaluate a numeric expression without executing arbitrary code."""
    return _eval(ast.parse(text.strip(), mode="eval"))


@dataclass(frozen=True)
class RunConfig:
    k: float = math.pi
    alpha: Tuple[float, float] = (math.pi / 2, math.pi / 2)
    h: float = 1.0
    M: int = 8
    geometry: str = "balls"
    geometry_scale: float = 1.0
    material: str = "preset"
    eps_r: Optional[np.ndarray] = None
    mu_r_inv: Optional[np.ndarray] = None
    xi: Optional[np.ndarray] = None
    grid: int = 32
    grid3: Optional[int] = None
    tol: float = 1e-6
    workers: int = 1
    noise: float = 0.02
    seed: int = 0
    tau: float = 1e-2
    sampling: Tuple[int, int, int] = (16, 16, 16)
    sampling_height: Optional[float] = None
    p: Tuple[float, float, float] = tuple(np.ones(3) / math.sqrt(3))
    averaged_polarization: bool = False
    herglotz_weighting: bool = False
    image_weighting: str = "herglotz"
    w_convention: str = "derived"
    force: bool = False
    data: str = "nearfield.dat"
    output: str = "indicator"
    profile: str = "desk"

    def lattice(self) -> LatticeParams:
        return LatticeParams(self.k, self.alpha, self.h, self.M)

    def materials(self) -> MaterialCoefficients:
        geo = preset_geometry(self.geometry)
        if self.geometry_scale != 1.0:
            geo = scaled_geometry(geo, self.geometry_scale)
        if self.material == "preset":
            return preset_materials(geo)
        return MaterialCoefficients(geo, self.eps_r, self.mu_r_inv, self.xi)

    @property
    def height(self) -> float:
        return self.h if self.sampling_height is None else self.sampling_height


PROFILES = {
    "desk": {"M": 8, "grid": 32, "sampling": (16, 16, 16)},
    "full": {"M": 20, "grid": 32, "sampling": (32, 32, 32)},
}

_FIELD_NAMES = {f.name for f in fields(RunConfig)}
_ALIASES = {"alpha1": None, "alpha2": None, "delta": "noise", "mu_inv": "mu_r_inv"}


def _as_matrix(key, value, line):
    a = np.asarray(value, dtype=complex)
    if a.shape == (3,):
        return np.diag(a)
    if a.shape == (9,):
        return a.reshape(3, 3)
    if a.shape == (3, 3):
        return a
    raise ParseError("expected 3 diagonal entries or 9 entries", key, line)


def _coerce(key, raw, line):
    """Convert a raw string value to the type of the RunConfig field."""
    text = raw.strip()
    if key in ("geometry", "material", "data", "output", "profile", "image_weighting", "w_convention"):
        return text
    try:
        value = evaluate(text)
    except (SyntaxError, ValueError, TypeError, ZeroDivisionError, OverflowError):
        raise ParseError(f"cannot parse value {text!r}", key, line) from None
    try:
        if key in ("eps_r", "mu_r_inv", "xi"):
            return _as_matrix(key, value, line)
        if key in ("M", "grid", "grid3", "workers", "seed"):
            if isinstance(value, complex) or float(value) != int(value):
                raise ParseError(f"expected an integer, got {text!r}", key, line)
            return int(value)
        if key in ("force", "averaged_polarization", "herglotz_weighting"):
            return bool(value)
        if key == "sampling":
            v = value if isinstance(value, list) else [value] * 3
            if len(v) != 3:
                raise ParseError("sampling needs one or three counts", key, line)
            return tuple(int(x) for x in v)
        if key in ("p", "alpha"):
            v = [float(x) for x in value]
            return tuple(v)
        if isinstance(value, complex):
            raise ParseError(f"expected a real number, got {text!r}", key, line)
        return float(value)
    except (TypeError, ValueError):
        raise ParseError(f"value {text!r} has the wrong type", key, line) from None


def parse_text(text: str) -> dict:
    """Parse config text into a dict of typed overrides (unknown keys rejected)."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ParseError("expected 'key = value'", key or None, lineno)
        if key in ("alpha1", "alpha2"):
            out[key] = _coerce("k", value, lineno)
            continue
        key = _ALIASES.get(key, key)
        if key not in _FIELD_NAMES:
            raise ParseError("unknown key", key, lineno)
        out[key] = _coerce(key, value, lineno)
    return out


def build_config(overrides: dict) -> RunConfig:
    """Apply the profile, then the overrides, then validate."""
    o = dict(overrides)
    profile = o.get("profile", "desk")
    if profile not in PROFILES:
        raise ValidationError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")
    base = dict(PROFILES[profile])
    a = list(o.pop("alpha", RunConfig.alpha))
    if "alpha1" in o:
        a[0] = o.pop("alpha1")
    if "alpha2" in o:
        a[1] = o.pop("alpha2")
    base.update(o)
    base["alpha"] = (float(a[0]), float(a[1]))
    cfg = replace(RunConfig(), **base)
    validate(cfg)
    return cfg


def parse_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Read a config file (optional) and apply command-line overrides on top."""
    values = {}
    if path is not None:
        values.update(parse_text(Path(path).read_text()))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(values)


def validate(cfg: RunConfig) -> None:
    if not cfg.k > 0:
        raise ValidationError(f"k must be positive, got {cfg.k}")
    if not cfg.h > 0:
        raise ValidationError(f"h must be positive, got {cfg.h}")
    if cfg.M < 2 or cfg.M % 2:
        raise ValidationError(f"M must be an even integer >= 2, got {cfg.M}")
    if cfg.geometry not in GEOMETRY_NAMES:
        raise ValidationError(f"unknown geometry {cfg.geometry!r}; choose from {', '.join(GEOMETRY_NAMES)}")
    if not cfg.geometry_scale > 0:
        raise ValidationError("geometry_scale must be positive")
    height = preset_geometry(cfg.geometry).bounding_height * cfg.geometry_scale
    if not height < cfg.h:
        raise ValidationError(f"geometry {cfg.geometry!r} reaches |x3| = {height:g}, which must be below h = {cfg.h:g}")
    if cfg.material not in ("preset", "custom"):
        raise ValidationError("material must be 'preset' or 'custom'")
    if cfg.material == "custom" and any(v is None for v in (cfg.eps_r, cfg.mu_r_inv, cfg.xi)):
        raise ValidationError("custom material needs eps_r, mu_r_inv and xi")
    for name in ("grid",) + (("grid3",) if cfg.grid3 is not None else ()):
        n = getattr(cfg, name)
        if n < 2 or n & (n - 1):
            raise ValidationError(f"{name} must be a power of two, got {n}")
    if cfg.grid < cfg.M:
        raise ValidationError(f"solver grid {cfg.grid} cannot resolve M = {cfg.M} modes")
    if not cfg.tol > 0:
        raise ValidationError("tol must be positive")
    if cfg.noise < 0:
        raise ValidationError("noise level must be nonnegative")
    if cfg.tau < 0:
        raise ValidationError("tau must be nonnegative")
    if any(n < 1 for n in cfg.sampling):
        raise ValidationError("sampling counts must be positive")
    if not 0 < cfg.height <= cfg.h:
        raise ValidationError(f"sampling height must lie in (0, h], got {cfg.height}")
    if len(cfg.p) != 3 or not np.any(cfg.p):
        raise ValidationError("polarization p must be a nonzero 3-vector")
    if cfg.image_weighting not in ("herglotz", "none"):
        raise ValidationError("image_weighting must be 'herglotz' or 'none'")
    if cfg.w_convention not in ("derived", "printed"):
        raise ValidationError("w_convention must be 'derived' or 'printed'")
    if cfg.workers < 1:
        raise ValidationError("workers must be at least 1")
