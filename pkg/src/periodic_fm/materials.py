"""Scatterer geometries, bi-anisotropic coefficients and assumption checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EmptySampleSet

I3 = np.eye(3, dtype=complex)

# Piecewise-constant coefficients used throughout the numerical experiments.
PRESET_EPS_R = np.diag([1 + 0.75j, 1 + 0.9j, 1 + 0.8j])
PRESET_MU_R_INV = np.diag([1 - 0.7j, 1 - 1j, 1 - 0.9j])
PRESET_XI = np.diag([0.01, 0.02, 0.05]).astype(complex)


def _wrap(x):
    """Reduce in-plane coordinates to the reference cell [-pi, pi)."""
    return np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi


@dataclass(frozen=True)
class Geometry:
    """Membership test for one period of the scatterer D.

    ``inside`` takes broadcastable coordinate arrays (x1, x2, x3) and returns
    a boolean array.  Boundary points are classified as outside.
    """

    name: str
    inside_fn: Callable = field(repr=False)
    bounding_height: float

    def inside(self, x1, x2, x3) -> np.ndarray:
        return np.asarray(self.inside_fn(_wrap(x1), _wrap(x2), np.asarray(x3, dtype=float)))

    def contains(self, point) -> bool:
        x1, x2, x3 = point
        return bool(self.inside(x1, x2, x3))


def _balls(x1, x2, x3):
    out = np.zeros(np.broadcast(x1, x2, x3).shape, dtype=bool)
    for c1 in (np.pi / 2, -np.pi / 2):
        for c2 in (np.pi / 2, -np.pi / 2):
            out |= (x1 - c1) ** 2 + (x2 - c2) ** 2 + x3**2 < 0.6**2
    return out


def _bars(x1, x2, x3):
    r2 = (np.pi / 6) ** 2
    out = (x1**2 + x3**2 < r2) | ((x1 - np.pi) ** 2 + x3**2 < r2) | ((x1 + np.pi) ** 2 + x3**2 < r2)
    return np.broadcast_to(out, np.broadcast(x1, x2, x3).shape)


def _cubes(x1, x2, x3):
    return (np.abs(x1) < np.pi / 2) & (np.abs(x2) < np.pi / 2) & (np.abs(x3) < 0.3)


def _strip_with_holes(x1, x2, x3):
    return (x1**2 + x2**2 > (np.pi / 2) ** 2) & (np.abs(x3) < 0.3)


_PRESETS = {
    "balls": (_balls, 0.6),
    "bars": (_bars, np.pi / 6),
    "cubes": (_cubes, 0.3),
    "strip_with_holes": (_strip_with_holes, 0.3),
}

GEOMETRY_NAMES = tuple(_PRESETS)


def preset_geometry(name: str) -> Geometry:
    try:
        fn, height = _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown geometry {name!r}; choose from {', '.join(_PRESETS)}") from None
    return Geometry(name=name, inside_fn=fn, bounding_height=float(height))


def scaled_geometry(base: Geometry, factor: float) -> Geometry:
    """Shrink (or grow) a geometry about the origin."""

    def fn(x1, x2, x3):
        return base.inside_fn(x1 / factor, x2 / factor, x3 / factor)

    return Geometry(f"{base.name}*{factor:g}", fn, base.bounding_height * factor)


@dataclass(frozen=True)
class MaterialCoefficients:
    """Piecewise-constant coefficients: fixed 3x3 values inside D, vacuum outside."""

    geometry: Geometry
    eps_r: np.ndarray
    mu_r_inv: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        for name in ("eps_r", "mu_r_inv", "xi"):
            a = np.asarray(getattr(self, name), dtype=complex)
            if a.shape != (3, 3):
                raise ValueError(f"{name} must be a 3x3 matrix, got shape {a.shape}")
            a = a.copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def evaluate(self, x1, x2, x3):
        """Coefficient fields at the given points, each shaped (..., 3, 3)."""
        mask = self.geometry.inside(x1, x2, x3)
        sel = mask[..., None, None]
        eps = np.where(sel, self.eps_r, I3)
        mui = np.where(sel, self.mu_r_inv, I3)
        xi = np.where(sel, self.xi, 0)
        return eps, mui, xi

    def interior_values(self):
        return self.eps_r, self.mu_r_inv, self.xi

    def scaled(self, s: float) -> "MaterialCoefficients":
        """Scale every contrast (P, Q and xi) by ``s``."""
        return MaterialCoefficients(
            self.geometry,
            I3 + s * (self.eps_r - I3),
            I3 - s * (I3 - self.mu_r_inv),
            s * self.xi,
        )


def preset_materials(geometry: Geometry) -> MaterialCoefficients:
    return MaterialCoefficients(geometry, PRESET_EPS_R, PRESET_MU_R_INV, PRESET_XI)


def vacuum(geometry: Geometry) -> MaterialCoefficients:
    return MaterialCoefficients(geometry, I3, I3, np.zeros((3, 3)))


@dataclass(frozen=True)
class Contrasts:
    P: np.ndarray
    Q: np.ndarray


def contrasts(coeffs: MaterialCoefficients, points=None) -> Contrasts:
    """P = eps_r - I and Q = I - mu_r^{-1}.

    Without ``points`` the interior (inside-D) values are returned as 3x3
    matrices; otherwise the fields are evaluated at the (n, 3) points.
    """
    if points is None:
        eps, mui = coeffs.eps_r, coeffs.mu_r_inv
    else:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        eps, mui, _ = coeffs.evaluate(pts[:, 0], pts[:, 1], pts[:, 2])
    return Contrasts(P=eps - I3, Q=I3 - mui)


@dataclass(frozen=True)
class AssumptionReport:
    C1: float
    C2: float
    frob_bound: float
    gamma1: float
    gamma2: float
    symmetric: bool
    xi_real: bool
    passes_a1: bool
    passes_a2: bool

    @property
    def coercivity_margin(self) -> float:
        return min(self.C1, self.C2) - 0.5 * (self.frob_bound**2 + 1)

    def lines(self):
        return [
            f"C1 (min eig of -Im mu_r^-1)           = {self.C1:.6g}",
            f"C2 (min eig of Im(eps_r - xi mu^-1 xi)) = {self.C2:.6g}",
            f"max |mu_r^-1 xi|_F                      = {self.frob_bound:.6g}",
            f"(|mu_r^-1 xi|_F^2 + 1)/2                = {0.5 * (self.frob_bound**2 + 1):.6g}",
            f"gamma1, gamma2                          = {self.gamma1:.6g}, {self.gamma2:.6g}",
            f"symmetric coefficients, real xi         = {self.symmetric}, {self.xi_real}",
            f"Fredholm condition                      : {'pass' if self.passes_a1 else 'FAIL'}",
            f"Coercivity (absorbing, small xi)        : {'pass' if self.passes_a2 else 'FAIL'}",
        ]


def _min_eig(sym_real):
    return float(np.linalg.eigvalsh(sym_real)[..., 0].min())


def check_assumptions(coeffs: MaterialCoefficients, sample_points) -> AssumptionReport:
    """Sample the pointwise inequalities behind the imaging theory.

    ``sample_points`` is an (n, 3) array of points that must lie inside D.
    """
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if pts.size == 0:
        raise EmptySampleSet("at least one sample point inside D is required")
    eps, mui, xi = coeffs.evaluate(pts[:, 0], pts[:, 1], pts[:, 2])
    return assumption_report(eps, mui, xi)


def assumption_report(eps, mui, xi) -> AssumptionReport:
    """The same checks on explicit coefficient samples shaped (n, 3, 3)."""
    eps = np.asarray(eps, dtype=complex).reshape(-1, 3, 3)
    mui = np.asarray(mui, dtype=complex).reshape(-1, 3, 3)
    xi = np.asarray(xi, dtype=complex).reshape(-1, 3, 3)
    if eps.shape[0] == 0:
        raise EmptySampleSet("at least one sample point inside D is required")
    tr = lambda a: np.swapaxes(a, -1, -2)  # noqa: E731
    symmetric = all(np.allclose(a, tr(a), atol=1e-14) for a in (eps, mui, xi))
    xi_real = bool(np.all(xi.imag == 0))
    xr = xi.real.astype(complex)
    eff = eps - xr @ mui @ xr
    mx = mui @ xr
    # Hermitian parts keep eigvalsh valid if a custom entry is not exactly symmetric.
    herm = lambda a: 0.5 * (a + tr(a))  # noqa: E731
    C1 = _min_eig(herm(-mui.imag))
    C2 = _min_eig(herm(eff.imag))
    gamma1 = _min_eig(herm(mui.real))
    gamma2 = _min_eig(herm(eff.real))
    frob = float(np.sqrt((np.abs(mx) ** 2).sum(axis=(-1, -2))).max())
    passes_a1 = symmetric and xi_real and gamma1 > 0 and gamma2 > 0 and frob < gamma1 * gamma2
    passes_a2 = C1 > 0 and C2 > 0 and 0.5 * (frob**2 + 1) <= min(C1, C2)
    return AssumptionReport(
        C1=C1, C2=C2, frob_bound=frob, gamma1=gamma1, gamma2=gamma2,
        symmetric=symmetric, xi_real=xi_real,
        passes_a1=bool(passes_a1), passes_a2=bool(passes_a2),
    )


def interior_sample(geometry: Geometry, n: int = 24) -> np.ndarray:
    """A few points inside D found on a coarse lattice over the unit cell."""
    g = (np.arange(n) + 0.5) / n
    x = -np.pi + 2 * np.pi * g
    z = geometry.bounding_height * (2 * g - 1)
    X1, X2, X3 = np.meshgrid(x, x, z, indexing="ij")
    mask = geometry.inside(X1, X2, X3)
    return np.stack([X1[mask], X2[mask], X3[mask]], axis=1)
