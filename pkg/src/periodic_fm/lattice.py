"""Quasiperiodic mode arithmetic and the lattice-sum Green's function.

Everything here lives on the unit cell (-pi, pi)^2 in (x1, x2), unbounded in
x3.  A mode m = (m1, m2) carries the in-plane wavevector
``alpha_m = (alpha1 + m1, alpha2 + m2, 0)`` and the vertical wavenumber
``beta_m``, which is positive for propagating modes and positive-imaginary
for evanescent ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DomainError, WoodAnomaly

WOOD_TOL = 1e-12


def mode_range(M: int) -> np.ndarray:
    """Integers -M/2+1, ..., M/2 (one axis of the truncated index set)."""
    return np.arange(-M // 2 + 1, M // 2 + 1)


def mode_indices(M: int) -> np.ndarray:
    """All m in Z^2_M as an (M*M, 2) int array, row-major with m1 slowest."""
    r = mode_range(M)
    m1, m2 = np.meshgrid(r, r, indexing="ij")
    return np.stack([m1.ravel(), m2.ravel()], axis=1)


def beta_from_alpha(k: float, a1, a2) -> np.ndarray:
    """Vertical wavenumber for in-plane wavevector (a1, a2), two-branch rule."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    d = k * k - (a1 * a1 + a2 * a2)
    return np.where(d >= 0, np.sqrt(np.abs(d)) + 0j, 1j * np.sqrt(np.abs(d)))


def check_wood(k: float, beta) -> None:
    beta = np.asarray(beta)
    bad = np.abs(beta) < WOOD_TOL * k
    if np.any(bad):
        raise WoodAnomaly(
            f"k = {k!r} is a Wood's anomaly for this quasimomentum "
            f"({int(bad.sum())} mode(s) with beta_m = 0)"
        )


@dataclass(frozen=True)
class LatticeParams:
    """Wavenumber, quasimomentum, measurement height and truncation order."""

    k: float
    alpha: Tuple[float, float]
    h: float
    M: int

    def __post_init__(self):
        object.__setattr__(self, "alpha", (float(self.alpha[0]), float(self.alpha[1])))
        if not self.k > 0:
            raise ValueError(f"wavenumber must be positive, got {self.k}")
        if not self.h > 0:
            raise ValueError(f"measurement height must be positive, got {self.h}")
        if int(self.M) != self.M or self.M < 2 or self.M % 2:
            raise ValueError(f"truncation order M must be an even integer >= 2, got {self.M}")
        object.__setattr__(self, "M", int(self.M))
        check_wood(self.k, self.betas())

    @property
    def n_modes(self) -> int:
        return self.M * self.M

    def modes(self) -> np.ndarray:
        return mode_indices(self.M)

    def alphas(self, modes=None) -> np.ndarray:
        """(n, 2) array of in-plane wavevectors alpha_m."""
        modes = self.modes() if modes is None else np.atleast_2d(modes)
        return modes + np.asarray(self.alpha)[None, :]

    def betas(self, modes=None) -> np.ndarray:
        a = self.alphas(modes)
        return beta_from_alpha(self.k, a[:, 0], a[:, 1])

    def propagating(self, modes=None) -> np.ndarray:
        a = self.alphas(modes)
        return np.hypot(a[:, 0], a[:, 1]) <= self.k


@dataclass(frozen=True)
class ModeData:
    alpha_m: np.ndarray
    beta_m: complex
    propagating: bool


def mode_data(params: LatticeParams, m) -> ModeData:
    m = np.asarray(m, dtype=int).reshape(2)
    a = np.array([params.alpha[0] + m[0], params.alpha[1] + m[1], 0.0])
    beta = complex(beta_from_alpha(params.k, a[0], a[1]))
    check_wood(params.k, beta)
    return ModeData(alpha_m=a, beta_m=beta, propagating=bool(np.hypot(a[0], a[1]) <= params.k))


def count_propagating(params: LatticeParams) -> int:
    return int(np.count_nonzero(params.propagating()))


def _square_modes(alpha, N):
    r = np.arange(-N, N + 1)
    return r + alpha[0], r + alpha[1]


def green_eval(params: LatticeParams, x, N: int | None = None) -> complex:
    """Truncated lattice sum of the alpha-quasiperiodic Helmholtz Green's function.

    Sums the modes with max(|m1|, |m2|) <= N (default 4*M).  The series only
    converges for x3 != 0.
    """
    x = np.asarray(x, dtype=float).reshape(3)
    if x[2] == 0:
        raise DomainError("the Green's function series diverges on the plane x3 = 0")
    N = 4 * params.M if N is None else int(N)
    if N < params.M:
        raise ValueError(f"truncation N={N} must be at least M={params.M}")
    a1, a2 = _square_modes(params.alpha, N)
    A1, A2 = np.meshgrid(a1, a2, indexing="ij")
    beta = beta_from_alpha(params.k, A1, A2)
    check_wood(params.k, beta)
    terms = np.exp(1j * (A1 * x[0] + A2 * x[1] + beta * abs(x[2]))) / beta
    return complex(1j / (8 * np.pi**2) * terms.sum())


def green_on_plane(params: LatticeParams, x1, x2, x3: float, z=(0.0, 0.0, 0.0), N: int | None = None):
    """G_k(x - z) on the tensor grid x1 x x2 at height x3, via separable sums.

    Returns an array of shape (len(x1), len(x2)).
    """
    z = np.asarray(z, dtype=float)
    t = x3 - z[2]
    if t == 0:
        raise DomainError("the Green's function series diverges when x3 = z3")
    N = 4 * params.M if N is None else int(N)
    a1, a2 = _square_modes(params.alpha, N)
    A1, A2 = np.meshgrid(a1, a2, indexing="ij")
    beta = beta_from_alpha(params.k, A1, A2)
    check_wood(params.k, beta)
    coef = 1j / (8 * np.pi**2) * np.exp(1j * beta * abs(t)) / beta
    E1 = np.exp(1j * np.outer(np.asarray(x1) - z[0], a1))
    E2 = np.exp(1j * np.outer(np.asarray(x2) - z[1], a2))
    return E1 @ coef @ E2.T


def green_rayleigh(params: LatticeParams, m, z, sign: int) -> complex:
    """Rayleigh coefficient of G_k(. - z) on the plane x3 = sign*h.

    Closed form (i / (8 pi^2 beta_m)) exp(-i alpha_m . z) exp(i beta_m (h - sign*z3)).
    """
    z = np.asarray(z, dtype=float).reshape(3)
    if abs(z[2]) >= params.h:
        raise DomainError(f"|z3| = {abs(z[2])} must be below the measurement height {params.h}")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    md = mode_data(params, m)
    b = md.beta_m
    phase = md.alpha_m[0] * z[0] + md.alpha_m[1] * z[1]
    return complex(1j / (8 * np.pi**2 * b) * np.exp(-1j * phase) * np.exp(1j * b * (params.h - sign * z[2])))


def green_rayleigh_all(params: LatticeParams, z: np.ndarray):
    """Vectorized Rayleigh coefficients for many sampling points.

    ``z`` has shape (npts, 3).  Returns (G_plus, G_minus), each (npts, M*M)
    over the modes of ``params`` in the standard order.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if np.any(np.abs(z[:, 2]) >= params.h):
        raise DomainError("sampling points must satisfy |z3| < h")
    a = params.alphas()
    b = params.betas()
    base = 1j / (8 * np.pi**2 * b)[None, :] * np.exp(-1j * (z[:, :2] @ a.T))
    gp = base * np.exp(1j * b[None, :] * (params.h - z[:, 2:3]))
    gm = base * np.exp(1j * b[None, :] * (params.h + z[:, 2:3]))
    return gp, gm

