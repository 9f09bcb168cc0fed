"""Volume-integral forward solver for one period of the structure.

Discretization
--------------
In (x1, x2) fields are sampled at the cell centres of an n1 x n2 grid on
(-pi, pi)^2 and expanded in the quasiperiodic Fourier modes alpha_m, which
diagonalize the lattice Green's function exactly.  In x3 the slab
(-L, L) that contains the scatterer is split into n3 cells; sources are
piecewise constant in x3 and the one-dimensional kernels of each Fourier
mode are integrated over the cells in closed form.  The resulting Toeplitz
matrices are applied by circulant embedding with period 2 * (2L), so the
operators act through Fourier multipliers on an (n1, n2, 2 n3) grid.

The unknown of the second-kind equation is the pair

    h1 = f + curl u,    h2 = g + u

on the grid points inside D.  Sources are (T, s) = (Q h1 - ik mu^-1 xi h2,
ik xi mu^-1 h1 + k^2 (P - xi mu^-1 xi) h2) and the scattered field follows
from

    u = A s / k^2 + B T,    curl u = B s + A T + T,

with A = (k^2 + grad div) G* and B = curl G*.  Because every kernel is
integrated exactly, the anti-Hermitian part of this discrete operator is a
sum of rank-one plane-wave terms over the propagating modes, which keeps
Im(WN) positive semidefinite at any resolution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import AliasingError, NoConvergence, PlaneMismatch
from .incident import PlaneWaveLabel, polarization_vectors
from .lattice import LatticeParams, beta_from_alpha, check_wood
from .materials import MaterialCoefficients

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
RESTART = 50
MAX_ITER = 2000


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SolverGrid:
    """Collocation grid: cell centres in (-pi, pi)^2 x (-half_height, half_height)."""

    n1: int
    n2: int
    n3: int
    half_height: float

    def __post_init__(self):
        for name in ("n1", "n2", "n3"):
            n = getattr(self, name)
            if not _is_pow2(n):
                raise ValueError(f"{name}={n} must be a power of two")
        if not self.half_height > 0:
            raise ValueError("half_height must be positive")

    @property
    def rho(self) -> float:
        """Half-period of the x3 kernel periodization (= slab thickness)."""
        return 2 * self.half_height

    @property
    def dx(self):
        return 2 * np.pi / self.n1, 2 * np.pi / self.n2

    @property
    def dz(self) -> float:
        return 2 * self.half_height / self.n3

    @property
    def cell_volume(self) -> float:
        d1, d2 = self.dx
        return d1 * d2 * self.dz

    def x1(self):
        return inplane_coords(self.n1)

    def x2(self):
        return inplane_coords(self.n2)

    def x3(self):
        return -self.half_height + (np.arange(self.n3) + 0.5) * self.dz

    def mesh(self):
        return np.meshgrid(self.x1(), self.x2(), self.x3(), indexing="ij")

    @classmethod
    def for_geometry(cls, bounding_height: float, n: int = 32, n3: Optional[int] = None):
        return cls(n, n, n if n3 is None else n3, float(bounding_height))


def inplane_coords(n: int) -> np.ndarray:
    return -np.pi + (np.arange(n) + 0.5) * (2 * np.pi / n)


def fft_modes(n: int) -> np.ndarray:
    """Integer mode carried by each FFT index, covering -n/2+1 .. n/2."""
    q = np.arange(n)
    return np.where(q <= n // 2, q, q - n)


@dataclass
class FieldGrid:
    """Complex 3-vector field sampled on planes x3 = const of the in-plane grid.

    ``values`` has shape (3, n1, n2, len(x3)).
    """

    values: np.ndarray
    x3: np.ndarray
    alpha: Tuple[float, float]

    @property
    def n1(self):
        return self.values.shape[1]

    @property
    def n2(self):
        return self.values.shape[2]


def _sinc_half(beta, dz):
    """Cell average of exp(+-i beta x3) relative to its centre value."""
    x = np.asarray(beta, dtype=complex) * dz / 2
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1 - x * x / 6, np.sin(safe) / safe)


def _toeplitz_kernels(beta, dz, n3):
    """Cell-integrated x3 kernels for every in-plane mode.

    Returns t0, t1, t2 with shape beta.shape + (2 n3,), laid out as circulant
    first columns (entry d holds offset d, entry 2n3-d holds offset -d).
    """
    beta = np.asarray(beta, dtype=complex)[..., None]
    d = np.arange(-(n3 - 1), n3)
    tp = (d + 0.5) * dz
    tm = (d - 0.5) * dz

    def gam(t):
        return 1j * np.exp(1j * beta * np.abs(t)) / (2 * beta)

    def dgam(t):
        return -np.sign(t) * np.exp(1j * beta * np.abs(t)) / 2

    def anti(t):
        return np.sign(t) * (np.exp(1j * beta * np.abs(t)) - 1) / (2 * beta * beta)

    vals = (anti(tp) - anti(tm), gam(tp) - gam(tm), dgam(tp) - dgam(tm))
    out = []
    idx = np.mod(d, 2 * n3)
    for v in vals:
        c = np.zeros(beta.shape[:-1] + (2 * n3,), dtype=complex)
        c[..., idx] = v
        out.append(c)
    return out


@dataclass
class SpectralTables:
    """Fourier multipliers of A and B on the padded (n1, n2, 2 n3) grid."""

    k: float
    alpha: Tuple[float, float]
    grid: SolverGrid
    a1: np.ndarray  # (n1, n2) in-plane wavevector of each FFT index
    a2: np.ndarray
    beta: np.ndarray
    g0: np.ndarray  # (n1, n2, 2 n3) multipliers of the scalar kernel
    g1: np.ndarray  # ... of its x3 derivative
    g2: np.ndarray  # ... of its second x3 derivative (includes the delta)
    pre_phase: np.ndarray  # (n1, n2) exp(-i alpha . (x - x0))

    def symbol_A(self, q1, q2, r) -> np.ndarray:
        a1, a2 = self.a1[q1, q2], self.a2[q1, q2]
        g0, g1, g2 = self.g0[q1, q2, r], self.g1[q1, q2, r], self.g2[q1, q2, r]
        k2 = self.k**2
        return np.array([
            [(k2 - a1 * a1) * g0, -a1 * a2 * g0, 1j * a1 * g1],
            [-a1 * a2 * g0, (k2 - a2 * a2) * g0, 1j * a2 * g1],
            [1j * a1 * g1, 1j * a2 * g1, k2 * g0 + g2],
        ])

    def symbol_B(self, q1, q2, r) -> np.ndarray:
        a1, a2 = self.a1[q1, q2], self.a2[q1, q2]
        g0, g1 = self.g0[q1, q2, r], self.g1[q1, q2, r]
        v = (1j * a1 * g0, 1j * a2 * g0, g1)
        return np.array([
            [0, -v[2], v[1]],
            [v[2], 0, -v[0]],
            [-v[1], v[0], 0],
        ])

    # -- transforms ---------------------------------------------------------
    def _forward(self, v):
        """(C, n1, n2, n3) grid values -> padded spectra (C, n1, n2, 2 n3)."""
        n3 = self.grid.n3
        pad = np.zeros(v.shape[:-1] + (2 * n3,), dtype=complex)
        pad[..., :n3] = v * self.pre_phase[..., None]
        return np.fft.fftn(pad, axes=(-3, -2, -1))

    def _inverse(self, V):
        n3 = self.grid.n3
        out = np.fft.ifftn(V, axes=(-3, -2, -1))[..., :n3]
        return out * np.conj(self.pre_phase)[..., None]

    def _A_hat(self, V):
        a1, a2 = self.a1[..., None], self.a2[..., None]
        k2 = self.k**2
        g0v = self.g0 * V
        div_inplane = a1 * g0v[0] + a2 * g0v[1]
        g1v3 = self.g1 * V[2]
        out = np.empty_like(V)
        out[0] = k2 * g0v[0] - a1 * div_inplane + 1j * a1 * g1v3
        out[1] = k2 * g0v[1] - a2 * div_inplane + 1j * a2 * g1v3
        out[2] = 1j * self.g1 * (a1 * V[0] + a2 * V[1]) + k2 * g0v[2] + self.g2 * V[2]
        return out

    def _B_hat(self, V):
        a1, a2 = self.a1[..., None], self.a2[..., None]
        g0v = self.g0 * V
        g1v = self.g1 * V
        out = np.empty_like(V)
        out[0] = 1j * a2 * g0v[2] - g1v[1]
        out[1] = g1v[0] - 1j * a1 * g0v[2]
        out[2] = 1j * a1 * g0v[1] - 1j * a2 * g0v[0]
        return out

    def apply_A(self, v):
        return self._inverse(self._A_hat(self._forward(v)))

    def apply_B(self, v):
        return self._inverse(self._B_hat(self._forward(v)))

    def fields_from_sources(self, T, s):
        """(curl u, u) on the slab grid from sources T (curl part) and s (= k^2 S)."""
        Th = self._forward(T)
        Sh = self._forward(s)
        u = self._inverse(self._A_hat(Sh) / self.k**2 + self._B_hat(Th))
        curl_u = self._inverse(self._B_hat(Sh) + self._A_hat(Th)) + T
        return curl_u, u


def build_tables(params: LatticeParams, grid: SolverGrid, bounding_height: float | None = None) -> SpectralTables:
    if bounding_height is not None and bounding_height > grid.half_height:
        raise AliasingError(
            f"scatterer reaches |x3| = {bounding_height} but the solver slab only covers "
            f"|x3| < {grid.half_height} (periodization half-height rho = {grid.rho} "
            f"must be at least 2 * {bounding_height})"
        )
    m1 = fft_modes(grid.n1)
    m2 = fft_modes(grid.n2)
    a1 = (params.alpha[0] + m1)[:, None] * np.ones(grid.n2)[None, :]
    a2 = np.ones(grid.n1)[:, None] * (params.alpha[1] + m2)[None, :]
    beta = beta_from_alpha(params.k, a1, a2)
    check_wood(params.k, beta)
    t0, t1, t2 = _toeplitz_kernels(beta, grid.dz, grid.n3)
    g0, g1, g2 = (np.fft.fft(t, axis=-1) for t in (t0, t1, t2))
    d1, d2 = grid.dx
    j1 = np.arange(grid.n1) * d1
    j2 = np.arange(grid.n2) * d2
    pre = np.exp(-1j * (params.alpha[0] * j1[:, None] + params.alpha[1] * j2[None, :]))
    return SpectralTables(params.k, params.alpha, grid, a1, a2, beta, g0, g1, g2, pre)


# -- materials ----------------------------------------------------------------

def source_matrix(k: float, eps_r, mu_r_inv, xi) -> np.ndarray:
    """6x6 map (h1, h2) -> (T, s) for constant coefficients."""
    eps_r = np.asarray(eps_r, dtype=complex)
    mui = np.asarray(mu_r_inv, dtype=complex)
    xi = np.asarray(xi, dtype=complex)
    P = eps_r - np.eye(3)
    Q = np.eye(3) - mui
    out = np.zeros((6, 6), dtype=complex)
    out[:3, :3] = Q
    out[:3, 3:] = -1j * k * mui @ xi
    out[3:, :3] = 1j * k * xi @ mui
    out[3:, 3:] = k**2 * (P - xi @ mui @ xi)
    return out


def assemble_sources(coeffs: MaterialCoefficients, k: float, f, g, u, curl_u, points):
    """S and T at ``points`` (n, 3) from field values shaped (n, 3).

    S = (P - xi mu^-1 xi)(g + u) + (i/k) xi mu^-1 (f + curl u)
    T = Q (f + curl u) - ik mu^-1 xi (g + u)
    """
    pts = np.atleast_2d(points)
    eps, mui, xi = coeffs.evaluate(pts[:, 0], pts[:, 1], pts[:, 2])
    P = eps - np.eye(3)
    Q = np.eye(3) - mui
    h1 = np.asarray(f) + np.asarray(curl_u)
    h2 = np.asarray(g) + np.asarray(u)
    mv = lambda A, v: np.einsum("nij,nj->ni", A, v)  # noqa: E731
    S = mv(P - xi @ mui @ xi, h2) + (1j / k) * mv(xi @ mui, h1)
    T = mv(Q, h1) - 1j * k * mv(mui @ xi, h2)
    return S, T


# -- incident fields ----------------------------------------------------------

def incident_on_points(params: LatticeParams, label: PlaneWaveLabel, points, dz: float):
    """Cell-averaged (in x3) value and curl of a plane wave at ``points``."""
    m = np.asarray(label.m)
    a1 = params.alpha[0] + m[0]
    a2 = params.alpha[1] + m[1]
    beta = complex(beta_from_alpha(params.k, a1, a2))
    check_wood(params.k, beta)
    p1, p2 = polarization_vectors(params.k, a1, a2, beta)
    p = (p1, p2)[label.l - 1]
    pt = p * np.array([1, 1, -1])
    kp = np.array([a1, a2, beta])
    km = np.array([a1, a2, -beta])
    sc = _sinc_half(beta, dz)
    pts = np.atleast_2d(points)
    ep = (sc * np.exp(1j * (pts @ kp)))[:, None]
    em = (sc * np.exp(1j * (pts @ km)))[:, None]
    g = p * ep + label.sign * pt * em
    f = 1j * np.cross(kp, p) * ep + label.sign * 1j * np.cross(km, pt) * em
    return f, g


# -- Rayleigh coefficients ------------------------------------------------------

@dataclass
class RayleighCoefficients:
    """Rayleigh coefficients of all three components on x3 = +h and x3 = -h.

    ``plus`` and ``minus`` have shape (M*M, 3) over the modes of Z^2_M.
    """

    plus: np.ndarray
    minus: np.ndarray

    def seq4(self) -> np.ndarray:
        """(M*M, 4) tuples (u1+, u1-, u2+, u2-)."""
        return np.stack([self.plus[:, 0], self.minus[:, 0], self.plus[:, 1], self.minus[:, 1]], axis=1)

    def receiver_vector(self) -> np.ndarray:
        """Length 4 M^2 column in the receiver block order (u1+, u2+, u1-, u2-)."""
        return np.concatenate([self.plus[:, 0], self.plus[:, 1], self.minus[:, 0], self.minus[:, 1]])


def _mode_slots(M, n):
    """FFT indices of the modes -M/2+1..M/2 on an n-point axis."""
    if n < M:
        raise ValueError(f"in-plane grid size {n} cannot resolve truncation order M={M}")
    r = np.arange(-M // 2 + 1, M // 2 + 1)
    return np.mod(r, n)


def _inplane_coefficients(tables: SpectralTables, v):
    """Quasiperiodic Fourier coefficients over every FFT index; v is (..., n1, n2, n3)."""
    g = tables.grid
    x0 = inplane_coords(g.n1)[0], inplane_coords(g.n2)[0]
    post = np.exp(-1j * (tables.a1 * x0[0] + tables.a2 * x0[1]))
    coef = np.fft.fft2(v * tables.pre_phase[..., None], axes=(-3, -2)) / (g.n1 * g.n2)
    return coef * post[..., None]


def plane_coefficients(tables: SpectralTables, T, s, heights):
    """Fourier coefficients of (u1, u2, u3) on planes x3 = X outside the slab.

    Returns an array (len(heights), 3, n1, n2) indexed by FFT index.
    """
    g = tables.grid
    Th = _inplane_coefficients(tables, T)
    Sh = _inplane_coefficients(tables, s)
    beta = tables.beta
    z = g.x3()
    sc = _sinc_half(beta, g.dz)
    k2 = tables.k**2
    out = []
    for X in np.atleast_1d(heights):
        if abs(X) <= g.half_height:
            raise PlaneMismatch(f"plane x3 = {X} lies inside the source slab")
        sgn = 1.0 if X > 0 else -1.0
        w = np.exp(1j * beta[..., None] * np.abs(X - z)[None, None, :])
        Ts = (Th * w).sum(axis=-1)
        Ss = (Sh * w).sum(axis=-1)
        K = np.stack([tables.a1 + 0j, tables.a2 + 0j, sgn * beta])
        pref = 1j * g.dz * sc / (2 * beta)
        KdotS = (K * Ss).sum(axis=0)
        vec = Ss - K * KdotS / k2 + 1j * np.cross(K, Ts, axis=0)
        out.append(pref * vec)
    return np.array(out)


def rayleigh_from_sources(params: LatticeParams, tables: SpectralTables, T, s) -> RayleighCoefficients:
    """Rayleigh coefficients on x3 = +-h of the field radiated by (T, s)."""
    g = tables.grid
    c = plane_coefficients(tables, T, s, [params.h, -params.h])
    i1 = _mode_slots(params.M, g.n1)
    i2 = _mode_slots(params.M, g.n2)
    sel = c[:, :, i1[:, None], i2[None, :]].reshape(2, 3, -1)
    return RayleighCoefficients(plus=sel[0].T.copy(), minus=sel[1].T.copy())


def field_on_planes(tables: SpectralTables, T, s, heights) -> FieldGrid:
    """Scattered field sampled on full in-plane grids at the given heights."""
    g = tables.grid
    c = plane_coefficients(tables, T, s, heights)
    x0 = inplane_coords(g.n1)[0], inplane_coords(g.n2)[0]
    post = np.exp(1j * (tables.a1 * x0[0] + tables.a2 * x0[1]))
    vals = np.fft.ifft2(c * post, axes=(-2, -1)) * (g.n1 * g.n2)
    vals = vals * np.conj(tables.pre_phase)
    return FieldGrid(np.moveaxis(vals, 0, -1), np.asarray(heights, dtype=float), tables.alpha)


def rayleigh_extract(params: LatticeParams, u: FieldGrid, tol: float = 1e-9) -> RayleighCoefficients:
    """Rayleigh coefficients from samples of u on the planes x3 = +-h.

    The (1/4 pi^2) integral over the cell is evaluated by the discrete
    transform on the in-plane grid.
    """
    if tuple(u.alpha) != tuple(params.alpha):
        raise ValueError(f"field has quasimomentum {u.alpha}, expected {params.alpha}")
    idx = {}
    for sgn in (1, -1):
        hit = np.flatnonzero(np.abs(u.x3 - sgn * params.h) <= tol * max(1.0, params.h))
        if hit.size == 0:
            raise PlaneMismatch(f"no sample plane at x3 = {sgn * params.h}")
        idx[sgn] = hit[0]
    n1, n2 = u.n1, u.n2
    x1, x2 = inplane_coords(n1), inplane_coords(n2)
    a = params.alphas()
    E1 = np.exp(-1j * np.outer(a[:, 0], x1))
    E2 = np.exp(-1j * np.outer(a[:, 1], x2))
    out = {}
    for sgn, j in idx.items():
        plane = u.values[:, :, :, j]  # (3, n1, n2)
        out[sgn] = np.einsum("mi,cij,mj->mc", E1, plane, E2) / (n1 * n2)
    return RayleighCoefficients(plus=out[1], minus=out[-1])


# -- the solver ---------------------------------------------------------------

@dataclass
class ScatterResult:
    h1: np.ndarray  # f + curl u at the D points, (nD, 3)
    h2: np.ndarray  # g + u
    T: np.ndarray  # sources on the full slab grid, (3, n1, n2, n3)
    s: np.ndarray
    iterations: int
    residual: float

    def fields(self, tables: SpectralTables):
        """(curl u, u) of the scattered field on the slab grid."""
        return tables.fields_from_sources(self.T, self.s)


class ForwardSolver:
    """Second-kind volume integral equation on one period, solved by GMRES."""

    def __init__(self, params: LatticeParams, coeffs: MaterialCoefficients, grid: SolverGrid,
                 tol: float = DEFAULT_TOL, restart: int = RESTART, max_iter: int = MAX_ITER):
        self.params = params
        self.coeffs = coeffs
        self.grid = grid
        self.tol = tol
        self.restart = restart
        self.max_iter = max_iter
        self.tables = build_tables(params, grid, coeffs.geometry.bounding_height)
        X1, X2, X3 = grid.mesh()
        self.mask = coeffs.geometry.inside(X1, X2, X3)
        self.points = np.stack([X1[self.mask], X2[self.mask], X3[self.mask]], axis=1)
        self.matrix = source_matrix(params.k, coeffs.eps_r, coeffs.mu_r_inv, coeffs.xi)
        self.n_points = int(self.mask.sum())

    # sources on the D points -> full-grid arrays
    def _scatter_to_grid(self, sig):
        g = self.grid
        T = np.zeros((3, g.n1, g.n2, g.n3), dtype=complex)
        s = np.zeros_like(T)
        T[:, self.mask] = sig[:, :3].T
        s[:, self.mask] = sig[:, 3:].T
        return T, s

    def sources(self, h):
        """(T, s) on the D points from h = (h1, h2) shaped (nD, 6)."""
        return h @ self.matrix.T

    def _apply_gamma(self, sig):
        T, s = self._scatter_to_grid(sig)
        curl_u, u = self.tables.fields_from_sources(T, s)
        return np.concatenate([curl_u[:, self.mask].T, u[:, self.mask].T], axis=1)

    def operator(self, hvec):
        h = hvec.reshape(-1, 6)
        return (h - self._apply_gamma(self.sources(h))).ravel()

    def born(self, f, g):
        """First Born approximation of (curl u, u) on the D points."""
        return self._apply_gamma(self.sources(np.concatenate([f, g], axis=1)))

    def solve(self, f, g, tol: float | None = None) -> ScatterResult:
        """Solve for the total fields given incident (f, g) at the D points, each (nD, 3)."""
        tol = self.tol if tol is None else tol
        rhs = np.concatenate([f, g], axis=1).ravel()
        bnorm = np.linalg.norm(rhs)
        if self.n_points == 0 or bnorm == 0 or not np.any(self.matrix):
            h = rhs.reshape(-1, 6)
            T, s = self._scatter_to_grid(self.sources(h))
            return ScatterResult(h[:, :3], h[:, 3:], T, s, 0, 0.0)
        n = rhs.size
        op = LinearOperator((n, n), matvec=self.operator, dtype=complex)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = gmres(op, rhs, x0=rhs.copy(), rtol=tol, atol=0.0, restart=self.restart,
                        maxiter=max(1, self.max_iter // self.restart), callback=cb,
                        callback_type="pr_norm")
        res = np.linalg.norm(self.operator(x) - rhs) / bnorm
        if info != 0 and res > tol:
            raise NoConvergence(
                f"GMRES stopped after {count[0]} iterations with relative residual {res:.3e} > {tol:.1e}",
                iterations=count[0],
            )
        h = x.reshape(-1, 6)
        T, s = self._scatter_to_grid(self.sources(h))
        return ScatterResult(h[:, :3], h[:, 3:], T, s, count[0], float(res))

    def incident(self, label: PlaneWaveLabel):
        return incident_on_points(self.params, label, self.points, self.grid.dz)

    def solve_incident(self, label: PlaneWaveLabel, tol: float | None = None) -> ScatterResult:
        f, g = self.incident(label)
        return self.solve(f, g, tol)

    def rayleigh(self, result: ScatterResult) -> RayleighCoefficients:
        return rayleigh_from_sources(self.params, self.tables, result.T, result.s)


def scatter_solve(params: LatticeParams, coeffs: MaterialCoefficients, f: FieldGrid, g: FieldGrid,
                  tol: float = DEFAULT_TOL, grid: SolverGrid | None = None):
    """Solve for the scattered field given incident data on the solver grid.

    Returns (u, curl_u, iterations) with u and curl_u as FieldGrids on the
    slab collocation planes.
    """
    if grid is None:
        grid = SolverGrid(f.n1, f.n2, f.values.shape[-1], coeffs.geometry.bounding_height)
    solver = ForwardSolver(params, coeffs, grid, tol=tol)
    fv = f.values[:, solver.mask].T
    gv = g.values[:, solver.mask].T
    res = solver.solve(fv, gv)
    curl_u, u = res.fields(solver.tables)
    z = grid.x3()
    return FieldGrid(u, z, params.alpha), FieldGrid(curl_u, z, params.alpha), res.iterations
