"""Factorization-method imaging: W, Im(WN), the Picard indicator and grid sweeps.

Layouts
-------
The near-field matrix uses the block layout of the data file: rows are four
blocks (u1+, u2+, u1-, u2-) of M*M modes each, columns are four blocks of
incident waves (l, sign) = (1,+), (1,-), (2,+), (2,-).  W maps per-mode
Rayleigh tuples (u1+, u1-, u2+, u2-) to per-mode coefficient tuples
(a1+, a1-, a2+, a2-), so ``apply_W`` permutes the rows of N to mode-major
tuples, applies the 4x4 blocks and writes the result in the column layout.
The product WN is then square in one index space and Im(WN) is Hermitian.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import DecompositionFailure, DimensionMismatch, DomainError, EmptySpectrum
from .incident import polarization_vectors
from .lattice import LatticeParams, check_wood, green_rayleigh_all, mode_data

log = logging.getLogger(__name__)

DEFAULT_TAU = 1e-2
DEFAULT_POLARIZATION = np.ones(3) / np.sqrt(3.0)

# Row blocks of the data matrix as (component, side).
RECEIVER_BLOCKS = ((1, +1), (2, +1), (1, -1), (2, -1))
# Per-mode Rayleigh tuple order (u1+, u1-, u2+, u2-).
TUPLE_ORDER = ((1, +1), (1, -1), (2, +1), (2, -1))


def w_star(params: LatticeParams, beta, propagating):
    """(w*+, w*-) for arrays of modes."""
    beta = np.asarray(beta, dtype=complex)
    ev = np.exp(-1j * beta * params.h)
    wp = np.where(propagating, ev, 1j)
    wm = np.where(propagating, 1j * ev, 1j)
    return wp, wm


def _blocks_derived(params, a, beta, prop):
    """Blocks making H* = W E hold for the weighted Herglotz operator.

    Built in (row: (l, sign), column: tuple order).  For a Rayleigh tuple of a
    field radiated from D, row (l, +) pairs the upward and downward data with
    the conjugated transverse part of p^(l); row (l, -) takes their
    difference, with the phases of the weights 1/(beta w^+-).
    """
    p1, p2 = polarization_vectors(params.k, a[:, 0], a[:, 1], beta)
    bconj = np.conj(beta)
    c = []
    for p in (p1, p2):
        pc = np.conj(p)
        c.append((pc[:, 0] - pc[:, 2] * a[:, 0] / bconj, pc[:, 1] - pc[:, 2] * a[:, 1] / bconj))
    ev = np.exp(-1j * beta * params.h)
    plus_w = np.where(prop, ev, 1j)
    minus_w = np.where(prop, -1j * ev, 1j)
    minus_up = np.where(prop, 1.0, -1.0)  # sign on the upward pair in row (l, -)
    n = len(beta)
    out = np.zeros((n, 4, 4), dtype=complex)
    for l in (0, 1):
        c1, c2 = c[l]
        # tuple order columns: u1+, u1-, u2+, u2-
        out[:, 2 * l, :] = plus_w[:, None] * np.stack([c1, c1, c2, c2], axis=1)
        out[:, 2 * l + 1, :] = minus_w[:, None] * np.stack(
            [minus_up * c1, -minus_up * c1, minus_up * c2, -minus_up * c2], axis=1)
    return 8 * np.pi**2 * out


def _blocks_printed(params, a, beta, prop):
    """The 4x4 array exactly as displayed, acting on (u1+, u1-, u2+, u2-)."""
    p1, p2 = polarization_vectors(params.k, a[:, 0], a[:, 1], beta)
    wp, wm = w_star(params, beta, prop)
    out = np.zeros((len(beta), 4, 4), dtype=complex)
    for r, (w, p, sgn) in enumerate(((wp, p1, 1), (wp, p2, 1), (wm, p1, -1), (wm, p2, -1))):
        pc = np.conj(p)
        out[:, r, :] = w[:, None] * np.stack([pc[:, 0], pc[:, 1], sgn * pc[:, 0], sgn * pc[:, 1]], axis=1)
    return 8 * np.pi**2 * out


CONVENTIONS = {"derived": _blocks_derived, "printed": _blocks_printed}


def w_blocks(params: LatticeParams, convention: str = "derived") -> np.ndarray:
    """All per-mode W blocks, shape (M*M, 4, 4), in the standard mode order."""
    try:
        fn = CONVENTIONS[convention]
    except KeyError:
        raise ValueError(f"unknown W convention {convention!r}") from None
    beta = params.betas()
    check_wood(params.k, beta)
    return fn(params, params.alphas(), beta, params.propagating())


def w_block(params: LatticeParams, m, convention: str = "derived") -> np.ndarray:
    md = mode_data(params, m)
    a = md.alpha_m[None, :2]
    return CONVENTIONS[convention](params, a, np.array([md.beta_m]), np.array([md.propagating]))[0]


# -- reindexing ---------------------------------------------------------------

def receiver_to_tuples(M: int) -> np.ndarray:
    """Permutation taking block-layout rows to mode-major (u1+, u1-, u2+, u2-) tuples.

    ``tuples = rows[perm]`` where tuple entry 4*j + t comes from block
    RECEIVER_BLOCKS.index(TUPLE_ORDER[t]) at mode j.
    """
    n = M * M
    blk = np.array([RECEIVER_BLOCKS.index(t) for t in TUPLE_ORDER])
    return (blk[None, :] * n + np.arange(n)[:, None]).ravel()


def incident_to_tuples(M: int) -> np.ndarray:
    """Permutation taking column-layout entries to mode-major (a1+, a1-, a2+, a2-) tuples."""
    n = M * M
    return (np.arange(4)[None, :] * n + np.arange(n)[:, None]).ravel()


def to_tuples(vec_or_rows, M: int, layout: str = "receiver"):
    perm = receiver_to_tuples(M) if layout == "receiver" else incident_to_tuples(M)
    return np.asarray(vec_or_rows)[perm]


def from_tuples(tuples, M: int, layout: str = "incident"):
    perm = receiver_to_tuples(M) if layout == "receiver" else incident_to_tuples(M)
    out = np.empty_like(np.asarray(tuples))
    out[perm] = tuples
    return out


def apply_blocks(blocks: np.ndarray, rows, M: int):
    """Apply per-mode blocks to receiver-layout rows; returns incident-layout rows."""
    rows = np.asarray(rows)
    n = M * M
    if rows.shape[0] != 4 * n:
        raise DimensionMismatch(f"expected {4 * n} rows for M={M}, got {rows.shape[0]}")
    t = to_tuples(rows, M, "receiver").reshape((n, 4) + rows.shape[1:])
    out = np.einsum("mij,mj...->mi...", blocks, t).reshape(rows.shape)
    return from_tuples(out, M, "incident")


def apply_W(params: LatticeParams, matrix, convention: str = "derived") -> np.ndarray:
    """W N for a data matrix (or vector) in block layout."""
    matrix = np.asarray(matrix)
    n = 4 * params.n_modes
    if matrix.shape[0] != n or (matrix.ndim == 2 and matrix.shape[1] != n):
        raise DimensionMismatch(f"matrix of shape {matrix.shape} does not match 4M^2 = {n}")
    return apply_blocks(w_blocks(params, convention), matrix, params.M)


def imaginary_part(matrix) -> np.ndarray:
    """(A - A^H) / 2i, symmetrized so the result is exactly Hermitian."""
    A = np.asarray(matrix)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"imaginary part needs a square matrix, got {A.shape}")
    B = (A - A.conj().T) / 2j
    return 0.5 * (B + B.conj().T)


# -- spectral decomposition -----------------------------------------------------

@dataclass(frozen=True)
class EigenSystem:
    """Retained spectral pairs; ``values`` descending, ``vectors`` as columns."""

    values: np.ndarray
    vectors: np.ndarray
    tau: float
    all_values: np.ndarray = field(repr=False)
    noisy: bool = False

    @property
    def retained_count(self) -> int:
        return int(self.values.size)

    def truncated(self, count: int) -> "EigenSystem":
        return EigenSystem(self.values[:count], self.vectors[:, :count], self.tau, self.all_values, self.noisy)


def spectral_decompose(matrix, tau: float = DEFAULT_TAU, noisy: bool = False) -> EigenSystem:
    """Eigen- (clean) or singular-value (noisy) decomposition with absolute threshold tau."""
    A = np.asarray(matrix)
    try:
        if noisy:
            U, s, _ = scipy.linalg.svd(A)
            vals, vecs = s, U
        else:
            w, V = scipy.linalg.eigh(A)
            order = np.argsort(w)[::-1]
            vals, vecs = w[order], V[:, order]
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DecompositionFailure(f"decomposition failed: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise DecompositionFailure("decomposition produced non-finite values")
    keep = vals >= tau
    return EigenSystem(vals[keep], vecs[:, keep], tau, vals, noisy)


def picard_indicator(eig: EigenSystem, w_psi) -> float:
    """P = 1 / sum_n |A_n|^2 / lambda_n with A_n = sum_j w_psi_j conj(phi_jn)."""
    if eig.retained_count == 0:
        raise EmptySpectrum(f"no spectral values above tau = {eig.tau}")
    return float(_picard_many(eig, np.asarray(w_psi)[:, None])[0])


def _picard_many(eig: EigenSystem, w_psi: np.ndarray) -> np.ndarray:
    A = eig.vectors.conj().T @ w_psi
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        s = (np.abs(A) ** 2 / eig.values[:, None]).sum(axis=0)
        out = np.where(np.isfinite(s) & (s > 0), 1.0 / s, 0.0)
    out[np.isinf(s)] = 0.0
    return out


# -- test sequences -----------------------------------------------------------

def test_sequences(params: LatticeParams, z, p) -> np.ndarray:
    """Rayleigh data of Psi_z = k^2 G(., z) p for many points.

    ``z`` is (npts, 3); returns (npts, 4M^2) in the receiver block layout.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if np.any(np.abs(z[:, 2]) >= params.h):
        raise DomainError("sampling points must satisfy |z3| < h")
    p = np.asarray(p, dtype=float)
    a = params.alphas()
    b = params.betas()
    gp, gm = green_rayleigh_all(params, z)
    k2 = params.k**2
    rows = []
    for sgn, G in ((1, gp), (-1, gm)):
        K = np.stack([a[:, 0] + 0j, a[:, 1] + 0j, sgn * b], axis=1)
        Kp = K @ p
        for comp in (0, 1):
            rows.append(G * (k2 * p[comp] - K[:, comp] * Kp)[None, :])
    # rows: (u1+, u2+, u1-, u2-)
    return np.concatenate(rows, axis=1)


def test_sequence(params: LatticeParams, z, p) -> np.ndarray:
    """Per-mode tuples (Psi1+, Psi1-, Psi2+, Psi2-), shape (M*M, 4)."""
    v = test_sequences(params, z, p)[0]
    return to_tuples(v, params.M, "receiver").reshape(-1, 4)


# -- sweep ----------------------------------------------------------------------

@dataclass(frozen=True)
class SamplingGrid:
    """Cell-centred sampling nodes over (-pi, pi)^2 x (-height, height)."""

    n1: int
    n2: int
    n3: int
    height: float
    lo12: float = -np.pi
    hi12: float = np.pi

    def axes(self):
        def cc(n, lo, hi):
            return lo + (np.arange(n) + 0.5) * (hi - lo) / n

        return (cc(self.n1, self.lo12, self.hi12), cc(self.n2, self.lo12, self.hi12),
                cc(self.n3, -self.height, self.height))

    def points(self) -> np.ndarray:
        x, y, z = self.axes()
        X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    @property
    def shape(self):
        return (self.n1, self.n2, self.n3)


@dataclass
class IndicatorGrid:
    grid: SamplingGrid
    values: np.ndarray  # shape grid.shape
    metadata: dict

    def axes(self):
        return self.grid.axes()


def sweep_grid(params: LatticeParams, eig: EigenSystem, grid: SamplingGrid, p=None,
               averaged: bool = False, convention: str = "derived", workers: int = 1,
               chunk: int = 512, metadata: Optional[dict] = None) -> IndicatorGrid:
    """Picard indicator at every sampling node."""
    if eig.retained_count == 0:
        raise EmptySpectrum(f"no spectral values above tau = {eig.tau}")
    if grid.height > params.h:
        raise DomainError(f"sampling height {grid.height} exceeds h = {params.h}")
    pols = [np.eye(3)[i] for i in range(3)] if averaged else [
        DEFAULT_POLARIZATION if p is None else np.asarray(p, dtype=float)]
    blocks = w_blocks(params, convention)
    pts = grid.points()
    starts = range(0, len(pts), chunk)

    def work(i):
        z = pts[i:i + chunk]
        total = np.zeros(len(z))
        for pol in pols:
            seq = test_sequences(params, z, pol).T  # (4M^2, npts)
            total += _picard_many(eig, apply_blocks(blocks, seq, params.M))
        return total

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(i) for i in starts]
    vals = np.concatenate(parts).reshape(grid.shape)
    meta = dict(M=params.M, k=params.k, alpha=params.alpha, tau=eig.tau,
                polarization="averaged" if averaged else tuple(pols[0]))
    meta.update(metadata or {})
    return IndicatorGrid(grid, vals, meta)


def contrast_ratio(ind: IndicatorGrid, inside_mask: np.ndarray) -> Tuple[float, bool]:
    """(mean inside / mean outside, whether the maximum lies inside)."""
    v = ind.values
    ratio = float(v[inside_mask].mean() / v[~inside_mask].mean())
    return ratio, bool(inside_mask.ravel()[np.argmax(v)])


# Keep pytest from collecting these when tests import them by name.
test_sequence.__test__ = False
test_sequences.__test__ = False
