"""Near-field data matrix: assembly, noise and the on-disk format.

File format (version 1)
-----------------------
A UTF-8 text header of ``key = value`` lines, starting with the magic line
``PERIODIC-FM NEARFIELD`` and ending with ``end_header``, followed by the
matrix as little-endian float64 (real, imaginary) pairs in row-major order.
Header keys: version, M, k, alpha1, alpha2, h, noise_level, weighting,
mode_order, rows, cols.  Floats are written with ``repr`` so they round-trip.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import FormatError, PeriodicFMError, TruncatedFile
from .forward import DEFAULT_TOL, ForwardSolver, SolverGrid
from .incident import INCIDENT_CHANNELS, PlaneWaveLabel, column_scaling
from .lattice import LatticeParams
from .materials import Geometry, MaterialCoefficients

log = logging.getLogger(__name__)

MAGIC = "PERIODIC-FM NEARFIELD"
VERSION = 1
MODE_ORDER = "row-major (m1 slowest) over -M/2+1..M/2; rows (u1+,u2+,u1-,u2-), cols (1+,1-,2+,2-)"
WEIGHTINGS = ("raw", "herglotz")


@dataclass(frozen=True)
class NearFieldMatrix:
    entries: np.ndarray
    params: LatticeParams
    noise_level: float = 0.0
    weighting: str = "raw"

    def __post_init__(self):
        n = 4 * self.params.n_modes
        if self.entries.shape != (n, n):
            raise ValueError(f"near-field matrix must be {n}x{n}, got {self.entries.shape}")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")

    def herglotz_weighted(self) -> "NearFieldMatrix":
        """Fold the weights 1/(beta_m w_m^sign) into the columns."""
        if self.weighting == "herglotz":
            return self
        return replace(self, entries=self.entries * column_scaling(self.params)[None, :], weighting="herglotz")


def incident_labels(params: LatticeParams):
    """Column order of the data matrix."""
    return [PlaneWaveLabel((int(m[0]), int(m[1])), l, s) for l, s in INCIDENT_CHANNELS for m in params.modes()]


@dataclass(frozen=True)
class SolverOptions:
    n: int = 32
    n3: Optional[int] = None
    tol: float = DEFAULT_TOL
    workers: int = 1
    weighting: str = "raw"


def assemble_near_field(params: LatticeParams, coeffs: MaterialCoefficients, geometry: Geometry | None = None,
                        options: SolverOptions = SolverOptions(),
                        progress: Callable[[int, PlaneWaveLabel, int], None] | None = None) -> NearFieldMatrix:
    """One forward solve per incident wave; column j holds its receiver vector."""
    if geometry is not None and geometry is not coeffs.geometry:
        coeffs = MaterialCoefficients(geometry, coeffs.eps_r, coeffs.mu_r_inv, coeffs.xi)
    height = coeffs.geometry.bounding_height
    if height >= params.h:
        raise ValueError(f"scatterer height {height} must be below the measurement height {params.h}")
    grid = SolverGrid.for_geometry(height, options.n, options.n3)
    solver = ForwardSolver(params, coeffs, grid, tol=options.tol)
    labels = incident_labels(params)
    log.info("assembling %d columns on a %dx%dx%d grid (%d unknowns)", len(labels),
             grid.n1, grid.n2, grid.n3, 6 * solver.n_points)

    def column(j):
        lab = labels[j]
        try:
            res = solver.solve_incident(lab)
        except PeriodicFMError as exc:
            raise type(exc)(f"incident wave m={lab.m} l={lab.l} sign={lab.sign:+d}: {exc}") from exc
        if progress is not None:
            progress(j, lab, res.iterations)
        return solver.rayleigh(res).receiver_vector()

    if options.workers > 1:
        with ThreadPoolExecutor(options.workers) as ex:
            cols = list(ex.map(column, range(len(labels))))
    else:
        cols = [column(j) for j in range(len(labels))]
    mat = NearFieldMatrix(np.stack(cols, axis=1), params, 0.0, "raw")
    return mat.herglotz_weighted() if options.weighting == "herglotz" else mat


def add_noise(matrix: NearFieldMatrix, delta: float, seed: int) -> NearFieldMatrix:
    """N + delta X/|X|_F |N|_F with Re X, Im X uniform on (-1, 1)."""
    if delta < 0:
        raise ValueError("noise level must be nonnegative")
    if delta == 0:
        return matrix
    rng = np.random.default_rng(seed)
    shape = matrix.entries.shape
    X = rng.uniform(-1, 1, shape) + 1j * rng.uniform(-1, 1, shape)
    N = matrix.entries
    noisy = N + delta * (X / np.linalg.norm(X)) * np.linalg.norm(N)
    return replace(matrix, entries=noisy, noise_level=float(delta))


def _header(matrix: NearFieldMatrix) -> str:
    p = matrix.params
    n = matrix.entries.shape[0]
    lines = [
        MAGIC,
        f"version = {VERSION}",
        f"M = {p.M}",
        f"k = {p.k!r}",
        f"alpha1 = {p.alpha[0]!r}",
        f"alpha2 = {p.alpha[1]!r}",
        f"h = {p.h!r}",
        f"noise_level = {float(matrix.noise_level)!r}",
        f"weighting = {matrix.weighting}",
        f"mode_order = {MODE_ORDER}",
        f"rows = {n}",
        f"cols = {n}",
        "end_header",
    ]
    return "\n".join(lines) + "\n"


def save(matrix: NearFieldMatrix, path) -> None:
    body = np.ascontiguousarray(matrix.entries, dtype="<c16").view("<f8")
    with open(path, "wb") as fh:
        fh.write(_header(matrix).encode("utf-8"))
        fh.write(body.tobytes())


def load(path) -> NearFieldMatrix:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic = MAGIC.encode() + b"\n"
    if not raw.startswith(magic):
        raise FormatError(f"{os.fspath(path)}: not a near-field data file (bad magic)")
    end = raw.find(b"\nend_header\n")
    if end < 0:
        raise FormatError(f"{os.fspath(path)}: header has no end_header line")
    head = raw[len(magic):end].decode("utf-8", errors="replace")
    body = raw[end + len(b"\nend_header\n"):]
    fields = {}
    for line in head.splitlines():
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"malformed header line {line!r}")
        fields[key.strip()] = value.strip()
    try:
        version = int(fields["version"])
    except (KeyError, ValueError):
        raise FormatError("header lacks a valid version") from None
    if version != VERSION:
        raise FormatError(f"unsupported format version {version} (this reader handles version {VERSION})")
    try:
        params = LatticeParams(float(fields["k"]), (float(fields["alpha1"]), float(fields["alpha2"])),
                               float(fields["h"]), int(fields["M"]))
        noise = float(fields["noise_level"])
        weighting = fields.get("weighting", "raw")
    except KeyError as exc:
        raise FormatError(f"header missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise FormatError(f"bad header value: {exc}") from None
    n = 4 * params.n_modes
    for key in ("rows", "cols"):
        if key in fields and int(fields[key]) != n:
            raise FormatError(f"header {key} = {fields[key]} disagrees with M = {params.M}")
    expected = n * n * 16
    if len(body) != expected:
        raise TruncatedFile(f"body has {len(body)} bytes, expected {expected} for M = {params.M}")
    entries = np.frombuffer(body, dtype="<f8").view("<c16").reshape(n, n).astype(complex)
    return NearFieldMatrix(entries, params, noise, weighting)
