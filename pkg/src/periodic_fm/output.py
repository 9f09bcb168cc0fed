"""Indicator writers: legacy VTK structured points, CSV and a summary file."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .imaging import IndicatorGrid

VTK_FORMAT_VERSION = 1


@dataclass
class Volume:
    dims: tuple
    origin: np.ndarray
    spacing: np.ndarray
    values: np.ndarray  # shape dims, index order (x, y, z)
    title: str = ""


def _spacing(axis):
    return float(axis[1] - axis[0]) if len(axis) > 1 else 1.0


def write_vtk(ind: IndicatorGrid, path) -> None:
    x, y, z = (np.asarray(a, dtype=float).tolist() for a in ind.axes())
    v = ind.values
    meta = " ".join(f"{k}={v!s}".replace(" ", "") for k, v in ind.metadata.items())
    lines = [
        "# vtk DataFile Version 3.0",
        f"periodic-fm indicator format {VTK_FORMAT_VERSION} {meta}"[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {v.shape[0]} {v.shape[1]} {v.shape[2]}",
        f"ORIGIN {x[0]!r} {y[0]!r} {z[0]!r}",
        f"SPACING {_spacing(x)!r} {_spacing(y)!r} {_spacing(z)!r}",
        f"POINT_DATA {v.size}",
        "SCALARS indicator double 1",
        "LOOKUP_TABLE default",
    ]
    # VTK orders points with x varying fastest.
    lines.extend(repr(float(a)) for a in v.ravel(order="F"))
    Path(path).write_text("\n".join(lines) + "\n")


def load_volume(path) -> Volume:
    lines = Path(path).read_text().splitlines()
    if len(lines) < 10 or not lines[0].startswith("# vtk DataFile"):
        raise FormatError(f"{path}: not a legacy VTK file")
    if lines[2].strip() != "ASCII" or lines[3].strip() != "DATASET STRUCTURED_POINTS":
        raise FormatError(f"{path}: only ASCII structured points are supported")
    try:
        dims = tuple(int(t) for t in lines[4].split()[1:4])
        origin = np.array([float(t) for t in lines[5].split()[1:4]])
        spacing = np.array([float(t) for t in lines[6].split()[1:4]])
        count = int(lines[7].split()[1])
        vals = np.array([float(t) for t in lines[10:10 + count]])
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed header or data ({exc})") from None
    if len(dims) != 3 or count != int(np.prod(dims)) or vals.size != count:
        raise FormatError(f"{path}: expected {count} values for dimensions {dims}, found {vals.size}")
    return Volume(dims, origin, spacing, vals.reshape(dims, order="F"), lines[1])


def write_csv(ind: IndicatorGrid, path) -> None:
    X, Y, Z = np.meshgrid(*ind.axes(), indexing="ij")
    rows = ["x,y,z,value"]
    for a, b, c, v in zip(X.ravel().tolist(), Y.ravel().tolist(), Z.ravel().tolist(), ind.values.ravel().tolist()):
        rows.append(f"{a!r},{b!r},{c!r},{v!r}")
    Path(path).write_text("\n".join(rows) + "\n")


def summary_lines(ind: IndicatorGrid):
    v = ind.values
    imax = np.unravel_index(np.argmax(v), v.shape)
    x, y, z = (np.asarray(a, dtype=float).tolist() for a in ind.axes())
    vmax = float(v.max())
    lines = [
        f"max_value = {vmax!r}",
        f"max_location = ({x[imax[0]]!r}, {y[imax[1]]!r}, {z[imax[2]]!r})",
        f"isovalue = {vmax / 3!r}",
        f"nodes = {v.size}",
    ]
    lines += [f"{k} = {val}" for k, val in ind.metadata.items()]
    return lines


def write_summary(ind: IndicatorGrid, path) -> None:
    Path(path).write_text("\n".join(summary_lines(ind)) + "\n")


def write_outputs(ind: IndicatorGrid, prefix) -> dict:
    """Write <prefix>.vtk, <prefix>.csv and <prefix>_summary.txt; returns the paths."""
    prefix = Path(prefix)
    if prefix.parent and not prefix.parent.exists():
        prefix.parent.mkdir(parents=True)
    paths = {
        "vtk": prefix.with_name(prefix.name + ".vtk"),
        "csv": prefix.with_name(prefix.name + ".csv"),
        "summary": prefix.with_name(prefix.name + "_summary.txt"),
    }
    write_vtk(ind, paths["vtk"])
    write_csv(ind, paths["csv"])
    write_summary(ind, paths["summary"])
    return paths
