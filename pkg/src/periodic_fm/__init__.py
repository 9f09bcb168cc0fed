"""Near-field data synthesis and Factorization-method imaging for bi-anisotropic
periodic structures."""

from .data import NearFieldMatrix, SolverOptions, add_noise, assemble_near_field, load, save
from .forward import FieldGrid, ForwardSolver, SolverGrid, SpectralTables, build_tables, scatter_solve
from .imaging import (
    EigenSystem,
    IndicatorGrid,
    SamplingGrid,
    apply_W,
    imaginary_part,
    picard_indicator,
    spectral_decompose,
    sweep_grid,
    test_sequence,
    w_block,
)
from .incident import PlaneWaveLabel, plane_wave, polarizations
from .lattice import LatticeParams, count_propagating, green_eval, green_rayleigh, mode_data
from .materials import check_assumptions, contrasts, preset_geometry, preset_materials

__version__ = "0.1.0"

__all__ = [
    "EigenSystem", "FieldGrid", "ForwardSolver", "IndicatorGrid", "LatticeParams", "NearFieldMatrix",
    "PlaneWaveLabel", "SamplingGrid", "SolverGrid", "SolverOptions", "SpectralTables",
    "add_noise", "apply_W", "assemble_near_field", "build_tables", "check_assumptions", "contrasts",
    "count_propagating", "green_eval", "green_rayleigh", "imaginary_part", "load", "mode_data",
    "picard_indicator", "plane_wave", "polarizations", "preset_geometry", "preset_materials", "save",
    "scatter_solve", "spectral_decompose", "sweep_grid", "test_sequence", "w_block",
]
