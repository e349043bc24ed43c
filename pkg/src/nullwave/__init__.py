"""Pseudo-spectral experiments for 2+1 dimensional wave equations with quadratic null forms."""
from .grid import GridField, PeriodicGrid, spatial_derivatives
from .nullform import (
    MINKOWSKI,
    NullFormTensor,
    QuasiNullForm,
    is_null,
    is_null_quasi,
    lift_quasi,
    prototype_tensor,
    symmetrize,
)
from .solver import NonConvergence, SolverConfig, WaveState, evolve, solve_utt, step

__version__ = "0.1.0"
