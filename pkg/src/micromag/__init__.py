"""Finite-difference micromagnetics with an FFT demagnetizing field."""

from .backend import Backend, ParallelBackend, make_backend
from .core import GAMMA_E, MU0, EnergyBreakdown, Grid, MaterialParams, SimState, VectorField, \
    make_uniform_state, make_vortex_state
from .dynamics import StepperConfig, llg_rhs, relax, run, stable_dt
from .fields import EffectiveField, effective_field, energies

__all__ = [
    "Backend", "ParallelBackend", "make_backend", "GAMMA_E", "MU0", "EnergyBreakdown", "Grid",
    "MaterialParams", "SimState", "VectorField", "make_uniform_state", "make_vortex_state",
    "StepperConfig", "llg_rhs", "relax", "run", "stable_dt", "EffectiveField",
    "effective_field", "energies",
]
