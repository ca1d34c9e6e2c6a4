"""Kinetic Cucker-Smale flocking solver, its Euler-flocking limit, and relative-entropy diagnostics."""

from .alignment import KernelSpec, MollifierSpec, alignment_source, cs_operator, mt_operator
from .errors import (
    CFLError,
    DegenerateFitError,
    FlockError,
    GridMismatchError,
    KernelError,
    SolverAbort,
    TailMassError,
    VacuumError,
)
from .model import (
    KineticState,
    MacroState,
    ModelConfig,
    PhaseGrid,
    PotentialSpec,
    SpaceGrid,
    maxwellian,
    moments,
    restrict,
    stationary_profile,
)

__all__ = [
    "CFLError",
    "DegenerateFitError",
    "FlockError",
    "GridMismatchError",
    "KernelError",
    "KernelSpec",
    "KineticState",
    "MacroState",
    "ModelConfig",
    "MollifierSpec",
    "PhaseGrid",
    "PotentialSpec",
    "SolverAbort",
    "SpaceGrid",
    "TailMassError",
    "VacuumError",
    "alignment_source",
    "cs_operator",
    "maxwellian",
    "moments",
    "mt_operator",
    "restrict",
    "stationary_profile",
]
