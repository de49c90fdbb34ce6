"""Simulation and blind-estimation lab for two Heisenberg-coupled qubits."""

from .heisenberg import HBAR, K_B, MU_BOHR, PhysicalModel
from .states import EnsembleSpec, Fixed, ParamDraw, QubitParams, UniformHalfOpen

__all__ = [
    "HBAR",
    "K_B",
    "MU_BOHR",
    "PhysicalModel",
    "EnsembleSpec",
    "Fixed",
    "ParamDraw",
    "QubitParams",
    "UniformHalfOpen",
]

__version__ = "0.1.0"
