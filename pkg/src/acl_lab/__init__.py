"""Exact-diagonalization laboratory for the adapted Caldeira-Leggett model."""
from .hamiltonian import ModelParams, WorldOperators, assemble_world, expectation
from .model import ACLModel
from .reduced import EnergyDistribution, Space
from .spectral import EigenbasisState, SpectralDecomposition

__all__ = [
    "ACLModel",
    "EigenbasisState",
    "EnergyDistribution",
    "ModelParams",
    "Space",
    "SpectralDecomposition",
    "WorldOperators",
    "assemble_world",
    "expectation",
]
__version__ = "0.1.0"
