"""Periodic XY spin chain: free-fermion solution, dense oracle, ground-state maps and VQE."""

from .model import ModelParams, PauliString, build_ising_terms, build_xy_terms
from .free_fermion import full_spectrum, ground_state, sector_energies
from .exact_oracle import build_dense, diagonalize, ground_energy

__all__ = [
    "ModelParams",
    "PauliString",
    "build_xy_terms",
    "build_ising_terms",
    "ground_state",
    "sector_energies",
    "full_spectrum",
    "build_dense",
    "diagonalize",
    "ground_energy",
]

__version__ = "0.1.0"
