"""Distributed-memory symmetric eigensolver for small dense matrices.

Three-step pipeline over a simulated message-passing process grid:
Householder tridiagonalization, multi-section bisection with inverse
iteration on the tridiagonal, and Householder back-transformation.
Includes an auto-tuner over the communication variants and a CLI.
"""

from .densecore import (
    AccuracyReport,
    HouseholderFactors,
    TridiagonalMatrix,
    accuracy,
    frank_eigenvalues,
    frank_matrix,
    hit_sequential,
    trd_sequential,
)
from .kernels import BACKEND
from .msgnet import CommStats, Communicator, DeadlockError, ProtocolError, spawn_spmd
from .procgrid import ProcessGrid, build_grid, owned_cols, owned_cols_1d, owned_rows

__all__ = [
    "AccuracyReport",
    "BACKEND",
    "CommStats",
    "Communicator",
    "DeadlockError",
    "HouseholderFactors",
    "ProcessGrid",
    "ProtocolError",
    "TridiagonalMatrix",
    "accuracy",
    "build_grid",
    "frank_eigenvalues",
    "frank_matrix",
    "hit_sequential",
    "owned_cols",
    "owned_cols_1d",
    "owned_rows",
    "spawn_spmd",
    "trd_sequential",
]

__version__ = "1.0.0"
