"""
Exception types raised by pycoefid.
"""
from typing import Iterable, Optional


class PyCoefIdError(Exception):
    """Base class for all pycoefid errors."""


class MeshError(PyCoefIdError, ValueError):
    """Invalid mesh parameters or a triangulation that breaks the mesh invariants."""


class DimensionMismatchError(PyCoefIdError, ValueError):
    """A vector or field does not match the size of the operator or mesh it is used with."""


class MatrixIndexError(PyCoefIdError, IndexError):
    """A sparse-matrix entry lies outside the matrix dimension."""


class CoefficientError(PyCoefIdError, ValueError):
    """A PDE coefficient violates its bounds at a quadrature point."""


class SolverConvergenceError(PyCoefIdError, RuntimeError):
    """The linear solver did not reach the requested relative residual."""

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(f"{message} (iterations={iterations}, relative residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class PsiFloorError(PyCoefIdError, ValueError):
    """Final-time data is not safely positive at some node, so the coefficient cannot be recovered there."""

    def __init__(self, node: int, value: float, floor: float):
        super().__init__(
            f"Final-time data psi[{node}] = {value:.6e} is below the floor {floor:.6e}; "
            f"the data is incompatible with a strictly positive final state"
        )
        self.node = node
        self.value = value
        self.floor = floor


class ConfigError(PyCoefIdError, ValueError):
    """Invalid run configuration."""

    def __init__(self, message: str, keys: Optional[Iterable[str]] = None):
        super().__init__(message)
        self.keys = list(keys or [])
