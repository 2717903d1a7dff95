"""Exception hierarchy for the simulator.

Every error carries a structured ``detail`` payload (error code, message and
any context worth printing) and the process exit code the CLI should use:
    - 1: generic failure (bad config, degenerate geometry, numeric trouble)
    - 2: no feasible network solution anywhere
"""

from typing import Any, Dict, Optional


class SimulationError(Exception):
    """Base class for all simulator errors."""

    error: str = "simulation_error"
    exit_code: int = 1

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.detail: Dict[str, Any] = {
            "error": self.error,
            "message": message,
            **context,
        }


class ConfigurationError(SimulationError):
    """Raised when a scenario or parameter set is invalid."""

    error = "configuration_error"


class DegenerateGeometryError(SimulationError):
    """Raised when two positions coincide and angles are undefined."""

    error = "degenerate_geometry"


class DomainError(SimulationError):
    """Raised when an argument is outside the domain of a formula."""

    error = "domain_error"


class BlockSizeError(SimulationError):
    """Raised when a BIA transmission block would exceed the slot cap."""

    error = "block_size"

    def __init__(self, num_slots: int, max_slots: int):
        super().__init__(
            f"Transmission block needs {num_slots} slots, cap is {max_slots}.",
            num_slots=num_slots,
            max_slots=max_slots,
        )


class NumericError(SimulationError):
    """Raised when a matrix violates a numerical precondition."""

    error = "numeric_error"


class SolverDivergenceError(SimulationError):
    """Raised when Lagrange multipliers leave the finite range."""

    error = "solver_divergence"


class InfeasibleNetworkError(SimulationError):
    """Raised when every (G', t) cell of the allocation tables is masked."""

    error = "infeasible_network"
    exit_code = 2


class PersistenceError(SimulationError):
    """Raised when reading or writing an output file fails."""

    error = "persistence_error"

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, path=path)
