"""Simulation and analysis toolkit for a quantum-dot telecom quantum relay.

The package models an entangled-pair source driven by a biexciton cascade,
a weak coherent laser input, a Bell-state measurement, and the detection
chain, and provides the analysis used to turn detector time tags into
teleportation fidelities, state/process tomography and QKD figures of merit.
"""

from qrelay.errors import DomainError, InvariantViolation, PreconditionError

__version__ = "0.1.0"

__all__ = ["DomainError", "InvariantViolation", "PreconditionError", "__version__"]
