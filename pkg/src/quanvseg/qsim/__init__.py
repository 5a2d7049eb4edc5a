"""Classical simulation of small quantum circuits."""

from .circuits import (
    TEMPLATES,
    CircuitSpec,
    build_circuit,
    parse_circuit,
    run_circuit,
    serialize_circuit,
)
from .oracle import MAX_ORACLE_QUBITS, dense_unitary_oracle, gate_unitary, rotation_matrix
from .state import (
    GATE_KINDS,
    MAX_SIM_QUBITS,
    ROTATION_KINDS,
    Gate,
    StateVector,
    angle_encode,
    apply_gate,
    measure_z_expectations,
    new_zero_state,
)

__all__ = [
    "TEMPLATES",
    "CircuitSpec",
    "build_circuit",
    "parse_circuit",
    "run_circuit",
    "serialize_circuit",
    "MAX_ORACLE_QUBITS",
    "dense_unitary_oracle",
    "gate_unitary",
    "rotation_matrix",
    "GATE_KINDS",
    "MAX_SIM_QUBITS",
    "ROTATION_KINDS",
    "Gate",
    "StateVector",
    "angle_encode",
    "apply_gate",
    "measure_z_expectations",
    "new_zero_state",
]
