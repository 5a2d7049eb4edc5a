"""Dense-matrix test oracle for small circuits.

Builds each gate as an explicit 2^n x 2^n matrix via Kronecker products
and multiplies them in application order.  Intentionally independent of
the state-vector kernels so the two routes can cross-check each other.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import SizeError
from .circuits import CircuitSpec
from .state import Gate

MAX_ORACLE_QUBITS = 6

_ID2 = np.eye(2, dtype=np.complex128)
_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
_P0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.complex128)
_P1 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=np.complex128)


def rotation_matrix(kind: str, angle: float) -> np.ndarray:
    h = 0.5 * angle
    c, s = np.cos(h), np.sin(h)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if kind == "RZ":
        return np.array([[c - 1j * s, 0.0], [0.0, c + 1j * s]], dtype=np.complex128)
    raise ValueError(f"not a rotation kind: {kind!r}")


def _kron_chain(factors) -> np.ndarray:
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(out, f)
    return out


def gate_unitary(gate: Gate, n_qubits: int) -> np.ndarray:
    """Full-register matrix of one gate (qubit 0 = most significant bit)."""
    if gate.kind == "CNOT":
        idle = [_ID2] * n_qubits
        keep = list(idle)
        keep[gate.control] = _P0
        flip = list(idle)
        flip[gate.control] = _P1
        flip[gate.target] = _X
        return _kron_chain(keep) + _kron_chain(flip)
    factors = [_ID2] * n_qubits
    factors[gate.target] = rotation_matrix(gate.kind, gate.angle)
    return _kron_chain(factors)


def dense_unitary_oracle(spec: CircuitSpec) -> np.ndarray:
    """Product of all gate matrices in application order (last gate leftmost)."""
    if spec.n_qubits > MAX_ORACLE_QUBITS:
        raise SizeError(
            f"oracle supports at most {MAX_ORACLE_QUBITS} qubits, got {spec.n_qubits}"
        )
    u = np.eye(1 << spec.n_qubits, dtype=np.complex128)
    for gate in spec.gates:
        u = gate_unitary(gate, spec.n_qubits) @ u
    return u
