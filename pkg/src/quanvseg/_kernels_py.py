"""Pure-NumPy window kernels.

Fallback used when the compiled extension is unavailable (see
quanvseg.backend).  Implements the same contract as quanvseg._kernels:
evaluate one frozen circuit on a batch of angle-encoded windows and
write per-qubit Z expectations into `out`.

The batch axis is vectorized; gates are applied one at a time to the
whole batch.  All arithmetic is complex128.
"""

from __future__ import annotations

import numpy as np

KIND_RX, KIND_RY, KIND_RZ, KIND_CNOT = 0, 1, 2, 3


def _rotate(psi, n_qubits, kind, target, c, s):
    """Apply a rotation on `target` to every state in the batch.

    c and s are cos/sin of the half angle: scalars for frozen circuit
    gates, or per-window vectors of shape (N,) for the encoding stage.
    """
    v = psi.reshape(psi.shape[0], 1 << target, 2, -1)
    if isinstance(c, np.ndarray):
        c = c[:, None, None]
        s = s[:, None, None]
    if kind == KIND_RZ:
        v[:, :, 0, :] *= c - 1j * s
        v[:, :, 1, :] *= c + 1j * s
        return
    a0 = v[:, :, 0, :].copy()
    a1 = v[:, :, 1, :]
    if kind == KIND_RY:
        v[:, :, 0, :] = c * a0 - s * a1
        v[:, :, 1, :] = s * a0 + c * a1
    else:  # RX
        v[:, :, 0, :] = c * a0 - 1j * s * a1
        v[:, :, 1, :] = -1j * s * a0 + c * a1


def _cnot(psi, n_qubits, control, target):
    lo, hi = min(control, target), max(control, target)
    v = psi.reshape(psi.shape[0], 1 << lo, 2, 1 << (hi - lo - 1), 2, -1)
    if control < target:
        block = v[:, :, 1, :, :, :]  # control bit set; target is axis 3
        tmp = block[:, :, :, 0, :].copy()
        block[:, :, :, 0, :] = block[:, :, :, 1, :]
        block[:, :, :, 1, :] = tmp
    else:
        block = v[:, :, :, :, 1, :]  # control bit set; target is axis 2
        tmp = block[:, :, 0, :, :].copy()
        block[:, :, 0, :, :] = block[:, :, 1, :, :]
        block[:, :, 1, :, :] = tmp


def run_windows(enc_angles, kinds, targets, controls, cos_half, sin_half, n_qubits, out):
    """Evaluate the circuit on every window and fill `out` with <Z_q>."""
    n_windows = enc_angles.shape[0]
    dim = 1 << n_qubits
    psi = np.zeros((n_windows, dim), dtype=np.complex128)
    psi[:, 0] = 1.0

    half = 0.5 * enc_angles
    for q in range(n_qubits):
        _rotate(psi, n_qubits, KIND_RY, q, np.cos(half[:, q]), np.sin(half[:, q]))

    for g in range(kinds.shape[0]):
        kind = int(kinds[g])
        if kind == KIND_CNOT:
            _cnot(psi, n_qubits, int(controls[g]), int(targets[g]))
        else:
            _rotate(psi, n_qubits, kind, int(targets[g]),
                    float(cos_half[g]), float(sin_half[g]))

    probs = psi.real**2 + psi.imag**2
    for q in range(n_qubits):
        v = probs.reshape(n_windows, 1 << q, 2, -1)
        out[:, q] = v[:, :, 0, :].sum(axis=(1, 2)) - v[:, :, 1, :].sum(axis=(1, 2))
