# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled window kernels.

Same contract as quanvseg._kernels_py.run_windows, but each window's
state vector stays in a small local buffer while every gate is applied,
and the GIL is released so callers can thread over window chunks.
"""

from libc.math cimport cos, sin
from libc.stdlib cimport free, malloc

# typed imaginary unit so nogil code never touches a Python complex
cdef double complex J = 1j


cdef void _rot(double complex *psi, int n, int kind, int t, double c, double s) noexcept nogil:
    cdef long stride = 1L << (n - 1 - t)
    cdef long dim = 1L << n
    cdef long base = 0
    cdef long i
    cdef double complex a0, a1, ph0, ph1
    if kind == 2:  # RZ: diag(c - i s, c + i s)
        ph0 = c - J * s
        ph1 = c + J * s
        while base < dim:
            for i in range(base, base + stride):
                psi[i] = psi[i] * ph0
                psi[i + stride] = psi[i + stride] * ph1
            base += 2 * stride
    elif kind == 1:  # RY
        while base < dim:
            for i in range(base, base + stride):
                a0 = psi[i]
                a1 = psi[i + stride]
                psi[i] = c * a0 - s * a1
                psi[i + stride] = s * a0 + c * a1
            base += 2 * stride
    else:  # RX
        while base < dim:
            for i in range(base, base + stride):
                a0 = psi[i]
                a1 = psi[i + stride]
                psi[i] = c * a0 - J * (s * a1)
                psi[i + stride] = c * a1 - J * (s * a0)
            base += 2 * stride


cdef void _cnot(double complex *psi, int n, int ctrl, int tgt) noexcept nogil:
    cdef long cmask = 1L << (n - 1 - ctrl)
    cdef long tmask = 1L << (n - 1 - tgt)
    cdef long dim = 1L << n
    cdef long i
    cdef double complex tmp
    for i in range(dim):
        if (i & cmask) != 0 and (i & tmask) == 0:
            tmp = psi[i]
            psi[i] = psi[i | tmask]
            psi[i | tmask] = tmp


cdef double _expz(double complex *psi, int n, int q) noexcept nogil:
    cdef long mask = 1L << (n - 1 - q)
    cdef long dim = 1L << n
    cdef long i
    cdef double acc = 0.0
    cdef double p
    for i in range(dim):
        p = psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
        if i & mask:
            acc -= p
        else:
            acc += p
    return acc


def run_windows(double[:, ::1] enc_angles, signed char[::1] kinds, int[::1] targets,
                int[::1] controls, double[::1] cos_half, double[::1] sin_half,
                int n_qubits, double[:, ::1] out):
    """Evaluate the circuit on every window and fill `out` with <Z_q>."""
    cdef Py_ssize_t n_windows = enc_angles.shape[0]
    cdef Py_ssize_t n_gates = kinds.shape[0]
    cdef long dim = 1L << n_qubits
    cdef Py_ssize_t w, g
    cdef long i
    cdef int q, kind
    cdef double half
    cdef double complex *psi = <double complex *> malloc(dim * sizeof(double complex))
    if psi == NULL:
        raise MemoryError()
    try:
        with nogil:
            for w in range(n_windows):
                psi[0] = 1.0
                for i in range(1, dim):
                    psi[i] = 0.0
                for q in range(n_qubits):
                    half = 0.5 * enc_angles[w, q]
                    _rot(psi, n_qubits, 1, q, cos(half), sin(half))
                for g in range(n_gates):
                    kind = kinds[g]
                    if kind == 3:
                        _cnot(psi, n_qubits, controls[g], targets[g])
                    else:
                        _rot(psi, n_qubits, kind, targets[g], cos_half[g], sin_half[g])
                for q in range(n_qubits):
                    out[w, q] = _expz(psi, n_qubits, q)
    finally:
        free(psi)
