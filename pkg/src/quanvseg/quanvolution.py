"""Quanvolutional pre-processing of single-band rasters.

A k x k window slides over the image; each window is flattened row-major,
angle-encoded onto the circuit's qubits, run through the frozen circuit,
and measured.  Channel q of the output holds qubit q's Z expectation at
every window position (optionally rescaled from [-1, 1] to [0, 1]).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import backend
from .exceptions import ConfigError, EncodingRangeError, ShapeError, SizeError
from .qsim.circuits import CircuitSpec
from .qsim.state import MAX_SIM_QUBITS

PADDINGS = ("valid", "same-reflect")

# Windows are dispatched to the kernel in fixed-size chunks so results do
# not depend on the thread count (each chunk writes a disjoint output slice).
_CHUNK = 2048


@dataclass(frozen=True)
class QuanvConfig:
    """Frozen circuit plus window geometry for one quanvolution pass."""

    circuit: CircuitSpec
    kernel_size: int = 3
    stride: int = 1
    padding: str = "same-reflect"
    rescale: bool = True
    n_qubits: int | None = None

    def __post_init__(self):
        if self.n_qubits is None:
            object.__setattr__(self, "n_qubits", self.circuit.n_qubits)
        if self.n_qubits != self.circuit.n_qubits:
            raise ConfigError(
                f"config n_qubits={self.n_qubits} but circuit has {self.circuit.n_qubits}"
            )
        if self.n_qubits > MAX_SIM_QUBITS:
            raise ConfigError(f"n_qubits capped at {MAX_SIM_QUBITS}")
        if self.kernel_size < 1:
            raise ConfigError("kernel_size must be >= 1")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.padding not in PADDINGS:
            raise ConfigError(f"padding must be one of {PADDINGS}")
        if self.n_qubits < self.kernel_size**2:
            raise ConfigError(
                f"need n_qubits >= kernel_size^2 = {self.kernel_size ** 2}, "
                f"got {self.n_qubits}"
            )
        # same-reflect pads (k-1)//2 before and k//2 after each axis, so even
        # kernels are legal; odd kernels get the usual symmetric frame.


@dataclass(frozen=True)
class FeatureStack:
    """Multi-channel output of quanvolve: one channel per measured qubit."""

    data: np.ndarray  # (channels, height, width)
    rescaled: bool

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def window_positions(height, width, kernel, stride, padding):
    """Row-major window origins; for same-reflect they index the padded raster."""
    if padding not in PADDINGS:
        raise ConfigError(f"padding must be one of {PADDINGS}")
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    if padding == "same-reflect":
        height += kernel - 1
        width += kernel - 1
    if kernel > height or kernel > width:
        raise SizeError(
            f"kernel {kernel} exceeds padded image extent {height}x{width}"
        )
    rows = range(0, height - kernel + 1, stride)
    cols = range(0, width - kernel + 1, stride)
    return [(r, c) for r in rows for c in cols]


def n_threads() -> int:
    """Worker-thread cap: QUANVSEG_THREADS, defaulting to all cores."""
    raw = os.environ.get("QUANVSEG_THREADS", "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"QUANVSEG_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError("QUANVSEG_THREADS must be >= 1")
    return value


def gate_arrays(spec: CircuitSpec):
    """Flatten a gate list into the arrays the kernels consume."""
    n = len(spec.gates)
    kinds = np.empty(n, dtype=np.int8)
    targets = np.zeros(n, dtype=np.int32)
    controls = np.full(n, -1, dtype=np.int32)
    cos_half = np.zeros(n, dtype=np.float64)
    sin_half = np.zeros(n, dtype=np.float64)
    codes = {"RX": 0, "RY": 1, "RZ": 2, "CNOT": 3}
    for i, g in enumerate(spec.gates):
        kinds[i] = codes[g.kind]
        targets[i] = g.target
        if g.kind == "CNOT":
            controls[i] = g.control
        else:
            half = 0.5 * g.angle
            cos_half[i] = math.cos(half)
            sin_half[i] = math.sin(half)
    return kinds, targets, controls, cos_half, sin_half


def _evaluate_windows(enc, spec, kernel_module=None):
    """Run the circuit over encoded windows (N, n_qubits) -> Z expectations."""
    impl = kernel_module if kernel_module is not None else backend.kernel()
    kinds, targets, controls, cos_half, sin_half = gate_arrays(spec)
    n = spec.n_qubits
    out = np.empty_like(enc)

    def run(lo, hi):
        impl.run_windows(enc[lo:hi], kinds, targets, controls,
                         cos_half, sin_half, n, out[lo:hi])

    bounds = [(lo, min(lo + _CHUNK, enc.shape[0]))
              for lo in range(0, enc.shape[0], _CHUNK)]
    workers = n_threads()
    if workers == 1 or len(bounds) == 1:
        for lo, hi in bounds:
            run(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for f in [pool.submit(run, lo, hi) for lo, hi in bounds]:
                f.result()
    return out


def quanvolve(image, config: QuanvConfig, _kernel_module=None) -> FeatureStack:
    """Quanvolve a 2-D raster with values in [0, 1] into a FeatureStack.

    Output spatial dims: valid -> floor((H-k)/stride)+1 per axis;
    same-reflect -> floor((H-1)/stride)+1 (equal to H x W at stride 1).
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise ShapeError(f"expected a non-empty 2-D raster, got shape {image.shape}")
    if not np.all(np.isfinite(image)) or image.min() < 0.0 or image.max() > 1.0:
        raise EncodingRangeError("image values must lie in [0, 1]")

    k, s = config.kernel_size, config.stride
    if config.padding == "same-reflect":
        before, after = (k - 1) // 2, k // 2
        if after and (image.shape[0] < after + 1 or image.shape[1] < after + 1):
            raise SizeError("image too small for reflect padding")
        padded = np.pad(image, ((before, after), (before, after)), mode="reflect")
    else:
        padded = image
    if k > padded.shape[0] or k > padded.shape[1]:
        raise SizeError(f"kernel {k} exceeds image extent {padded.shape}")

    windows = sliding_window_view(padded, (k, k))[::s, ::s]
    n_h, n_w = windows.shape[:2]
    flat = windows.reshape(n_h * n_w, k * k)

    enc = np.zeros((flat.shape[0], config.n_qubits), dtype=np.float64)
    enc[:, : k * k] = math.pi * flat

    z = _evaluate_windows(enc, config.circuit, kernel_module=_kernel_module)
    if config.rescale:
        z = 0.5 * (1.0 + z)
    stack = z.T.reshape(config.n_qubits, n_h, n_w).copy()
    return FeatureStack(data=stack, rescaled=config.rescale)
