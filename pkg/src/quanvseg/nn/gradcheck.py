"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import NumericError


@dataclass(frozen=True)
class GradCheckReport:
    name: str
    max_rel_error: float
    n_coords: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return np.isfinite(self.max_rel_error) and self.max_rel_error < self.tolerance

    def __str__(self):
        status = "ok" if self.passed else "FAIL"
        return (f"{self.name}: max_rel={self.max_rel_error:.3e} "
                f"tol={self.tolerance:.0e} coords={self.n_coords} [{status}]")


def gradcheck(name, loss_fn, grad_fn, arrays, tolerance, *,
              step: float = 1e-5, max_coords: int = 200, seed: int = 0,
              atol: float = 1e-8) -> GradCheckReport:
    """Compare grad_fn's output against central differences of loss_fn.

    `arrays` are the float64 tensors the loss depends on; loss_fn() and
    grad_fn() take no arguments and read them in place, so perturbing a
    coordinate and re-evaluating probes the true numeric gradient.
    grad_fn() returns one gradient per array (None to skip an entry).
    Arrays larger than max_coords are subsampled on a seeded draw.

    Coordinates where the two values agree within `atol` count as exact.
    Central differences carry roundoff of order eps*|loss|/step, so on a
    coordinate whose true derivative is zero (a conv bias feeding
    train-mode batch norm, say) the quotient is noise over noise; the
    absolute floor sits well above that and well below any real defect.
    """
    rng = np.random.default_rng(seed)
    grads = grad_fn()
    if len(grads) != len(arrays):
        raise ValueError(f"{name}: {len(grads)} gradients for {len(arrays)} arrays")
    worst = 0.0
    total = 0
    for arr, grad in zip(arrays, grads):
        if grad is None:
            continue
        grad = np.asarray(grad)
        if grad.shape != arr.shape:
            raise ValueError(f"{name}: gradient shape {grad.shape} != array {arr.shape}")
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"{name}: analytic gradient is not finite")
        n = arr.size
        if n > max_coords:
            coords = np.sort(rng.choice(n, size=max_coords, replace=False))
        else:
            coords = np.arange(n)
        gflat = grad.reshape(-1)
        for j in coords:
            at = np.unravel_index(j, arr.shape)
            orig = arr[at]
            arr[at] = orig + step
            hi = loss_fn()
            arr[at] = orig - step
            lo = loss_fn()
            arr[at] = orig
            fd = (hi - lo) / (2.0 * step)
            if not np.isfinite(fd):
                raise NumericError(f"{name}: non-finite finite-difference probe")
            a = float(gflat[j])
            diff = abs(a - fd)
            rel = 0.0 if diff <= atol else diff / (max(abs(a), abs(fd)) + 1e-8)
            worst = max(worst, rel)
            total += 1
    return GradCheckReport(name=name, max_rel_error=worst, n_coords=total,
                           tolerance=tolerance)
