"""Compare the compiled window kernel against the pure-Python fallback.

Both backends run the same quanvolution workload; the script reports
wall-clock times, the speedup, and the worst elementwise difference
(which must sit at rounding level, since the two implementations are
meant to be interchangeable).

Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --size 96 --qubits 9 --repeats 5
"""

import argparse
import time

import numpy as np

from quanvseg import _kernels_py, backend
from quanvseg.qsim.circuits import build_circuit
from quanvseg.quanvolution import QuanvConfig, quanvolve


def time_backend(image, config, kernel_module, repeats):
    best = float("inf")
    stack = None
    for _ in range(repeats):
        start = time.perf_counter()
        stack = quanvolve(image, config, _kernel_module=kernel_module)
        best = min(best, time.perf_counter() - start)
    return best, stack.data


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=64,
                        help="square image extent (default 64)")
    parser.add_argument("--qubits", type=int, default=4)
    parser.add_argument("--kernel", type=int, default=2,
                        help="window size; kernel^2 <= qubits")
    parser.add_argument("--layers", type=int, default=2)
    parser.add_argument("--template", default="basic_entangled")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timed repetitions; the best run counts")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    spec = build_circuit(args.template, args.qubits, args.layers, args.seed)
    config = QuanvConfig(circuit=spec, kernel_size=args.kernel, stride=1,
                         padding="same-reflect", rescale=True)
    image = np.random.default_rng(args.seed).uniform(size=(args.size, args.size))
    windows = args.size * args.size  # same-reflect at stride 1 keeps the grid

    print(f"image {args.size}x{args.size} ({windows} windows), "
          f"{args.qubits} qubits, {len(spec.gates)} gates, "
          f"active backend: {backend.backend_name()}")

    t_ext, out_ext = time_backend(image, config, backend.kernel(), args.repeats)
    t_py, out_py = time_backend(image, config, _kernels_py, args.repeats)

    diff = float(np.abs(out_ext - out_py).max())
    rate_ext = windows / t_ext
    rate_py = windows / t_py
    print(f"  compiled : {t_ext * 1e3:9.1f} ms  ({rate_ext:11.0f} windows/s)")
    print(f"  python   : {t_py * 1e3:9.1f} ms  ({rate_py:11.0f} windows/s)")
    print(f"  speedup  : {t_py / t_ext:9.1f}x")
    print(f"  max diff : {diff:.3e}")
    if diff > 1e-12:
        raise SystemExit("backends disagree beyond rounding")


if __name__ == "__main__":
    main()
