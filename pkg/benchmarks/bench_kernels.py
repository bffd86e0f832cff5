"""Time the numba recurrence kernels against the pure-numpy reference.

Runs the forward and backward gate recurrence on a few sequence shapes,
reports wall time per call for each backend, and checks that the two
paths agree numerically.  JIT compilation is triggered once before
timing so it never lands in the measurements.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --shapes 200x16 2000x64 --repeats 30
"""

import argparse
import time

import numpy as np

from revdyn import kernels_numpy

try:
    from revdyn import kernels_numba
    HAVE_NUMBA = True
except ImportError:
    kernels_numba = None
    HAVE_NUMBA = False


def make_case(T, H, seed=0):
    rng = np.random.default_rng(seed)
    Ax = rng.normal(0.0, 0.5, (T, 4 * H))
    Wh = rng.normal(0.0, 0.2, (4 * H, H))
    h0 = rng.normal(0.0, 0.5, H)
    c0 = rng.normal(0.0, 0.5, H)
    dH = rng.normal(0.0, 0.5, (T, H))
    return Ax, Wh, h0, c0, dH


def run_once(mod, case):
    Ax, Wh, h0, c0, dH = case
    H_out, C_out, G = mod.lstm_core_forward(Ax, Wh, h0, c0)
    grads = mod.lstm_core_backward(Wh, h0, c0, H_out, C_out, G, dH)
    return (H_out, C_out, G) + grads


def time_backend(mod, case, repeats):
    run_once(mod, case)  # warm-up; compiles the numba path
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        run_once(mod, case)
        best = min(best, time.perf_counter() - t0)
    return best


def max_diff(a, b):
    return max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))


def parse_shape(s):
    try:
        t, h = s.lower().split("x")
        return int(t), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected TxH, got {s!r}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shapes", nargs="+", type=parse_shape,
                    default=[(50, 8), (200, 16), (1000, 32), (4000, 64)],
                    metavar="TxH", help="sequence length x hidden width")
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if not HAVE_NUMBA:
        print("numba not importable; timing the numpy path only")

    print(f"{'shape':>10} {'numpy':>12} {'numba':>12} {'speedup':>9} {'max diff':>10}")
    for T, H in args.shapes:
        case = make_case(T, H, args.seed)
        t_np = time_backend(kernels_numpy, case, args.repeats)
        row = f"{T:>6}x{H:<3} {t_np * 1e3:>10.3f}ms"
        if HAVE_NUMBA:
            t_nb = time_backend(kernels_numba, case, args.repeats)
            diff = max_diff(run_once(kernels_numpy, case),
                            run_once(kernels_numba, case))
            row += f" {t_nb * 1e3:>10.3f}ms {t_np / t_nb:>8.1f}x {diff:>10.2e}"
            if diff > 1e-10:
                raise SystemExit(f"backends disagree at {T}x{H}: {diff:.2e}")
        print(row)


if __name__ == "__main__":
    main()
