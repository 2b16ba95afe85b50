"""Timing comparison of the compiled and NumPy mean-field kernels.

Per-call timings for the two hot field evaluations (BNN, Smith) at several
grid sizes, an agreement check between the implementations, and an
end-to-end integration timed under each backend via EVODYN_PURE. Exits
nonzero if the backends disagree beyond 1e-12.

Usage: python benchmarks/bench_kernels.py [--sizes 100 200 400 800]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from evodyn import _kernels_np

try:
    from evodyn import _kernels
except ImportError:
    _kernels = None

END_TO_END = (
    "import time; "
    "from evodyn import kernel_backend; "
    "from evodyn.dynamics import bnn, simulate_edm; "
    "from evodyn.games import kernel_continuous_war, theta_logistic; "
    "from evodyn.measures import gaussian_on_grid; "
    "from evodyn.strategy_space import make_uniform_grid, make_uniform_reference; "
    "g = make_uniform_grid(200, 0.0, 2.0); "
    "k = kernel_continuous_war(1.0, theta_logistic(100.0), g); "
    "x0 = gaussian_on_grid(g, 1.0, 0.1); "
    "t0 = time.perf_counter(); "
    "simulate_edm(k, bnn(), make_uniform_reference(g), x0, 20.0, 0.01); "
    "print(kernel_backend(), time.perf_counter() - t0)"
)


def draw_state(n, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.random(n)
    x /= x.sum()
    rho = rng.normal(size=n)
    lam = np.full(n, 1.0 / n)
    return x, rho, lam


def time_call(fn, args, min_time=0.05):
    reps, elapsed = 1, 0.0
    while True:
        t0 = time.perf_counter()
        for _ in range(reps):
            fn(*args)
        elapsed = time.perf_counter() - t0
        if elapsed >= min_time:
            return elapsed / reps
        reps *= 4


def bench_fields(sizes):
    worst = 0.0
    print(f"{'field':<6} {'n':>5} {'numpy us':>10} {'cython us':>10} "
          f"{'speedup':>8} {'max |diff|':>11}")
    for name in ("bnn", "smith"):
        np_fn = getattr(_kernels_np, name + "_field")
        cy_fn = getattr(_kernels, name + "_field")
        for n in sizes:
            args = draw_state(n, 7 * n)
            diff = float(np.max(np.abs(np_fn(*args) - cy_fn(*args))))
            worst = max(worst, diff)
            t_np = time_call(np_fn, args) * 1e6
            t_cy = time_call(cy_fn, args) * 1e6
            print(f"{name:<6} {n:>5} {t_np:>10.2f} {t_cy:>10.2f} "
                  f"{t_np / t_cy:>8.2f} {diff:>11.3g}")
    return worst


def bench_end_to_end():
    print("\nend-to-end (continuous war + BNN, n=200, t_end=20, dt=0.01):")
    for pure in ("1", ""):
        env = dict(os.environ, EVODYN_PURE=pure)
        if not pure:
            env.pop("EVODYN_PURE", None)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env,
                             capture_output=True, text=True, check=True)
        backend, seconds = out.stdout.split()
        print(f"  {backend:<8} {float(seconds):.3f} s")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[100, 200, 400, 800])
    args = parser.parse_args()

    if _kernels is None:
        print("compiled extension not built; only the numpy backend is "
              "available", file=sys.stderr)
        return 1
    worst = bench_fields(args.sizes)
    bench_end_to_end()
    if worst > 1e-12:
        print(f"backend disagreement: {worst:.3g}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
