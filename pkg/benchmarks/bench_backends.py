"""Compare the jit-compiled and pure-numpy kernel backends.

The backend is fixed when fdexplain.kernels is imported, so a single
process cannot time both. This script spawns one worker subprocess per
backend (via FDEXPLAIN_BACKEND), times the hot kernels at pipeline-like
sizes, and prints a side-by-side table. Each timing is best-of-N wall
clock after a warmup call that also absorbs jit compilation.

Usage: python3 benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

# (name, inner calls per measurement) - inner loops keep each
# measurement well above timer resolution for the fast jitted kernels
WORKLOADS = (
    ("curve_batch", 5),
    ("mlp_loss_grad", 20),
    ("adam_epoch", 2),
)


def _curve_workload(rng):
    n, m, k = 400, 1000, 4
    t = np.linspace(-4.0, 0.0, m)
    centers = rng.uniform(-3.8, -0.2, size=(n, k))
    widths = rng.uniform(0.1, 0.4, size=(n, k))
    amps = rng.uniform(0.5, 3.0, size=(n, k))
    n_peaks = rng.integers(0, k + 1, size=n).astype(np.int64)
    gain = rng.uniform(0.8, 1.5, size=n)
    boost = rng.uniform(0.0, 2.0, size=n)
    return (t, centers, widths, amps, n_peaks, gain, boost,
            3.0, 3.0, 1.1, -4.0)


def _mlp_workload(rng):
    # score-matrix scale: 512 observations, 40 components, hidden 50/40/30
    sizes = np.array([40, 50, 40, 30, 1], dtype=np.int64)
    total = int(np.sum(sizes[:-1] * sizes[1:] + sizes[1:]))
    params = rng.normal(scale=0.3, size=total)
    X = rng.normal(size=(512, 40))
    y = rng.normal(size=512)
    return sizes, params, X, y


def _best_of(fn, repeats, inner):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - start) / inner)
    return best


def run_worker(repeats: int) -> dict:
    from fdexplain import kernels

    rng = np.random.default_rng(20260814)
    curve_args = _curve_workload(rng)
    sizes, params, X, y, = _mlp_workload(rng)
    grad = np.empty_like(params)
    m1 = np.zeros_like(params)
    m2 = np.zeros_like(params)
    order = rng.permutation(X.shape[0])

    def curve():
        kernels.curve_batch(*curve_args)

    def loss_grad():
        kernels.mlp_loss_grad(params, sizes, X, y,
                              kernels.TASK_REGRESSION, grad)

    def adam():
        # fresh state each call so the workload is identical every time
        kernels.adam_epoch(params.copy(), m1.copy(), m2.copy(), 0, sizes,
                           X, y, order, 32, 1e-3, 0.9, 0.999, 1e-8,
                           kernels.TASK_REGRESSION)

    fns = {"curve_batch": curve, "mlp_loss_grad": loss_grad,
           "adam_epoch": adam}
    timings = {"backend": kernels.BACKEND}
    for name, inner in WORKLOADS:
        fns[name]()  # warmup / jit compile
        timings[name] = _best_of(fns[name], repeats, inner)
    return timings


def _spawn(backend: str, repeats: int):
    env = dict(os.environ, FDEXPLAIN_BACKEND=backend)
    proc = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--worker",
         "--repeats", str(repeats)],
        capture_output=True, text=True, env=env)
    if proc.returncode != 0:
        print(f"[{backend}] worker failed:\n{proc.stderr}", file=sys.stderr)
        return None
    return json.loads(proc.stdout.splitlines()[-1])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5,
                    help="measurements per kernel; best is reported")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.worker:
        print(json.dumps(run_worker(args.repeats)))
        return 0

    results = {b: _spawn(b, args.repeats) for b in ("numba", "numpy")}
    if all(r is None for r in results.values()):
        return 1

    print(f"{'kernel':<16}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for name, _ in WORKLOADS:
        cells = []
        for backend in ("numba", "numpy"):
            r = results[backend]
            cells.append(f"{r[name] * 1e3:>10.3f}ms" if r else f"{'n/a':>12}")
        if results["numba"] and results["numpy"]:
            ratio = results["numpy"][name] / results["numba"][name]
            cells.append(f"{ratio:>9.1f}x")
        print(f"{name:<16}" + "".join(cells))
    return 0


if __name__ == "__main__":
    sys.exit(main())
