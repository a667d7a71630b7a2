"""Time the numba kernels against the pure-numpy fallback.

Runs the batched Crank-Nicolson lattice step and the RK4 limit-system step on
a medium-sized window and reports per-step timings plus the speedup.  Usage:

    python benchmarks/bench_backends.py [--edges 160] [--m 32] [--steps 2000]
"""

import argparse
import time

import numpy as np

from cityroad import kernels
from cityroad.edge_solver import assemble_step_operator
from cityroad.model import Parameters, logistic


def bench_lattice(impl, op, v, rho, steps, dt):
    args = (op.explicit.lower, op.explicit.diagonal, op.explicit.upper,
            op.implicit.lower, op.im_w, op.im_invden, op.load_coeff)
    impl.advance_lattice(v, rho, 1, dt, 1.0, 1.0, 1.0, *args)  # warm-up / JIT
    t0 = time.perf_counter()
    impl.advance_lattice(v, rho, steps, dt, 1.0, 1.0, 1.0, *args)
    return (time.perf_counter() - t0) / steps


def bench_asym(impl, V, P, steps, dt):
    impl.advance_asym(V, P, 1, dt, 1.0, 1.0, 1.0)
    t0 = time.perf_counter()
    impl.advance_asym(V, P, steps, dt, 1.0, 1.0, 1.0)
    return (time.perf_counter() - t0) / steps


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--edges", type=int, default=160)
    ap.add_argument("--m", type=int, default=32)
    ap.add_argument("--steps", type=int, default=2000)
    args = ap.parse_args()

    p = Parameters(1.0, 1.0, 1.0, nonlinearity=logistic(1.0))
    dt = 1e-3
    op = assemble_step_operator(args.m, dt, p)
    rng = np.random.default_rng(0)
    v = rng.uniform(0.0, 1.0, (args.edges, args.m + 1))
    rho = rng.uniform(0.0, 1.0, args.edges + 1)
    V = rng.uniform(0.0, 1.0, args.edges)
    P = rng.uniform(0.0, 1.0, args.edges + 1)

    print(f"problem: {args.edges} edges x m={args.m}, {args.steps} steps per timing")
    rows = []
    t_np = bench_lattice(kernels.numpy_impl, op, v, rho, args.steps, dt)
    rows.append(("lattice step", "numpy", t_np))
    if kernels.numba_impl is not None:
        t_nb = bench_lattice(kernels.numba_impl, op, v, rho, args.steps, dt)
        rows.append(("lattice step", "numba", t_nb))
        rows.append(("lattice step", "speedup", t_np / t_nb))
    a_np = bench_asym(kernels.numpy_impl, V, P, args.steps, 0.01)
    rows.append(("rk4 limit step", "numpy", a_np))
    if kernels.numba_impl is not None:
        a_nb = bench_asym(kernels.numba_impl, V, P, args.steps, 0.01)
        rows.append(("rk4 limit step", "numba", a_nb))
        rows.append(("rk4 limit step", "speedup", a_np / a_nb))

    for kind, backend, value in rows:
        if backend == "speedup":
            print(f"{kind:>16s}  {backend:>7s}  {value:8.1f}x")
        else:
            print(f"{kind:>16s}  {backend:>7s}  {value * 1e6:8.1f} us/step")
    print(f"selected backend: {kernels.BACKEND} (override with CITYROAD_BACKEND)")


if __name__ == "__main__":
    main()
