"""Compiled vs NumPy element kernels, and their share of a full Picard step.

    python benchmarks/bench_kernels.py [--order 6] [--nel 4] [--repeat 5]
"""

import argparse
import time

import numpy as np

from mimeticns import _pykernels
from mimeticns.mesh_topology import DomainSpec, build_grid
from mimeticns.operators import build_operators
from mimeticns.solver import SteadyProblem, _linear_solve
from mimeticns.verification import cavity_boundary

try:
    from mimeticns import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--order", type=int, default=6)
    ap.add_argument("--nel", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    p, n = args.order, args.nel
    rng = np.random.default_rng(0)
    q = p + 2
    E = n * n
    data = (rng.standard_normal((E, q, q)), rng.standard_normal((q, p + 1)),
            rng.standard_normal((q, p + 1)), rng.standard_normal((q, p + 2)),
            rng.standard_normal((q, p + 2)))
    t_np = best_of(lambda: _pykernels.convection_blocks(*data), args.repeat)
    print(f"convection blocks, {E} elements, p={p}")
    print(f"  numpy   {1e3 * t_np:9.3f} ms")
    if _ckernels is not None:
        ref = _pykernels.convection_blocks(*data)
        out = _ckernels.convection_blocks(*data)
        t_c = best_of(lambda: _ckernels.convection_blocks(*data), args.repeat)
        print(f"  cython  {1e3 * t_c:9.3f} ms  (x{t_np / t_c:.1f}, max diff "
              f"{np.max(np.abs(out - ref)):.1e})")
    else:
        print("  cython  not built")

    grid = build_grid(DomainSpec((0, 1), (0, 1), n, n, p))
    ops = build_operators(grid)
    prob = SteadyProblem(ops, cavity_boundary(-1.0), 1e-3)
    u = rng.standard_normal(grid.primal.n_edges)
    t_asm = best_of(lambda: prob.assemble(u), args.repeat)
    system = prob.assemble(u)
    t_lu = best_of(lambda: _linear_solve(system, "splu"), max(1, args.repeat // 2))
    t_conv = best_of(lambda: [ops.convection[w].assemble(u) for w in "xy"], args.repeat)
    print(f"one Picard step on {n}x{n} elements, p={p} ({system.matrix.shape[0]} unknowns)")
    print(f"  convection assembly {1e3 * t_conv:9.1f} ms")
    print(f"  full assembly       {1e3 * t_asm:9.1f} ms")
    print(f"  sparse LU solve     {1e3 * t_lu:9.1f} ms")


if __name__ == "__main__":
    main()
