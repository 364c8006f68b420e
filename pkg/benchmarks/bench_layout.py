#!/usr/bin/env python3
"""Layout kernel benchmark: compiled Cython step vs the numpy fallback.

The force pass is the engine's only scalar hot loop (all-pairs repulsion
at 60 ticks/s); this prints steps/second for both backends over a few
graph sizes and checks they agree.

Usage: python benchmarks/bench_layout.py [--steps 2000]
"""

import argparse
import time

import numpy as np

from aiive import nn
from aiive.layout import LayoutParams, build_graph
from aiive.layout import _kernel_py

try:
    from aiive.layout import _kernel_cy
except ImportError:
    _kernel_cy = None


def run(kernel, graph, params, steps):
    ia, ib = graph.intra_pairs
    args = (
        graph.positions, graph.velocities, graph.edge_a, graph.edge_b,
        graph.norm_weights, ia, ib, graph.pinned,
        params.k_a, params.k_r, params.dt, params.damping,
        params.max_speed, params.epsilon_dist,
    )
    start = time.perf_counter()
    for _ in range(steps):
        kernel.step(*args)
    return time.perf_counter() - start


def parity(net, params, steps=10):
    """Max position/velocity difference after a few identical steps.

    Kept short on purpose: the dynamics are chaotic during the transient,
    so last-ulp rounding differences between the backends grow with the
    trajectory length; agreement is meaningful per step, not after
    thousands of them.
    """
    g_py = build_graph(net, seed=2)
    g_cy = build_graph(net, seed=2)
    run(_kernel_py, g_py, params, steps)
    run(_kernel_cy, g_cy, params, steps)
    return max(
        np.abs(g_py.positions - g_cy.positions).max(),
        np.abs(g_py.velocities - g_cy.velocities).max(),
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=2000)
    args = parser.parse_args()
    params = LayoutParams(damping=0.98)

    print(f"{'graph':>14} {'nodes':>6} {'edges':>6} {'py steps/s':>12} {'cy steps/s':>12} {'speedup':>8} {'parity':>10}")
    for h1, h2 in ((8, 4), (32, 16), (64, 32), (128, 64)):
        net = nn.init_network([2304, h1, h2, 7], seed=1)
        g_py = build_graph(net, seed=2)
        t_py = run(_kernel_py, g_py, params, args.steps)
        row = f"{f'[{h1},{h2}]':>14} {len(g_py):>6} {g_py.num_edges:>6} {args.steps / t_py:>12.0f}"
        if _kernel_cy is not None:
            g_cy = build_graph(net, seed=2)
            t_cy = run(_kernel_cy, g_cy, params, args.steps)
            agreement = parity(net, params)
            row += f" {args.steps / t_cy:>12.0f} {t_py / t_cy:>7.1f}x {agreement:>10.1e}"
            if agreement > 1e-12:
                row += "  [DISAGREE]"
        else:
            row += f" {'not built':>12} {'-':>8} {'-':>10}"
        print(row)

    if _kernel_cy is None:
        print("\ncompiled kernel not built; pip install -e . --no-build-isolation builds it")


if __name__ == "__main__":
    main()
