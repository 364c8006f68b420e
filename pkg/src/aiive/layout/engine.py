"""Deterministic time stepping for the force graph.

The hot pair loop lives in a compiled Cython kernel when available; a
numpy fallback with identical semantics is selected at import otherwise.
Set AIIVE_LAYOUT_KERNEL=py|cy to force a backend (cy raises if the
extension was not built).
"""

from __future__ import annotations

import os

import numpy as np

from ..nn import NumericError
from . import _kernel_py
from .graph import LayoutGraph, LayoutParams

try:
    from . import _kernel_cy  # type: ignore[attr-defined]
except ImportError:
    _kernel_cy = None

_requested = os.environ.get("AIIVE_LAYOUT_KERNEL", "auto").lower()
if _requested == "py":
    _kernel = _kernel_py
elif _requested == "cy":
    if _kernel_cy is None:
        raise ImportError("AIIVE_LAYOUT_KERNEL=cy but the compiled kernel is not built")
    _kernel = _kernel_cy
else:
    _kernel = _kernel_cy if _kernel_cy is not None else _kernel_py


def kernel_name() -> str:
    """"cy" when the compiled kernel is active, else "py"."""
    return "cy" if _kernel is _kernel_cy and _kernel_cy is not None else "py"


def attractive_force(
    pos_a: np.ndarray, pos_b: np.ndarray, norm_weight: float, k_a: float, epsilon_dist: float = 1e-3
) -> np.ndarray:
    """Force on a from the edge (a, b): magnitude k_a*|w| toward b,
    independent of distance; zero vector under the separation floor."""
    diff = np.asarray(pos_b, dtype=np.float64) - np.asarray(pos_a, dtype=np.float64)
    dist = float(np.linalg.norm(diff))
    if dist < epsilon_dist:
        return np.zeros(3)
    return (k_a * abs(norm_weight) / dist) * diff


def repulsive_force(
    pos_i: np.ndarray, pos_j: np.ndarray, k_r: float, epsilon_dist: float = 1e-3
) -> np.ndarray:
    """Force on i from j: magnitude k_r/d^2 pointing away from j, with the
    distance floored at epsilon_dist."""
    diff = np.asarray(pos_i, dtype=np.float64) - np.asarray(pos_j, dtype=np.float64)
    dist = float(np.linalg.norm(diff))
    d_eff = max(dist, epsilon_dist)
    mag = k_r / (d_eff * d_eff)
    if dist > 0.0:
        return (mag / dist) * diff
    return np.array([mag, 0.0, 0.0])


def intra_layer_attraction(
    pos_i: np.ndarray, pos_j: np.ndarray, k_a: float, epsilon_dist: float = 1e-3
) -> np.ndarray:
    """Same-layer pull: attraction with uniform |w| = 1."""
    return attractive_force(pos_i, pos_j, 1.0, k_a, epsilon_dist)


def compute_forces(graph: LayoutGraph, params: LayoutParams) -> np.ndarray:
    """Total force per node (reference path, used for tests and error reports)."""
    intra_a, intra_b = graph.intra_pairs
    return _kernel_py.accumulate_forces(
        graph.positions,
        graph.edge_a,
        graph.edge_b,
        graph.norm_weights,
        intra_a,
        intra_b,
        params.k_a,
        params.k_r,
        params.epsilon_dist,
    )


def _describe_bad_node(graph: LayoutGraph, bad_index: int, params: LayoutParams) -> str:
    i = bad_index
    with np.errstate(all="ignore"):
        for j in range(len(graph)):
            if j == i:
                continue
            f = repulsive_force(graph.positions[i], graph.positions[j], params.k_r, params.epsilon_dist)
            if not np.all(np.isfinite(f)):
                return f"nodes {graph.ids[i]} and {graph.ids[j]}"
        for e in range(graph.num_edges):
            if i in (graph.edge_a[e], graph.edge_b[e]):
                a, b = int(graph.edge_a[e]), int(graph.edge_b[e])
                f = attractive_force(
                    graph.positions[a], graph.positions[b], graph.norm_weights[e], params.k_a, params.epsilon_dist
                )
                if not np.all(np.isfinite(f)):
                    return f"nodes {graph.ids[a]} and {graph.ids[b]}"
    return f"node {graph.ids[i]}"


def step(graph: LayoutGraph, params: LayoutParams) -> LayoutGraph:
    """One semi-implicit integration step, in place:
    v <- damping*(v + dt*F), |v| clamped, p <- p + dt*v."""
    intra_a, intra_b = graph.intra_pairs
    with np.errstate(all="ignore"):  # non-finite inputs are reported, not warned
        bad = _kernel.step(
            graph.positions,
            graph.velocities,
            graph.edge_a,
            graph.edge_b,
            graph.norm_weights,
            intra_a,
            intra_b,
            graph.pinned,
            params.k_a,
            params.k_r,
            params.dt,
            params.damping,
            params.max_speed,
            params.epsilon_dist,
        )
    if bad >= 0:
        raise NumericError(f"non-finite layout force between {_describe_bad_node(graph, bad, params)}")
    return graph
