"""Pure-numpy force/integration kernel: the fallback when the compiled
extension is unavailable. Semantics match _kernel_cy exactly; both
accumulate each pair's force once and apply it with opposite signs."""

from __future__ import annotations

import numpy as np


def accumulate_forces(
    pos: np.ndarray,
    edge_a: np.ndarray,
    edge_b: np.ndarray,
    edge_w: np.ndarray,
    intra_a: np.ndarray,
    intra_b: np.ndarray,
    k_a: float,
    k_r: float,
    eps: float,
) -> np.ndarray:
    n = pos.shape[0]
    forces = np.zeros((n, 3))

    # Attraction along edges: constant magnitude k_a*|w|, zero under eps.
    if len(edge_a):
        diff = pos[edge_b] - pos[edge_a]
        dist = np.linalg.norm(diff, axis=1)
        ok = dist >= eps
        mag = np.where(ok, k_a * np.abs(edge_w), 0.0)
        unit = np.zeros_like(diff)
        unit[ok] = diff[ok] / dist[ok, None]
        f = mag[:, None] * unit
        np.add.at(forces, edge_a, f)
        np.subtract.at(forces, edge_b, f)

    # Intra-layer attraction: same rule with |w| = 1.
    if len(intra_a):
        diff = pos[intra_b] - pos[intra_a]
        dist = np.linalg.norm(diff, axis=1)
        ok = dist >= eps
        mag = np.where(ok, k_a, 0.0)
        unit = np.zeros_like(diff)
        unit[ok] = diff[ok] / dist[ok, None]
        f = mag[:, None] * unit
        np.add.at(forces, intra_a, f)
        np.subtract.at(forces, intra_b, f)

    # Repulsion between every pair, distance floored at eps.
    if n > 1:
        iu, ju = np.triu_indices(n, 1)
        diff = pos[iu] - pos[ju]  # direction: j -> i
        dist = np.linalg.norm(diff, axis=1)
        d_eff = np.maximum(dist, eps)
        mag = k_r / (d_eff * d_eff)
        unit = np.zeros_like(diff)
        nz = dist > 0.0
        unit[nz] = diff[nz] / dist[nz, None]
        unit[~nz, 0] = 1.0  # coincident points: deterministic axis
        f = mag[:, None] * unit
        np.add.at(forces, iu, f)
        np.subtract.at(forces, ju, f)

    return forces


def step(
    pos: np.ndarray,
    vel: np.ndarray,
    edge_a: np.ndarray,
    edge_b: np.ndarray,
    edge_w: np.ndarray,
    intra_a: np.ndarray,
    intra_b: np.ndarray,
    pinned: np.ndarray,
    k_a: float,
    k_r: float,
    dt: float,
    damping: float,
    max_speed: float,
    eps: float,
) -> int:
    """Semi-implicit step in place. Returns the index of the first node
    with a non-finite force, or -1 on success (in which case pos/vel are
    updated)."""
    forces = accumulate_forces(pos, edge_a, edge_b, edge_w, intra_a, intra_b, k_a, k_r, eps)
    finite = np.isfinite(forces).all(axis=1)
    if not finite.all():
        return int(np.flatnonzero(~finite)[0])

    movable = pinned == 0
    v = damping * (vel[movable] + dt * forces[movable])
    speed = np.linalg.norm(v, axis=1)
    over = speed > max_speed
    if over.any():
        v[over] *= (max_speed / speed[over])[:, None]
    vel[movable] = v
    vel[~movable] = 0.0
    pos[movable] += dt * v
    return -1
