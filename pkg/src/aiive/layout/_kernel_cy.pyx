# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled force/integration kernel. Mirrors _kernel_py semantics."""

import numpy as np

cimport numpy as cnp
from libc.math cimport isfinite, sqrt

cnp.import_array()


def step(
    double[:, ::1] pos,
    double[:, ::1] vel,
    int[::1] edge_a,
    int[::1] edge_b,
    double[::1] edge_w,
    int[::1] intra_a,
    int[::1] intra_b,
    unsigned char[::1] pinned,
    double k_a,
    double k_r,
    double dt,
    double damping,
    double max_speed,
    double eps,
):
    cdef Py_ssize_t n = pos.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] forces_arr = np.zeros((n, 3))
    cdef double[:, ::1] forces = forces_arr
    cdef Py_ssize_t e, i, j, k
    cdef double dx, dy, dz, dist, d_eff, mag, w, ux, uy, uz
    cdef double vx, vy, vz, speed, scale

    for e in range(edge_a.shape[0]):
        i = edge_a[e]
        j = edge_b[e]
        dx = pos[j, 0] - pos[i, 0]
        dy = pos[j, 1] - pos[i, 1]
        dz = pos[j, 2] - pos[i, 2]
        dist = sqrt(dx * dx + dy * dy + dz * dz)
        if dist < eps:
            continue
        w = edge_w[e]
        if w < 0:
            w = -w
        mag = k_a * w / dist
        forces[i, 0] += mag * dx
        forces[i, 1] += mag * dy
        forces[i, 2] += mag * dz
        forces[j, 0] -= mag * dx
        forces[j, 1] -= mag * dy
        forces[j, 2] -= mag * dz

    for e in range(intra_a.shape[0]):
        i = intra_a[e]
        j = intra_b[e]
        dx = pos[j, 0] - pos[i, 0]
        dy = pos[j, 1] - pos[i, 1]
        dz = pos[j, 2] - pos[i, 2]
        dist = sqrt(dx * dx + dy * dy + dz * dz)
        if dist < eps:
            continue
        mag = k_a / dist
        forces[i, 0] += mag * dx
        forces[i, 1] += mag * dy
        forces[i, 2] += mag * dz
        forces[j, 0] -= mag * dx
        forces[j, 1] -= mag * dy
        forces[j, 2] -= mag * dz

    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            dist = sqrt(dx * dx + dy * dy + dz * dz)
            d_eff = dist if dist > eps else eps
            mag = k_r / (d_eff * d_eff)
            if dist > 0.0:
                ux = dx / dist
                uy = dy / dist
                uz = dz / dist
            else:
                ux = 1.0
                uy = 0.0
                uz = 0.0
            forces[i, 0] += mag * ux
            forces[i, 1] += mag * uy
            forces[i, 2] += mag * uz
            forces[j, 0] -= mag * ux
            forces[j, 1] -= mag * uy
            forces[j, 2] -= mag * uz

    for i in range(n):
        if not (isfinite(forces[i, 0]) and isfinite(forces[i, 1]) and isfinite(forces[i, 2])):
            return i

    for i in range(n):
        if pinned[i]:
            vel[i, 0] = 0.0
            vel[i, 1] = 0.0
            vel[i, 2] = 0.0
            continue
        vx = damping * (vel[i, 0] + dt * forces[i, 0])
        vy = damping * (vel[i, 1] + dt * forces[i, 1])
        vz = damping * (vel[i, 2] + dt * forces[i, 2])
        speed = sqrt(vx * vx + vy * vy + vz * vz)
        if speed > max_speed:
            scale = max_speed / speed
            vx *= scale
            vy *= scale
            vz *= scale
        vel[i, 0] = vx
        vel[i, 1] = vy
        vel[i, 2] = vz
        pos[i, 0] += dt * vx
        pos[i, 1] += dt * vy
        pos[i, 2] += dt * vz

    return -1
