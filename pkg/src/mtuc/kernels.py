"""Hot numerical kernels.

Each kernel exists twice: a vectorized numpy version and a loop version
compiled with numba. The public names dispatch on ``_jit.USE_JIT``; both
variants are importable for testing and benchmarking.

Vortex tables are (V, 5) float arrays with rows x0, y0, z0, strength, radius.
"""

from __future__ import annotations

import math

import numpy as np

from . import _jit
from ._jit import njit

CENTER_EPS = 1e-9  # m, below this distance a vortex contributes nothing


# ---------------------------------------------------------------------------
# Lamb vortex velocity


def lamb_velocity_np(points, vort, auv_height):
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    vort = np.asarray(vort, dtype=float).reshape(-1, 5)
    if len(vort) == 0:
        return np.zeros_like(pts)
    d = pts[:, None, :] - vort[None, :, :3]
    r2 = np.einsum("nvk,nvk->nv", d, d)
    near = r2 < CENTER_EPS**2
    r2s = np.where(near, 1.0, r2)
    fac = vort[None, :, 3] / (2 * math.pi * r2s) * -np.expm1(-r2s / vort[None, :, 4] ** 2)
    fac = np.where(near, 0.0, fac)
    out = np.empty_like(pts)
    out[:, 0] = -(d[:, :, 1] * fac).sum(axis=1)
    out[:, 1] = (d[:, :, 0] * fac).sum(axis=1)
    out[:, 2] = ((auv_height - vort[None, :, 2]) * fac).sum(axis=1)
    return out


@njit
def _lamb_at(x, y, z, vort, auv_height, out):
    out[0] = 0.0
    out[1] = 0.0
    out[2] = 0.0
    for v in range(vort.shape[0]):
        dx = x - vort[v, 0]
        dy = y - vort[v, 1]
        dz = z - vort[v, 2]
        r2 = dx * dx + dy * dy + dz * dz
        if r2 < CENTER_EPS * CENTER_EPS:
            continue
        fac = vort[v, 3] / (2.0 * math.pi * r2) * -math.expm1(-r2 / (vort[v, 4] * vort[v, 4]))
        out[0] -= dy * fac
        out[1] += dx * fac
        out[2] += (auv_height - vort[v, 2]) * fac


@njit
def _lamb_velocity_nb(pts, vort, auv_height):
    out = np.empty_like(pts)
    buf = np.empty(3)
    for i in range(pts.shape[0]):
        _lamb_at(pts[i, 0], pts[i, 1], pts[i, 2], vort, auv_height, buf)
        out[i, 0] = buf[0]
        out[i, 1] = buf[1]
        out[i, 2] = buf[2]
    return out


def lamb_velocity_nb(points, vort, auv_height):
    pts = np.ascontiguousarray(points, dtype=float).reshape(-1, 3)
    vort = np.ascontiguousarray(vort, dtype=float).reshape(-1, 5)
    return _lamb_velocity_nb(pts, vort, float(auv_height))


# ---------------------------------------------------------------------------
# pairwise segment energy between waypoints


def segment_matrices_np(nodes, vort, auv_height, speed, drag_k, zeta):
    """Energy (J) and time (s) of every directed straight segment between nodes.

    ``drag_k`` is 0.5 * rho * C_a * C_d, so the propulsion power for a mean
    relative velocity v is drag_k * |v|^3 / zeta.
    """
    nodes = np.asarray(nodes, dtype=float).reshape(-1, 3)
    p = len(nodes)
    diff = nodes[None, :, :] - nodes[:, None, :]
    dist = np.linalg.norm(diff, axis=-1)
    safe = np.where(dist > 0, dist, 1.0)
    unit = diff / safe[..., None]
    mid = 0.5 * (nodes[None, :, :] + nodes[:, None, :])
    v_start = lamb_velocity_np(nodes, vort, auv_height)
    v_mid = lamb_velocity_np(mid.reshape(-1, 3), vort, auv_height).reshape(p, p, 3)
    current = (v_start[:, None, :] + v_mid + v_start[None, :, :]) / 3.0
    rel = speed * unit - current
    vmag = np.linalg.norm(rel, axis=-1)
    power = drag_k * vmag**3 / zeta
    time = dist / speed
    energy = np.where(dist > 0, power * time, 0.0)
    return energy, np.where(dist > 0, time, 0.0)


@njit
def _segment_matrices_nb(nodes, vort, auv_height, speed, drag_k, zeta):
    p = nodes.shape[0]
    energy = np.zeros((p, p))
    time = np.zeros((p, p))
    v_node = np.empty((p, 3))
    buf = np.empty(3)
    for i in range(p):
        _lamb_at(nodes[i, 0], nodes[i, 1], nodes[i, 2], vort, auv_height, buf)
        v_node[i, 0] = buf[0]
        v_node[i, 1] = buf[1]
        v_node[i, 2] = buf[2]
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            dx = nodes[j, 0] - nodes[i, 0]
            dy = nodes[j, 1] - nodes[i, 1]
            dz = nodes[j, 2] - nodes[i, 2]
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            if dist == 0.0:
                continue
            _lamb_at(
                0.5 * (nodes[i, 0] + nodes[j, 0]),
                0.5 * (nodes[i, 1] + nodes[j, 1]),
                0.5 * (nodes[i, 2] + nodes[j, 2]),
                vort, auv_height, buf,
            )
            sq = 0.0
            d = (dx, dy, dz)
            for c in range(3):
                cur = (v_node[i, c] + buf[c] + v_node[j, c]) / 3.0
                r = speed * d[c] / dist - cur
                sq += r * r
            t = dist / speed
            time[i, j] = t
            energy[i, j] = drag_k * sq * math.sqrt(sq) / zeta * t
    return energy, time


def segment_matrices_nb(nodes, vort, auv_height, speed, drag_k, zeta):
    nodes = np.ascontiguousarray(nodes, dtype=float).reshape(-1, 3)
    vort = np.ascontiguousarray(vort, dtype=float).reshape(-1, 5)
    return _segment_matrices_nb(nodes, vort, float(auv_height), float(speed), float(drag_k), float(zeta))


def lamb_velocity(points, vort, auv_height):
    if _jit.USE_JIT:
        return lamb_velocity_nb(points, vort, auv_height)
    return lamb_velocity_np(points, vort, auv_height)


def segment_matrices(nodes, vort, auv_height, speed, drag_k, zeta):
    if _jit.USE_JIT:
        return segment_matrices_nb(nodes, vort, auv_height, speed, drag_k, zeta)
    return segment_matrices_np(nodes, vort, auv_height, speed, drag_k, zeta)
