"""Lamb-vortex current field and the drag-based power model of an AUV.

Vortex contributions superpose linearly. The vertical component uses the
AUV cruise height ``auv_height`` rather than the sample height, which keeps
the field two-dimensional at cruise level when vortices sit at that height.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .scenario import Constants, Vortex


def as_vortex_array(vortices) -> np.ndarray:
    """Accept a sequence of :class:`Vortex` or a (V, 5) array."""
    if isinstance(vortices, np.ndarray):
        return vortices.reshape(-1, 5).astype(float, copy=False)
    rows = [(*v.center, v.strength, v.radius) if isinstance(v, Vortex) else tuple(v) for v in vortices]
    return np.array(rows, dtype=float).reshape(-1, 5)


@dataclass(frozen=True)
class FlowSample:
    velocity: tuple[float, float, float]
    vorticity_mag: float


def current_velocity(p, vortices, auv_height: float) -> np.ndarray:
    """Current vector (m/s) at a single point."""
    return kernels.lamb_velocity(np.asarray(p, dtype=float)[None, :], as_vortex_array(vortices), auv_height)[0]


def current_velocity_many(points, vortices, auv_height: float) -> np.ndarray:
    return kernels.lamb_velocity(points, as_vortex_array(vortices), auv_height)


def vorticity_mag(p, vortex: Vortex) -> float:
    r2 = float(np.sum((np.asarray(p, dtype=float) - np.asarray(vortex.center)) ** 2))
    return vortex.strength / (math.pi * vortex.radius**2) * math.exp(-r2 / vortex.radius**2)


def flow_sample(p, vortices, auv_height: float) -> FlowSample:
    v = current_velocity(p, vortices, auv_height)
    w = sum(vorticity_mag(p, Vortex(tuple(row[:3]), row[3], row[4])) for row in as_vortex_array(vortices))
    return FlowSample(velocity=tuple(float(c) for c in v), vorticity_mag=float(w))


def relative_velocity(direction, speed: float, p, vortices, auv_height: float) -> np.ndarray:
    e = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(e) - 1.0) > 1e-9:
        raise ValueError(f"direction must be a unit vector (norm={np.linalg.norm(e)})")
    return speed * e - current_velocity(p, vortices, auv_height)


def drag_coefficient(consts: Constants) -> float:
    """0.5 * rho * C_a * C_d, the factor multiplying |V|^2 in the drag law."""
    return 0.5 * consts.density * consts.cross_section * consts.drag_coeff


def drag_force(v, consts: Constants) -> float:
    vv = np.asarray(v, dtype=float)
    return drag_coefficient(consts) * float(vv @ vv)


def hover_power(p, vortices, consts: Constants, auv_height: float) -> float:
    """Electrical power (W) needed to hold station against the local current."""
    vc = current_velocity(p, vortices, auv_height)
    return drag_force(vc, consts) * float(np.linalg.norm(vc)) / consts.electric_eff


def hover_power_many(points, vortices, consts: Constants, auv_height: float) -> np.ndarray:
    vc = current_velocity_many(points, vortices, auv_height)
    speed = np.linalg.norm(vc, axis=1)
    return drag_coefficient(consts) * speed**3 / consts.electric_eff


def segment_power(p_from, p_to, vortices, consts: Constants, auv_height: float) -> tuple[float, float]:
    """Cruise power (W) and duration (s) of one straight segment.

    The current along the segment is approximated by the mean of the
    relative velocity at the start, midpoint and end.
    """
    a = np.asarray(p_from, dtype=float)
    b = np.asarray(p_to, dtype=float)
    dist = float(np.linalg.norm(b - a))
    if dist < 1e-12:
        raise ValueError("segment endpoints coincide")
    e = (b - a) / dist
    samples = np.stack([a, 0.5 * (a + b), b])
    rel = consts.auv_speed * e - current_velocity_many(samples, vortices, auv_height)
    vbar = rel.mean(axis=0)
    power = drag_force(vbar, consts) * float(np.linalg.norm(vbar)) / consts.electric_eff
    return power, dist / consts.auv_speed


def segment_matrices(nodes, vortices, consts: Constants, auv_height: float):
    """(energy, time) matrices for every directed segment between ``nodes``."""
    return kernels.segment_matrices(
        nodes,
        as_vortex_array(vortices),
        auv_height,
        consts.auv_speed,
        drag_coefficient(consts),
        consts.electric_eff,
    )


def sample_grid(vortices, auv_height: float, extent: float, n: int) -> np.ndarray:
    """Rows of (x, y, vx, vy, vz, |v|) on an n x n grid at cruise height."""
    xs = np.linspace(-extent / 2, extent / 2, n)
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    pts = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, auv_height)])
    v = current_velocity_many(pts, vortices, auv_height)
    return np.column_stack([pts[:, :2], v, np.linalg.norm(v, axis=1)])
