"""Latency and energy of serving each device's task.

A task runs either on the device or, when offloaded, is relayed by the AUV
to the station (device to AUV, then AUV to station) and computed there on a
share of the AUV's station compute pool. A cached task skips both
transmission hops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .acoustics import LN2, rate_auv_to_station, rate_device_to_auv
from .scenario import Constants, Device, Geometry, Task


class AllocationError(ValueError):
    """An offloaded task lacks the bandwidth, compute share or link it needs."""


@dataclass(frozen=True)
class TaskOutcome:
    total_time: float
    local_time: float
    tx_time_da: float
    tx_time_as: float
    station_time: float
    device_energy: float
    station_energy: float
    auv_tx_energy: float
    offloaded: bool
    cached: bool


@dataclass(frozen=True)
class CapacityVerdict:
    ok: bool
    used_bits: float
    slack: float

    @property
    def over(self) -> float:
        return max(0.0, -self.slack)


def local_outcome(task: Task, device: Device, consts: Constants) -> tuple[float, float]:
    """Time (s) and energy (J) of running the task on the device CPU."""
    t = task.complexity * task.data_bits / device.cpu_hz
    return t, consts.cpu_energy_mu * device.cpu_hz**consts.cpu_exponent * t


def _tx_energy(bits, bw, airtime, snr, depth, power_gain, ref_intensity):
    # inverted Shannon rate: the power that achieves bits/airtime, times airtime
    eff = bits / (bw * airtime)
    return 2 * math.pi * depth * ref_intensity * bw * math.expm1(eff * LN2) / (power_gain * snr) * airtime


def offload_outcome(
    task: Task,
    device: Device,
    r_frac: float,
    f_frac: float,
    cached: bool,
    snr_da: float,
    snr_as: float,
    consts: Constants,
    geometry: Geometry,
) -> TaskOutcome:
    """Outcome of offloading one task given the link quality of both hops."""
    if not f_frac > 0:
        raise AllocationError("offloaded task needs a positive compute share")
    t_local, _ = local_outcome(task, device, consts)
    z = task.data_bits
    if cached:
        t_da = t_as = e_da = e_as = 0.0
    else:
        if not r_frac > 0:
            raise AllocationError("uncached offloaded task needs a positive bandwidth share")
        if not (snr_da > 0 and snr_as > 0):
            raise AllocationError("zero-rate link: SNR lower bound is zero")
        r_da = rate_device_to_auv(r_frac, snr_da, consts, geometry.device_depth)
        r_as = rate_auv_to_station(snr_as, consts, geometry.auv_depth)
        t_da, t_as = z / r_da, z / r_as
        e_da = _tx_energy(
            z, r_frac * consts.bandwidth_low, t_da, snr_da, geometry.device_depth,
            consts.circuitry_eff, consts.ref_intensity,
        )
        e_as = _tx_energy(
            z, consts.bandwidth_high, t_as, snr_as, geometry.auv_depth,
            consts.circuitry_eff, consts.ref_intensity,
        )
    fm = f_frac * consts.station_cycles
    t_m = task.complexity * z / fm
    e_m = consts.cpu_energy_mu * fm**consts.cpu_exponent * t_m
    return TaskOutcome(
        total_time=t_m + t_da + t_as,
        local_time=t_local,
        tx_time_da=t_da,
        tx_time_as=t_as,
        station_time=t_m,
        device_energy=e_da,
        station_energy=e_m,
        auv_tx_energy=e_as,
        offloaded=True,
        cached=bool(cached),
    )


def dg_service_time(outcomes) -> float:
    times = [o.total_time for o in outcomes]
    if not times:
        raise ValueError("a device group needs at least one task outcome")
    return max(times)


def cached_bits(h, data_bits, content_id=None) -> float:
    """Storage used by the cached tasks; repeated content is stored once."""
    h = np.asarray(h).astype(bool)
    z = np.asarray(data_bits, dtype=float)
    if content_id is None:
        return float(z[h].sum())
    cid = np.asarray(content_id)[h]
    _, first = np.unique(cid, return_index=True)
    return float(z[h][first].sum())


def cache_capacity_check(h, data_bits, capacity: float, content_id=None) -> CapacityVerdict:
    used = cached_bits(h, data_bits, content_id)
    return CapacityVerdict(ok=used <= capacity, used_bits=used, slack=capacity - used)


# ---------------------------------------------------------------------------
# vectorized evaluation over many devices


@dataclass(frozen=True)
class DeviceOutcomes:
    """Per-device arrays; entries of non-offloaded devices hold zeros for the offload terms."""

    t_local: np.ndarray
    e_local: np.ndarray
    t_da: np.ndarray
    t_as: np.ndarray
    t_station: np.ndarray
    e_da: np.ndarray
    e_as: np.ndarray
    e_station: np.ndarray
    total_time: np.ndarray


def local_arrays(data_bits, complexity, cpu_hz, consts: Constants):
    t = complexity * data_bits / cpu_hz
    return t, consts.cpu_energy_mu * cpu_hz**consts.cpu_exponent * t


def device_outcomes(
    data_bits, complexity, cpu_hz, snr_da, snr_as, o, h, r, f,
    consts: Constants, geometry: Geometry, strict: bool = True,
) -> DeviceOutcomes:
    """Outcomes of a whole batch of devices.

    All inputs broadcast against each other, so a (B, n) batch of decisions
    can be evaluated against n devices at once. With ``strict`` an offloaded
    task lacking resources raises; otherwise its terms become ``inf``.
    """
    o = np.asarray(o, dtype=bool)
    h = np.asarray(h, dtype=bool) & o
    r = np.asarray(r, dtype=float)
    f = np.asarray(f, dtype=float)
    z = np.asarray(data_bits, dtype=float)
    alpha = np.asarray(complexity, dtype=float)
    t_loc, e_loc = local_arrays(z, alpha, np.asarray(cpu_hz, dtype=float), consts)

    tx = o & ~h
    snr_da = np.asarray(snr_da, dtype=float)
    snr_as = np.asarray(snr_as, dtype=float)
    bad = (o & ~(f > 0)) | (tx & ~((r > 0) & (snr_da > 0) & (snr_as > 0)))
    if strict and np.any(bad):
        raise AllocationError("offloaded task without bandwidth, compute share or usable link")

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        bw = r * consts.bandwidth_low
        x_da = consts.circuitry_eff * consts.tx_power_device * snr_da / (
            2 * math.pi * geometry.device_depth * consts.ref_intensity * bw
        )
        rate_da = bw * np.log1p(x_da) / LN2
        x_as = consts.circuitry_eff * consts.tx_power_auv * snr_as / (
            2 * math.pi * geometry.auv_depth * consts.ref_intensity * consts.bandwidth_high
        )
        rate_as = consts.bandwidth_high * np.log1p(x_as) / LN2
        t_da = np.where(tx, z / rate_da, 0.0)
        t_as = np.where(tx, z / rate_as, 0.0)
        # spectral-efficiency exponent Z / (bw * T) reproduces the transmit power
        e_da = np.where(
            tx,
            2 * math.pi * geometry.device_depth * consts.ref_intensity * bw
            * np.expm1(z / (bw * t_da) * LN2) / (consts.circuitry_eff * snr_da) * t_da,
            0.0,
        )
        e_as = np.where(
            tx,
            2 * math.pi * geometry.auv_depth * consts.ref_intensity * consts.bandwidth_high
            * np.expm1(z / (consts.bandwidth_high * t_as) * LN2) / (consts.circuitry_eff * snr_as) * t_as,
            0.0,
        )
        fm = f * consts.station_cycles
        t_m = np.where(o, alpha * z / fm, 0.0)
        e_m = np.where(o, consts.cpu_energy_mu * fm**consts.cpu_exponent * t_m, 0.0)
    if np.any(bad):
        t_da, t_as, e_da, e_as, t_m, e_m = (np.where(bad, np.inf, a) for a in (t_da, t_as, e_da, e_as, t_m, e_m))
    total = np.where(o, t_m + t_da + t_as, t_loc)
    b = np.broadcast_shapes(total.shape, t_loc.shape)
    return DeviceOutcomes(
        t_local=np.broadcast_to(t_loc, b),
        e_local=np.broadcast_to(e_loc, b),
        t_da=t_da, t_as=t_as, t_station=t_m,
        e_da=e_da, e_as=e_as, e_station=e_m,
        total_time=total,
    )
