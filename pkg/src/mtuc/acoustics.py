"""Acoustic link model: ambient noise, Thorp absorption, attenuation,
multipath-bounded SNR and the two-hop data rates.

Frequencies are in kHz here and only here. Spreading loss uses the path
length in metres while the absorption exponent uses kilometres, since the
absorption fit is a per-km figure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import Constants, Geometry, memo

LN2 = math.log(2.0)


def db_to_lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(x)


@dataclass(frozen=True)
class NoiseBreakdown:
    """Noise power spectral densities, linear (uPa^2/Hz)."""

    turbulence: float
    shipping: float
    waves: float
    thermal: float

    @property
    def combined(self) -> float:
        return self.turbulence + self.shipping + self.waves + self.thermal

    @property
    def combined_db(self) -> float:
        return float(lin_to_db(self.combined))


@dataclass(frozen=True)
class LinkGeometry:
    los_m: float
    nlos_surface_m: float
    nlos_bottom_m: float


def _check_freq(f_khz):
    if not f_khz > 0:
        raise ValueError(f"frequency must be > 0 kHz (got {f_khz})")


def noise_components_db(f_khz: float, s: float, w: float) -> tuple[float, float, float, float]:
    _check_freq(f_khz)
    lf = math.log10(f_khz)
    turb = 17.0 - 30.0 * lf
    ship = 40.0 + 20.0 * (s - 0.5) + 26.0 * lf - 60.0 * math.log10(f_khz + 0.03)
    wave = 50.0 + 7.5 * math.sqrt(w) + 20.0 * lf - 40.0 * math.log10(f_khz + 0.4)
    therm = -15.0 + 20.0 * lf
    return turb, ship, wave, therm


def noise_psd(f_khz: float, s: float, w: float) -> NoiseBreakdown:
    """Four ambient noise components, each converted from dB and summed linearly."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"shipping factor must lie in [0, 1] (got {s})")
    if w < 0:
        raise ValueError(f"wind speed must be >= 0 (got {w})")
    return NoiseBreakdown(*(10.0 ** (c / 10.0) for c in noise_components_db(f_khz, s, w)))


def absorption_db_per_km(f_khz):
    """Thorp absorption coefficient in dB/km."""
    f2 = np.asarray(f_khz, dtype=float) ** 2
    if np.any(np.asarray(f_khz) <= 0):
        raise ValueError("frequency must be > 0 kHz")
    out = 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003
    return float(out) if out.ndim == 0 else out


def attenuation(l_m, f_khz: float, spreading: float = 1.5):
    """Linear attenuation factor l^k * a(f)^(l/1000)."""
    l_m = np.asarray(l_m, dtype=float)
    if np.any(l_m <= 0):
        raise ValueError("path length must be > 0 m")
    a_db = absorption_db_per_km(f_khz)
    out = l_m**spreading * 10.0 ** (a_db * (l_m / 1000.0) / 10.0)
    return float(out) if out.ndim == 0 else out


def _inv_sqrt_att(l_m, f_khz, spreading):
    # 1/sqrt(A) evaluated in log space to keep long paths finite
    l_m = np.asarray(l_m, dtype=float)
    a_db = absorption_db_per_km(f_khz)
    return np.exp(-0.5 * (spreading * np.log(l_m) + a_db * (l_m / 1000.0) * math.log(10.0) / 10.0))


def normalized_snr(l_m, f_khz: float, noise: float, spreading: float = 1.5):
    """SNR for unit transmit power and bandwidth over a single path.

    Shares its arithmetic with the multipath lower bounds, so a bound whose
    reflection terms vanish reproduces this value bit for bit.
    """
    out = _inv_sqrt_att(l_m, f_khz, spreading) ** 2 / noise
    return float(out) if np.ndim(out) == 0 else out


def link_geometry_device_auv(device_pos, auv_pos, geometry: Geometry) -> LinkGeometry:
    """Direct path and the shortest surface and seabed reflections."""
    dp = np.asarray(device_pos, dtype=float)
    ap = np.asarray(auv_pos, dtype=float)
    los = float(np.linalg.norm(dp - ap))
    if los < 1e-9:
        raise ValueError("device and AUV positions coincide")
    H, h0, d0 = geometry.water_depth, geometry.device_height, geometry.auv_height
    horiz2 = (ap[0] - dp[0]) ** 2 + (ap[1] - dp[1]) ** 2
    return LinkGeometry(
        los_m=los,
        nlos_surface_m=math.sqrt(horiz2 + (2 * H - h0 - d0) ** 2),
        nlos_bottom_m=math.sqrt(horiz2 + (h0 + d0) ** 2),
    )


def snr_lb_device_auv(link: LinkGeometry, noise: NoiseBreakdown | float, consts: Constants) -> float:
    """Lower-bound SNR of the device to AUV hop.

    The reflected amplitudes are subtracted from the direct one; a negative
    amplitude sum is clamped to zero before squaring.
    """
    n = noise.combined if isinstance(noise, NoiseBreakdown) else float(noise)
    f, k = consts.freq_khz, consts.spreading
    amp = (
        _inv_sqrt_att(link.los_m, f, k)
        - consts.paths_surface * consts.gamma_surface * _inv_sqrt_att(link.nlos_surface_m, f, k)
        - consts.paths_bottom * consts.gamma_bottom * _inv_sqrt_att(link.nlos_bottom_m, f, k)
    )
    return float(max(amp, 0.0) ** 2 / n)


def station_paths(auv_pos, geometry: Geometry) -> tuple[float, float]:
    """Direct and shortest seabed-reflected path lengths from an AUV to the station."""
    ap = np.asarray(auv_pos, dtype=float)
    los = float(np.linalg.norm(ap - np.asarray(geometry.station_pos)))
    # reflected length uses (h0 + d0) as the vertical leg, as in the model definition
    nlos = math.sqrt(ap[0] ** 2 + ap[1] ** 2 + (geometry.device_height + geometry.auv_height) ** 2)
    return los, nlos


def snr_lb_auv_station(auv_pos, geometry: Geometry, noise: NoiseBreakdown | float, consts: Constants) -> float:
    n = noise.combined if isinstance(noise, NoiseBreakdown) else float(noise)
    los, nlos = station_paths(auv_pos, geometry)
    f, k = consts.freq_khz, consts.spreading
    amp = _inv_sqrt_att(los, f, k) - consts.paths_station * consts.gamma_bottom * _inv_sqrt_att(nlos, f, k)
    return float(max(amp, 0.0) ** 2 / n)


def rate_device_to_auv(r_frac, snr, consts: Constants, device_depth: float):
    """Uplink rate (bit/s) for a bandwidth share ``r_frac``; zero share gives zero rate."""
    r = np.asarray(r_frac, dtype=float)
    bw = r * consts.bandwidth_low
    with np.errstate(divide="ignore", invalid="ignore"):
        x = consts.circuitry_eff * consts.tx_power_device * snr / (
            2 * math.pi * device_depth * consts.ref_intensity * bw
        )
        out = np.where(r > 0, bw * np.log1p(x) / LN2, 0.0)
    return float(out) if out.ndim == 0 else out


def rate_auv_to_station(snr, consts: Constants, auv_depth: float):
    bw = consts.bandwidth_high
    x = consts.circuitry_eff * consts.tx_power_auv * np.asarray(snr, dtype=float) / (
        2 * math.pi * auv_depth * consts.ref_intensity * bw
    )
    out = bw * np.log1p(x) / LN2
    return float(out) if np.ndim(out) == 0 else out


def tx_energy(power_gain, bw, snr, depth, ref_intensity, bits, airtime):
    """Transmit energy from the inverted rate formula.

    The exponent is the achieved spectral efficiency bits/(bw * airtime); with
    the link running at its Shannon rate this reduces to power * airtime.
    """
    if airtime <= 0 or bits <= 0:
        return 0.0
    eff = bits / (bw * airtime)
    return 2 * math.pi * depth * ref_intensity * bw / (power_gain * snr) * math.expm1(eff * LN2) * airtime


@dataclass(frozen=True)
class ChannelTable:
    """Per-scenario static link quality.

    ``snr_da[i]`` is the device-to-AUV bound for device i with the AUV at
    its group's hover point; ``snr_as[k]`` is the AUV-to-station bound from
    hover point k.
    """

    snr_da: np.ndarray
    snr_as: np.ndarray
    noise: NoiseBreakdown

    def rate_da(self, i, r_frac, sc):
        return rate_device_to_auv(r_frac, self.snr_da[i], sc.constants, sc.geometry.device_depth)

    def rate_as(self, k, sc):
        return rate_auv_to_station(self.snr_as[k], sc.constants, sc.geometry.auv_depth)


def channel_table(sc) -> ChannelTable:
    """Link quality table for a scenario (memoized on the scenario)."""
    return memo(sc, "_channel", _build_channel_table)


def _build_channel_table(sc) -> ChannelTable:
    c, g = sc.constants, sc.geometry
    noise = noise_psd(c.freq_khz, c.shipping, c.wind)
    arr = sc.arrays
    hp = sc.hover_points
    snr_da = np.array(
        [snr_lb_device_auv(link_geometry_device_auv(arr.pos[i], hp[arr.group[i]], g), noise, c) for i in range(arr.n)]
    )
    snr_as = np.array([snr_lb_auv_station(hp[k], g, noise, c) for k in range(sc.K)])
    return ChannelTable(snr_da=snr_da, snr_as=snr_as, noise=noise)
