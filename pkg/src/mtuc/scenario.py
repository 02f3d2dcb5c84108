"""World description: geometry, devices, tasks, constants and vortices.

Internal units are SI throughout (m, s, Hz, W, J, bit). The carrier
frequency is the one exception: it is stored in kHz because the empirical
noise and absorption fits are written for kHz.

Random scenarios are drawn with numpy's ``PCG64`` bit generator, which is
portable and reproducible across platforms for a fixed seed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

KNOT = 0.5144  # m/s
SCHEMA_VERSION = 1

Vec3 = tuple[float, float, float]


class ScenarioError(ValueError):
    """A scenario violates one of its invariants."""


class ScenarioParseError(ScenarioError):
    """A scenario file could not be parsed."""


@dataclass(frozen=True)
class Geometry:
    water_depth: float = 200.0
    device_height: float = 10.0
    auv_height: float = 20.0
    device_depth: float | None = None
    auv_depth: float | None = None

    def __post_init__(self):
        # depths default to the values implied by the heights
        if self.device_depth is None:
            object.__setattr__(self, "device_depth", self.water_depth - self.device_height)
        if self.auv_depth is None:
            object.__setattr__(self, "auv_depth", self.water_depth - self.auv_height)

    @property
    def station_pos(self) -> Vec3:
        return (0.0, 0.0, float(self.water_depth))

    @property
    def depot(self) -> Vec3:
        """Start and end point of every AUV tour, directly below the station."""
        return (0.0, 0.0, float(self.auv_height))

    def validate(self):
        H, h0, d0 = self.water_depth, self.device_height, self.auv_height
        if not H > 0:
            raise ScenarioError(f"H > 0 violated (water_depth={H})")
        if not 0 < h0 < H:
            raise ScenarioError(f"0 < h0 < H violated (device_height={h0})")
        if not 0 < d0 < H:
            raise ScenarioError(f"0 < d0 < H violated (auv_height={d0})")
        if not math.isclose(self.device_depth, H - h0, rel_tol=0, abs_tol=1e-9):
            raise ScenarioError(f"H1 = H - h0 violated (device_depth={self.device_depth}, H - h0={H - h0})")
        if not math.isclose(self.auv_depth, H - d0, rel_tol=0, abs_tol=1e-9):
            raise ScenarioError(f"H2 = H - d0 violated (auv_depth={self.auv_depth}, H - d0={H - d0})")


def _default_ref_intensity() -> float:
    # plane-wave intensity of a 1 uPa pressure wave: p^2 / (rho c)
    return (1e-6) ** 2 / (1020.0 * 1500.0)


@dataclass(frozen=True)
class Constants:
    """Physical, radio and economic constants (defaults from the reference parameter table)."""

    freq_khz: float = 30.0
    shipping: float = 0.5
    wind: float = 0.0
    spreading: float = 1.5
    gamma_surface: float = 1.0
    gamma_bottom: float = 0.0139
    paths_surface: float = 1.0
    paths_bottom: float = 1.0
    paths_station: float = 1.0
    bandwidth_low: float = 10e3
    bandwidth_high: float = 10e3
    tx_power_device: float = 0.030
    tx_power_auv: float = 0.036
    circuitry_eff: float = 0.2
    electric_eff: float = 0.8
    drag_coeff: float = 0.117
    cross_section: float = 0.0314
    density: float = 1020.0
    auv_speed: float = 5 * KNOT
    cpu_energy_mu: float = 1.25e-26
    cpu_exponent: float = 3.0
    station_cycles: float = 10e9
    storage_cap: float = 100e6
    fairness_eps: float = 2.0
    ref_intensity: float = field(default_factory=_default_ref_intensity)
    cost_station: float = 1.0
    cost_auv: float = 2.0
    fairness_penalty: float = 10.0

    _NONNEG = frozenset({
        "wind", "gamma_surface", "gamma_bottom", "paths_surface", "paths_bottom",
        "paths_station", "cost_station", "cost_auv", "fairness_penalty", "storage_cap",
        "fairness_eps",
    })

    def validate(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ScenarioError(f"constant {f.name} must be finite (got {v})")
            if f.name == "shipping":
                if not 0.0 <= v <= 1.0:
                    raise ScenarioError(f"s in [0, 1] violated (shipping={v})")
            elif f.name in self._NONNEG:
                if v < 0:
                    raise ScenarioError(f"constant {f.name} >= 0 violated (got {v})")
            elif not v > 0:
                raise ScenarioError(f"constant {f.name} > 0 violated (got {v})")


ECONOMICS_KEYS = ("cost_station", "cost_auv", "fairness_penalty")


@dataclass(frozen=True)
class Task:
    data_bits: float
    complexity: float
    content_id: int = 0


@dataclass(frozen=True)
class Device:
    pos: Vec3
    cpu_hz: float
    task: Task
    time_value: float
    energy_value: float


@dataclass(frozen=True)
class DeviceGroup:
    centroid: Vec3
    devices: tuple[Device, ...]


@dataclass(frozen=True)
class Vortex:
    center: Vec3
    strength: float
    radius: float


@dataclass(frozen=True)
class DeviceArrays:
    """Column view of every device, ordered group by group."""

    data_bits: np.ndarray
    complexity: np.ndarray
    content_id: np.ndarray
    cpu_hz: np.ndarray
    time_value: np.ndarray
    energy_value: np.ndarray
    pos: np.ndarray
    group: np.ndarray
    offsets: np.ndarray

    @property
    def n(self) -> int:
        return len(self.data_bits)

    def slice(self, k: int) -> slice:
        return slice(int(self.offsets[k]), int(self.offsets[k + 1]))


@dataclass(frozen=True)
class Scenario:
    geometry: Geometry
    groups: tuple[DeviceGroup, ...]
    num_auvs: int
    constants: Constants = Constants()
    vortices: tuple[Vortex, ...] = ()
    seed: int = 0

    @property
    def K(self) -> int:
        return len(self.groups)

    @property
    def M(self) -> int:
        return self.num_auvs

    @cached_property
    def arrays(self) -> DeviceArrays:
        devs = [d for g in self.groups for d in g.devices]
        sizes = [len(g.devices) for g in self.groups]

        def col(fn):
            return np.array([fn(d) for d in devs], dtype=float)

        return DeviceArrays(
            data_bits=col(lambda d: d.task.data_bits),
            complexity=col(lambda d: d.task.complexity),
            content_id=np.array([d.task.content_id for d in devs], dtype=np.int64),
            cpu_hz=col(lambda d: d.cpu_hz),
            time_value=col(lambda d: d.time_value),
            energy_value=col(lambda d: d.energy_value),
            pos=np.array([d.pos for d in devs], dtype=float).reshape(-1, 3),
            group=np.repeat(np.arange(len(sizes)), sizes),
            offsets=np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64),
        )

    @cached_property
    def hover_points(self) -> np.ndarray:
        """(K, 3) hover position above each group centroid at AUV height."""
        d0 = self.geometry.auv_height
        return np.array([(g.centroid[0], g.centroid[1], d0) for g in self.groups], dtype=float)

    @cached_property
    def vortex_array(self) -> np.ndarray:
        """(V, 5) rows of x0, y0, z0, strength, radius."""
        rows = [(*v.center, v.strength, v.radius) for v in self.vortices]
        return np.array(rows, dtype=float).reshape(-1, 5)

    @property
    def max_devices(self) -> int:
        return max(len(g.devices) for g in self.groups)

    def validate(self):
        self.geometry.validate()
        self.constants.validate()
        if self.num_auvs < 1:
            raise ScenarioError(f"M ≥ 1 violated (num_auvs={self.num_auvs})")
        if self.K < self.num_auvs:
            raise ScenarioError(f"K ≥ M violated (K={self.K}, M={self.num_auvs})")
        h0 = self.geometry.device_height
        contents: dict[int, tuple[float, float]] = {}
        for k, g in enumerate(self.groups):
            if not all(math.isfinite(c) for c in g.centroid):
                raise ScenarioError(f"group {k}: centroid must be finite")
            if not g.devices:
                raise ScenarioError(f"group {k}: device list must be nonempty")
            for i, d in enumerate(g.devices):
                where = f"group {k} device {i}"
                if not all(math.isfinite(c) for c in d.pos):
                    raise ScenarioError(f"{where}: position must be finite")
                if abs(d.pos[2] - h0) > 1e-6:
                    raise ScenarioError(f"{where}: device z must equal h0={h0} (got {d.pos[2]})")
                if not d.task.data_bits > 0:
                    raise ScenarioError(f"{where}: Z > 0 violated")
                if not d.task.complexity > 0:
                    raise ScenarioError(f"{where}: alpha > 0 violated")
                if not d.cpu_hz > 0:
                    raise ScenarioError(f"{where}: cpu_hz > 0 violated")
                if d.time_value < 0 or d.energy_value < 0:
                    raise ScenarioError(f"{where}: time_value and energy_value must be >= 0")
                key = (d.task.data_bits, d.task.complexity)
                if contents.setdefault(d.task.content_id, key) != key:
                    raise ScenarioError(
                        f"{where}: content_id {d.task.content_id} reused with a different task size"
                    )
        for v in self.vortices:
            if not v.radius > 0:
                raise ScenarioError(f"vortex radius r0 > 0 violated (got {v.radius})")
            if not all(math.isfinite(c) for c in v.center) or not math.isfinite(v.strength):
                raise ScenarioError("vortex parameters must be finite")
        return self

    def with_auvs(self, m: int) -> "Scenario":
        return dataclasses.replace(self, num_auvs=m).validate()

    def digest(self) -> str:
        """Short content hash used to tag experiment output rows."""
        blob = json.dumps(to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def memo(sc: Scenario, key: str, build):
    """Cache a derived table on a scenario instance (scenarios are immutable)."""
    val = sc.__dict__.get(key)
    if val is None:
        val = build(sc)
        sc.__dict__[key] = val
    return val


# ---------------------------------------------------------------------------
# serialization


def to_dict(sc: Scenario) -> dict:
    consts = dataclasses.asdict(sc.constants)
    econ = {k: consts.pop(k) for k in ECONOMICS_KEYS}
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": sc.seed,
        "num_auvs": sc.num_auvs,
        "geometry": dataclasses.asdict(sc.geometry),
        "constants": consts,
        "economics": econ,
        "groups": [
            {
                "centroid": list(g.centroid),
                "devices": [
                    {
                        "pos": list(d.pos),
                        "cpu_hz": d.cpu_hz,
                        "time_value": d.time_value,
                        "energy_value": d.energy_value,
                        "task": dataclasses.asdict(d.task),
                    }
                    for d in g.devices
                ],
            }
            for g in sc.groups
        ],
        "vortices": [
            {"center": list(v.center), "strength": v.strength, "radius": v.radius}
            for v in sc.vortices
        ],
    }


def _vec(x, what) -> Vec3:
    if len(x) != 3:
        raise ScenarioError(f"{what} must have 3 coordinates")
    return tuple(float(c) for c in x)


def from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError(f"scenario must be a JSON object, got {type(data).__name__}")
    try:
        const_kw = dict(data.get("constants", {}))
        if "auv_speed_knots" in const_kw:
            const_kw["auv_speed"] = float(const_kw.pop("auv_speed_knots")) * KNOT
        const_kw.update(data.get("economics", {}))
        unknown = set(const_kw) - {f.name for f in dataclasses.fields(Constants)}
        if unknown:
            raise ScenarioError(f"unknown constants: {sorted(unknown)}")
        constants = Constants(**{k: float(v) for k, v in const_kw.items()})
        geometry = Geometry(**{k: (None if v is None else float(v)) for k, v in data.get("geometry", {}).items()})
        groups = []
        for g in data["groups"]:
            devices = tuple(
                Device(
                    pos=_vec(d["pos"], "device pos"),
                    cpu_hz=float(d["cpu_hz"]),
                    task=Task(
                        data_bits=float(d["task"]["data_bits"]),
                        complexity=float(d["task"]["complexity"]),
                        content_id=int(d["task"].get("content_id", 0)),
                    ),
                    time_value=float(d["time_value"]),
                    energy_value=float(d["energy_value"]),
                )
                for d in g["devices"]
            )
            groups.append(DeviceGroup(centroid=_vec(g["centroid"], "centroid"), devices=devices))
        vortices = tuple(
            Vortex(center=_vec(v["center"], "vortex center"), strength=float(v["strength"]), radius=float(v["radius"]))
            for v in data.get("vortices", [])
        )
        sc = Scenario(
            geometry=geometry,
            groups=tuple(groups),
            num_auvs=int(data["num_auvs"]),
            constants=constants,
            vortices=vortices,
            seed=int(data.get("seed", 0)),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ScenarioError(f"malformed scenario: {exc!r}") from exc
    return sc.validate()


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(to_dict(sc), indent=1) + "\n")


def load_scenario(path) -> Scenario:
    """Read and validate a JSON scenario file."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno - 1 < len(text.splitlines()) else ""
        raise ScenarioParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}") from exc
    return from_dict(data)


# ---------------------------------------------------------------------------
# random generation


def _split_counts(total: int, k: int) -> list[int]:
    base, extra = divmod(total, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def generate_random(
    k: int,
    m: int,
    devices: int | None = None,
    seed: int = 0,
    *,
    devices_per_dg: int | Sequence[int] | None = None,
    extent: float = 2000.0,
    disc_radius: float = 50.0,
    catalog_size: int = 30,
    zipf_exponent: float = 0.8,
    num_vortices: int = 3,
    vortex_strength: float = 8.0,
    vortex_radius: float = 100.0,
    constants: Constants | None = None,
    geometry: Geometry | None = None,
) -> Scenario:
    """Draw a random scenario.

    Group centroids are uniform in an ``extent`` x ``extent`` square centred
    under the station; devices are uniform in a disc of ``disc_radius``
    around their centroid. Tasks come from a content catalog with Zipf-like
    popularity so that identical requests recur.
    """
    if k < 1 or m < 1:
        raise ValueError("k and m must be >= 1")
    if devices_per_dg is not None:
        counts = [devices_per_dg] * k if isinstance(devices_per_dg, int) else list(devices_per_dg)
        if len(counts) != k:
            raise ValueError("devices_per_dg must have k entries")
    else:
        counts = _split_counts(devices if devices is not None else 190 * k // 15, k)
    if min(counts) < 1:
        raise ValueError("every group needs at least one device")
    geometry = geometry or Geometry()
    constants = constants or Constants()
    rng = np.random.Generator(np.random.PCG64(seed))
    half = extent / 2.0
    h0, d0 = geometry.device_height, geometry.auv_height

    centroids = rng.uniform(-half, half, size=(k, 2))
    vort_xy = rng.uniform(-half, half, size=(num_vortices, 2))
    cat_bits = rng.uniform(1e5, 3e5, size=catalog_size)
    cat_alpha = rng.uniform(1500.0, 2000.0, size=catalog_size)
    pop = np.arange(1, catalog_size + 1, dtype=float) ** -zipf_exponent
    pop /= pop.sum()

    groups = []
    for g in range(k):
        cx, cy = centroids[g]
        devs = []
        for _ in range(counts[g]):
            rad = disc_radius * math.sqrt(rng.uniform())
            ang = rng.uniform(0.0, 2 * math.pi)
            c = int(rng.choice(catalog_size, p=pop))
            devs.append(
                Device(
                    pos=(float(cx + rad * math.cos(ang)), float(cy + rad * math.sin(ang)), float(h0)),
                    cpu_hz=float(rng.uniform(1e9, 4e9)),
                    task=Task(data_bits=float(cat_bits[c]), complexity=float(cat_alpha[c]), content_id=c),
                    time_value=float(rng.uniform(10.0, 20.0)),
                    energy_value=float(rng.uniform(1.0, 2.0)),
                )
            )
        groups.append(DeviceGroup(centroid=(float(cx), float(cy), float(h0)), devices=tuple(devs)))
    vortices = tuple(
        Vortex(center=(float(x), float(y), float(d0)), strength=vortex_strength, radius=vortex_radius)
        for x, y in vort_xy
    )
    return Scenario(
        geometry=geometry,
        groups=tuple(groups),
        num_auvs=m,
        constants=constants,
        vortices=vortices,
        seed=seed,
    ).validate()
