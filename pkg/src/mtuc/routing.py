"""AUV tours: representation, validation, timing and cycle energy.

Every AUV leaves the depot (directly below the station at cruise height),
visits its device groups in order, hovers at each while the group is
served, and returns to the depot. Node 0 of the travel tables is the depot
and node k + 1 is the hover point of group k.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import ocean
from .scenario import Scenario, memo


class InfeasiblePlanError(ValueError):
    pass


@dataclass(frozen=True)
class RoutePlan:
    tours: tuple[tuple[int, ...], ...]

    @classmethod
    def of(cls, tours) -> "RoutePlan":
        return cls(tuple(tuple(int(k) for k in t) for t in tours))

    @property
    def M(self) -> int:
        return len(self.tours)

    def violations(self, K: int, M: int | None = None) -> list[str]:
        out = []
        if M is not None and self.M != M:
            out.append(f"plan has {self.M} tours but the scenario has {M} AUVs")
        seen = [k for t in self.tours for k in t]
        bad = sorted({k for k in seen if not 0 <= k < K})
        if bad:
            out.append(f"dg_coverage: unknown group indices {bad}")
        counts = np.bincount([k for k in seen if 0 <= k < K], minlength=K)
        twice = np.flatnonzero(counts > 1).tolist()
        missing = np.flatnonzero(counts == 0).tolist()
        if twice:
            out.append(f"dg_coverage: groups served more than once {twice}")
        if missing:
            out.append(f"dg_coverage: groups never served {missing}")
        if len(seen) != K:
            out.append(f"total_hops: {len(seen)} hops for {K} groups")
        return out

    def check(self, K: int, M: int | None = None) -> "RoutePlan":
        v = self.violations(K, M)
        if v:
            raise InfeasiblePlanError("; ".join(v))
        return self

    def auv_of(self, K: int) -> np.ndarray:
        owner = np.full(K, -1, dtype=np.int64)
        for j, t in enumerate(self.tours):
            owner[list(t)] = j
        return owner

    def to_y(self, K: int, hops: int | None = None) -> np.ndarray:
        """Hop-indexed binary assignment: ``Y[j, s, k] = 1`` if AUV j's s-th stop is group k."""
        hops = hops or K
        y = np.zeros((self.M, hops, K), dtype=np.int8)
        for j, t in enumerate(self.tours):
            for s, k in enumerate(t):
                y[j, s, k] = 1
        return y

    def encoding(self) -> tuple:
        """Canonical ordering key used for deterministic tie-breaking."""
        return tuple((len(t), *t) for t in self.tours)


@dataclass(frozen=True)
class AssignmentVerdict:
    ok: bool
    plan: RoutePlan | None
    violations: tuple[str, ...] = ()


def validate_assignment(y, M: int, K: int) -> AssignmentVerdict:
    """Convert a hop-indexed binary assignment into a plan, or list what is wrong."""
    y = np.asarray(y)
    if y.ndim != 3 or y.shape[0] != M or y.shape[2] != K:
        return AssignmentVerdict(False, None, (f"shape {y.shape} does not match (M={M}, S, K={K})",))
    viol = []
    if not np.isin(y, (0, 1)).all():
        viol.append("binary: entries must be 0 or 1")
    per_dg = y.sum(axis=(0, 1))
    for k in np.flatnonzero(per_dg != 1):
        viol.append(f"dg_coverage: group {k} served {int(per_dg[k])} times")
    tours = []
    for j in range(M):
        per_hop = y[j].sum(axis=1)
        for s in np.flatnonzero(per_hop > 1):
            viol.append(f"hop_count: AUV {j} hop {s} visits {int(per_hop[s])} groups")
        used = per_hop > 0
        n_used = int(used.sum())
        if used[:n_used].sum() != n_used:
            viol.append(f"hop_count: AUV {j} has gaps in its hop sequence")
        tours.append(tuple(int(np.argmax(y[j, s])) for s in range(y.shape[1]) if used[s]))
    total = sum(len(t) for t in tours)
    if total != K:
        viol.append(f"total_hops: {total} hops for {K} groups")
    if viol:
        return AssignmentVerdict(False, None, tuple(viol))
    return AssignmentVerdict(True, RoutePlan.of(tours))


# ---------------------------------------------------------------------------
# travel tables


@dataclass(frozen=True)
class TravelTables:
    """Directed segment energy (J) and time (s) between depot and hover points,
    plus the hover power (W) at each hover point."""

    energy: np.ndarray
    time: np.ndarray
    hover_power: np.ndarray
    nodes: np.ndarray = field(repr=False)


def _build_tables(sc: Scenario, still_water: bool) -> TravelTables:
    g, c = sc.geometry, sc.constants
    nodes = np.vstack([np.asarray(g.depot)[None, :], sc.hover_points])
    vort = np.zeros((0, 5)) if still_water else sc.vortex_array
    energy, time = ocean.segment_matrices(nodes, vort, c, g.auv_height)
    hover = ocean.hover_power_many(sc.hover_points, vort, c, g.auv_height)
    return TravelTables(energy=energy, time=time, hover_power=hover, nodes=nodes)


def travel_tables(sc: Scenario, still_water: bool = False) -> TravelTables:
    """Tables for the scenario's current field (memoized on the scenario)."""
    key = "_travel_still" if still_water else "_travel"
    return memo(sc, key, lambda s: _build_tables(s, still_water))


def tour_nodes(tour) -> list[int]:
    return [0, *(k + 1 for k in tour), 0] if tour else []


def tour_travel(tour, tables: TravelTables) -> tuple[float, float]:
    """(energy J, time s) of cruising one closed tour."""
    nodes = tour_nodes(tour)
    if not nodes:
        return 0.0, 0.0
    a, b = nodes[:-1], nodes[1:]
    return float(tables.energy[a, b].sum()), float(tables.time[a, b].sum())


@dataclass(frozen=True)
class RouteTiming:
    travel: np.ndarray
    hover: np.ndarray
    cycle: np.ndarray

    @property
    def gap(self) -> float:
        return float(self.cycle.max() - self.cycle.min()) if len(self.cycle) else 0.0


def route_timing(plan: RoutePlan, service_times, sc: Scenario, tables: TravelTables | None = None) -> RouteTiming:
    plan.check(sc.K, sc.M)
    tables = tables or travel_tables(sc)
    a = np.asarray(service_times, dtype=float)
    travel = np.array([tour_travel(t, tables)[1] for t in plan.tours])
    hover = np.array([float(a[list(t)].sum()) for t in plan.tours])
    return RouteTiming(travel=travel, hover=hover, cycle=travel + hover)


def route_energy(plan: RoutePlan, service_times, sc: Scenario, tables: TravelTables | None = None) -> np.ndarray:
    """Per-AUV cycle energy (J): cruising segments plus hovering while serving."""
    plan.check(sc.K, sc.M)
    tables = tables or travel_tables(sc)
    a = np.asarray(service_times, dtype=float)
    out = []
    for t in plan.tours:
        e, _ = tour_travel(t, tables)
        out.append(e + float((a[list(t)] * tables.hover_power[list(t)]).sum()))
    return np.array(out)


def plan_to_csv(plan: RoutePlan, sc: Scenario) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["auv_id", "hop_index", "dg_id", "x", "y"])
    depot = sc.geometry.depot
    for j, t in enumerate(plan.tours):
        w.writerow([j, 0, -1, depot[0], depot[1]])
        for s, k in enumerate(t, start=1):
            hp = sc.hover_points[k]
            w.writerow([j, s, k, f"{hp[0]:.3f}", f"{hp[1]:.3f}"])
        w.writerow([j, len(t) + 1, -1, depot[0], depot[1]])
    return buf.getvalue()
