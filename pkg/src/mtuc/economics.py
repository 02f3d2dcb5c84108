"""Profit of a joint decision and its feasibility audit.

Revenue comes from the time and energy each offloaded device saves,
weighted by its own unit values. The provider pays for station computing
and AUV relaying (task cost) and for AUV cruising and hovering (movement
cost). An unbalanced fleet is charged a fairness penalty proportional to
how far the spread of AUV cycle times exceeds its tolerance.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import routing
from .acoustics import channel_table
from .routing import RoutePlan
from .scenario import Scenario
from .service import DeviceOutcomes, cache_capacity_check, device_outcomes

TOL = 1e-9


class InfeasibleDecisionError(ValueError):
    pass


@dataclass(frozen=True)
class DecisionSet:
    offload: np.ndarray
    cache: np.ndarray
    bandwidth: np.ndarray
    compute: np.ndarray
    plan: RoutePlan

    @classmethod
    def build(cls, offload, cache, bandwidth, compute, plan) -> "DecisionSet":
        o = np.asarray(offload, dtype=bool).copy()
        return cls(
            offload=o,
            cache=np.asarray(cache, dtype=bool).copy(),
            bandwidth=np.asarray(bandwidth, dtype=float).copy(),
            compute=np.asarray(compute, dtype=float).copy(),
            plan=plan if isinstance(plan, RoutePlan) else RoutePlan.of(plan),
        )

    @classmethod
    def all_local(cls, n: int, plan) -> "DecisionSet":
        z = np.zeros(n)
        return cls.build(z, z, z, z, plan)

    def same_as(self, other: "DecisionSet") -> bool:
        return (
            np.array_equal(self.offload, other.offload)
            and np.array_equal(self.cache, other.cache)
            and np.array_equal(self.bandwidth, other.bandwidth)
            and np.array_equal(self.compute, other.compute)
            and self.plan == other.plan
        )


@dataclass(frozen=True)
class ProfitBreakdown:
    revenue: float
    task_cost: float
    movement_cost: float
    penalty: float
    profit: float
    service_times: np.ndarray = field(repr=False)
    cycle_times: np.ndarray = field(repr=False)
    auv_energy: np.ndarray = field(repr=False)
    dg_revenue: np.ndarray = field(repr=False)
    dg_task_cost: np.ndarray = field(repr=False)
    time_savings: np.ndarray = field(repr=False)
    energy_savings: np.ndarray = field(repr=False)

    @property
    def gap(self) -> float:
        return float(self.cycle_times.max() - self.cycle_times.min())

    def csv_row(self, scenario_id: str, algo: str, seed: int) -> list:
        return [scenario_id, algo, seed, self.revenue, self.task_cost, self.movement_cost, self.penalty, self.profit]


PROFIT_CSV_HEADER = ["scenario_id", "algo", "seed", "Re", "CT", "CF", "penalty", "Pr"]


def breakdowns_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFIT_CSV_HEADER)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# per-device service economics


@dataclass(frozen=True)
class ServiceValue:
    """Per-device revenue, task cost and completion time for one decision."""

    outcomes: DeviceOutcomes
    time_savings: np.ndarray
    energy_savings: np.ndarray
    revenue: np.ndarray
    task_cost: np.ndarray


def service_value(sc: Scenario, o, h, r, f, idx=slice(None), strict: bool = True) -> ServiceValue:
    """Service economics of the devices selected by ``idx`` (default all)."""
    arr, c = sc.arrays, sc.constants
    ch = channel_table(sc)
    o = np.asarray(o, dtype=bool)
    out = device_outcomes(
        arr.data_bits[idx], arr.complexity[idx], arr.cpu_hz[idx],
        ch.snr_da[idx], ch.snr_as[arr.group[idx]],
        o, h, r, f, c, sc.geometry, strict=strict,
    )
    with np.errstate(invalid="ignore"):
        ts = np.where(o, out.t_local - out.total_time, 0.0)
        es = np.where(o, out.e_local - out.e_da, 0.0)
        revenue = arr.time_value[idx] * ts + arr.energy_value[idx] * es
        cost = np.where(o, c.cost_station * out.e_station + c.cost_auv * out.e_as, 0.0)
    return ServiceValue(out, ts, es, revenue, cost)


def group_sum(sc: Scenario, x) -> np.ndarray:
    return np.bincount(sc.arrays.group, weights=np.asarray(x, dtype=float), minlength=sc.K)


def group_max(sc: Scenario, x) -> np.ndarray:
    out = np.full(sc.K, -np.inf)
    np.maximum.at(out, sc.arrays.group, np.asarray(x, dtype=float))
    return out


def fairness_penalty(sc: Scenario, gap: float) -> float:
    c = sc.constants
    return c.fairness_penalty * max(0.0, gap - c.fairness_eps)


def evaluate(sc: Scenario, d: DecisionSet, strict: bool = False) -> ProfitBreakdown:
    """Profit breakdown of a decision.

    In strict mode any violated hard constraint raises. The fairness
    tolerance is soft in both modes: its excess is charged as a penalty and
    reported by :func:`audit`.
    """
    if strict:
        rep = audit(sc, d)
        if not rep.hard_ok:
            raise InfeasibleDecisionError(rep.summary())
    d.plan.check(sc.K, sc.M)
    sv = service_value(sc, d.offload, d.cache, d.bandwidth, d.compute)
    a = group_max(sc, sv.outcomes.total_time)
    tables = routing.travel_tables(sc)
    timing = routing.route_timing(d.plan, a, sc, tables)
    energy = routing.route_energy(d.plan, a, sc, tables)
    revenue = float(sv.revenue.sum())
    task_cost = float(sv.task_cost.sum())
    movement = sc.constants.cost_auv * float(energy.sum())
    penalty = fairness_penalty(sc, timing.gap)
    return ProfitBreakdown(
        revenue=revenue,
        task_cost=task_cost,
        movement_cost=movement,
        penalty=penalty,
        profit=revenue - task_cost - movement - penalty,
        service_times=a,
        cycle_times=timing.cycle,
        auv_energy=energy,
        dg_revenue=group_sum(sc, sv.revenue),
        dg_task_cost=group_sum(sc, sv.task_cost),
        time_savings=sv.time_savings,
        energy_savings=sv.energy_savings,
    )


# ---------------------------------------------------------------------------
# feasibility


HARD_CHECKS = (
    "fraction_range",
    "bandwidth_requires_offload",
    "bandwidth_zero_when_cached",
    "bandwidth_budget",
    "compute_requires_offload",
    "compute_budget",
    "cache_requires_offload",
    "cache_capacity",
    "offload_needs_bandwidth",
    "offload_needs_compute",
    "dg_coverage",
    "total_hops",
    "hop_count",
    "closed_tours",
)
SOFT_CHECKS = ("fairness",)


@dataclass(frozen=True)
class AuditReport:
    """Offending indices (devices, groups or messages) per constraint; empty means satisfied."""

    failures: dict

    @property
    def ok(self) -> bool:
        return not any(self.failures.values())

    @property
    def hard_ok(self) -> bool:
        return not any(v for k, v in self.failures.items() if k not in SOFT_CHECKS)

    def passed(self, name: str) -> bool:
        return not self.failures.get(name)

    def summary(self) -> str:
        bad = [f"{k}: {v}" for k, v in self.failures.items() if v]
        return "; ".join(bad) if bad else "all constraints satisfied"


def audit(sc: Scenario, d: DecisionSet) -> AuditReport:
    arr, c = sc.arrays, sc.constants
    ch = channel_table(sc)
    o, h, r, f = d.offload, d.cache, d.bandwidth, d.compute
    link_ok = (ch.snr_da > 0) & (ch.snr_as[arr.group] > 0)

    def idx(mask):
        return np.flatnonzero(mask).tolist()

    fail = {k: [] for k in HARD_CHECKS + SOFT_CHECKS}
    fail["fraction_range"] = idx((r < 0) | (r > 1 + TOL) | (f < 0) | (f > 1 + TOL) | ~np.isfinite(r) | ~np.isfinite(f))
    fail["bandwidth_requires_offload"] = idx((r > 0) & ~o)
    fail["bandwidth_zero_when_cached"] = idx((r > 0) & h)
    fail["bandwidth_budget"] = idx(group_sum(sc, r) > 1 + TOL)
    fail["compute_requires_offload"] = idx((f > 0) & ~o)
    fail["compute_budget"] = idx(group_sum(sc, f) > 1 + TOL)
    fail["cache_requires_offload"] = idx(h & ~o)
    cap = cache_capacity_check(h, arr.data_bits, c.storage_cap, arr.content_id)
    if not cap.ok:
        fail["cache_capacity"] = [f"over by {cap.over:.0f} bits"]
    fail["offload_needs_bandwidth"] = idx(o & ~h & ~((r > 0) & link_ok))
    fail["offload_needs_compute"] = idx(o & ~(f > 0))
    for msg in d.plan.violations(sc.K, sc.M):
        name = msg.split(":")[0]
        fail[name if name in fail else "closed_tours"].append(msg)
    if all(not fail[k] for k in HARD_CHECKS):
        sv = service_value(sc, o, h, r, f)
        a = group_max(sc, sv.outcomes.total_time)
        gap = routing.route_timing(d.plan, a, sc).gap
        if gap > c.fairness_eps + TOL:
            fail["fairness"] = [f"gap {gap:.3f} s exceeds {c.fairness_eps} s"]
    return AuditReport(fail)


def _evict_for_capacity(sc: Scenario, o, h):
    """Drop cached contents of lowest value density until storage fits."""
    arr, c = sc.arrays, sc.constants
    h = h.copy()
    while True:
        cap = cache_capacity_check(h, arr.data_bits, c.storage_cap, arr.content_id)
        if cap.ok:
            return h
        cids = np.unique(arr.content_id[h])
        dens = []
        for cid in cids:
            sel = h & (arr.content_id == cid)
            dens.append((arr.time_value[sel].sum() / arr.data_bits[sel][0], int(cid)))
        _, worst = min(dens)
        h &= arr.content_id != worst


def _fill_zero_shares(sc: Scenario, need, share):
    """Give devices in ``need`` an equal split of their group's unused share.

    Returns the new shares and a mask of devices that could not be served.
    """
    share = share.copy()
    failed = np.zeros_like(need)
    for k in range(sc.K):
        sl = sc.arrays.slice(k)
        nk = need[sl] & ~(share[sl] > 0)
        if not nk.any():
            continue
        left = 1.0 - share[sl].sum()
        if left > 1e-12:
            share[sl] = np.where(nk, left / nk.sum(), share[sl])
        else:
            failed[sl] = nk
    return share, failed


def project_to_feasible(sc: Scenario, offload, cache, bandwidth, compute, plan) -> DecisionSet:
    """Nearest-by-rule feasible decision.

    Binarizes and masks the decision vectors, evicts cached contents when the
    store overflows, rescales per-group shares that exceed one, and hands
    leftover shares to offloaded devices that have none. Devices that still
    cannot be served revert to local execution. Feasible input is returned
    unchanged.
    """
    arr = sc.arrays
    ch = channel_table(sc)
    o = np.asarray(offload) > 0.5
    h = (np.asarray(cache) > 0.5) & o
    r = np.clip(np.nan_to_num(np.asarray(bandwidth, dtype=float)), 0.0, 1.0)
    f = np.clip(np.nan_to_num(np.asarray(compute, dtype=float)), 0.0, 1.0)
    h = _evict_for_capacity(sc, o, h)
    link_ok = (ch.snr_da > 0) & (ch.snr_as[arr.group] > 0)
    o &= h | link_ok
    r = np.where(o & ~h, r, 0.0)
    f = np.where(o, f, 0.0)
    for share in (r, f):
        tot = group_sum(sc, share)
        scale = np.where(tot > 1 + TOL, 1.0 / np.maximum(tot, TOL), 1.0)
        share *= scale[arr.group]
    r, fail_r = _fill_zero_shares(sc, o & ~h, r)
    o &= ~fail_r
    r = np.where(o & ~h, r, 0.0)
    f = np.where(o, f, 0.0)
    f, fail_f = _fill_zero_shares(sc, o, f)
    if fail_f.any():
        o &= ~fail_f
        h &= o
        r = np.where(o & ~h, r, 0.0)
        f = np.where(o, f, 0.0)
    plan = plan if isinstance(plan, RoutePlan) else RoutePlan.of(plan)
    return DecisionSet(offload=o, cache=h & o, bandwidth=r, compute=f, plan=plan)


def with_plan(d: DecisionSet, plan: RoutePlan) -> DecisionSet:
    return replace(d, plan=plan)
