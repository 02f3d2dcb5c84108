"""Fixed decision schemes, route planners and an exhaustive small-instance oracle."""

from __future__ import annotations

import itertools
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import routing
from .acoustics import channel_table
from .economics import DecisionSet, ProfitBreakdown, audit, evaluate, fairness_penalty, project_to_feasible, service_value
from .routing import RoutePlan, TravelTables, tour_travel
from .scenario import Scenario

OFFLOAD_MODES = ("full", "none", "random", "partial")
CACHE_MODES = ("none", "full", "random", "partial")
ROUTING_MODES = ("nearest", "random", "agnostic", "aware")


# ---------------------------------------------------------------------------
# route planning


def _angles(sc: Scenario) -> np.ndarray:
    hp = sc.hover_points
    return np.arctan2(hp[:, 1], hp[:, 0])


def balanced_partition(sc: Scenario, m: int | None = None) -> list[list[int]]:
    """Split groups into m angular sectors around the depot with near-equal counts."""
    m = m or sc.M
    order = np.argsort(_angles(sc), kind="stable")
    sizes = [sc.K // m + (1 if j < sc.K % m else 0) for j in range(m)]
    out, i = [], 0
    for s in sizes:
        out.append([int(k) for k in order[i:i + s]])
        i += s
    return out


def nearest_neighbor_tour(groups, energy: np.ndarray) -> list[int]:
    left = list(groups)
    tour, node = [], 0
    while left:
        nxt = min(left, key=lambda k: (energy[node, k + 1], k))
        tour.append(nxt)
        left.remove(nxt)
        node = nxt + 1
    return tour


def _plan_cost(tours, tables: TravelTables, sc: Scenario, hover_times) -> float:
    """Movement cost plus fairness penalty of a candidate plan."""
    chi = sc.constants.cost_auv
    e_tot, cycles = 0.0, []
    for t in tours:
        e, tt = tour_travel(t, tables)
        hov = float(sum(hover_times[k] for k in t))
        e_tot += e + float(sum(hover_times[k] * tables.hover_power[k] for k in t))
        cycles.append(tt + hov)
    return chi * e_tot + fairness_penalty(sc, max(cycles) - min(cycles))


def improve_plan(tours, tables: TravelTables, sc: Scenario, hover_times, max_rounds: int = 200):
    """First-improvement local search with 2-opt, relocate and swap moves."""
    tours = [list(t) for t in tours]
    best = _plan_cost(tours, tables, sc, hover_times)
    for _ in range(max_rounds):
        improved = False
        for cand in _neighbors(tours):
            c = _plan_cost(cand, tables, sc, hover_times)
            if c < best - 1e-9 * max(1.0, abs(best)):
                tours, best, improved = cand, c, True
                break
        if not improved:
            break
    return tours, best


def _neighbors(tours):
    m = len(tours)
    for j, t in enumerate(tours):
        for a in range(len(t) - 1):
            for b in range(a + 1, len(t)):
                nt = t[:a] + t[a:b + 1][::-1] + t[b + 1:]
                yield [nt if i == j else x for i, x in enumerate(tours)]
    for j in range(m):
        for a in range(len(tours[j])):
            k = tours[j][a]
            for i in range(m):
                if i == j:
                    continue
                for pos in range(len(tours[i]) + 1):
                    new = [list(x) for x in tours]
                    del new[j][a]
                    new[i].insert(pos, k)
                    yield new
    for j in range(m):
        for i in range(j + 1, m):
            for a in range(len(tours[j])):
                for b in range(len(tours[i])):
                    new = [list(x) for x in tours]
                    new[j][a], new[i][b] = tours[i][b], tours[j][a]
                    yield new


def local_service_times(sc: Scenario) -> np.ndarray:
    arr = sc.arrays
    t = arr.complexity * arr.data_bits / arr.cpu_hz
    out = np.zeros(sc.K)
    np.maximum.at(out, arr.group, t)
    return out


def env_agnostic_plan(sc: Scenario, hover_times=None) -> RoutePlan:
    """Plan as if the water were still: balanced sectors, nearest neighbor, local search."""
    hover_times = local_service_times(sc) if hover_times is None else hover_times
    tab = routing.travel_tables(sc, still_water=True)
    tours = [nearest_neighbor_tour(g, tab.energy) for g in balanced_partition(sc)]
    tours, _ = improve_plan(tours, tab, sc, hover_times)
    return RoutePlan.of(tours)


def env_aware_plan(sc: Scenario, hover_times=None) -> RoutePlan:
    """Refine the still-water plan against the true current field.

    Starting from the agnostic plan and accepting only improvements means
    the result never costs more than the agnostic plan under the true field.
    """
    hover_times = local_service_times(sc) if hover_times is None else hover_times
    start = env_agnostic_plan(sc, hover_times)
    tours, _ = improve_plan(start.tours, routing.travel_tables(sc), sc, hover_times)
    return RoutePlan.of(tours)


def nearest_neighbor_plan(sc: Scenario) -> RoutePlan:
    tab = routing.travel_tables(sc)
    return RoutePlan.of([nearest_neighbor_tour(g, tab.energy) for g in balanced_partition(sc)])


def random_order_plan(sc: Scenario, rng: np.random.Generator) -> RoutePlan:
    return RoutePlan.of([list(rng.permutation(g)) for g in balanced_partition(sc)])


def plan_for(sc: Scenario, mode, rng: np.random.Generator | None = None) -> RoutePlan:
    if isinstance(mode, RoutePlan):
        return mode
    if mode == "nearest":
        return nearest_neighbor_plan(sc)
    if mode == "random":
        return random_order_plan(sc, rng or np.random.default_rng(0))
    if mode == "agnostic":
        return env_agnostic_plan(sc)
    if mode == "aware":
        return env_aware_plan(sc)
    raise ValueError(f"unknown routing mode {mode!r}")


# ---------------------------------------------------------------------------
# fixed schemes


@dataclass(frozen=True)
class SchemeSpec:
    offload: str = "full"
    offload_p: float = 0.5
    cache: str = "none"
    cache_p: float = 0.5
    allocation: str = "equal"
    routing: object = "agnostic"

    def __post_init__(self):
        if self.offload not in OFFLOAD_MODES:
            raise ValueError(f"offload mode must be one of {OFFLOAD_MODES}")
        if self.cache not in CACHE_MODES:
            raise ValueError(f"cache mode must be one of {CACHE_MODES}")
        if self.allocation != "equal":
            raise ValueError("fixed schemes only support equal allocation")
        if not isinstance(self.routing, RoutePlan) and self.routing not in ROUTING_MODES:
            raise ValueError(f"routing mode must be one of {ROUTING_MODES} or a RoutePlan")
        if not (0 <= self.offload_p <= 1 and 0 <= self.cache_p <= 1):
            raise ValueError("scheme proportions must lie in [0, 1]")

    @property
    def name(self) -> str:
        off = self.offload if self.offload in ("full", "none") else f"{self.offload}{self.offload_p:g}"
        cac = self.cache if self.cache in ("full", "none") else f"{self.cache}{self.cache_p:g}"
        return f"offload-{off}/cache-{cac}"


@dataclass(frozen=True)
class SchemeResult:
    breakdown: ProfitBreakdown
    decisions: DecisionSet


def equal_shares(sc: Scenario, o, h):
    arr = sc.arrays
    tx = o & ~h
    n_tx = np.bincount(arr.group, weights=tx, minlength=sc.K)[arr.group]
    n_o = np.bincount(arr.group, weights=o, minlength=sc.K)[arr.group]
    r = np.where(tx, 1.0 / np.maximum(n_tx, 1), 0.0)
    f = np.where(o, 1.0 / np.maximum(n_o, 1), 0.0)
    return r, f


def _offload_choice(sc: Scenario, spec: SchemeSpec, rng) -> np.ndarray:
    arr, n = sc.arrays, sc.arrays.n
    if spec.offload == "full":
        return np.ones(n, bool)
    if spec.offload == "none":
        return np.zeros(n, bool)
    if spec.offload == "random":
        return rng.random(n) < spec.offload_p
    # partial: in every group offload the share of devices with the largest local energy
    e_loc = sc.constants.cpu_energy_mu * arr.cpu_hz**sc.constants.cpu_exponent * arr.complexity * arr.data_bits / arr.cpu_hz
    o = np.zeros(n, bool)
    for k in range(sc.K):
        sl = arr.slice(k)
        cnt = int(round(spec.offload_p * (sl.stop - sl.start)))
        top = np.argsort(-e_loc[sl], kind="stable")[:cnt]
        o[sl.start + top] = True
    return o


def _cache_choice(sc: Scenario, spec: SchemeSpec, o, rng) -> np.ndarray:
    arr, n = sc.arrays, sc.arrays.n
    if spec.cache == "none":
        return np.zeros(n, bool)
    if spec.cache == "random":
        return o & (rng.random(n) < spec.cache_p)
    ids, counts = np.unique(arr.content_id[o], return_counts=True)
    rank = ids[np.lexsort((ids, -counts))]
    if spec.cache == "partial":
        rank = rank[: int(round(spec.cache_p * len(rank)))]
    keep, used = [], 0.0
    for cid in rank:
        z = arr.data_bits[arr.content_id == cid][0]
        if used + z <= sc.constants.storage_cap:
            keep.append(cid)
            used += z
    return o & np.isin(arr.content_id, keep)


def scheme_decisions(sc: Scenario, spec: SchemeSpec, seed: int = 0, plan: RoutePlan | None = None) -> DecisionSet:
    rng = np.random.Generator(np.random.PCG64(seed))
    o = _offload_choice(sc, spec, rng)
    h = _cache_choice(sc, spec, o, rng)
    plan = plan or plan_for(sc, spec.routing, rng)
    # links with a zero SNR bound cannot relay, so such devices stay local
    d = project_to_feasible(sc, o, h, np.zeros(len(o)), np.zeros(len(o)), plan)
    r, f = equal_shares(sc, d.offload, d.cache)
    return DecisionSet.build(d.offload, d.cache, r, f, plan)


def run_scheme(sc: Scenario, spec: SchemeSpec, seed: int = 0, plan: RoutePlan | None = None) -> SchemeResult:
    d = scheme_decisions(sc, spec, seed, plan)
    return SchemeResult(evaluate(sc, d, strict=True), d)


# ---------------------------------------------------------------------------
# exhaustive oracle


class InstanceTooLargeError(ValueError):
    pass


ORACLE_LIMITS = {"K": 6, "M": 2, "devices_per_dg": 3}


@dataclass(frozen=True)
class OracleResult:
    decisions: DecisionSet
    profit: float
    breakdown: ProfitBreakdown
    nodes_searched: int
    wall_time: float


def simplex_lattice(n: int, step: float, positive: bool = True) -> list[tuple[float, ...]]:
    """Points of the grid {step, 2 step, ..} ^ n whose coordinates sum to at most 1."""
    units = int(round(1.0 / step))
    lo = 1 if positive else 0
    pts = []
    for combo in itertools.product(range(lo, units + 1), repeat=n):
        if sum(combo) <= units:
            pts.append(tuple(c * step for c in combo))
    return pts


@dataclass
class _GroupOptions:
    o: np.ndarray
    h: np.ndarray
    r: np.ndarray
    f: np.ndarray
    value: np.ndarray  # service profit minus hover cost
    time: np.ndarray  # group service time
    contents: list  # frozenset of cached content ids per option


def _share_points(n: int, step: float) -> list[tuple[float, ...]]:
    if n == 0:
        return [()]
    pts = set(simplex_lattice(n, step))
    pts.add(tuple([1.0 / n] * n))
    return sorted(pts)


def group_options(sc: Scenario, k: int, step: float, caching: bool = True) -> _GroupOptions:
    """Every lattice decision for one group, evaluated in one vectorized batch."""
    arr, c = sc.arrays, sc.constants
    ch = channel_table(sc)
    sl = arr.slice(k)
    n = sl.stop - sl.start
    link_ok = (ch.snr_da[sl] > 0) & (ch.snr_as[k] > 0)
    rows = []
    modes = (0, 1, 2) if caching else (0, 1)  # local, offload, offload cached
    for pattern in itertools.product(modes, repeat=n):
        pat = np.array(pattern)
        o = pat > 0
        h = pat == 2
        if np.any(o & ~h & ~link_ok):
            continue
        tx = np.flatnonzero(o & ~h)
        off = np.flatnonzero(o)
        for rp in _share_points(len(tx), step):
            r = np.zeros(n)
            r[tx] = rp
            for fp in _share_points(len(off), step):
                f = np.zeros(n)
                f[off] = fp
                rows.append((o, h, r, f))
    O = np.array([x[0] for x in rows])
    H = np.array([x[1] for x in rows])
    R = np.array([x[2] for x in rows])
    F = np.array([x[3] for x in rows])
    sv = service_value(sc, O, H, R, F, idx=sl)
    a = sv.outcomes.total_time.max(axis=1)
    hover = routing.travel_tables(sc).hover_power[k]
    value = (sv.revenue - sv.task_cost).sum(axis=1) - c.cost_auv * a * hover
    cids = arr.content_id[sl]
    contents = [frozenset(cids[hh].tolist()) for hh in H]
    return _GroupOptions(O, H, R, F, value, a, contents)


def _prune(G, V, rho, contents=None):
    """Indices of points not dominated under a rho-Lipschitz penalty in G.

    b dominates a if V_b - rho |G_b - G_a| >= V_a (and, when contents are
    tracked, b stores a subset of a's contents). Exact ties keep the first.
    """
    n = len(G)
    if contents is not None:
        keep = []
        for a in range(n):
            dom = False
            for b in range(n):
                if b == a or not contents[b] <= contents[a]:
                    continue
                slack = V[b] - rho * abs(G[b] - G[a]) - V[a]
                if slack > 0 or (slack == 0 and b < a):
                    dom = True
                    break
            if not dom:
                keep.append(a)
        return np.array(keep, dtype=np.int64)
    if rho == 0:
        return np.array([int(np.argmax(V))])
    order = np.lexsort((np.arange(n), G))
    keep = np.ones(n, bool)
    best = -np.inf
    for i in order:  # dominated from the left
        if best >= V[i] + rho * G[i]:
            keep[i] = False
        best = max(best, V[i] + rho * G[i])
    # dominance is transitive, so the right pass only needs the survivors
    best = -np.inf
    for i in order[::-1]:
        if not keep[i]:
            continue
        if best >= V[i] - rho * G[i]:
            keep[i] = False
        else:
            best = V[i] - rho * G[i]
    return np.flatnonzero(keep)


def _tour_options(groups, tables: TravelTables):
    """(order, energy, time) for every permutation of a group set."""
    out = []
    for perm in itertools.permutations(sorted(groups)):
        e, t = tour_travel(perm, tables)
        out.append((perm, e, t))
    return out


def oracle(sc: Scenario, grid_step: float = 0.25, caching: bool = True, workers: int = 1,
           limits: dict | None = None) -> OracleResult:
    """Best decision over a lattice of service decisions and all ordered route partitions.

    Exact over the searched lattice. The search splits into per-group option
    tables pruned by dominance and a front of (cycle-time difference, value)
    pairs per AUV assignment, which keeps the fairness penalty exact.
    """
    lim = dict(ORACLE_LIMITS, **(limits or {}))
    if sc.K > lim["K"]:
        raise InstanceTooLargeError(f"K={sc.K} exceeds the oracle limit K <= {lim['K']}")
    if sc.M > lim["M"]:
        raise InstanceTooLargeError(f"M={sc.M} exceeds the oracle limit M <= {lim['M']}")
    if sc.max_devices > lim["devices_per_dg"]:
        raise InstanceTooLargeError(
            f"{sc.max_devices} devices in a group exceeds the oracle limit {lim['devices_per_dg']}"
        )
    if grid_step not in (0.25, 0.5):
        raise ValueError("grid_step must be 0.25 or 0.5")
    t0 = time.perf_counter()
    c = sc.constants
    rho = c.fairness_penalty if sc.M > 1 else 0.0
    arr = sc.arrays
    all_bits = sum(arr.data_bits[arr.content_id == cid][0] for cid in np.unique(arr.content_id))
    track = caching and all_bits > c.storage_cap
    tables = routing.travel_tables(sc)

    opts = [group_options(sc, k, grid_step, caching) for k in range(sc.K)]
    nodes = sum(len(o.value) for o in opts)
    pruned = []
    for op in opts:
        # within a group the AUV sign is unknown, so prune with |G| symmetric cones
        keep = _prune(op.time, op.value, rho, op.contents if track else None)
        pruned.append(keep)

    best = {"key": None, "profit": -math.inf, "choice": None}
    lock = threading.Lock()
    count = [nodes]

    def content_bits(cs):
        return sum(arr.data_bits[arr.content_id == cid][0] for cid in cs)

    def solve_assignment(owner):
        # dynamic program over groups: entries (G, V, contents, choices)
        front = [(0.0, 0.0, frozenset(), ())]
        for k in range(sc.K):
            sgn = 1.0 if owner[k] == 0 else -1.0
            op, keep = opts[k], pruned[k]
            new = []
            for G, V, cs, ch in front:
                for i in keep:
                    ncs = cs | op.contents[i] if track else cs
                    if track and content_bits(ncs) > c.storage_cap:
                        continue
                    new.append((G + sgn * op.time[i], V + op.value[i], ncs, ch + (int(i),)))
            if not new:
                return []
            Gs = np.array([x[0] for x in new])
            Vs = np.array([x[1] for x in new])
            keep_idx = _prune(Gs, Vs, rho, [x[2] for x in new] if track else None)
            front = [new[i] for i in keep_idx]
        groups = [[k for k in range(sc.K) if owner[k] == j] for j in range(sc.M)]
        tour_opts = [_tour_options(g, tables) for g in groups]
        local_best = None
        n_eval = 0
        for combo in itertools.product(*tour_opts):
            energy = sum(x[1] for x in combo)
            if sc.M > 1:
                dt = combo[0][2] - combo[1][2]
            for G, V, cs, ch in front:
                n_eval += 1
                pen = fairness_penalty(sc, abs(dt + G)) if sc.M > 1 else 0.0
                profit = V - c.cost_auv * energy - pen
                plan = RoutePlan.of([x[0] for x in combo])
                key = (profit, plan.encoding())
                if local_best is None or profit > local_best[0] or (
                    profit == local_best[0] and key[1] < local_best[1]
                ):
                    local_best = (profit, key[1], plan, ch)
        return [(local_best, n_eval)] if local_best else []

    def consider(owner):
        for (profit, enc, plan, ch), n_eval in solve_assignment(owner):
            with lock:
                count[0] += n_eval
                if profit > best["profit"] or (profit == best["profit"] and enc < best["key"]):
                    best.update(key=enc, profit=profit, choice=(plan, ch))

    owners = [o for o in itertools.product(range(sc.M), repeat=sc.K)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(consider, owners))
    else:
        for o in owners:
            consider(o)

    plan, choice = best["choice"]
    n = arr.n
    o, h, r, f = np.zeros(n, bool), np.zeros(n, bool), np.zeros(n), np.zeros(n)
    for k, i in enumerate(choice):
        sl = arr.slice(k)
        o[sl], h[sl], r[sl], f[sl] = opts[k].o[i], opts[k].h[i], opts[k].r[i], opts[k].f[i]
    d = DecisionSet.build(o, h, r, f, plan)
    bd = evaluate(sc, d, strict=True)
    return OracleResult(d, bd.profit, bd, count[0], time.perf_counter() - t0)


def verify_oracle(sc: Scenario, res: OracleResult) -> bool:
    return audit(sc, res.decisions).hard_ok
