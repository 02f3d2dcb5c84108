"""Episodic decision process over one service cycle.

At every step the active AUV (round-robin over the fleet) picks an
unserved device group, cruises to it and serves it with the offload,
cache and resource-share decisions of the action. Without a fixed plan
the active AUV may instead retire: it returns to the depot and takes no
further groups, which lets a fleet leave vehicles idle. The last AUV
still in service can never retire. One episode serves every group
exactly once. Step rewards are the group's service profit
minus the movement cost of reaching and hovering at it; the last step
additionally pays for every AUV's return leg and the fairness penalty, so
the episode return equals the profit of the assembled joint decision.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import routing
from .acoustics import channel_table
from .economics import DecisionSet, fairness_penalty, service_value
from .routing import RoutePlan
from .scenario import Scenario
from .service import cache_capacity_check

DEVICE_FEATURES = 13


class InvalidActionError(ValueError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    caching: bool = True
    offloading: bool = True
    bandwidth: str = "learned"  # or "equal"
    compute: str = "learned"  # or "equal"
    plan: RoutePlan | None = None  # fixed tours; the agent then only decides service

    def __post_init__(self):
        for name in ("bandwidth", "compute"):
            if getattr(self, name) not in ("learned", "equal"):
                raise ValueError(f"{name} mode must be 'learned' or 'equal'")


@dataclass(frozen=True)
class EnvAction:
    dg: int
    offload: np.ndarray
    cache: np.ndarray
    bandwidth: np.ndarray
    compute: np.ndarray

    @classmethod
    def local(cls, dg: int, width: int) -> "EnvAction":
        z = np.zeros(width)
        return cls(dg, z.astype(bool), z.astype(bool), z, z)


@dataclass(frozen=True)
class EnvState:
    node: np.ndarray  # (M,) current travel-table node per AUV
    elapsed: np.ndarray  # (M,) cycle time accumulated so far
    served: np.ndarray  # (K,) bool
    active: int
    steps: int
    tours: tuple[tuple[int, ...], ...]
    o: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    service_times: np.ndarray = field(repr=False)
    cache_used: float = 0.0
    retired: np.ndarray | None = field(default=None, repr=False)  # (M,) bool

    @property
    def done(self) -> bool:
        return bool(self.served.all())

    def decision_set(self) -> DecisionSet:
        return DecisionSet.build(self.o, self.h, self.r, self.f, RoutePlan.of(self.tours))


class UnderwaterEnv:
    """Deterministic environment; ``step`` never mutates its input state."""

    def __init__(self, sc: Scenario, config: EnvConfig | None = None):
        self.sc = sc
        self.config = config or EnvConfig()
        if self.config.plan is not None:
            self.config.plan.check(sc.K, sc.M)
        self.tables = routing.travel_tables(sc)
        self.K, self.M = sc.K, sc.M
        self.width = sc.max_devices
        arr = sc.arrays
        self.arr = arr
        g = sc.geometry
        nodes = self.tables.nodes
        self.extent = max(1.0, float(np.abs(nodes[:, :2]).max()))
        self.time_scale = max(1.0, float(self.tables.time.max()) * 2)
        self.depth = g.water_depth
        self._static_dg = self._dg_static()
        self._dev_feat, self.device_mask = self._device_static()
        self.state_dim = 4 * self.M + 7 * self.K + 2 + self.M
        # group choices 0..K-1, then the retire action
        self.retire_action = self.K
        self.num_actions = self.K + 1

    # -- static feature tables

    def _dg_static(self):
        arr, sc = self.arr, self.sc
        out = np.zeros((self.K, 6))
        zmax, amax, fmax = arr.data_bits.max(), arr.complexity.max(), arr.cpu_hz.max()
        for k in range(self.K):
            sl = arr.slice(k)
            out[k] = (
                sc.hover_points[k, 0] / self.extent,
                sc.hover_points[k, 1] / self.extent,
                (sl.stop - sl.start) / self.width,
                arr.data_bits[sl].mean() / zmax,
                arr.complexity[sl].mean() / amax,
                arr.cpu_hz[sl].mean() / fmax,
            )
        return out

    def _device_static(self):
        sc, arr = self.sc, self.arr
        ch = channel_table(sc)
        n = arr.n
        one = np.ones(n)
        sizes = np.diff(arr.offsets)[arr.group].astype(float)
        share = 1.0 / sizes
        # standalone service value with equal shares, uncached and cached
        link_ok = (ch.snr_da > 0) & (ch.snr_as[arr.group] > 0)
        v_unc = service_value(sc, link_ok, np.zeros(n, bool), np.where(link_ok, share, 0), share, strict=False)
        v_cac = service_value(sc, one.astype(bool), one.astype(bool), np.zeros(n), share)
        unc = np.where(link_ok, v_unc.revenue - v_unc.task_cost, np.nan)
        cac = v_cac.revenue - v_cac.task_cost
        vscale = max(1e-9, np.nanmax(np.abs(np.concatenate([unc, cac]))))
        loc_t = arr.complexity * arr.data_bits / arr.cpu_hz
        loc_e = sc.constants.cpu_energy_mu * arr.cpu_hz**sc.constants.cpu_exponent * loc_t
        counts = np.bincount(arr.content_id)
        pop = counts[arr.content_id] / n

        def lognorm(x):
            lx = np.log(np.maximum(x, 1e-300))
            ok = x > 0
            if not ok.any():
                return np.full_like(x, -1.0)
            lo, hi = lx[ok].min(), lx[ok].max()
            return np.where(ok, (lx - lo) / max(hi - lo, 1e-9), -1.0)

        cols = np.column_stack([
            arr.data_bits / arr.data_bits.max(),
            arr.complexity / arr.complexity.max(),
            arr.cpu_hz / arr.cpu_hz.max(),
            arr.time_value / max(arr.time_value.max(), 1e-12),
            arr.energy_value / max(arr.energy_value.max(), 1e-12),
            lognorm(ch.snr_da),
            lognorm(ch.snr_as[arr.group]),
            loc_t / loc_t.max(),
            loc_e / loc_e.max(),
            pop / pop.max(),
            np.nan_to_num(unc / vscale, nan=-1.0),
            cac / vscale,
        ])
        feat = np.zeros((self.K, self.width, DEVICE_FEATURES))
        mask = np.zeros((self.K, self.width), dtype=bool)
        for k in range(self.K):
            sl = arr.slice(k)
            m = sl.stop - sl.start
            feat[k, :m, :-1] = cols[sl]
            mask[k, :m] = True
        return np.clip(feat, -1.0, 1.0), mask

    # -- episode

    def reset(self, seed: int | None = None) -> EnvState:
        n = self.arr.n
        z = np.zeros(n)
        return EnvState(
            node=np.zeros(self.M, dtype=np.int64),
            elapsed=np.zeros(self.M),
            served=np.zeros(self.K, dtype=bool),
            active=self._next_active(0, tuple(() for _ in range(self.M))),
            steps=0,
            tours=tuple(() for _ in range(self.M)),
            o=z.astype(bool), h=z.astype(bool), r=z.copy(), f=z.copy(),
            service_times=np.zeros(self.K),
            retired=np.zeros(self.M, dtype=bool),
        )

    def _next_active(self, start: int, tours, retired=None) -> int:
        plan = self.config.plan
        if plan is None:
            for d in range(self.M):
                j = (start + d) % self.M
                if retired is None or not retired[j]:
                    return j
            return start % self.M
        for d in range(self.M):
            j = (start + d) % self.M
            if len(tours[j]) < len(plan.tours[j]):
                return j
        return start % self.M

    def dg_mask(self, state: EnvState) -> np.ndarray:
        """Selectable actions: one entry per group plus the trailing retire action."""
        mask = np.zeros(self.num_actions, dtype=bool)
        plan = self.config.plan
        if plan is not None:
            j = state.active
            pos = len(state.tours[j])
            if pos < len(plan.tours[j]):
                mask[plan.tours[j][pos]] = True
            return mask
        mask[: self.K] = ~state.served
        mask[self.retire_action] = int((~state.retired).sum()) >= 2 and not state.done
        return mask

    def cached_contents(self, state: EnvState) -> np.ndarray:
        return np.unique(self.arr.content_id[state.h])

    def features(self, state: EnvState) -> np.ndarray:
        nodes = self.tables.nodes
        pos = nodes[state.node]
        auv = np.column_stack([
            pos[:, 0] / self.extent,
            pos[:, 1] / self.extent,
            pos[:, 2] / self.depth,
            state.elapsed / self.time_scale,
        ])
        dg = np.column_stack([state.served.astype(float), self._static_dg])
        cap = self.sc.constants.storage_cap
        glob = [1.0 - state.cache_used / cap if cap > 0 else 0.0, state.served.mean()]
        onehot = np.zeros(self.M)
        onehot[state.active] = 1.0
        x = np.concatenate([auv.ravel(), dg.ravel(), glob, onehot])
        return np.clip(x, -1.0, 1.0)

    def device_features(self, state: EnvState) -> np.ndarray:
        feat = self._dev_feat.copy()
        cached = self.cached_contents(state)
        if len(cached):
            flag = np.isin(self.arr.content_id, cached).astype(float)
            for k in range(self.K):
                sl = self.arr.slice(k)
                feat[k, : sl.stop - sl.start, -1] = flag[sl]
        return feat

    def project_group(self, state: EnvState, k: int, action: EnvAction):
        """Feasible decisions for group k given what is already stored."""
        cfg, arr, sc = self.config, self.arr, self.sc
        sl = arr.slice(k)
        m = sl.stop - sl.start
        ch = channel_table(sc)
        o = np.asarray(action.offload[:m], dtype=bool).copy() if cfg.offloading else np.zeros(m, bool)
        h = (np.asarray(action.cache[:m], dtype=bool) & o) if cfg.caching else np.zeros(m, bool)
        cid = arr.content_id[sl]
        z = arr.data_bits[sl]
        # capacity: contents already stored are free; evict least valuable new ones
        stored = self.cached_contents(state)
        room = sc.constants.storage_cap - state.cache_used
        while True:
            new = h & ~np.isin(cid, stored)
            ids = np.unique(cid[new])
            used = sum(z[cid == c][0] for c in ids)
            if used <= room:
                break
            dens = [(arr.time_value[sl][new & (cid == c)].sum() / z[cid == c][0], int(c)) for c in ids]
            h &= cid != min(dens)[1]
        link_ok = (ch.snr_da[sl] > 0) & (ch.snr_as[k] > 0)
        o &= h | link_ok
        tx = o & ~h
        if cfg.bandwidth == "equal":
            r = np.where(tx, 1.0 / max(tx.sum(), 1), 0.0)
        else:
            r = np.where(tx, np.clip(np.nan_to_num(action.bandwidth[:m]), 0, 1), 0.0)
            s = r.sum()
            if s > 1:
                r /= s
            need = tx & ~(r > 0)
            if need.any():
                left = 1.0 - r.sum()
                if left > 1e-12:
                    r[need] = left / need.sum()
                else:
                    o &= ~need
                    h &= o
                    tx = o & ~h
        if cfg.compute == "equal":
            f = np.where(o, 1.0 / max(o.sum(), 1), 0.0)
        else:
            f = np.where(o, np.clip(np.nan_to_num(action.compute[:m]), 0, 1), 0.0)
            s = f.sum()
            if s > 1:
                f /= s
            need = o & ~(f > 0)
            if need.any():
                left = 1.0 - f.sum()
                if left > 1e-12:
                    f[need] = left / need.sum()
                else:
                    o &= ~need
                    h &= o
                    r = np.where(o & ~h, r, 0.0)
                    f = np.where(o, f, 0.0)
        r = np.where(o & ~h, r, 0.0)
        return o, h, r, f

    def step(self, state: EnvState, action: EnvAction) -> tuple[EnvState, float, bool]:
        k = int(action.dg)
        if k == self.retire_action:
            return self._retire(state)
        if not 0 <= k < self.K:
            raise InvalidActionError(f"group index {k} out of range")
        if state.served[k]:
            raise InvalidActionError(f"group {k} already served")
        if not self.dg_mask(state)[k]:
            raise InvalidActionError(f"group {k} is not selectable for AUV {state.active}")
        sc, arr, tab = self.sc, self.arr, self.tables
        chi = sc.constants.cost_auv
        j = state.active
        sl = arr.slice(k)
        o, h, r, f = self.project_group(state, k, action)
        sv = service_value(sc, o, h, r, f, idx=sl)
        a_k = float(sv.outcomes.total_time.max())
        src, dst = int(state.node[j]), k + 1
        seg_e, seg_t = tab.energy[src, dst], tab.time[src, dst]
        reward = float(sv.revenue.sum() - sv.task_cost.sum()) - chi * (seg_e + a_k * tab.hover_power[k])

        node = state.node.copy()
        node[j] = dst
        elapsed = state.elapsed.copy()
        elapsed[j] += seg_t + a_k
        served = state.served.copy()
        served[k] = True
        tours = tuple(t + (k,) if i == j else t for i, t in enumerate(state.tours))
        so, sh, sr, sf = state.o.copy(), state.h.copy(), state.r.copy(), state.f.copy()
        so[sl], sh[sl], sr[sl], sf[sl] = o, h, r, f
        st = state.service_times.copy()
        st[k] = a_k
        cache_used = cache_capacity_check(sh, arr.data_bits, np.inf, arr.content_id).used_bits
        done = bool(served.all())
        if done:
            back = [(tab.energy[n, 0], tab.time[n, 0]) if n != 0 else (0.0, 0.0) for n in node]
            reward -= chi * sum(e for e, _ in back)
            elapsed = elapsed + np.array([t for _, t in back])
            node = np.zeros_like(node)
            reward -= fairness_penalty(sc, float(elapsed.max() - elapsed.min()))
        nxt = replace(
            state,
            node=node, elapsed=elapsed, served=served, tours=tours,
            o=so, h=sh, r=sr, f=sf, service_times=st, cache_used=cache_used,
            steps=state.steps + 1,
            active=self._next_active(j + 1, tours, state.retired),
        )
        return nxt, reward, done

    def _retire(self, state: EnvState) -> tuple[EnvState, float, bool]:
        if not self.dg_mask(state)[self.retire_action]:
            raise InvalidActionError(f"AUV {state.active} cannot retire now")
        tab = self.tables
        j = state.active
        n = int(state.node[j])
        node = state.node.copy()
        node[j] = 0
        elapsed = state.elapsed.copy()
        elapsed[j] += tab.time[n, 0] if n else 0.0
        reward = -self.sc.constants.cost_auv * (tab.energy[n, 0] if n else 0.0)
        retired = state.retired.copy()
        retired[j] = True
        nxt = replace(
            state, node=node, elapsed=elapsed, retired=retired, steps=state.steps + 1,
            active=self._next_active(j + 1, state.tours, retired),
        )
        return nxt, float(reward), False
