"""Desk-scale sweeps that write plot-ready CSV files plus a manifest.

Each experiment is a list of independent cells. A cell evaluates fixed
schemes directly or trains the actor-critic agent, and returns CSV rows.
Every row carries the seed and the scenario digest so files from different
runs can be joined safely.
"""

from __future__ import annotations

import csv
import io
import json
import platform
import traceback
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, a3c, baselines, routing
from .baselines import SchemeSpec
from .economics import ProfitBreakdown, evaluate
from .mdp import EnvConfig
from .scenario import Scenario, generate_random

EXPERIMENTS = (
    "fig7_trajectories",
    "fig6_profit_vs_auvs",
    "fig8_offload",
    "fig9_cache",
    "fig10_alloc",
    "fig12_lr",
    "oracle_gap",
)

PROFIT_COLUMNS = ["Re", "CT", "CF", "penalty", "Pr"]


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    out_dir: str = "results"
    num_groups: int = 6
    num_auvs: int = 2
    num_devices: int = 30
    auv_counts: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    proportions: tuple[float, ...] = (0.25, 0.5, 0.75)
    train_steps: int = 6000
    lr: float = 1e-3
    grid_step: float = 0.25
    vortex_strength: float = 8.0
    scenario_path: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if len(self.seeds) < 1:
            raise ValueError("need at least one seed")
        if min(self.seeds) < 0:
            raise ValueError("seeds must be non-negative")
        if not self.auv_counts or not self.proportions:
            raise ValueError("sweep ranges must be nonempty")
        if self.train_steps < 1:
            raise ValueError("train_steps must be >= 1")

    @classmethod
    def full_scale(cls, experiment: str, **kw) -> "ExperimentSpec":
        """Large sizes: 15 groups, 4 AUVs, 190 devices; slow."""
        base = dict(num_groups=15, num_auvs=4, num_devices=190, train_steps=200_000)
        base.update(kw)
        return cls(experiment, **base)


@dataclass
class ExperimentOutcome:
    files: list[Path]
    failed: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed


# ---------------------------------------------------------------------------
# shared helpers


def scenario_for(spec: ExperimentSpec, seed: int, num_auvs: int | None = None) -> Scenario:
    if spec.scenario_path:
        from .scenario import load_scenario

        sc = load_scenario(spec.scenario_path)
        return sc if num_auvs is None else sc.with_auvs(num_auvs)
    return generate_random(
        spec.num_groups, num_auvs or spec.num_auvs, devices=spec.num_devices, seed=seed,
        vortex_strength=spec.vortex_strength,
    )


def train_config(spec: ExperimentSpec, seed: int, **kw) -> a3c.TrainConfig:
    return a3c.TrainConfig(workers=1, max_steps=spec.train_steps, lr=spec.lr, seed=seed, **kw)


def trained_breakdown(sc: Scenario, spec: ExperimentSpec, seed: int, env_config: EnvConfig) -> ProfitBreakdown:
    res = a3c.train(sc, train_config(spec, seed), env_config)
    return evaluate(sc, res.best_decisions, strict=True)


def profit_row(seed: int, sc: Scenario, label: str, bd: ProfitBreakdown, **extra) -> dict:
    row = {"seed": seed, "scenario_hash": sc.digest(), "algo": label, **extra}
    for name, val in zip(PROFIT_COLUMNS, (bd.revenue, bd.task_cost, bd.movement_cost, bd.penalty, bd.profit)):
        row[name] = f"{val:.6f}"
    return row


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        cols = list(rows[0])
        for r in rows[1:]:
            cols += [c for c in r if c not in cols]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# cells


def cell_trajectories(spec: ExperimentSpec, seed: int) -> dict[str, list[dict]]:
    sc = scenario_for(spec, seed)
    plans = {"agnostic": baselines.env_agnostic_plan(sc), "aware": baselines.env_aware_plan(sc)}
    tab = routing.travel_tables(sc)
    paths, summary = [], []
    for name, plan in plans.items():
        text = routing.plan_to_csv(plan, sc)
        for rec in csv.DictReader(io.StringIO(text)):
            paths.append({"seed": seed, "scenario_hash": sc.digest(), "planner": name, **rec})
        bd = baselines.run_scheme(sc, SchemeSpec("none", routing=plan), seed).breakdown
        travel = sum(routing.tour_travel(t, tab)[0] for t in plan.tours)
        summary.append({
            "seed": seed, "scenario_hash": sc.digest(), "planner": name,
            "travel_energy_J": f"{travel:.6f}", "profit": f"{bd.profit:.6f}",
        })
    return {"fig7_trajectories": paths, "fig7_energy": summary}


def auv_sweep_profit(sc: Scenario, spec: ExperimentSpec, seed: int) -> ProfitBreakdown:
    """Trained service decisions on the environment-aware plan for this fleet size."""
    plan = baselines.env_aware_plan(sc)
    return trained_breakdown(sc, spec, seed, EnvConfig(plan=plan))


def cell_profit_vs_auvs(spec: ExperimentSpec, seed: int) -> dict[str, list[dict]]:
    rows = []
    for m in spec.auv_counts:
        sc = scenario_for(spec, seed, num_auvs=m)
        rows.append(profit_row(seed, sc, "a3c", auv_sweep_profit(sc, spec, seed), M=m))
    return {"fig6_profit_vs_auvs": rows}


def offload_schemes(spec: ExperimentSpec) -> list[SchemeSpec]:
    out = [SchemeSpec("full", cache="full"), SchemeSpec("none"), SchemeSpec("random", 0.5, "full")]
    out += [SchemeSpec("partial", p, "full") for p in spec.proportions]
    return out


def cell_offload(spec: ExperimentSpec, seed: int) -> dict[str, list[dict]]:
    sc = scenario_for(spec, seed)
    plan = baselines.env_aware_plan(sc)
    rows = [profit_row(seed, sc, "proposed", trained_breakdown(sc, spec, seed, EnvConfig(plan=plan)))]
    for s in offload_schemes(spec):
        rows.append(profit_row(seed, sc, s.name, baselines.run_scheme(sc, s, seed, plan).breakdown))
    return {"fig8_offload": rows}


def cell_cache(spec: ExperimentSpec, seed: int) -> dict[str, list[dict]]:
    sc = scenario_for(spec, seed)
    plan = baselines.env_aware_plan(sc)
    rows = [
        profit_row(seed, sc, "proposed", trained_breakdown(sc, spec, seed, EnvConfig(plan=plan))),
        profit_row(seed, sc, "proposed-no-cache",
                   trained_breakdown(sc, spec, seed, EnvConfig(plan=plan, caching=False))),
    ]
    schemes = [SchemeSpec("full", cache="none"), SchemeSpec("full", cache="full"), SchemeSpec("full", cache="random", cache_p=0.5)]
    schemes += [SchemeSpec("full", cache="partial", cache_p=p) for p in spec.proportions]
    for s in schemes:
        rows.append(profit_row(seed, sc, s.name, baselines.run_scheme(sc, s, seed, plan).breakdown))
    return {"fig9_cache": rows}


ALLOCATION_VARIANTS = {
    "joint": ("learned", "learned"),
    "bandwidth-only": ("learned", "equal"),
    "compute-only": ("equal", "learned"),
    "equal": ("equal", "equal"),
}


def cell_alloc(spec: ExperimentSpec, seed: int) -> dict[str, list[dict]]:
    sc = scenario_for(spec, seed)
    plan = baselines.env_aware_plan(sc)
    rows = []
    for label, (bw, cp) in ALLOCATION_VARIANTS.items():
        bd = trained_breakdown(sc, spec, seed, EnvConfig(plan=plan, bandwidth=bw, compute=cp))
        rows.append(profit_row(seed, sc, label, bd))
    return {"fig10_alloc": rows}


def cell_lr(spec: ExperimentSpec, seed: int) -> dict[str, list[dict]]:
    sc = scenario_for(spec, seed)
    curves, finals = [], []
    for label, adaptive in (("fixed", False), ("adaptive", True)):
        res = a3c.train(sc, train_config(spec, seed, adaptive_lr=adaptive))
        for rec in csv.DictReader(io.StringIO(res.curve_csv())):
            curves.append({"seed": seed, "scenario_hash": sc.digest(), "mode": label, **rec})
        finals.append({
            "seed": seed, "scenario_hash": sc.digest(), "mode": label,
            "final_mean_profit": f"{res.final_profit:.6f}", "best_profit": f"{res.best_profit:.6f}",
        })
    return {"fig12_lr": curves, "fig12_final": finals}


def tiny_instance(seed: int, num_groups: int = 4, num_auvs: int = 2) -> Scenario:
    """Oracle-sized instance: up to 3 devices per group."""
    rng = np.random.Generator(np.random.PCG64(10_000 + seed))
    counts = [int(c) for c in rng.integers(1, 4, size=num_groups)]
    return generate_random(num_groups, num_auvs, seed=seed, devices_per_dg=counts, extent=1500.0)


def oracle_gap_row(sc: Scenario, spec: ExperimentSpec, seed: int) -> dict:
    orc = baselines.oracle(sc, spec.grid_step)
    res = a3c.train(sc, train_config(spec, seed))
    bd = evaluate(sc, res.best_decisions, strict=True)
    return {
        "seed": seed, "scenario_hash": sc.digest(), "K": sc.K, "M": sc.M,
        "oracle_profit": f"{orc.profit:.6f}", "a3c_profit": f"{bd.profit:.6f}",
        "oracle_nodes": orc.nodes_searched,
    }


def cell_oracle_gap(spec: ExperimentSpec, seed: int) -> dict[str, list[dict]]:
    sc = tiny_instance(seed, min(spec.num_groups, 5), min(spec.num_auvs, 2))
    return {"oracle_gap": [oracle_gap_row(sc, spec, seed)]}


CELLS = {
    "fig7_trajectories": cell_trajectories,
    "fig6_profit_vs_auvs": cell_profit_vs_auvs,
    "fig8_offload": cell_offload,
    "fig9_cache": cell_cache,
    "fig10_alloc": cell_alloc,
    "fig12_lr": cell_lr,
    "oracle_gap": cell_oracle_gap,
}


def summarize_auv_sweep(rows: list[dict]) -> list[dict]:
    """(M, mean profit, std) over seeds."""
    out = []
    for m in sorted({int(r["M"]) for r in rows}):
        sel = [r for r in rows if int(r["M"]) == m]
        vals = np.array([float(r["Pr"]) for r in sel])
        out.append({
            "M": m, "mean_profit": f"{vals.mean():.6f}", "std_profit": f"{vals.std():.6f}",
            "seed": ";".join(str(r["seed"]) for r in sel),
            "scenario_hash": ";".join(sorted({r["scenario_hash"] for r in sel})),
        })
    return out


# ---------------------------------------------------------------------------
# runner


def run_experiment(spec: ExperimentSpec) -> ExperimentOutcome:
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables: dict[str, list[dict]] = {}
    failed = []
    for seed in spec.seeds:
        try:
            parts = CELLS[spec.experiment](spec, seed)
        except Exception as exc:  # a failed cell must not sink the sweep
            failed.append({"seed": seed, "error": f"{type(exc).__name__}: {exc}",
                           "trace": traceback.format_exc(limit=3)})
            continue
        for name, rows in parts.items():
            tables.setdefault(name, []).extend(rows)
    if "fig6_profit_vs_auvs" in tables:
        tables["fig6_summary"] = summarize_auv_sweep(tables["fig6_profit_vs_auvs"])
    files = []
    for name, rows in tables.items():
        path = out / f"{name}.csv"
        path.write_text(rows_to_csv(rows), newline="")
        files.append(path)
    manifest = {
        "experiment": spec.experiment,
        "config": asdict(spec),
        "seeds": list(spec.seeds),
        "code_version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "files": sorted(p.name for p in files),
        "failed_cells": failed,
    }
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return ExperimentOutcome(files + [mpath], failed)


def spec_from_manifest(path) -> ExperimentSpec:
    cfg = json.loads(Path(path).read_text())["config"]
    cfg["seeds"] = tuple(cfg["seeds"])
    cfg["auv_counts"] = tuple(cfg["auv_counts"])
    cfg["proportions"] = tuple(cfg["proportions"])
    return ExperimentSpec(**cfg)


def with_output(spec: ExperimentSpec, out_dir) -> ExperimentSpec:
    return replace(spec, out_dir=str(out_dir))
