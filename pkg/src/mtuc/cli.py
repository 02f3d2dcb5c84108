"""Command line entry point: ``mtuc {gen|linkbudget|field|baseline|oracle|train|experiment}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import a3c, acoustics, baselines, experiments, ocean
from .economics import breakdowns_to_csv, evaluate
from .mdp import EnvConfig
from .scenario import Constants, Geometry, ScenarioError, generate_random, load_scenario, save_scenario, to_dict

SCHEME_ALIASES = {
    "full-offload": dict(offload="full", cache="none"),
    "full-offload-cache": dict(offload="full", cache="full"),
    "none": dict(offload="none", cache="none"),
    "random": dict(offload="random", cache="random"),
    "partial": dict(offload="partial", cache="partial"),
}


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, newline="")
    else:
        sys.stdout.write(text)


def _scenario(args):
    if args.scenario:
        return load_scenario(args.scenario)
    return generate_random(args.k, args.m, devices_per_dg=args.devices_per_dg, seed=args.seed)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    sc = generate_random(
        args.k, args.m, devices=args.devices, seed=args.seed, extent=args.extent,
        num_vortices=args.vortices, vortex_strength=args.vortex_strength,
    )
    if args.out:
        save_scenario(sc, args.out)
    else:
        sys.stdout.write(json.dumps(to_dict(sc), indent=2) + "\n")
    return 0


def cmd_linkbudget(args) -> int:
    c = Constants(freq_khz=args.f, shipping=args.s, wind=args.w)
    g = Geometry()
    noise = acoustics.noise_psd(args.f, args.s, args.w)
    comps = acoustics.noise_components_db(args.f, args.s, args.w)
    absorb = float(acoustics.absorption_db_per_km(args.f))
    rows = []
    for dist in args.dist:
        link = acoustics.link_geometry_device_auv((0.0, 0.0, g.device_height), (dist, 0.0, g.auv_height), g)
        snr = acoustics.snr_lb_device_auv(link, noise, c)
        rate = acoustics.rate_device_to_auv(1.0, snr, c, g.device_depth)
        snr_db = acoustics.lin_to_db(snr) if snr > 0 else -np.inf
        rows.append([
            args.f, *(f"{x:.6f}" for x in comps), f"{noise.combined_db:.6f}", f"{absorb:.6f}",
            dist, f"{link.los_m:.3f}", f"{link.nlos_surface_m:.3f}", f"{link.nlos_bottom_m:.3f}",
            f"{snr_db:.6f}", f"{rate:.3f}",
        ])
    header = [
        "f_khz", "turbulence_db", "shipping_db", "waves_db", "thermal_db", "combined_db",
        "absorption_db_per_km", "horizontal_m", "los_m", "nlos_surface_m", "nlos_bottom_m",
        "snr_lb_db", "rate_full_band_bps",
    ]
    _emit(_csv(rows, header), args.out)
    return 0


def cmd_field(args) -> int:
    sc = _scenario(args)
    extent = args.extent or 2.0 * float(np.abs(sc.hover_points[:, :2]).max() + 100.0)
    grid = ocean.sample_grid(sc.vortex_array, sc.geometry.auv_height, extent, args.grid)
    rows = [[f"{v:.9g}" for v in r] for r in grid]
    _emit(_csv(rows, ["x", "y", "Vx", "Vy", "Vz", "speed"]), args.out)
    return 0


def _scheme_spec(args) -> baselines.SchemeSpec:
    base = dict(SCHEME_ALIASES.get(args.scheme, {}))
    if args.offload:
        base["offload"] = args.offload
    if args.cache:
        base["cache"] = args.cache
    if not base:
        raise SystemExit(f"unknown scheme {args.scheme!r}; choose from {sorted(SCHEME_ALIASES)}")
    return baselines.SchemeSpec(
        offload=base["offload"], offload_p=args.proportion, cache=base["cache"], cache_p=args.proportion,
        routing=args.routing,
    )


def cmd_baseline(args) -> int:
    sc = _scenario(args)
    spec = _scheme_spec(args)
    res = baselines.run_scheme(sc, spec, args.seed)
    _emit(breakdowns_to_csv([res.breakdown.csv_row(sc.digest(), spec.name, args.seed)]), args.out)
    return 0


def cmd_oracle(args) -> int:
    sc = _scenario(args)
    try:
        res = baselines.oracle(sc, args.grid, workers=args.workers)
    except baselines.InstanceTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    bd = res.breakdown
    tours = "|".join(" ".join(map(str, t)) for t in res.decisions.plan.tours)
    rows = [[args.seed, sc.digest(), "oracle", f"{bd.revenue:.6f}", f"{bd.task_cost:.6f}",
             f"{bd.movement_cost:.6f}", f"{bd.penalty:.6f}", f"{bd.profit:.6f}", res.nodes_searched, tours]]
    header = ["seed", "scenario_hash", "algo", "Re", "CT", "CF", "penalty", "Pr", "nodes_searched", "tours"]
    _emit(_csv(rows, header), args.out)
    return 0


def cmd_train(args) -> int:
    sc = _scenario(args)
    plan = None
    if args.fixed_plan == "aware":
        plan = baselines.env_aware_plan(sc)
    elif args.fixed_plan == "agnostic":
        plan = baselines.env_agnostic_plan(sc)
    cfg = a3c.TrainConfig(
        workers=args.workers, max_steps=args.steps, lr=args.lr, adaptive_lr=args.adaptive_lr, seed=args.seed,
    )
    res = a3c.train(sc, cfg, EnvConfig(plan=plan))
    _emit(res.curve_csv(), args.out)
    if args.checkpoint:
        a3c.save_checkpoint(res.net, args.checkpoint)
    bd = evaluate(sc, res.best_decisions, strict=True)
    print(f"best profit {bd.profit:.3f} after {res.episodes} episodes ({res.wall_time:.1f} s)", file=sys.stderr)
    return 0


def cmd_experiment(args) -> int:
    if args.manifest:
        spec = experiments.spec_from_manifest(args.manifest)
        if args.out:
            spec = experiments.with_output(spec, args.out)
    else:
        kw = dict(seeds=tuple(args.seeds), out_dir=args.out or "results", scenario_path=args.scenario)
        if args.train_steps:
            kw["train_steps"] = args.train_steps
        if args.full_scale:
            spec = experiments.ExperimentSpec.full_scale(args.id, **kw)
        else:
            spec = experiments.ExperimentSpec(args.id, **kw)
    outcome = experiments.run_experiment(spec)
    for p in outcome.files:
        print(p)
    for f in outcome.failed:
        print(f"failed cell seed={f['seed']}: {f['error']}", file=sys.stderr)
    return 0 if outcome.ok else 1


# ---------------------------------------------------------------------------
# parser


def _global_flags(parser, defaults: bool) -> None:
    # subcommands repeat the flags without defaults so values given before
    # the subcommand name are not overwritten
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    parser.add_argument("--seed", type=int, default=d(0), help="random seed")
    parser.add_argument("--out", default=d(None), help="output file or directory (default stdout)")
    parser.add_argument("--scenario", default=d(None), help="scenario JSON file")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, defaults=False)

    small = argparse.ArgumentParser(add_help=False)
    small.add_argument("--k", type=int, default=4, help="groups when no scenario file is given")
    small.add_argument("--m", type=int, default=2, help="AUVs when no scenario file is given")
    small.add_argument("--devices-per-dg", type=int, default=3)

    p = argparse.ArgumentParser(prog="mtuc", description=__doc__)
    _global_flags(p, defaults=True)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a random scenario")
    g.add_argument("--k", type=int, default=15)
    g.add_argument("--m", type=int, default=4)
    g.add_argument("--devices", type=int, default=None)
    g.add_argument("--extent", type=float, default=2000.0)
    g.add_argument("--vortices", type=int, default=3)
    g.add_argument("--vortex-strength", type=float, default=8.0)
    g.set_defaults(func=cmd_gen)

    lb = sub.add_parser("linkbudget", parents=[common], help="noise and device-to-AUV link table")
    lb.add_argument("--f", type=float, default=30.0, help="carrier frequency (kHz)")
    lb.add_argument("--s", type=float, default=0.5, help="shipping activity in [0, 1]")
    lb.add_argument("--w", type=float, default=0.0, help="wind speed (m/s)")
    lb.add_argument("--dist", type=float, nargs="+", default=[100.0, 500.0, 1000.0], help="horizontal ranges (m)")
    lb.set_defaults(func=cmd_linkbudget)

    f = sub.add_parser("field", parents=[common, small], help="sample the current field on a grid")
    f.add_argument("--grid", type=int, default=50)
    f.add_argument("--extent", type=float, default=None, help="grid side length (m)")
    f.set_defaults(func=cmd_field)

    b = sub.add_parser("baseline", parents=[common, small], help="evaluate a fixed scheme")
    b.add_argument("--scheme", default="full-offload-cache", help=f"one of {sorted(SCHEME_ALIASES)}")
    b.add_argument("--offload", choices=baselines.OFFLOAD_MODES, default=None)
    b.add_argument("--cache", choices=baselines.CACHE_MODES, default=None)
    b.add_argument("--proportion", type=float, default=0.5)
    b.add_argument("--routing", choices=baselines.ROUTING_MODES, default="agnostic")
    b.set_defaults(func=cmd_baseline)

    o = sub.add_parser("oracle", parents=[common, small], help="exhaustive search on a tiny instance")
    o.add_argument("--grid", type=float, default=0.25, choices=(0.25, 0.5))
    o.add_argument("--workers", type=int, default=1)
    o.set_defaults(func=cmd_oracle)

    t = sub.add_parser("train", parents=[common, small], help="train the actor-critic agent")
    t.add_argument("--steps", type=int, default=20_000)
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--adaptive-lr", action="store_true")
    t.add_argument("--fixed-plan", choices=("none", "aware", "agnostic"), default="none")
    t.add_argument("--checkpoint", default=None, help="write the trained parameters here")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("experiment", parents=[common], help="run a desk-scale sweep")
    e.add_argument("id", nargs="?", choices=experiments.EXPERIMENTS, default=None)
    e.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    e.add_argument("--train-steps", type=int, default=None)
    e.add_argument("--full-scale", action="store_true", help="use the large sizes: 15 groups, 190 devices (slow)")
    e.add_argument("--manifest", default=None, help="rerun the sweep recorded in a manifest")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "experiment" and not (args.id or args.manifest):
        parser.error("experiment needs an id or --manifest")
    try:
        return args.func(args)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
