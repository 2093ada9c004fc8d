"""Command-line entry point: ingest, synth, fit, simulate, compare, report.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
All commands are deterministic given (--config, --seed).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import forecast, ingest, report, sim, synth
from .config import Config, ConfigError, load_config, resolved_text
from .ingest import MINUTES_PER_DAY

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _bundle_meta(out: Path) -> dict:
    meta_path = out / "meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"dataset bundle {out} has no meta.json")
    return json.loads(meta_path.read_text())


def cmd_synth(cfg: Config, args) -> int:
    world = synth.build_world(cfg, cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ingest.write_trips_csv(out / "trips_train.csv", world.train_trips)
    ingest.write_trips_csv(out / "trips_sim.csv",
                           [t for d in world.sim_days for t in d.trips])
    ingest.write_stations_csv(out / "stations.csv", world.stations)
    meta = {
        "kind": "evdispatch-dataset",
        "source": "synthetic",
        "base_date_index": 0,
        "train_days": [[d.date_index, d.day_type] for d in world.train_days],
        "sim_days": [[d.date_index, d.day_type] for d in world.sim_days],
        "seed": cfg.seed,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    (out / "config.resolved.txt").write_text(resolved_text(cfg))
    n_train = len(world.train_trips)
    n_sim = sum(len(d.trips) for d in world.sim_days)
    print(f"synth: {len(world.train_days)} train days ({n_train} trips), "
          f"{len(world.sim_days)} sim days ({n_sim} trips), "
          f"{len(world.stations)} stations -> {out}")
    return EXIT_OK


def cmd_ingest(cfg: Config, args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trips, rep = ingest.parse_trips(args.trips, cfg.bbox)
    stations = ingest.parse_stations(args.stations)
    ingest.write_trips_csv(out / "trips_train.csv", trips)
    ingest.write_stations_csv(out / "stations.csv", stations)
    meta = {"kind": "evdispatch-dataset", "source": "ingest",
            "parse_report": {"total": rep.total, "kept": rep.kept,
                             "dropped": rep.dropped}}
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    (out / "config.resolved.txt").write_text(resolved_text(cfg))
    print(f"ingest: {rep.kept} of {rep.total} trips kept "
          f"({rep.dropped} dropped), {len(stations)} stations -> {out}")
    return EXIT_OK


def _world_from_bundle(cfg: Config, bundle: Path) -> synth.SynthWorld:
    meta = _bundle_meta(bundle)
    if meta.get("source") != "synthetic":
        raise ValueError("simulate currently requires a synthetic bundle "
                         "(ingest bundles carry no simulation days)")
    train_trips, _ = ingest.parse_trips(bundle / "trips_train.csv")
    sim_trips, _ = ingest.parse_trips(bundle / "trips_sim.csv")
    stations = ingest.parse_stations(bundle / "stations.csv")
    base = synth.BASE_MINUTE
    by_date: dict[int, list[ingest.TripRecord]] = {}
    for t in sim_trips:
        by_date.setdefault(int((t.pickup_time - base) // MINUTES_PER_DAY),
                           []).append(t)
    train_by_date: dict[int, list[ingest.TripRecord]] = {}
    for t in train_trips:
        train_by_date.setdefault(int((t.pickup_time - base) // MINUTES_PER_DAY),
                                 []).append(t)
    train_days = [synth.SynthDay(d, dt, train_by_date.get(d, []))
                  for d, dt in meta["train_days"]]
    sim_days = [synth.SynthDay(d, dt, by_date.get(d, []))
                for d, dt in meta["sim_days"]]
    return synth.SynthWorld(stations, train_days, sim_days)


def cmd_fit(cfg: Config, args) -> int:
    bundle = Path(args.bundle)
    world = _world_from_bundle(cfg, bundle)
    dataset = sim.assemble_dataset(cfg, world)
    models = sim.fit_models(cfg, world, dataset.regions)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for day_type, model in models.items():
        forecast.save_model(model, out / f"model_{day_type}.txt")
    print(f"fit: wrote {len(models)} day-type models -> {out}")
    return EXIT_OK


def cmd_simulate(cfg: Config, args) -> int:
    if args.policy == "all":
        names = list(sim.POLICIES)
    else:
        if args.policy not in sim.POLICIES:
            print(f"unknown policy {args.policy!r}; valid: "
                  f"{', '.join(sorted(sim.POLICIES))} or 'all'", file=sys.stderr)
            return EXIT_USAGE
        names = [args.policy]
    if args.bundle:
        world = _world_from_bundle(cfg, Path(args.bundle))
    else:
        world = synth.build_world(cfg, cfg.seed)
    if args.days is not None:
        world = synth.SynthWorld(world.stations, world.train_days,
                                 world.sim_days[:args.days])
    dataset = sim.assemble_dataset(cfg, world)
    models = {}
    if args.model_dir:
        for day_type in ("weekday", "weekend"):
            path = Path(args.model_dir) / f"model_{day_type}.txt"
            if path.exists():
                models[day_type] = forecast.load_model(path)
    else:
        models = sim.fit_models(cfg, world, dataset.regions)
    t0 = time.perf_counter()
    records, simulator = sim.run_experiment(cfg, dataset, models, names,
                                            cfg.seed)
    wall = time.perf_counter() - t0
    n_windows = len(simulator.window_seconds)
    timings = {
        "wall_seconds": wall,
        "windows": n_windows,
        "mean_window_ms": (1000.0 * sum(simulator.window_seconds) / n_windows
                           if n_windows else 0.0),
        "diagnostics": dict(simulator.diagnostics),
    }
    rep = report.ExperimentReport(records, report.summarize(records, cfg.seed,
                                                            timings),
                                  resolved_text(cfg), cfg.seed)
    report.write_report(rep, args.out)
    print(f"simulate: {len(names)} policies x {len(dataset.days)} days "
          f"in {wall:.1f}s ({timings['mean_window_ms']:.1f} ms/window) "
          f"-> {args.out}")
    return EXIT_OK


def cmd_compare(cfg: Config, args) -> int:
    a = report.load_summary(args.report_a)
    b = report.load_summary(args.report_b)
    table, deltas = report.compare_summaries(a, b)
    print(table)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "compare.json").write_text(json.dumps(deltas, indent=2,
                                                     sort_keys=True) + "\n")
    return EXIT_OK


def cmd_report(cfg: Config, args) -> int:
    summary = report.load_summary(args.report_dir)
    print(f"seed: {summary.get('seed')}")
    for metric, block in sorted(summary["metrics"].items()):
        for policy in summary["policies"]:
            for day_type in summary["day_types"]:
                cell = block.get(policy, {}).get(day_type)
                if cell is None:
                    continue
                print(f"{metric:13s} {policy:10s} {day_type:8s} "
                      f"mean={cell['mean']:9.4f} max={cell['max']:9.4f} "
                      f"min={cell['min']:9.4f} sd={cell['sd']:8.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evdispatch",
        description="EV ride-hailing guidance/matching simulator")
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--set", action="append", default=[], metavar="K=V",
                        help="override one config field (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset bundle")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse trip/station CSVs into a bundle")
    p.add_argument("--trips", required=True)
    p.add_argument("--stations", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit", help="fit demand forecast models from a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="run benchmark policies")
    p.add_argument("--policy", default="all",
                   help="policy name or 'all' (default)")
    p.add_argument("--bundle", help="dataset bundle (default: synth in memory)")
    p.add_argument("--model-dir", help="directory with fitted model files")
    p.add_argument("--days", type=int, help="limit number of simulated days")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="diff two report directories")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="print a report summary")
    p.add_argument("report_dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(cfg, args)
    except (FileNotFoundError, ingest.IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
