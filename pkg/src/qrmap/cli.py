"""Command line front end: table generation, worlds, simulation, navigation."""

from __future__ import annotations

import argparse
import sys
import time
from importlib import resources
from pathlib import Path

from .edc import derive_region_labels
from .harness import (
    CampaignConfig,
    CSV_HEADER,
    gen_world,
    load_world,
    rows_to_csv,
    run_mc,
    run_sim,
    save_world,
)
from .nav import dump_rng, estimate_rng, navigate, trajectory_csv
from .operators import generate_composition_table, load_tables, save_tables
from .qfeas import SolverConfig
from .qmap import dump_map, load_map

DEFAULT_TABLES = "qrmap-data"


def _load_tables(path: str):
    if path == DEFAULT_TABLES:
        ref = resources.files("qrmap").joinpath("data/edc_tables.txt")
        with resources.as_file(ref) as p:
            return load_tables(p)
    return load_tables(path)


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _cmd_gen_tables(args) -> int:
    t0 = time.time()
    labeling = derive_region_labels(rng_seed=args.seed)
    print("region labeling derived (%.1fs), checksum %s"
          % (time.time() - t0, labeling.checksum()))
    done = [0]

    def progress(s1, s2, mask):
        done[0] += 1
        if done[0] % 20 == 0:
            print("  row (%2d,%2d)  %d/400  %.1f min"
                  % (s1, s2, done[0], (time.time() - t0) / 60), flush=True)

    cfg = SolverConfig(max_depth=args.depth, hard_cap=500_000,
                       pair_sums=True, shrink_root=True)
    table = generate_composition_table(
        labeling, cfg, bound=args.bound, progress=progress)
    save_tables(table, labeling, args.out)
    print("saved %s in %.1f min; flagged cells: %d"
          % (args.out, (time.time() - t0) / 60, len(table.flagged)))
    return 0


def _cmd_gen_world(args) -> int:
    world = gen_world(args.landmarks, args.images, args.seed, args.bound)
    _write(args.out, save_world(world))
    return 0


def _cmd_simulate(args) -> int:
    table, labeling = _load_tables(args.tables)
    world = load_world(Path(args.world).read_text())
    n = args.n_nearest or len(world.landmarks)
    rows, qmap = run_sim(
        world, n, table, labeling, SolverConfig(max_depth=args.depth),
        cyclic=args.measure_cyclic, max_range=args.max_range,
    )
    _write(args.out, CSV_HEADER + "\n" + "\n".join(rows_to_csv(rows, n, 0)) + "\n")
    if args.map_out:
        _write(args.map_out, dump_map(qmap))
    return 0


def _cmd_mc(args) -> int:
    table, labeling = _load_tables(args.tables)
    campaign = CampaignConfig(
        runs=args.runs,
        landmark_count=args.landmarks,
        image_count=args.images,
        n_nearest=[int(v) for v in args.n_nearest.split(",")],
        seed=args.seed,
        bounds=args.bound,
        cyclic=args.measure_cyclic,
        max_range=args.max_range,
        workers=args.workers,
    )

    def progress(run, n):
        print("run %d n=%d done" % (run, n), flush=True)

    raw, agg = run_mc(campaign, table, labeling,
                      SolverConfig(max_depth=args.depth), progress=progress)
    _write(args.out, raw)
    _write(args.agg_out, agg)
    return 0


def _cmd_rng(args) -> int:
    qmap = load_map(Path(args.map).read_text())
    _write(args.out, dump_rng(estimate_rng(qmap)))
    return 0


def _cmd_navigate(args) -> int:
    world = load_world(Path(args.world).read_text())
    rng = estimate_rng(load_map(Path(args.map).read_text()))
    traj = navigate(
        world.landmarks, rng,
        start=(args.start_x, args.start_y),
        goal=(args.goal_x, args.goal_y),
        step_size=args.step_size, lam=args.lam,
    )
    _write(args.out, trajectory_csv(traj))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrmap", description="qualitative relational mapping tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-tables", help="derive labeling and composition table")
    p.add_argument("--depth", type=int, default=60)
    p.add_argument("--bound", type=float, default=1000.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="edc_tables.txt")
    p.set_defaults(func=_cmd_gen_tables)

    p = sub.add_parser("gen-world", help="generate a random world file")
    p.add_argument("--landmarks", type=int, default=30)
    p.add_argument("--images", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bound", type=float, default=100.0,
                   help="side of the square map")
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_gen_world)

    p = sub.add_parser("simulate", help="replay a world into a map")
    p.add_argument("--world", required=True)
    p.add_argument("--n-nearest", type=int, default=0,
                   help="landmarks measured per image (0 = all)")
    p.add_argument("--depth", type=int, default=30)
    p.add_argument("--tables", default=DEFAULT_TABLES)
    p.add_argument("--measure-cyclic", action="store_true")
    p.add_argument("--max-range", type=float, default=None)
    p.add_argument("--out", default="-", help="metrics CSV")
    p.add_argument("--map-out", default="", help="optional final map dump")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("mc", help="Monte Carlo campaign")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--landmarks", type=int, default=15)
    p.add_argument("--images", type=int, default=30)
    p.add_argument("--n-nearest", default="15",
                   help="comma-separated visibility settings")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bound", type=float, default=100.0)
    p.add_argument("--depth", type=int, default=30)
    p.add_argument("--tables", default=DEFAULT_TABLES)
    p.add_argument("--measure-cyclic", action="store_true")
    p.add_argument("--max-range", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="mc_runs.csv")
    p.add_argument("--agg-out", default="mc_agg.csv")
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("rng", help="RNG estimate from a map dump")
    p.add_argument("--map", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_rng)

    p = sub.add_parser("navigate", help="landmark-hopping navigation")
    p.add_argument("--world", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--start-x", type=float, required=True)
    p.add_argument("--start-y", type=float, required=True)
    p.add_argument("--goal-x", type=float, required=True)
    p.add_argument("--goal-y", type=float, required=True)
    p.add_argument("--step-size", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_navigate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
