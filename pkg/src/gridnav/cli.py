"""Command-line entry point: ``gridnav {convert,train,evaluate,oracle,compare}``.

Exit codes: 0 success, 2 usage/config/IO error, 3 evaluate found no goal path.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import svg
from .agents import BadModelFile, MlpParams, load_model, save_model
from .gridmap import CellState, GridFileError, ZBand, load_grid, project_octree, save_grid
from .octree import CloudExceedsRootCube, OctreeConfig, build_octree
from .oracle import Unreachable, shortest_path
from .pointcloud import EmptyCloud, PcdError, bounding_box, read_pcd_file
from .trainer import (
    ALGOS,
    ConfigError,
    evaluate_greedy,
    metrics_csv,
    parse_config,
    run_comparison,
    train,
)

EXIT_OK, EXIT_USAGE, EXIT_NO_PATH = 0, 2, 3


class UsageError(Exception):
    pass


def _write(path: str, data) -> None:
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode) as f:
        f.write(data)


def _outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _load_config(args, **overrides):
    text = ""
    if args.config:
        with open(args.config) as f:
            text = f.read()
    grid = load_grid(args.map) if args.map else None
    return parse_config(text, grid=grid, **overrides)


# commands


def cmd_convert(args) -> int:
    cloud = read_pcd_file(args.pcd)
    cfg = OctreeConfig(args.resolution, args.max_depth, args.threshold)
    octomap = build_octree(cloud, cfg)
    box = bounding_box(cloud)
    zmin = box.lo[2] if args.zmin is None else args.zmin
    zmax = box.hi[2] if args.zmax is None else args.zmax
    # a defaulted edge gives way to an explicit one
    if zmin >= zmax and args.zmin is None:
        zmin = zmax - cfg.resolution
    elif zmin >= zmax and args.zmax is None:
        zmax = zmin + cfg.resolution
    grid = project_octree(octomap, ZBand(zmin, zmax), args.cell_size or cfg.resolution)
    out_dir = os.path.dirname(args.out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    pgm_path, meta_path = save_grid(grid, args.out)
    print(f"grid {grid.width}x{grid.height}, occupied cells: {grid.count(CellState.OCCUPIED)}")
    print(f"{pgm_path}: {os.path.getsize(pgm_path)} bytes")
    print(f"{meta_path}: {os.path.getsize(meta_path)} bytes")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args, algo=args.algo, seed=args.seed, episodes=args.episodes)
    out = _outdir(args.out)
    model, history = train(cfg, timing=args.timing)
    _write(os.path.join(out, "metrics.csv"), metrics_csv(history))
    _write(os.path.join(out, "model.txt"), save_model(model))
    _write(os.path.join(out, "reward.svg"),
           svg.line_chart([m.accumulated_reward for m in history], f"{cfg.algo}: accumulated reward",
                          "episode", "reward"))
    _write(os.path.join(out, "steps.svg"),
           svg.line_chart([m.steps for m in history], f"{cfg.algo}: steps per episode", "episode", "steps"))
    goals = sum(m.reached_goal for m in history)
    print(f"{cfg.algo} seed {cfg.seed}: {len(history)} episodes, goal reached in {goals}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    with open(args.model, "rb") as f:
        model = load_model(f.read())
    env = cfg.env
    trace = evaluate_greedy(model, env)
    out = _outdir(args.out)
    _write(os.path.join(out, "path.json"), trace.to_json())
    kind = "dqn" if isinstance(model, MlpParams) else "tabular"
    _write(os.path.join(out, "path.svg"),
           svg.path_overlay(env.grid, trace.states, env.footprint, f"greedy path ({kind})"))
    if not (trace.reached_goal and trace.collisions == 0):
        print(f"no goal-reaching path: stopped after {trace.steps} steps", file=sys.stderr)
        return EXIT_NO_PATH
    print(f"goal reached in {trace.steps} steps, total reward {trace.total_reward:g}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args.out)
    try:
        sp = shortest_path(cfg.env)
    except Unreachable as exc:
        _write(os.path.join(out, "oracle.json"), json.dumps({"reachable": False}, indent=2) + "\n")
        print(str(exc), file=sys.stderr)
        return EXIT_NO_PATH
    doc = {"reachable": True, "cost": sp.cost, "optimal_reward": sp.optimal_reward, **sp.trace.to_dict()}
    _write(os.path.join(out, "oracle.json"), json.dumps(doc, indent=2) + "\n")
    print(f"optimal cost {sp.cost:g} over {sp.trace.steps} steps (reward {sp.optimal_reward:g})")
    return EXIT_OK


def _parse_seeds(text: str) -> list[int]:
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep and lo:
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise UsageError(f"bad seed list {text!r}") from None
    if not seeds:
        raise UsageError("need at least one seed")
    return seeds


def cmd_compare(args) -> int:
    base = _load_config(args)
    algos = tuple(a.strip() for a in args.algos.split(",")) if args.algos else ALGOS
    for a in algos:
        if a not in ALGOS:
            raise UsageError(f"unknown algo {a!r}")
    report = run_comparison(base, _parse_seeds(args.seeds), algos, workers=args.workers)
    out = _outdir(args.out)
    _write(os.path.join(out, "report.csv"), report.to_csv())
    for algo, agg in report.aggregate().items():
        print(
            f"{algo:9s} goal_rate={agg['goal_rate']:.2f} "
            f"median_final50={agg['median_final50_reward']:.2f} "
            f"median_cost={agg['median_greedy_cost']:g} "
            f"median_first_goal={agg['median_first_goal_episode']:g}"
        )
    return EXIT_OK


# parser


def _add_env_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file (defaults: built-in parameters)")
    p.add_argument("--map", help="grid prefix (PREFIX.pgm + PREFIX.meta); default: built-in layout")
    p.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridnav", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="point cloud -> octree -> occupancy grid files")
    p.add_argument("--pcd", required=True, help="ASCII .pcd input")
    p.add_argument("--resolution", type=float, default=1.0, help="finest voxel edge")
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--threshold", type=int, default=1, help="split when a node holds more points")
    p.add_argument("--zmin", type=float, help="lower edge of the height band (default: cloud minimum)")
    p.add_argument("--zmax", type=float, help="upper edge of the height band (default: cloud maximum)")
    p.add_argument("--cell-size", type=float, help="grid cell edge (default: resolution)")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="train one agent and write metrics, model and charts")
    p.add_argument("--algo", choices=ALGOS)
    p.add_argument("--seed", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--timing", action="store_true", help="record wall_ms (breaks byte-reproducibility)")
    _add_env_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="roll out the greedy policy of a saved model")
    p.add_argument("--model", required=True)
    _add_env_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("oracle", help="exact shortest path on the lattice")
    _add_env_flags(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compare", help="train all algorithms over several seeds")
    p.add_argument("--seeds", default="0-9", help="e.g. 0-9 or 1,4,7")
    p.add_argument("--algos", help="comma-separated subset of " + ",".join(ALGOS))
    p.add_argument("--workers", type=int, default=1)
    _add_env_flags(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, PcdError, EmptyCloud, CloudExceedsRootCube, GridFileError,
            BadModelFile, OSError, ValueError) as exc:
        print(f"gridnav {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
