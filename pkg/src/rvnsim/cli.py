"""Unified command line: scene/dataset generation, benchmarks, and serving.

Every subcommand prints one machine-readable JSON document to stdout and
exits 0 on success; failures print ``{"error": {...}}`` and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corfilter, datagen, envserver, evalharness, world
from .episode import EpisodeConfig
from .errors import RvnError
from .kinematics import AgentSpec
from .sensing import SensorSpec


def _scene_params(args) -> world.SceneParams:
    kwargs = {}
    if args.width_m is not None:
        kwargs["width_m"] = args.width_m
    if args.height_m is not None:
        kwargs["height_m"] = args.height_m
    if args.resolution is not None:
        kwargs["resolution"] = args.resolution
    if args.rooms is not None:
        kwargs["room_count"] = tuple(args.rooms)
    if args.corridor_width is not None:
        kwargs["corridor_width_m"] = tuple(args.corridor_width)
    if args.furniture_density is not None:
        kwargs["furniture_density"] = args.furniture_density
    return world.SceneParams(**kwargs)


def _add_scene_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width-m", type=float, default=None)
    p.add_argument("--height-m", type=float, default=None)
    p.add_argument("--resolution", type=float, default=None)
    p.add_argument("--rooms", type=int, nargs=2, metavar=("MIN", "MAX"), default=None)
    p.add_argument("--corridor-width", type=float, nargs=2,
                   metavar=("MIN", "MAX"), default=None)
    p.add_argument("--furniture-density", type=float, default=None)


def _seed_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok]


def cmd_gen_scenes(args) -> dict:
    params = _scene_params(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenes = []
    for seed in range(args.seed, args.seed + args.count):
        grid = world.generate_scene(seed, params)
        path = out / f"{grid.scene_id}.rvnmap"
        path.write_bytes(world.save_scene(grid).encode("utf-8"))
        scenes.append({"scene_id": grid.scene_id, "seed": seed,
                       "path": str(path), "free_cells": grid.free_cell_count()})
    return {"scenes": scenes}


def cmd_gen_dataset(args) -> dict:
    params = _scene_params(args)
    agent = AgentSpec()
    sensor = SensorSpec()
    config = datagen.PlannerConfig(
        margin_expert=args.margin_expert, margin_negative=args.margin_negative)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    generate = (datagen.generate_expert if args.kind == "expert"
                else datagen.generate_negative)
    records = []
    seed = args.seed
    for scene_seed in _seed_list(args.scene_seeds):
        grid = world.generate_scene(scene_seed, params)
        (out / f"{grid.scene_id}.rvnmap").write_bytes(
            world.save_scene(grid).encode("utf-8"))
        ctx = datagen.PlannerContext(grid, config, agent)
        for _ in range(args.per_scene):
            record = generate(grid, config, agent, sensor, seed=seed, ctx=ctx)
            path = datagen.save_record(record, out)
            records.append({"scene_id": record.scene_id, "seed": record.seed,
                            "frames": len(record.frames),
                            "collision_index": record.collision_index,
                            "path": str(path)})
            seed += 1
    return {"kind": args.kind, "records": records}


def cmd_build_scenarios(args) -> dict:
    scn = evalharness.build_scenarios(
        _seed_list(args.scene_seeds), args.split.upper(),
        episode_config=EpisodeConfig(n_goal=args.n_goal, d_min=args.d_min,
                                     d_max=args.d_max, t_max=args.t_max),
        scene_params=_scene_params(args))
    evalharness.save_scenarios(scn, args.out)
    return {"path": args.out, "split": scn.split, "episodes": len(scn.episodes)}


def _make_agent(spec: str, scn: evalharness.ScenarioSet):
    if spec == "oracle":
        return evalharness.oracle_agent()
    if spec == "greedy":
        return evalharness.greedy_agent(scn.agent_spec)
    if spec.startswith("socket:"):
        return envserver.PolicyClientAgent(spec.removeprefix("socket:"))
    raise RvnError(f"unknown agent {spec!r} (use oracle, greedy, or socket:<addr>)")


def cmd_eval(args) -> dict:
    scn = evalharness.load_scenarios(args.scenarios)
    agent = _make_agent(args.agent, scn)
    progress = None
    if args.progress:
        progress = lambda done, total: print(
            f"episode {done}/{total}", file=sys.stderr, flush=True)
    report = evalharness.run_eval(scn, agent, progress=progress)
    if args.out_csv:
        Path(args.out_csv).write_text(report.to_csv(), "utf-8")
    doc = report.to_json()
    if args.out_json:
        Path(args.out_json).write_text(json.dumps(doc, indent=2) + "\n", "utf-8")
    return doc


def cmd_serve(args) -> dict:
    scn = evalharness.load_scenarios(args.scenarios)
    transcript = open(args.transcript, "w", encoding="utf-8") if args.transcript else None
    try:
        if args.stdio:
            envserver.serve_stdio(scn)
            return {"served": "stdio"}
        server = envserver.start_server(args.bind, scn, transcript=transcript)
        print(json.dumps({"listening": server.address,
                          "episodes": len(scn.episodes)}), flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.shutdown()
        return {"served": server.address}
    finally:
        if transcript is not None:
            transcript.close()


def cmd_cor_select(args) -> dict:
    doc = json.loads(Path(args.input).read_text("utf-8"))
    config = corfilter.CorConfig(alpha=float(doc.get("alpha", 1.0)))
    result = corfilter.select(doc["experts"], doc["negatives"], config)
    return {"chosen_index": result.index,
            "scores": [float(s) for s in result.scores]}


def cmd_replay(args) -> dict:
    record = datagen.load_record(args.record)
    if args.map:
        map_path = Path(args.map)
    else:
        map_path = Path(args.record).parent.parent / f"{record.scene_id}.rvnmap"
    grid = world.load_scene(map_path.read_bytes(), scene_id=record.scene_id)
    problems = datagen.replay_record(record, grid)
    if problems:
        raise RvnError("record failed replay validation: " + "; ".join(problems))
    return {"record": str(args.record), "kind": record.kind,
            "frames": len(record.frames), "valid": True}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rvnsim",
        description="Collision-aware reactive navigation simulator and benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scenes", help="write procedural RVNMAP scene files")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_scene_args(p)
    p.set_defaults(func=cmd_gen_scenes)

    p = sub.add_parser("gen-dataset", help="generate trajectory records")
    p.add_argument("--kind", choices=["expert", "negative"], required=True)
    p.add_argument("--scene-seeds", required=True,
                   help="comma-separated scene seeds")
    p.add_argument("--per-scene", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="base record seed")
    p.add_argument("--out", required=True)
    p.add_argument("--margin-expert", type=float, default=0.23)
    p.add_argument("--margin-negative", type=float, default=0.10)
    _add_scene_args(p)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("build-scenarios", help="write a scenario file")
    p.add_argument("--split", choices=["train", "val", "test"], required=True)
    p.add_argument("--scene-seeds", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-goal", type=int, default=32)
    p.add_argument("--d-min", type=float, default=4.0)
    p.add_argument("--d-max", type=float, default=8.0)
    p.add_argument("--t-max", type=int, default=500)
    _add_scene_args(p)
    p.set_defaults(func=cmd_build_scenarios)

    p = sub.add_parser("eval", help="evaluate an agent on a scenario file")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--agent", default="greedy",
                   help="oracle | greedy | socket:<host:port>")
    p.add_argument("--out-json", default=None)
    p.add_argument("--out-csv", default=None)
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the RVNP1 environment service")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--bind", default="127.0.0.1:0")
    p.add_argument("--transcript", default=None,
                   help="append every response line to this file")
    p.add_argument("--stdio", action="store_true",
                   help="serve one session over stdio instead of TCP")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("cor-select", help="score candidate trajectory sets")
    p.add_argument("--input", required=True,
                   help='JSON file: {"experts": [[[x,y],...]], "negatives": [...], "alpha": a}')
    p.set_defaults(func=cmd_cor_select)

    p = sub.add_parser("replay", help="validate a trajectory record")
    p.add_argument("--record", required=True, help="record directory")
    p.add_argument("--map", default=None,
                   help="RVNMAP file (default: <dataset root>/<scene_id>.rvnmap)")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except (RvnError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": {"type": type(exc).__name__,
                                    "message": str(exc)}}))
        return 1
    print(json.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
