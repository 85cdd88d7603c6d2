"""Command-line interface binding the pipeline stages.

Exit codes: 0 success, 1 validation/domain errors, 2 I/O errors.  JSON
outputs embed the flags that produced them under "parameters"; JSONL
outputs get a "<out>.meta.json" sidecar instead, so the line format stays
pure records.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import behavior, harness, ingest, rules, sim, topology
from .errors import PatchGraphError


def _write_sidecar(out_path, parameters: dict) -> None:
    with open(f"{out_path}.meta.json", "w", encoding="utf-8") as fh:
        json.dump({"parameters": parameters}, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _cmd_simulate(args) -> int:
    imap = topology.load_map(args.map)
    cfg = sim.load_scenario(args.scenario)
    if args.seed is not None:
        cfg = sim.scenario_from_dict(
            {**sim.scenario_to_dict(cfg), "seed": args.seed})
    result = sim.run_scenario(imap, cfg)
    ingest.write_detections(args.out, result.detections)
    sim.write_truth(args.truth, result.truth)
    parameters = {"command": "simulate", "map": args.map,
                  "scenario": args.scenario, "seed": cfg.seed,
                  "normal_count": cfg.normal_count,
                  "anomaly_mix": {k.value: v
                                  for k, v in cfg.anomaly_mix.items()}}
    _write_sidecar(args.out, parameters)
    _write_sidecar(args.truth, parameters)
    return 0


def _cmd_learn(args) -> int:
    imap = topology.load_map(args.map)
    detections = ingest.read_detections_file(args.dets)
    state = behavior.init_model(imap, fps=args.fps)
    for _, visits in ingest.pipeline_visits(detections, imap):
        behavior.observe(state, visits)
    model = behavior.finalize(state, prune_threshold=args.prune_threshold,
                              min_support=args.min_support,
                              tavg_per_class=not args.tavg_per_node)
    model = behavior.with_meta(model, parameters={
        "command": "learn", "map": args.map, "dets": args.dets,
        "prune_threshold": args.prune_threshold,
        "min_support": args.min_support, "fps": args.fps,
        "tavg_per_node": args.tavg_per_node})
    behavior.save_model(model, args.out)
    return 0


def _cmd_detect(args) -> int:
    imap = topology.load_map(args.map)
    model = behavior.load_model(args.model, imap=imap)
    detections = ingest.read_detections_file(args.dets)
    events = []
    for _, visits in ingest.pipeline_visits(detections, imap):
        events.extend(rules.detect_stream(model, visits, margin=args.margin))
    rules.write_events(args.out, events)
    _write_sidecar(args.out, {"command": "detect", "map": args.map,
                              "model": args.model, "dets": args.dets,
                              "margin": args.margin})
    return 0


def _cmd_eval(args) -> int:
    events = rules.read_events(args.events)
    truth = sim.read_truth(args.truth)
    match = harness.match_events(events, truth, frame_tol=args.frame_tol)
    report = harness.compute_report(match, parameters={
        "command": "eval", "events": args.events, "truth": args.truth,
        "frame_tol": args.frame_tol})
    harness.save_report(report, args.out)
    return 0


def _cmd_render(args) -> int:
    imap = topology.load_map(args.map)
    detections = ingest.read_detections_file(args.dets)
    tracks = [t for t, _ in ingest.pipeline_visits(detections, imap)]
    events = rules.read_events(args.events) if args.events else []
    harness.render_svg(imap, tracks, events, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchgraph",
        description="Patch-graph traffic behavior learning and trajectory "
                    "anomaly detection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic traffic")
    p.add_argument("--map", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True, help="detection JSONL output")
    p.add_argument("--truth", required=True, help="truth JSONL sidecar")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("learn", help="train a behavior model")
    p.add_argument("--map", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--out", required=True, help="model JSON output")
    p.add_argument("--prune-threshold", type=int,
                   default=behavior.DEFAULT_PRUNE_THRESHOLD)
    p.add_argument("--min-support", type=int,
                   default=behavior.DEFAULT_MIN_SUPPORT)
    p.add_argument("--fps", type=float, default=ingest.DEFAULT_FPS)
    p.add_argument("--tavg-per-node", action="store_true",
                   help="collapse dwell means over agent classes")
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("detect", help="detect anomalies in a stream")
    p.add_argument("--map", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--out", required=True, help="event JSONL output")
    p.add_argument("--margin", type=float, default=rules.DEFAULT_MARGIN)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("eval", help="score events against truth")
    p.add_argument("--events", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True, help="report JSON output")
    p.add_argument("--frame-tol", type=int, default=harness.DEFAULT_FRAME_TOL)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("render", help="render the scene as SVG")
    p.add_argument("--map", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--events", default=None)
    p.add_argument("--out", required=True, help="SVG output")
    p.set_defaults(func=_cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PatchGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
