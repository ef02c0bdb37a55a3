"""Batch command-line frontend.

Thin client over the pipeline layer: each subcommand parses flags, reads the
input files, delegates to the same handlers the HTTP service uses, and writes
the result.  Exit codes: 0 success, 2 validation error, 1 IO error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import pipeline
from .attention import GateLayer
from .errors import IoError, TrajtrustError
from .priors import PRIOR_NAMES, PriorConfig
from .scene import generate_synthetic, load_scenes, save_scenes, synthetic_spec_from_dict


def _read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise TrajtrustError(f"{path}: invalid JSON: {exc.msg}") from None


def _write_text(text: str, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _write_report(report: dict, csv_text: str, path: str) -> None:
    if path.endswith(".csv"):
        _write_text(csv_text, path)
    else:
        _write_text(json.dumps(report, indent=2) + "\n", path)


def _prior_config(path: str | None) -> PriorConfig:
    if path is None:
        return PriorConfig()
    record = _read_json(path)
    section = record.get("prior", record)
    return PriorConfig(**section)


def _limits_map(path: str | None):
    if path is None:
        return None
    record = _read_json(path)
    section = record.get("limits", record)
    return pipeline.limits_map_from_dict(section)


def _model_map(path: str | None):
    if path is None:
        return None
    record = _read_json(path)
    return record.get("model_map", record)


def _cmd_gen(args) -> int:
    spec = synthetic_spec_from_dict(_read_json(args.spec))
    save_scenes(generate_synthetic(spec, args.seed), args.out)
    return 0


def _cmd_prior(args) -> int:
    scenes = load_scenes(args.scenes)
    cfg = _prior_config(args.config)
    rows = pipeline.score_scenes(scenes, args.prior, args.k, cfg, args.threads)
    pipeline.write_jsonl(rows, args.out)
    return 0


def _cmd_combine(args) -> int:
    prior_rows = pipeline.read_jsonl(args.scores)
    attn_rows = pipeline.read_jsonl(args.attention)
    gate = GateLayer.from_file(args.gate_weights) if args.gate_weights else None
    rows = pipeline.combine_records(prior_rows, attn_rows, args.method, gate,
                                    args.threads)
    pipeline.write_jsonl(rows, args.out)
    return 0


def _cmd_rollout(args) -> int:
    rows = pipeline.read_jsonl(args.controls)
    out = pipeline.rollout_records(rows, _limits_map(args.limits), args.threads)
    pipeline.write_jsonl(out, args.out)
    return 0


def _cmd_reproduce(args) -> int:
    scenes = load_scenes(args.scenes)
    sink = [] if args.traj_out else None
    report = pipeline.reproduce_scenes(scenes, _model_map(args.model_map),
                                       _limits_map(args.limits), args.w_theta,
                                       sink)
    _write_report(report.to_dict(), report.to_csv(), args.out)
    if sink is not None:
        pipeline.write_jsonl(sink, args.traj_out)
    return 0


def _cmd_audit(args) -> int:
    rows = pipeline.read_jsonl(args.trajectories)
    report = pipeline.audit_rows(rows, _limits_map(args.limits),
                                 _model_map(args.model_map))
    _write_report(report.to_dict(), report.to_csv(), args.out)
    return 0


def _cmd_metrics(args) -> int:
    pred_rows = pipeline.read_jsonl(args.pred)
    scenes = load_scenes(args.scenes)
    delta_rows = pipeline.read_jsonl(args.delta_alpha) if args.delta_alpha else None
    report = pipeline.metrics_report(pred_rows, scenes, args.k, delta_rows)
    _write_report(report, pipeline.metrics_report_csv(report), args.out)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajtrust",
        description="Interaction priors, feasible rollouts, and trust metrics "
                    "for trajectory prediction.")
    sub = parser.add_subparsers(dest="command", required=True)
    threads_default = os.cpu_count() or 1

    p = sub.add_parser("gen", help="generate synthetic scenes")
    p.add_argument("--spec", required=True, help="synthetic spec JSON file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output scenes JSONL")
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("prior", help="score neighbor importance per focal agent")
    p.add_argument("--scenes", required=True)
    p.add_argument("--prior", required=True, choices=PRIOR_NAMES)
    p.add_argument("--k", type=int, default=8, help="neighbor count (default 8)")
    p.add_argument("--config", help="config JSON with a 'prior' section")
    p.add_argument("--threads", type=int, default=threads_default)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_prior)

    p = sub.add_parser("combine", help="fold prior scores into attention scores")
    p.add_argument("--scores", required=True, help="prior scores JSONL")
    p.add_argument("--attention", required=True, help="attention records JSONL")
    p.add_argument("--method", required=True, choices=("mnr", "gnl"))
    p.add_argument("--gate-weights", help="gate weight JSON (gnl only)")
    p.add_argument("--threads", type=int, default=threads_default)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_combine)

    p = sub.add_parser("rollout", help="squash raw controls and integrate them")
    p.add_argument("--controls", required=True, help="control records JSONL")
    p.add_argument("--limits", help="limits JSON (per agent class)")
    p.add_argument("--threads", type=int, default=threads_default)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_rollout)

    p = sub.add_parser("reproduce", help="fit feasible controls to ground truth")
    p.add_argument("--scenes", required=True)
    p.add_argument("--model-map", help="JSON mapping agent class to model")
    p.add_argument("--limits", help="limits JSON (per agent class)")
    p.add_argument("--w-theta", type=float, default=1.0,
                   help="heading-error weight in the clamped-step search")
    p.add_argument("--out", required=True, help=".json or .csv report")
    p.add_argument("--traj-out",
                   help="also write the reproduced trajectories as JSONL "
                        "(auditable with the audit subcommand)")
    p.set_defaults(fn=_cmd_reproduce)

    p = sub.add_parser("audit", help="count kinematic-limit violations")
    p.add_argument("--trajectories", required=True,
                   help="scenes JSONL and/or rollout records JSONL")
    p.add_argument("--limits", help="limits JSON (per agent class)")
    p.add_argument("--model-map", help="JSON mapping agent class to model")
    p.add_argument("--out", required=True, help=".json or .csv report")
    p.set_defaults(fn=_cmd_audit)

    p = sub.add_parser("metrics", help="accuracy and interpretability metrics")
    p.add_argument("--pred", required=True, help="prediction records JSONL")
    p.add_argument("--scenes", required=True)
    p.add_argument("--delta-alpha", help="combined attention JSONL for correlation")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--out", required=True, help=".json or .csv report")
    p.set_defaults(fn=_cmd_metrics)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrajtrustError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
