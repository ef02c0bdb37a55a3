"""Batch orchestration over serialized records.

Every function here maps parsed JSON records (or core objects) to result
records, so the CLI and the HTTP service share one code path.  Outputs
preserve input order regardless of the worker-thread count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import attention, feasibility, kinematics, metrics, reproduction
from .errors import (DegenerateProduct, DimensionMismatch, InvariantViolation,
                     IoError, ParseError, TooShort)
from .kinematics import KinematicLimits, KinModel, KinState, default_limits
from .priors import PRIOR_FUNCTIONS, PriorConfig
from .reproduction import DEFAULT_MODEL_MAP
from .scene import AgentClass, Scene, knn_neighbors, scene_from_dict


def map_ordered(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Apply ``fn`` to items, preserving order; threads > 1 fans out."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    raise ParseError(line_no, "blank line")
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ParseError(line_no, f"invalid JSON: {exc.msg}") from None
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return rows


def write_jsonl(rows: Iterable[dict], path: str | Path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row))
                fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Prior scoring
# ---------------------------------------------------------------------------

def score_scene(scene: Scene, prior: str, k: int,
                cfg: PriorConfig = PriorConfig()) -> list[dict]:
    """Prior scores for every focal agent of one scene."""
    if prior not in PRIOR_FUNCTIONS:
        raise InvariantViolation(f"unknown prior {prior!r}")
    fn = PRIOR_FUNCTIONS[prior]
    rows = []
    for focal in scene.focal_ids:
        neighbors = knn_neighbors(scene, focal, k)
        vector = fn(scene, neighbors, cfg)
        rows.append({
            "scene_id": scene.scene_id,
            "focal_id": focal,
            "prior": prior,
            "scores": [{"neighbor_id": nid, "score": score}
                       for nid, score in vector.entries],
        })
    return rows


def score_scenes(scenes: Sequence[Scene], prior: str, k: int,
                 cfg: PriorConfig = PriorConfig(), threads: int = 1) -> list[dict]:
    per_scene = map_ordered(lambda s: score_scene(s, prior, k, cfg), scenes, threads)
    return [row for rows in per_scene for row in rows]


# ---------------------------------------------------------------------------
# Attention combination
# ---------------------------------------------------------------------------

def attention_record_from_dict(row: Mapping) -> attention.AttentionRecord:
    alpha = np.asarray(row["alpha_pred"], dtype=float)
    focal_emb = neigh_emb = None
    emb = row.get("embeddings")
    if emb is not None:
        focal_emb = np.asarray(emb["focal"], dtype=float)
        neigh_emb = np.asarray(emb["neighbors"], dtype=float)
    return attention.AttentionRecord(row["focal_id"], alpha,
                                     focal_embedding=focal_emb,
                                     neighbor_embeddings=neigh_emb)


def combine_record(prior_row: Mapping, attn_row: Mapping, method: str,
                   gate_layer: attention.GateLayer | None = None) -> dict:
    """Combine one prior row with its attention row.

    MnR heads whose product with the prior vanishes fall back to the prior
    itself (the only remaining signal).  Without a gate weight file the GnL
    gate is the untrained midpoint 0.5.
    """
    if method not in ("mnr", "gnl"):
        raise InvariantViolation(f"unknown combine method {method!r}")
    record = attention_record_from_dict(attn_row)
    beta = np.array([entry["score"] for entry in prior_row["scores"]], dtype=float)
    neighbor_ids = [entry["neighbor_id"] for entry in prior_row["scores"]]
    if beta.shape[0] != record.neighbor_count:
        raise DimensionMismatch(
            f"{prior_row['focal_id']}: prior has {beta.shape[0]} neighbors, "
            f"attention has {record.neighbor_count}")

    sigma = None
    heads = []
    for h in range(record.head_count):
        alpha_h = record.alpha_pred[h]
        if method == "mnr":
            try:
                heads.append(attention.mnr_combine(alpha_h, beta))
            except DegenerateProduct:
                heads.append(beta.copy())
        else:
            if sigma is None:
                if gate_layer is None:
                    sigma = np.full(record.neighbor_count, 0.5)
                else:
                    sigma = attention.gate_forward(record, beta, gate_layer)
            heads.append(attention.gnl_combine(alpha_h, beta, sigma))
    loss, _ = attention.attn_loss(beta, heads)
    delta_pred = float(np.mean([attention.delta_alpha(record.alpha_pred[h], beta)
                                for h in range(record.head_count)]))
    delta_cmb = float(np.mean([attention.delta_alpha(head, beta) for head in heads]))
    out = {
        "scene_id": prior_row.get("scene_id"),
        "focal_id": prior_row["focal_id"],
        "method": method,
        "neighbor_ids": neighbor_ids,
        "alpha_cmb": [[float(v) for v in head] for head in heads],
        "kl_loss": loss,
        "delta_alpha_pred": delta_pred,
        "delta_alpha_cmb": delta_cmb,
    }
    if sigma is not None:
        out["sigma"] = [float(s) for s in sigma]
    return out


def combine_records(prior_rows: Sequence[Mapping], attn_rows: Sequence[Mapping],
                    method: str, gate_layer: attention.GateLayer | None = None,
                    threads: int = 1) -> list[dict]:
    """Join prior and attention rows on (scene_id, focal_id) and combine."""
    attn_index = {(row.get("scene_id"), row["focal_id"]): row for row in attn_rows}
    pairs = []
    for prior_row in prior_rows:
        key = (prior_row.get("scene_id"), prior_row["focal_id"])
        if key not in attn_index:
            raise InvariantViolation(f"no attention record for {key}")
        pairs.append((prior_row, attn_index[key]))
    return map_ordered(
        lambda pair: combine_record(pair[0], pair[1], method, gate_layer),
        pairs, threads)


# ---------------------------------------------------------------------------
# Rollouts
# ---------------------------------------------------------------------------

def limits_from_dict(row: Mapping) -> KinematicLimits:
    allowed = {"a_min", "a_max", "kappa_min", "kappa_max", "v_min", "v_max"}
    unknown = set(row) - allowed
    if unknown:
        raise InvariantViolation(f"unknown limit keys {sorted(unknown)}")
    return KinematicLimits(**{k: float(v) for k, v in row.items()})


def limits_map_from_dict(record: Mapping | None
                         ) -> dict[AgentClass, KinematicLimits]:
    out: dict[AgentClass, KinematicLimits] = {}
    if record:
        for cls_name, row in record.items():
            out[AgentClass(cls_name)] = limits_from_dict(row)
    return out


def _initial_state(model: KinModel, row: Mapping) -> KinState:
    x, y = float(row["x"]), float(row["y"])
    theta = float(row.get("theta", 0.0))
    vx, vy = float(row.get("vx", 0.0)), float(row.get("vy", 0.0))
    if model is KinModel.UNICYCLE:
        if "v" in row:
            v = float(row["v"])
        else:
            v = vx * np.cos(theta) + vy * np.sin(theta)
        return KinState.unicycle(x, y, theta, float(v))
    return KinState.integrator(x, y, vx, vy)


def rollout_record(row: Mapping,
                   limits_by_class: Mapping[AgentClass, KinematicLimits] | None = None
                   ) -> dict:
    """Squash one record's raw controls and integrate them."""
    model = KinModel(row["model"])
    agent_class = AgentClass(row.get("agent_class", "vehicle"))
    dt = float(row["dt"])
    raw = np.asarray(row["raw"], dtype=float)
    if limits_by_class and agent_class in limits_by_class:
        limits = limits_by_class[agent_class]
    else:
        limits = default_limits(agent_class, model)
    squashed = kinematics.squash_controls(raw, model, limits)
    states = kinematics.rollout(model, _initial_state(model, row["initial"]),
                                squashed, dt, limits)
    out = dict(row)
    out["agent_class"] = agent_class.value
    out["squashed"] = [[float(a), float(b)] for a, b in squashed]
    out["states"] = [s.to_dict() for s in states]
    return out


def rollout_records(rows: Sequence[Mapping],
                    limits_by_class: Mapping[AgentClass, KinematicLimits] | None = None,
                    threads: int = 1) -> list[dict]:
    return map_ordered(lambda row: rollout_record(row, limits_by_class), rows, threads)


# ---------------------------------------------------------------------------
# Auditing
# ---------------------------------------------------------------------------

def _merge_reports(target: feasibility.AuditReport,
                   source: feasibility.AuditReport) -> None:
    for cls, counts in source.per_class.items():
        target.per_class.setdefault(cls, feasibility.AuditCounts()).add(counts)
    target.overall.add(source.overall)


def audit_rows(rows: Sequence[Mapping],
               limits_by_class: Mapping[AgentClass, KinematicLimits] | None = None,
               model_by_class: Mapping[AgentClass, KinModel] | None = None
               ) -> feasibility.AuditReport:
    """Audit scene records and/or rollout records in one pass.

    Rows containing ``tracks`` are parsed as scenes and every track is
    audited; rows containing ``states`` are rollout outputs.  Limits default
    to each class's assigned kinematic model (so e.g. single-integrator
    rollouts are not held to an acceleration bound they never promised);
    explicit per-class limits override that.
    """
    models = dict(DEFAULT_MODEL_MAP)
    if model_by_class:
        models.update({AgentClass(k): KinModel(v) for k, v in model_by_class.items()})

    groups: dict[tuple[AgentClass, KinModel, float], list[feasibility.AuditTrajectory]] = {}
    for row in rows:
        if "tracks" in row:
            scene = scene_from_dict(row)
            for traj in feasibility.scene_audit_trajectories(scene):
                cls = AgentClass(traj.agent_class)
                key = (cls, models[cls], scene.dt)
                groups.setdefault(key, []).append(traj)
        elif "states" in row:
            cls = AgentClass(row.get("agent_class", "vehicle"))
            model = KinModel(row["model"]) if "model" in row else models[cls]
            positions = np.array([[s["x"], s["y"]] for s in row["states"]], dtype=float)
            traj = feasibility.AuditTrajectory(cls, positions)
            groups.setdefault((cls, model, float(row["dt"])), []).append(traj)
        else:
            raise ParseError(None, "row is neither a scene nor a rollout record")

    report = feasibility.AuditReport()
    for (cls, model, dt), trajs in groups.items():
        if limits_by_class and cls in limits_by_class:
            limits = limits_by_class[cls]
        else:
            limits = default_limits(cls, model)
        _merge_reports(report, feasibility.audit(trajs, {cls: limits}, dt))
    return report


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def prediction_from_dict(row: Mapping) -> metrics.MultiModalPrediction:
    modes = tuple(metrics.PredictionMode(np.asarray(m["trajectory"], dtype=float),
                                         float(m["confidence"]))
                  for m in row["modes"])
    return metrics.MultiModalPrediction(row["agent_id"], modes)


def _gt_horizon(scene: Scene, agent_id: str) -> np.ndarray | None:
    track = scene.track(agent_id)
    states = track.states[scene.t_obs:]
    if any(not s.valid for s in states):
        return None
    return np.array([[s.x, s.y] for s in states])


def metrics_report(pred_rows: Sequence[Mapping], scenes: Sequence[Scene],
                   k: int = 6, delta_rows: Sequence[Mapping] | None = None) -> dict:
    """Accuracy metrics per class plus the optional correlation block.

    The mAP column is emitted as unsupported: it needs behavior-bucket
    definitions that are out of scope here.
    """
    scene_index = {scene.scene_id: scene for scene in scenes}
    per_agent = []  # (scene_id, agent_id, class, ade, fde, brier, pred, gt)
    skipped = 0
    for row in pred_rows:
        scene = scene_index.get(row["scene_id"])
        if scene is None:
            raise InvariantViolation(f"prediction references unknown scene "
                                     f"{row['scene_id']!r}")
        pred = prediction_from_dict(row)
        gt = _gt_horizon(scene, pred.agent_id)
        if gt is None:
            skipped += 1
            continue
        cls = scene.track(pred.agent_id).agent_class
        per_agent.append({
            "scene_id": row["scene_id"], "agent_id": pred.agent_id, "cls": cls,
            "ade": metrics.min_ade(pred, gt, k),
            "fde": metrics.min_fde(pred, gt, k),
            "brier": metrics.brier_min_fde(pred, gt, k),
            "pred": pred, "gt": gt,
        })

    def block(items: list[dict]) -> dict:
        if not items:
            return {"count": 0, "min_ade": None, "min_fde": None,
                    "brier_min_fde": None, "miss_rate": None}
        mr = metrics.miss_rate([it["pred"] for it in items],
                               [it["gt"] for it in items], k)
        return {
            "count": len(items),
            "min_ade": float(np.mean([it["ade"] for it in items])),
            "min_fde": float(np.mean([it["fde"] for it in items])),
            "brier_min_fde": float(np.mean([it["brier"] for it in items])),
            "miss_rate": mr,
        }

    report = {
        "k": k,
        "overall": block(per_agent),
        "per_class": {cls.value: block([it for it in per_agent if it["cls"] is cls])
                      for cls in AgentClass},
        "map": {"value": None, "status": "unsupported"},
        "skipped": skipped,
    }

    if delta_rows is not None:
        delta_index = {(r.get("scene_id"), r["focal_id"]): r for r in delta_rows}
        ades, d_pred, d_cmb = [], [], []
        for item in per_agent:
            row = delta_index.get((item["scene_id"], item["agent_id"]))
            if row is None:
                continue
            ades.append(item["ade"])
            d_pred.append(float(row["delta_alpha_pred"]))
            d_cmb.append(float(row["delta_alpha_cmb"]))
        report["correlation"] = metrics.interpretability_report(
            ades, d_pred, d_cmb).to_dict()
    return report


def metrics_report_csv(report: Mapping) -> str:
    lines = ["group,count,min_ade,min_fde,brier_min_fde,miss_rate,map"]

    def fmt(name: str, block: Mapping) -> str:
        cells = [name, str(block["count"])]
        for key in ("min_ade", "min_fde", "brier_min_fde", "miss_rate"):
            value = block[key]
            cells.append("" if value is None else str(value))
        cells.append("unsupported")
        return ",".join(cells)

    for cls in AgentClass:
        lines.append(fmt(cls.value, report["per_class"][cls.value]))
    lines.append(fmt("overall", report["overall"]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Reproduction
# ---------------------------------------------------------------------------

def reproduce_scenes(scenes: Sequence[Scene],
                     model_by_class: Mapping | None = None,
                     limits_by_class: Mapping[AgentClass, KinematicLimits] | None = None,
                     w_theta: float = reproduction.W_THETA_DEFAULT,
                     trajectory_sink: list | None = None
                     ) -> reproduction.ReproductionReport:
    return reproduction.reproduction_report(scenes, model_by_class,
                                            limits_by_class, w_theta,
                                            trajectory_sink)
