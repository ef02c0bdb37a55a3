import json

import numpy as np
import pytest

from trajtrust.cli import main
from trajtrust.scene import load_scenes, save_scenes

SPEC = {
    "scene_count": 2,
    "t_obs": 6,
    "t_horizon": 10,
    "focal_count": 1,
    "agents": [
        {"profile": "constant-velocity", "count": 2, "speed": [3, 8]},
        {"profile": "circular-arc", "agent_class": "cyclist", "count": 1},
        {"profile": "constant-velocity", "agent_class": "pedestrian",
         "count": 1, "speed": [0.5, 1.5]},
    ],
}


def write_spec(tmp_path, spec=None):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec or SPEC))
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


def test_gen_is_deterministic(tmp_path):
    spec = write_spec(tmp_path)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run("gen", "--spec", spec, "--seed", 7, "--out", a) == 0
    assert run("gen", "--spec", spec, "--seed", 7, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert run("gen", "--spec", spec, "--seed", 8, "--out", b) == 0
    assert a.read_bytes() != b.read_bytes()


def test_gen_then_audit_constant_velocity_is_clean(tmp_path):
    spec = write_spec(tmp_path, {
        "scene_count": 2, "t_obs": 5, "t_horizon": 10,
        "agents": [{"profile": "constant-velocity", "count": 3, "speed": [1, 8]}]})
    scenes = tmp_path / "scenes.jsonl"
    report = tmp_path / "audit.json"
    assert run("gen", "--spec", spec, "--seed", 1, "--out", scenes) == 0
    assert run("audit", "--trajectories", scenes, "--out", report) == 0
    data = json.loads(report.read_text())
    assert data["overall"]["infeasible_any_steps"] == 0
    assert data["overall"]["infeasible_any_steps_pct"] == 0.0


def test_prior_threads_are_byte_identical(tmp_path):
    spec = write_spec(tmp_path)
    scenes = tmp_path / "scenes.jsonl"
    run("gen", "--spec", spec, "--seed", 3, "--out", scenes)
    one, four = tmp_path / "one.jsonl", tmp_path / "four.jsonl"
    assert run("prior", "--scenes", scenes, "--prior", "dgsfm", "--k", 8,
               "--threads", 1, "--out", one) == 0
    assert run("prior", "--scenes", scenes, "--prior", "dgsfm", "--k", 8,
               "--threads", 4, "--out", four) == 0
    assert one.read_bytes() == four.read_bytes()


def test_prior_l2_matches_library_example(tmp_path, two_neighbor_scene):
    scenes = tmp_path / "scenes.jsonl"
    save_scenes([two_neighbor_scene], scenes)
    out = tmp_path / "scores.jsonl"
    assert run("prior", "--scenes", scenes, "--prior", "l2", "--k", 8,
               "--out", out) == 0
    row = json.loads(out.read_text().splitlines()[0])
    by_id = {e["neighbor_id"]: e["score"] for e in row["scores"]}
    assert by_id["n1"] == pytest.approx(0.6425640382076704, abs=1e-12)
    assert by_id["n2"] == pytest.approx(0.35743596179232956, abs=1e-12)


def test_prior_config_file_overrides_defaults(tmp_path, two_neighbor_scene):
    scenes = tmp_path / "scenes.jsonl"
    save_scenes([two_neighbor_scene], scenes)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"prior": {"softmax_temp": 1000.0}}))
    out = tmp_path / "scores.jsonl"
    assert run("prior", "--scenes", scenes, "--prior", "l2", "--k", 8,
               "--config", cfg, "--out", out) == 0
    row = json.loads(out.read_text().splitlines()[0])
    scores = [e["score"] for e in row["scores"]]
    assert scores == pytest.approx([0.5, 0.5], abs=1e-3)  # flat at high temp


def make_attention(tmp_path, scores_path, heads=2, with_embeddings=False):
    rng = np.random.default_rng(0)
    rows = []
    for line in scores_path.read_text().splitlines():
        row = json.loads(line)
        n = len(row["scores"])
        alpha = rng.uniform(0.1, 1.0, (heads, n))
        alpha = alpha / alpha.sum(axis=1, keepdims=True)
        rec = {"scene_id": row["scene_id"], "focal_id": row["focal_id"],
               "alpha_pred": alpha.tolist()}
        if with_embeddings:
            rec["embeddings"] = {"focal": rng.normal(0, 1, 3).tolist(),
                                 "neighbors": rng.normal(0, 1, (n, 3)).tolist()}
        rows.append(rec)
    path = tmp_path / "attn.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def test_combine_gnl_without_weights_uses_half_gate(tmp_path):
    spec = write_spec(tmp_path)
    scenes, scores = tmp_path / "scenes.jsonl", tmp_path / "scores.jsonl"
    run("gen", "--spec", spec, "--seed", 5, "--out", scenes)
    run("prior", "--scenes", scenes, "--prior", "l2", "--k", 4, "--out", scores)
    attn = make_attention(tmp_path, scores)
    out = tmp_path / "combined.jsonl"
    assert run("combine", "--scores", scores, "--attention", attn,
               "--method", "gnl", "--out", out) == 0
    for line in out.read_text().splitlines():
        row = json.loads(line)
        assert row["sigma"] == pytest.approx([0.5] * len(row["neighbor_ids"]))
        # the 0.5 blend halves the distance to the prior
        assert row["delta_alpha_cmb"] == pytest.approx(
            row["delta_alpha_pred"] / 2, abs=1e-12)
        for head in row["alpha_cmb"]:
            assert sum(head) == pytest.approx(1.0, abs=1e-9)


def test_combine_mnr_and_gate_weights(tmp_path):
    spec = write_spec(tmp_path)
    scenes, scores = tmp_path / "scenes.jsonl", tmp_path / "scores.jsonl"
    run("gen", "--spec", spec, "--seed", 5, "--out", scenes)
    run("prior", "--scenes", scenes, "--prior", "l2", "--k", 2, "--out", scores)
    attn = make_attention(tmp_path, scores, with_embeddings=True)
    out = tmp_path / "combined.jsonl"
    assert run("combine", "--scores", scores, "--attention", attn,
               "--method", "mnr", "--out", out) == 0
    # n = 2 neighbors, embeddings dim 3: gate input = 3 + 6 + 2 + 2 = 13
    gate = tmp_path / "gate.json"
    gate.write_text(json.dumps({"rows": 2, "cols": 13,
                                "w": [0.0] * 26, "b": [10.0, -10.0]}))
    assert run("combine", "--scores", scores, "--attention", attn,
               "--method", "gnl", "--gate-weights", gate, "--out", out) == 0
    row = json.loads(out.read_text().splitlines()[0])
    assert row["sigma"][0] > 0.99 and row["sigma"][1] < 0.01


def test_rollout_pipeline_and_audit(tmp_path):
    rng = np.random.default_rng(1)
    controls = tmp_path / "controls.jsonl"
    rows = []
    for model, cls in [("unicycle", "vehicle"),
                       ("double_integrator", "pedestrian"),
                       ("single_integrator", "pedestrian")]:
        rows.append({"scene_id": "s", "agent_id": f"{model}-agent",
                     "agent_class": cls, "model": model, "dt": 0.1,
                     "initial": {"x": 0.0, "y": 0.0, "theta": 0.3,
                                 "vx": 1.0, "vy": 0.4, "v": 1.0},
                     "raw": rng.normal(0, 2, (25, 2)).tolist()})
    controls.write_text("".join(json.dumps(r) + "\n" for r in rows))
    traj = tmp_path / "traj.jsonl"
    assert run("rollout", "--controls", controls, "--out", traj) == 0
    out_rows = [json.loads(line) for line in traj.read_text().splitlines()]
    assert all(len(r["states"]) == 25 and len(r["squashed"]) == 25
               for r in out_rows)
    report = tmp_path / "audit.json"
    assert run("audit", "--trajectories", traj, "--out", report) == 0
    data = json.loads(report.read_text())
    assert data["overall"]["infeasible_any_steps"] == 0


def test_reproduce_traj_out_audits_clean(tmp_path):
    # the full gen -> reproduce -> audit chain, with a bursty ground truth
    # that forces clamping: the fitted trajectories must still audit clean
    spec = write_spec(tmp_path, {
        "scene_count": 2, "t_obs": 4, "t_horizon": 30,
        "agents": [{"profile": "stop-and-go", "agent_class": "pedestrian",
                    "speed": [3.1, 3.1], "go_steps": 8, "stop_steps": 8}]})
    scenes = tmp_path / "scenes.jsonl"
    run("gen", "--spec", spec, "--seed", 9, "--out", scenes)
    traj = tmp_path / "repro_traj.jsonl"
    assert run("reproduce", "--scenes", scenes, "--out", tmp_path / "r.json",
               "--traj-out", traj) == 0
    report = tmp_path / "audit.json"
    assert run("audit", "--trajectories", traj, "--out", report) == 0
    data = json.loads(report.read_text())
    assert data["overall"]["infeasible_any_steps"] == 0
    # the ground truth itself is infeasible, the fit clamps
    assert json.loads((tmp_path / "r.json").read_text())["rows"][0]["clamped_rate"] > 0


def test_reproduce_csv_output(tmp_path):
    spec = write_spec(tmp_path)
    scenes = tmp_path / "scenes.jsonl"
    run("gen", "--spec", spec, "--seed", 2, "--out", scenes)
    out = tmp_path / "repro.csv"
    assert run("reproduce", "--scenes", scenes, "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "agent_class,model,traj_count,min_ade,min_fde,miss_rate,clamped_rate"
    assert len(lines) >= 2


def test_metrics_with_correlation(tmp_path):
    spec = write_spec(tmp_path)
    scenes_path = tmp_path / "scenes.jsonl"
    scores = tmp_path / "scores.jsonl"
    run("gen", "--spec", spec, "--seed", 6, "--out", scenes_path)
    run("prior", "--scenes", scenes_path, "--prior", "dgsfm", "--k", 4,
        "--out", scores)
    attn = make_attention(tmp_path, scores)
    combined = tmp_path / "combined.jsonl"
    run("combine", "--scores", scores, "--attention", attn, "--method", "mnr",
        "--out", combined)

    rng = np.random.default_rng(2)
    scenes = load_scenes(scenes_path)
    preds = []
    for scene in scenes:
        for focal in scene.focal_ids:
            gt = np.array([[s.x, s.y] for s in
                           scene.track(focal).states[scene.t_obs:]])
            modes = [{"trajectory": (gt + rng.normal(0, 0.2, gt.shape)).tolist(),
                      "confidence": 0.5},
                     {"trajectory": (gt + 1.0).tolist(), "confidence": 0.4}]
            preds.append({"scene_id": scene.scene_id, "agent_id": focal,
                          "modes": modes})
    pred_path = tmp_path / "preds.jsonl"
    pred_path.write_text("".join(json.dumps(r) + "\n" for r in preds))
    out = tmp_path / "metrics.json"
    assert run("metrics", "--pred", pred_path, "--scenes", scenes_path,
               "--delta-alpha", combined, "--k", 2, "--out", out) == 0
    data = json.loads(out.read_text())
    assert data["overall"]["count"] == len(preds)
    assert data["map"]["status"] == "unsupported"
    assert "rho_pred" in data["correlation"]
    csv_out = tmp_path / "metrics.csv"
    assert run("metrics", "--pred", pred_path, "--scenes", scenes_path,
               "--k", 2, "--out", csv_out) == 0
    assert csv_out.read_text().startswith("group,count,min_ade")


def test_exit_codes(tmp_path):
    # missing input file -> 1
    assert run("prior", "--scenes", tmp_path / "missing.jsonl",
               "--prior", "l2", "--out", tmp_path / "x.jsonl") == 1
    # malformed scene record -> 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"scene_id": "s"}\n')
    assert run("prior", "--scenes", bad, "--prior", "l2",
               "--out", tmp_path / "x.jsonl") == 2
    # bad synthetic spec -> 2
    spec = write_spec(tmp_path, {"agents": []})
    assert run("gen", "--spec", spec, "--seed", 1,
               "--out", tmp_path / "x.jsonl") == 2
    # unwritable output -> 1
    spec = write_spec(tmp_path)
    assert run("gen", "--spec", spec, "--seed", 1,
               "--out", "/nonexistent-dir/x.jsonl") == 1


def test_unknown_flag_is_an_error(capsys):
    with pytest.raises(SystemExit) as err:
        main(["gen", "--bogus", "1"])
    assert err.value.code == 2


def test_help_documents_flags(capsys):
    for command in ("gen", "prior", "combine", "rollout", "reproduce",
                    "audit", "metrics", "serve"):
        with pytest.raises(SystemExit) as err:
            main([command, "--help"])
        assert err.value.code == 0
        out = capsys.readouterr().out
        assert "--out" in out or command == "serve"
