import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajtrust.errors import InvariantViolation, UnknownAgent
from trajtrust.priors import (PRIOR_FUNCTIONS, PriorConfig, ScoreVector,
                              dgsfm_scores, l2_scores, skgacn_scores, v_egg)
from trajtrust.scene import AgentClass, AgentState, AgentTrack, NeighborSet, Scene, knn_neighbors

from .conftest import build_scene, rigid_transform

CFG = PriorConfig()


def scores_for(scene, prior, k=8, cfg=CFG):
    ns = knn_neighbors(scene, scene.focal_ids[0], k)
    return PRIOR_FUNCTIONS[prior](scene, ns, cfg)


# ---------------------------------------------------------------------------
# config and score-vector invariants
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"v0": 0.0}, {"sigma_pot": -1.0}, {"k_stretch": -0.1}, {"n_dg": 0},
    {"softmax_temp": 0.0}, {"w_a": -1.0}, {"w_a": 0.0, "w_b": 0.0},
    {"eps_d": 0.0}, {"g_back": 2.0},
])
def test_config_validation(kwargs):
    with pytest.raises(InvariantViolation):
        PriorConfig(**kwargs)


def test_score_vector_must_normalize():
    with pytest.raises(InvariantViolation):
        ScoreVector("f", (("a", 0.7), ("b", 0.7)))
    with pytest.raises(InvariantViolation):
        ScoreVector("f", (("a", -0.1), ("b", 1.1)))
    assert len(ScoreVector("f", ())) == 0


# ---------------------------------------------------------------------------
# egg potential
# ---------------------------------------------------------------------------

def test_v_egg_zero_distance_is_v0():
    assert v_egg((2.0, 3.0), (2.0, 3.0), (4.0, 0.0), CFG) == pytest.approx(1.0, abs=1e-15)


def test_v_egg_zero_speed_is_isotropic():
    d = 7.0
    expected = math.exp(-d / CFG.sigma_pot)
    for angle in (0.0, 1.0, 2.5, -2.0):
        target = (d * math.cos(angle), d * math.sin(angle))
        assert v_egg(target, (0.0, 0.0), (0.0, 0.0), CFG) == pytest.approx(expected, abs=1e-12)


def test_v_egg_forward_stretch_hand_values():
    # source moving +x at 4 m/s: stretch factor 1 + 0.5*4 = 3
    ahead = v_egg((10.0, 0.0), (0.0, 0.0), (4.0, 0.0), CFG)
    behind = v_egg((-10.0, 0.0), (0.0, 0.0), (4.0, 0.0), CFG)
    assert ahead == pytest.approx(0.513417119032592, abs=1e-12)   # exp(-(10/3)/5)
    assert behind == pytest.approx(0.1353352832366127, abs=1e-12)  # exp(-2)
    assert ahead > behind


def test_v_egg_bounded_by_v0():
    rng = np.random.default_rng(0)
    for _ in range(200):
        t, s, v = rng.uniform(-30, 30, 2), rng.uniform(-30, 30, 2), rng.uniform(-15, 15, 2)
        value = v_egg(t, s, v, CFG)
        assert 0.0 < value <= CFG.v0 + 1e-15


# ---------------------------------------------------------------------------
# DG-SFM
# ---------------------------------------------------------------------------

def test_dgsfm_singleton():
    scene = build_scene([("f", "vehicle", 0, 0, 5, 0),
                         ("n", "vehicle", 10, 3, -2, 1)])
    vector = scores_for(scene, "dgsfm")
    assert vector.scores == pytest.approx([1.0], abs=1e-15)


def test_dgsfm_mirror_symmetry():
    scene = build_scene([("f", "vehicle", 0, 0, 5, 0),
                         ("up", "vehicle", 3, 4, 1, -2),
                         ("dn", "vehicle", 3, -4, 1, 2)])
    vector = scores_for(scene, "dgsfm")
    assert abs(vector.scores[0] - vector.scores[1]) <= 1e-9
    assert vector.scores.sum() == pytest.approx(1.0, abs=1e-9)


def test_dgsfm_rear_approacher_outranks_stationary():
    # focal at origin heading +x at 5 m/s; both neighbors 10 m behind,
    # one stationary, one approaching at 15 m/s.
    scene = build_scene([("f", "vehicle", 0, 0, 5, 0),
                         ("stat", "vehicle", -10, 0, 0, 0, 0.0),
                         ("fast", "vehicle", -10, 0.0, 15, 0)])
    # place them truly co-located but distinguishable by velocity
    ns = NeighborSet("f", ("stat", "fast"))
    vector = dgsfm_scores(scene, ns, CFG)
    by_id = dict(vector.entries)
    # frozen values from the independent script over the documented formula
    assert by_id["stat"] == pytest.approx(0.4631656207848346, abs=1e-9)
    assert by_id["fast"] == pytest.approx(0.5368343792151655, abs=1e-9)
    assert by_id["fast"] > by_id["stat"] + 1e-9


def test_dgsfm_ahead_beats_behind_at_same_distance():
    scene = build_scene([("f", "vehicle", 0, 0, 5, 0),
                         ("ahead", "vehicle", 10, 0, 0, 0, 0.0),
                         ("behind", "vehicle", -10, 0, 0, 0, 0.0)])
    vector = scores_for(scene, "dgsfm")
    by_id = dict(vector.entries)
    assert by_id["ahead"] > by_id["behind"] + 1e-9


def test_dgsfm_empty_neighbor_set():
    scene = build_scene([("f", "vehicle", 0, 0, 5, 0)])
    vector = dgsfm_scores(scene, NeighborSet("f", ()), CFG)
    assert vector.entries == ()


def test_dgsfm_unknown_neighbor():
    scene = build_scene([("f", "vehicle", 0, 0, 5, 0)])
    with pytest.raises(UnknownAgent):
        dgsfm_scores(scene, NeighborSet("f", ("ghost",)), CFG)


def test_priors_reject_invalid_neighbor_at_obs_end():
    good = tuple(AgentState(t * 0.1, 0.0, 1.0, 0.0, 0.0) for t in range(3))
    gone = (AgentState(0.0, 1.0, 1.0, 0.0, 0.0), AgentState.occluded(),
            AgentState.occluded())
    scene = Scene("s", 0.1, 2, 1,
                  (AgentTrack("f", AgentClass.VEHICLE, good),
                   AgentTrack("n", AgentClass.VEHICLE, gone)), ("f",))
    with pytest.raises(InvariantViolation):
        dgsfm_scores(scene, NeighborSet("f", ("n",)), CFG)


# ---------------------------------------------------------------------------
# SKGACN-style baseline
# ---------------------------------------------------------------------------

def test_skgacn_singleton():
    scene = build_scene([("f", "vehicle", 0, 0, 5, 0),
                         ("n", "vehicle", 4, 2, 0, 0, 0.0)])
    assert scores_for(scene, "skgacn").scores == pytest.approx([1.0], abs=1e-15)


def test_skgacn_front_gate():
    scene = build_scene([("f", "vehicle", 0, 0, 0, 0, 0.0),
                         ("ahead", "vehicle", 10, 0, 0, 0, 0.0),
                         ("behind", "vehicle", -10, 0, 0, 0, 0.0)])
    by_id = dict(scores_for(scene, "skgacn").entries)
    assert by_id["ahead"] == pytest.approx(0.5244853492722498, abs=1e-9)
    assert by_id["behind"] == pytest.approx(0.4755146507277503, abs=1e-9)
    assert by_id["ahead"] > by_id["behind"]


def test_skgacn_distance_dominance():
    scene = build_scene([("f", "vehicle", 0, 0, 0, 0, 0.0),
                         ("near", "vehicle", 2, 0, 0, 0, 0.0),
                         ("far", "vehicle", 20, 0, 0, 0, 0.0)])
    by_id = dict(scores_for(scene, "skgacn").entries)
    assert by_id["near"] == pytest.approx(0.605023070240485, abs=1e-9)
    assert by_id["far"] == pytest.approx(0.39497692975951504, abs=1e-9)


def test_skgacn_closing_speed_raises_score():
    scene = build_scene([("f", "vehicle", 0, 0, 0, 0, 0.0),
                         ("approaching", "vehicle", 10, 0, -5, 0),
                         ("receding", "vehicle", -0.0, 10.0, 0, 5)])
    # same distance; approaching is in front, receding moves away (also front
    # half-plane boundary: dx = 0 counts as front)
    by_id = dict(scores_for(scene, "skgacn").entries)
    assert by_id["approaching"] > by_id["receding"]


# ---------------------------------------------------------------------------
# L2 baseline
# ---------------------------------------------------------------------------

def test_l2_singleton():
    scene = build_scene([("f", "vehicle", 0, 0, 1.0, 0),
                         ("n", "vehicle", 9, 9, 0, 0, 0.0)])
    assert scores_for(scene, "l2").scores == pytest.approx([1.0], abs=1e-15)


def test_l2_equidistant_split():
    scene = build_scene([("f", "vehicle", 0, 0, 0, 0, 0.0),
                         ("a", "vehicle", 0, 5, 0, 0, 0.0),
                         ("b", "vehicle", 5, 0, 0, 0, 0.0)])
    assert scores_for(scene, "l2").scores == pytest.approx([0.5, 0.5], abs=1e-12)


def test_l2_hand_arithmetic(two_neighbor_scene):
    # neighbors at 1 m and 3 m: softmax(1/1.1, 1/3.1)
    vector = scores_for(two_neighbor_scene, "l2")
    by_id = dict(vector.entries)
    assert by_id["n1"] == pytest.approx(0.6425640382076704, abs=1e-12)
    assert by_id["n2"] == pytest.approx(0.35743596179232956, abs=1e-12)


def test_l2_monotone_in_distance():
    agents = [("f", "vehicle", 0.0, 0.0, 0.0, 0.0, 0.0)]
    dists = [1.0, 2.5, 4.0, 8.0, 16.0]
    for i, d in enumerate(dists):
        agents.append((f"n{i}", "vehicle", d, 0.0, 0.0, 0.0, 0.0))
    vector = scores_for(build_scene(agents), "l2")
    ordered = [dict(vector.entries)[f"n{i}"] for i in range(len(dists))]
    assert all(a > b for a, b in zip(ordered, ordered[1:]))


# ---------------------------------------------------------------------------
# shared properties
# ---------------------------------------------------------------------------

def random_scene(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    agents = [("f", "vehicle", *rng.uniform(-20, 20, 2), *rng.uniform(-12, 12, 2))]
    for i in range(n):
        if i == 0 and seed % 3 == 0:
            # coincident with the focal agent
            agents.append((f"n{i}", "pedestrian", agents[0][2], agents[0][3],
                           0.0, 0.0, 0.0))
        else:
            agents.append((f"n{i}", "pedestrian", *rng.uniform(-20, 20, 2),
                           *rng.uniform(-12, 12, 2)))
    rows = []
    for row in agents:
        row = tuple(float(v) if isinstance(v, np.floating) else v for v in row)
        rows.append(row if len(row) > 6 or math.hypot(row[4], row[5]) > 0.1
                    else row + (0.0,))
    return build_scene(rows)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), prior=st.sampled_from(["dgsfm", "skgacn", "l2"]))
def test_normalization_and_finiteness(seed, prior):
    scene = random_scene(seed)
    vector = scores_for(scene, prior)
    scores = vector.scores
    assert np.isfinite(scores).all()
    assert (scores >= 0).all() and (scores <= 1).all()
    assert abs(scores.sum() - 1.0) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6),
       prior=st.sampled_from(["dgsfm", "skgacn", "l2"]),
       angle=st.floats(-math.pi, math.pi),
       tx=st.floats(-100, 100), ty=st.floats(-100, 100))
def test_rigid_transform_equivariance(seed, prior, angle, tx, ty):
    scene = random_scene(seed)
    moved = rigid_transform(scene, angle, tx, ty)
    base = scores_for(scene, prior).scores
    transformed = scores_for(moved, prior).scores
    assert np.abs(base - transformed).max() <= 1e-9


def test_zero_speed_focal_is_isotropic_and_finite():
    # stationary focal agent: the potential part degenerates to isotropic,
    # equal distances in any direction score equally under dgsfm
    scene = build_scene([("f", "vehicle", 0, 0, 0, 0, 0.7),
                         ("a", "vehicle", 6, 0, 0, 0, 0.0),
                         ("b", "vehicle", 0, 6, 0, 0, 0.0),
                         ("c", "vehicle", -6, 0, 0, 0, 0.0)])
    scores = scores_for(scene, "dgsfm").scores
    assert np.isfinite(scores).all()
    assert scores == pytest.approx([1 / 3] * 3, abs=1e-12)
