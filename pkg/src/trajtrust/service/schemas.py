"""Pydantic request/response models for the HTTP service.

These mirror the JSONL wire formats one-to-one, so a file line and a request
payload are interchangeable.  Deep validation is delegated to the core
dataclasses; the models here pin shapes and field names for the OpenAPI
schema.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

AgentClassName = Literal["vehicle", "pedestrian", "cyclist"]
ModelName = Literal["unicycle", "single_integrator", "double_integrator"]


class StateModel(BaseModel):
    t: int
    x: float
    y: float
    vx: float
    vy: float
    heading: float
    valid: bool = True


class TrackModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    agent_id: str
    agent_class: AgentClassName = Field(alias="class")
    states: list[StateModel]
    metadata: dict[str, str] | None = None


class SceneModel(BaseModel):
    scene_id: str
    dt: float
    t_obs: int
    t_horizon: int
    focal_ids: list[str]
    tracks: list[TrackModel]


class AgentGroupModel(BaseModel):
    profile: str
    agent_class: AgentClassName = "vehicle"
    count: int = 1
    speed: tuple[float, float] = (1.0, 8.0)
    accel: tuple[float, float] = (0.2, 1.2)
    curvature: tuple[float, float] = (-0.2, 0.2)
    step_offset: float = 2.0
    jump_step: int | None = None
    go_steps: int = 20
    stop_steps: int = 15


class SyntheticSpecModel(BaseModel):
    agents: list[AgentGroupModel]
    scene_count: int = 1
    dt: float = 0.1
    t_obs: int = 50
    t_horizon: int = 60
    spawn_radius: float = 30.0
    focal_count: int = 1


class GenerateRequest(BaseModel):
    spec: SyntheticSpecModel
    seed: int


class GenerateResponse(BaseModel):
    scenes: list[SceneModel]


class PriorConfigModel(BaseModel):
    v0: float = 1.0
    sigma_pot: float = 5.0
    k_stretch: float = 0.5
    w_a: float = 0.5
    w_b: float = 0.5
    n_dg: int = 10
    softmax_temp: float = 1.0
    eps_d: float = 0.1
    g_back: float = 0.01


class ScoreEntryModel(BaseModel):
    neighbor_id: str
    score: float


class ScoreRowModel(BaseModel):
    scene_id: str | None = None
    focal_id: str
    prior: Literal["dgsfm", "skgacn", "l2"]
    scores: list[ScoreEntryModel]


class PriorRequest(BaseModel):
    scene: SceneModel
    prior: Literal["dgsfm", "skgacn", "l2"]
    k: int = 8
    config: PriorConfigModel | None = None


class PriorResponse(BaseModel):
    scores: list[ScoreRowModel]


class EmbeddingsModel(BaseModel):
    focal: list[float]
    neighbors: list[list[float]]


class AttentionRowModel(BaseModel):
    scene_id: str | None = None
    focal_id: str
    alpha_pred: list[list[float]]
    embeddings: EmbeddingsModel | None = None


class GateWeightsModel(BaseModel):
    rows: int
    cols: int
    w: list[float]
    b: list[float]


class CombineRequest(BaseModel):
    prior: ScoreRowModel
    attention: AttentionRowModel
    method: Literal["mnr", "gnl"]
    gate_weights: GateWeightsModel | None = None


class CombinedRowModel(BaseModel):
    scene_id: str | None = None
    focal_id: str
    method: Literal["mnr", "gnl"]
    neighbor_ids: list[str]
    alpha_cmb: list[list[float]]
    kl_loss: float
    delta_alpha_pred: float
    delta_alpha_cmb: float
    sigma: list[float] | None = None


class LimitsModel(BaseModel):
    a_min: float = -8.0
    a_max: float = 8.0
    kappa_min: float = -0.3
    kappa_max: float = 0.3
    v_min: float = 0.0
    v_max: float = 10.0


class InitialStateModel(BaseModel):
    x: float
    y: float
    theta: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    v: float | None = None


class RolloutInModel(BaseModel):
    scene_id: str | None = None
    agent_id: str | None = None
    agent_class: AgentClassName = "vehicle"
    model: ModelName
    dt: float
    initial: InitialStateModel
    raw: list[list[float]]


class RolloutStateModel(BaseModel):
    x: float
    y: float
    theta: float
    vx: float
    vy: float


class RolloutOutModel(RolloutInModel):
    squashed: list[list[float]]
    states: list[RolloutStateModel]


class RolloutRequest(BaseModel):
    records: list[RolloutInModel]
    limits: dict[AgentClassName, LimitsModel] | None = None


class RolloutResponse(BaseModel):
    records: list[RolloutOutModel]


class AuditRequest(BaseModel):
    scenes: list[SceneModel] = []
    rollouts: list[RolloutOutModel] = []
    limits: dict[AgentClassName, LimitsModel] | None = None
    model_map: dict[AgentClassName, ModelName] | None = None


class AuditCountsModel(BaseModel):
    step_count: int
    infeasible_accel_steps: int
    infeasible_curv_steps: int
    infeasible_speed_steps: int
    infeasible_any_steps: int
    traj_count: int
    infeasible_accel_trajs: int
    infeasible_curv_trajs: int
    infeasible_speed_trajs: int
    infeasible_any_trajs: int
    skipped_trajs: int
    infeasible_accel_steps_pct: float
    infeasible_curv_steps_pct: float
    infeasible_speed_steps_pct: float
    infeasible_any_steps_pct: float
    infeasible_accel_trajs_pct: float
    infeasible_curv_trajs_pct: float
    infeasible_speed_trajs_pct: float
    infeasible_any_trajs_pct: float


class AuditResponse(BaseModel):
    per_class: dict[str, AuditCountsModel]
    overall: AuditCountsModel


class ReproduceRequest(BaseModel):
    scenes: list[SceneModel]
    model_map: dict[AgentClassName, ModelName] | None = None
    limits: dict[AgentClassName, LimitsModel] | None = None
    w_theta: float = 1.0


class ReproductionRowModel(BaseModel):
    agent_class: AgentClassName
    model: ModelName
    traj_count: int
    skipped: int
    min_ade: float
    min_fde: float
    miss_rate: float
    clamped_rate: float


class ReproduceResponse(BaseModel):
    rows: list[ReproductionRowModel]
    overall_min_ade: float


class PredictionModeModel(BaseModel):
    trajectory: list[list[float]]
    confidence: float


class PredictionRowModel(BaseModel):
    scene_id: str
    agent_id: str
    modes: list[PredictionModeModel]


class MetricsRequest(BaseModel):
    predictions: list[PredictionRowModel]
    scenes: list[SceneModel]
    k: int = 6
    delta_alpha: list[CombinedRowModel] | None = None


class MetricBlockModel(BaseModel):
    count: int
    min_ade: float | None
    min_fde: float | None
    brier_min_fde: float | None
    miss_rate: float | None


class CorrelationModel(BaseModel):
    sample_count: int
    rho_pred: float | None
    rho_cmb: float | None
    stronger: str | None


class MetricsResponse(BaseModel):
    k: int
    overall: MetricBlockModel
    per_class: dict[str, MetricBlockModel]
    map: dict
    skipped: int
    correlation: CorrelationModel | None = None


class HealthResponse(BaseModel):
    status: str
    version: str
