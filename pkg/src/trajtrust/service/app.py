"""FastAPI service exposing the core operations over HTTP.

Every endpoint is a stateless wrapper: pydantic payloads are converted to the
same dict records the JSONL files use, handed to the pipeline layer, and the
result is validated back through the response models.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, pipeline
from ..attention import GateLayer
from ..errors import TrajtrustError, UnknownAgent
from ..priors import PriorConfig
from ..scene import generate_synthetic, scene_from_dict, scene_to_dict, synthetic_spec_from_dict
from . import schemas


def _scene(model: schemas.SceneModel):
    return scene_from_dict(model.model_dump(by_alias=True))


def create_app() -> FastAPI:
    app = FastAPI(title="trajtrust",
                  description="Interaction priors, feasible kinematic rollouts, "
                              "and trust metrics for trajectory prediction.",
                  version=__version__)

    @app.exception_handler(TrajtrustError)
    async def _trajtrust_error(request: Request, exc: TrajtrustError):
        status = 404 if isinstance(exc, UnknownAgent) else 400
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__, "detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/scenes/generate", response_model=schemas.GenerateResponse)
    def generate(req: schemas.GenerateRequest):
        spec = synthetic_spec_from_dict(req.spec.model_dump())
        scenes = generate_synthetic(spec, req.seed)
        return {"scenes": [scene_to_dict(s) for s in scenes]}

    @app.post("/priors/score", response_model=schemas.PriorResponse)
    def score(req: schemas.PriorRequest):
        cfg = PriorConfig(**req.config.model_dump()) if req.config else PriorConfig()
        rows = pipeline.score_scene(_scene(req.scene), req.prior, req.k, cfg)
        return {"scores": rows}

    @app.post("/attention/combine", response_model=schemas.CombinedRowModel)
    def combine(req: schemas.CombineRequest):
        gate = (GateLayer.from_dict(req.gate_weights.model_dump())
                if req.gate_weights else None)
        return pipeline.combine_record(req.prior.model_dump(),
                                       req.attention.model_dump(),
                                       req.method, gate)

    @app.post("/kinematics/rollout", response_model=schemas.RolloutResponse)
    def rollout(req: schemas.RolloutRequest):
        limits = pipeline.limits_map_from_dict(
            {k: v.model_dump() for k, v in req.limits.items()} if req.limits else None)
        rows = [r.model_dump() for r in req.records]
        return {"records": pipeline.rollout_records(rows, limits)}

    @app.post("/feasibility/audit", response_model=schemas.AuditResponse)
    def audit(req: schemas.AuditRequest):
        rows = [scene_to_dict(_scene(s)) for s in req.scenes]
        rows += [r.model_dump() for r in req.rollouts]
        limits = pipeline.limits_map_from_dict(
            {k: v.model_dump() for k, v in req.limits.items()} if req.limits else None)
        report = pipeline.audit_rows(rows, limits, req.model_map)
        return report.to_dict()

    @app.post("/reproduction/report", response_model=schemas.ReproduceResponse)
    def reproduce(req: schemas.ReproduceRequest):
        limits = pipeline.limits_map_from_dict(
            {k: v.model_dump() for k, v in req.limits.items()} if req.limits else None)
        scenes = [_scene(s) for s in req.scenes]
        report = pipeline.reproduce_scenes(scenes, req.model_map, limits, req.w_theta)
        return report.to_dict()

    @app.post("/metrics/report", response_model=schemas.MetricsResponse)
    def metrics(req: schemas.MetricsRequest):
        scenes = [_scene(s) for s in req.scenes]
        pred_rows = [r.model_dump() for r in req.predictions]
        delta_rows = ([r.model_dump() for r in req.delta_alpha]
                      if req.delta_alpha is not None else None)
        return pipeline.metrics_report(pred_rows, scenes, req.k, delta_rows)

    return app
