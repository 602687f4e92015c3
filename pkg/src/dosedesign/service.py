"""Stateless HTTP layer over the design toolkit.

Every endpoint is a pure function of its request body; identical bodies
give identical responses.  Design payloads are serialized with the same
formatting as the CLI so downstream clients can compare them byte for
byte.

Error envelope: validation problems return 400 with
``{"error": {"code": "<ROUTE>_BAD_REQUEST", "detail": ...}}``; numerical
failures return 422 with code ``<ROUTE>_NUMERICAL``.
"""

from __future__ import annotations

import json

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import bivprobit, dataio, fitting, models, workflow
from .criteria import efficiency as compute_efficiency
from .designs import Design
from .equivalence import verify_design
from .errors import DoseDesignError, ValidationError
from .pso import SwarmConfig

app = FastAPI(title="dosedesign", docs_url=None, redoc_url=None)
app.add_middleware(
    CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
)


def _route_code(path: str, suffix: str) -> str:
    name = path.strip("/").replace("/", "_").replace("-", "_").upper() or "REQUEST"
    return f"{name}_{suffix}"


def _error(path, status, suffix, detail):
    body = {"error": {"code": _route_code(path, suffix), "detail": detail}}
    return Response(
        content=json.dumps(body), status_code=status, media_type="application/json"
    )


@app.exception_handler(RequestValidationError)
async def _on_validation(request: Request, exc: RequestValidationError):
    return _error(request.url.path, 400, "BAD_REQUEST", str(exc.errors()[:3]))


@app.exception_handler(json.JSONDecodeError)
async def _on_bad_json(request: Request, exc):
    return _error(request.url.path, 400, "BAD_REQUEST", f"malformed JSON: {exc}")


@app.exception_handler(ValidationError)
async def _on_bad_input(request: Request, exc):
    return _error(request.url.path, 400, "BAD_REQUEST", str(exc))


@app.exception_handler(DoseDesignError)
async def _on_numerical(request: Request, exc):
    return _error(request.url.path, 422, "NUMERICAL", str(exc))


def _json_response(payload: dict) -> Response:
    # single serialization point so CLI output and API bodies match byte-wise
    return Response(
        content=json.dumps(payload, indent=2, sort_keys=True),
        media_type="application/json",
    )


@app.get("/health")
async def health():
    return {"status": "ok"}


class DesignRequest(BaseModel):
    model: str = "po_trinomial"
    criterion: str = "robust_D"
    lam: float | list[float] = Field(default=0.5, alias="lambda")
    lam2: float | list[float] = Field(default=0.0, alias="lambda2")
    nominals: list[list[float]]
    fixed_arms: list[list[float]] = []
    include_verdict: bool = True
    pso: dict = {}
    tolerance: float = 1e-3

    model_config = {"populate_by_name": True, "protected_namespaces": ()}


@app.post("/design")
async def design(req: DesignRequest):
    cfg = workflow.WorkflowConfig.from_dict(
        {
            "model": req.model,
            "criterion": req.criterion,
            "lam": req.lam,
            "lam2": req.lam2,
            "nominals": req.nominals,
            "fixed_arms": req.fixed_arms,
            "pso": req.pso,
            "tolerance": req.tolerance,
        }
    )
    spec = cfg.model_spec()
    crit = workflow.build_criterion(cfg, cfg.nominals)
    from .search import find_design

    result = find_design(
        spec, crit,
        fixed_arms=cfg.fixed_arms_transformed(),
        swarm=cfg.swarm(spec.p),
        n_support=cfg.n_support,
    )
    payload = result.design.to_dict(criterion=cfg.criterion, value=result.value)
    if req.include_verdict:
        grid = np.linspace(0.0, cfg.swarm(spec.p).dose_box[1], cfg.grid_points)
        curve, verdict = verify_design(result.design, crit, spec, grid=grid,
                                       tol=cfg.tolerance)
        payload["verdict"] = verdict
        payload["max_sensitivity"] = curve.max_value
    return _json_response(payload)


class VerifyRequest(BaseModel):
    model: str = "po_trinomial"
    criterion: str = "robust_D"
    lam: float | list[float] = Field(default=0.5, alias="lambda")
    lam2: float | list[float] = Field(default=0.0, alias="lambda2")
    nominals: list[list[float]]
    design: dict
    grid_points: int = 2001
    tolerance: float = 1e-3

    model_config = {"populate_by_name": True, "protected_namespaces": ()}


@app.post("/verify")
async def verify(req: VerifyRequest):
    cfg = workflow.WorkflowConfig.from_dict(
        {
            "model": req.model,
            "criterion": req.criterion,
            "lam": req.lam,
            "lam2": req.lam2,
            "nominals": req.nominals,
            "grid_points": req.grid_points,
            "tolerance": req.tolerance,
        }
    )
    spec = cfg.model_spec()
    try:
        d = Design.from_dict(req.design)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"bad design payload: {exc}") from None
    crit = workflow.build_criterion(cfg, cfg.nominals)
    grid = np.linspace(0.0, cfg.swarm(spec.p).dose_box[1], cfg.grid_points)
    curve, verdict = verify_design(d, crit, spec, grid=grid, tol=cfg.tolerance)
    payload = curve.to_dict()
    payload["verdict"] = verdict
    return _json_response(payload)


@app.post("/fit")
async def fit(request: Request, model: str = "po_trinomial", by_date: bool = False):
    body = await request.body()
    spec = models.get_spec(model)
    try:
        records = dataio.ingest_csv(body.decode("utf-8"))
    except UnicodeDecodeError:
        raise ValidationError("request body is not UTF-8 CSV") from None
    if by_date:
        payload = {
            date: fitting.fit_mle(spec, rows).to_dict()
            for date, rows in sorted(dataio.group_by_date(records).items())
        }
    else:
        payload = fitting.fit_mle(spec, records).to_dict()
    return _json_response(payload)


class EfficiencyRequest(BaseModel):
    model: str = "po_trinomial"
    kind: str
    theta: list[float]
    design: dict
    reference: dict

    model_config = {"protected_namespaces": ()}


@app.post("/efficiency")
async def efficiency(req: EfficiencyRequest):
    spec = models.get_spec(req.model)
    tp = spec.params(np.asarray(req.theta, dtype=float))
    try:
        d = Design.from_dict(req.design)
        ref = Design.from_dict(req.reference)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"bad design payload: {exc}") from None
    if req.kind not in ("D", "c"):
        raise ValidationError("kind must be 'D' or 'c'")
    eff = compute_efficiency(d, ref, req.kind, spec, tp)
    return _json_response({"kind": req.kind, "efficiency": eff})


class BPDesignRequest(BaseModel):
    theta1: list[float]
    theta2: list[float]
    rho: float
    p_eff_star: float
    p_tox_star: float
    w: float = 0.5
    ce: float = 0.0
    ct: float = 0.0
    criterion: str = "D"
    seed: int = 0
    n_support: int = 4


@app.post("/bp/design")
async def bp_design(req: BPDesignRequest):
    try:
        params = bivprobit.BPParams(tuple(req.theta1), tuple(req.theta2), req.rho)
        targets = bivprobit.BPTargets(req.p_eff_star, req.p_tox_star, req.w,
                                      req.ce, req.ct)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    if req.criterion not in ("D", "L"):
        raise ValidationError("criterion must be 'D' or 'L'")
    swarm = SwarmConfig(n_support=req.n_support, n_particles=80, iters=200,
                        dose_box=(0.0, 1.5), seed=req.seed)
    d = bivprobit.find_bp_design(params, targets, req.criterion, swarm,
                                 req.n_support)
    d_val, l_val = bivprobit.reported_criteria(d, params, targets)
    payload = d.to_dict(criterion=req.criterion)
    payload["reported"] = {"D": d_val, "L": l_val}
    return _json_response(payload)
