"""HTTP service exposing the engine.

Error mapping keeps the CLI exit-code contract honest:

* bad input (ValueError family, unreadable files)   -> 400 kind=validation/io
* replay fixture gaps and remote adapter failures   -> 502 kind=adapter
* anything else at runtime                          -> 500 kind=runtime
"""

from __future__ import annotations

import base64
import json
from dataclasses import replace
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from . import __version__
from .adapters import (
    AdapterEndpoint,
    FixtureError,
    RemoteBackend,
    ReplayBackend,
    ToyEmbedder,
    TransportError,
)
from .gate import CandidateTexts, GateConfig, route, score
from .harness import (
    ablate,
    compute_metrics,
    f1_foreground,
    fg_iou,
    run_pipeline,
    write_metrics,
    write_trace,
)
from .lexsem import normalize
from .localizer import LocalizerConfig, localize
from .maskio import load_manifest, parse_mask
from . import schemas as sch

__all__ = ["create_app"]


def _decode_mask(b64: str, threshold: int, what: str):
    try:
        raw = base64.b64decode(b64, validate=True)
    except ValueError as exc:
        raise ValueError(f"{what} is not valid base64: {exc}") from exc
    return parse_mask(raw, threshold, source=what)


def _loc_config(req) -> LocalizerConfig:
    return LocalizerConfig(padding=req.padding, min_area=req.min_area,
                           max_blocks=req.max_blocks,
                           connectivity=req.connectivity)


def _gate_config(req) -> GateConfig:
    return GateConfig(alpha=req.alpha, beta=req.beta, tau=req.tau,
                      token_best=req.token_best)


def _make_backend(req):
    if req.backend == "replay":
        return ReplayBackend(load_manifest(req.manifest_path))
    if not req.endpoint:
        raise ValueError("remote backend requires an endpoint URL")
    return RemoteBackend(AdapterEndpoint(
        base_url=req.endpoint, timeout_ms=req.timeout_ms,
        description_length=req.desc_length))


def _close(backend) -> None:
    close = getattr(backend, "close", None)
    if close:
        close()


def _resolved_config(req, command: str, extra: dict | None = None) -> dict:
    keys = ("manifest_path", "backend", "endpoint", "timeout_ms", "alpha",
            "beta", "tau", "token_best", "padding", "min_area", "max_blocks",
            "connectivity", "workers", "fallback_policy", "desc_length")
    resolved = {"command": command}
    for key in keys:
        if hasattr(req, key):
            resolved[key] = getattr(req, key)
    if extra:
        resolved.update(extra)
    return resolved


def _write_reports(out_dir: str | None, resolved: dict, rows,
                   records=None) -> None:
    if out_dir is None:
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if records is not None:
        write_trace(records, out / "trace.jsonl")
    write_metrics(rows, out / "metrics.jsonl")
    (out / "config.resolved.json").write_text(
        json.dumps(resolved, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")


def create_app() -> FastAPI:
    app = FastAPI(title="textgate", version=__version__)

    @app.exception_handler(ValueError)
    async def _validation_error(request, exc):
        return JSONResponse(status_code=400, content={
            "detail": {"kind": "validation", "message": str(exc)}})

    @app.exception_handler(OSError)
    async def _io_error(request, exc):
        return JSONResponse(status_code=400, content={
            "detail": {"kind": "io", "message": str(exc)}})

    @app.exception_handler(FixtureError)
    async def _fixture_error(request, exc):
        return JSONResponse(status_code=502, content={
            "detail": {"kind": "adapter", "message": str(exc)}})

    @app.exception_handler(TransportError)
    async def _transport_error(request, exc):
        return JSONResponse(status_code=502, content={
            "detail": {"kind": "adapter", "message": str(exc)}})

    @app.exception_handler(RuntimeError)
    async def _runtime_error(request, exc):
        return JSONResponse(status_code=500, content={
            "detail": {"kind": "runtime", "message": str(exc)}})

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/localize", response_model=sch.LocalizeResponse)
    def localize_route(req: sch.LocalizeRequest):
        mask = _decode_mask(req.mask_pgm_b64, req.threshold, "mask_pgm_b64")
        blocks = localize(mask, _loc_config(req))
        return sch.LocalizeResponse(
            width=mask.width, height=mask.height,
            blocks=[sch.BlockModel(**b.to_dict()) for b in blocks])

    @app.post("/score", response_model=sch.ScoreResponse)
    def score_route(req: sch.ScoreRequest):
        candidates = CandidateTexts.from_raw(req.t1, req.t2, req.t3)
        if req.embedder == "toy":
            embed = ToyEmbedder().embed
            cleanup = None
        elif req.embedder == "replay":
            if not req.embeddings:
                raise ValueError(
                    "replay embedder requires an embeddings map")
            store = {normalize(k): tuple(v)
                     for k, v in req.embeddings.items()}

            def embed(text: str):
                if text not in store:
                    raise FixtureError(
                        f"no recorded embedding for text {text!r}")
                return store[text]
            cleanup = None
        else:
            if not req.endpoint:
                raise ValueError("remote embedder requires an endpoint URL")
            backend = RemoteBackend(AdapterEndpoint(
                base_url=req.endpoint, timeout_ms=req.timeout_ms))
            embed = backend.embed
            cleanup = backend
        try:
            cfg = GateConfig(alpha=req.alpha, beta=req.beta, tau=req.tau,
                             token_best=req.token_best)
            breakdown = score(candidates, embed(candidates.t1),
                              embed(candidates.t2), embed(candidates.t3), cfg)
            decision = route(breakdown, cfg)
        finally:
            if cleanup is not None:
                _close(cleanup)
        return sch.ScoreResponse(
            breakdown=sch.BreakdownModel(**breakdown.to_dict()),
            decision=sch.DecisionModel(outcome=decision.outcome,
                                       final_text=decision.final_text))

    @app.post("/run", response_model=sch.RunResponse)
    def run_route(req: sch.RunRequest):
        manifest = load_manifest(req.manifest_path)
        backend = _make_backend(req)
        try:
            records = run_pipeline(
                manifest, _loc_config(req), _gate_config(req), backend,
                workers=req.workers, fallback_policy=req.fallback_policy,
                desc_length=req.desc_length)
        finally:
            _close(backend)
        report = compute_metrics(records)
        resolved = _resolved_config(req, "run", {"out_dir": req.out_dir})
        _write_reports(req.out_dir, resolved, [report], records)
        return sch.RunResponse(metrics=report.to_dict(), images=report.images,
                               failed_images=report.failed_images,
                               out_dir=req.out_dir, config=resolved)

    @app.post("/ablate", response_model=sch.AblateResponse)
    def ablate_route(req: sch.AblateRequest):
        manifest = load_manifest(req.manifest_path)
        backend = _make_backend(req)
        try:
            rows = ablate(manifest, _loc_config(req), backend,
                          [tuple(g) for g in req.grid], workers=req.workers,
                          fallback_policy=req.fallback_policy,
                          desc_length=req.desc_length)
        finally:
            _close(backend)
        resolved = _resolved_config(
            req, "ablate",
            {"grid": [list(g) for g in req.grid], "out_dir": req.out_dir})
        _write_reports(req.out_dir, resolved, rows)
        return sch.AblateResponse(rows=[r.to_dict() for r in rows],
                                  out_dir=req.out_dir, config=resolved)

    @app.post("/scenarios", response_model=sch.ScenariosResponse)
    def scenarios_route(req: sch.ScenariosRequest):
        manifest = load_manifest(req.manifest_path)
        backend = _make_backend(req)
        try:
            records = run_pipeline(
                manifest, _loc_config(req), _gate_config(req), backend,
                workers=req.workers, fallback_policy=req.fallback_policy,
                desc_length=req.desc_length, scenario=req.scenario,
                decoy=req.decoy)
        finally:
            _close(backend)
        report = replace(compute_metrics(records),
                         setting={"scenario": req.scenario})
        resolved = _resolved_config(
            req, "scenarios",
            {"scenario": req.scenario, "decoy": req.decoy,
             "out_dir": req.out_dir})
        _write_reports(req.out_dir, resolved, [report], records)
        return sch.ScenariosResponse(
            metrics=report.to_dict(), images=report.images,
            failed_images=report.failed_images, out_dir=req.out_dir,
            config=resolved)

    @app.post("/maskmetrics", response_model=sch.MaskMetricsResponse)
    def maskmetrics_route(req: sch.MaskMetricsRequest):
        pred = _decode_mask(req.pred_pgm_b64, req.threshold, "pred_pgm_b64")
        gt = _decode_mask(req.gt_pgm_b64, req.threshold, "gt_pgm_b64")
        return sch.MaskMetricsResponse(fg_iou=fg_iou(pred, gt),
                                       f1_foreground=f1_foreground(pred, gt))

    return app
