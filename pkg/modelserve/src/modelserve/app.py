"""FastAPI app exposing the remote recognition protocol.

Wire contract (mirrors the textgate adapters module):

    POST /recognize  {image_id, image_b64?, bbox?} -> {text}
    POST /caption    {image_id, image_b64?, max_length, min_length} -> {text}
    POST /embed      {text} -> {vector}
    POST /fallback   {image_id, image_b64?} -> {texts}
    GET  /info       -> {dim, model_name}

Requests may arrive concurrently; a per-role lock serializes inference so
each model effectively runs batch size 1.
"""

from __future__ import annotations

import base64
import binascii
import threading

import uvicorn
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from modelserve.config import ROLES, ServerConfig
from modelserve.engines import Engines, build_engines


class _Request(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BBoxModel(_Request):
    x_min: int = Field(ge=0)
    y_min: int = Field(ge=0)
    x_max: int = Field(ge=0)
    y_max: int = Field(ge=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise ValueError("bbox max corner must not precede min corner")
        return self

    def corners(self) -> tuple[int, int, int, int]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


class _ImageRequest(_Request):
    image_id: str = Field(min_length=1)
    image_b64: str | None = None

    @field_validator("image_b64")
    @classmethod
    def _decodable(cls, value):
        if value is None:
            return value
        try:
            base64.b64decode(value, validate=True)
        except binascii.Error as exc:
            raise ValueError(f"image_b64 is not valid base64: {exc}") from exc
        return value


class RecognizeRequest(_ImageRequest):
    bbox: BBoxModel | None = None


class CaptionRequest(_ImageRequest):
    # absent bounds fall back to the server's configured preset
    max_length: int | None = Field(default=None, ge=1)
    min_length: int | None = Field(default=None, ge=0)


class EmbedRequest(_Request):
    text: str


class FallbackRequest(_ImageRequest):
    pass


def create_app(cfg: ServerConfig | None = None,
               engines: Engines | None = None) -> FastAPI:
    cfg = cfg or ServerConfig()
    engines = engines or build_engines(cfg)
    locks = {role: threading.Lock() for role in ROLES}

    app = FastAPI(title="modelserve")

    def run(role: str, fn, *args):
        with locks[role]:  # batch size 1 per model
            try:
                return fn(*args)
            except Exception as exc:
                raise HTTPException(status_code=500, detail={
                    "kind": "model", "role": role, "message": str(exc),
                }) from exc

    @app.get("/info")
    def info():
        return {"dim": engines.embedder.dim,
                "model_name": engines.embedder.model_name}

    @app.post("/recognize")
    def recognize(req: RecognizeRequest):
        bbox = req.bbox.corners() if req.bbox is not None else None
        return {"text": run("recognizer", engines.recognizer.recognize,
                            req.image_id, bbox)}

    @app.post("/caption")
    def caption(req: CaptionRequest):
        default_max, default_min = cfg.caption_bounds()
        max_length = req.max_length if req.max_length is not None else default_max
        min_length = req.min_length if req.min_length is not None else default_min
        if min_length > max_length:
            raise HTTPException(status_code=422, detail={
                "kind": "validation",
                "message": f"min_length {min_length} exceeds "
                           f"max_length {max_length}",
            })
        return {"text": run("captioner", engines.captioner.caption,
                            req.image_id, max_length, min_length)}

    @app.post("/embed")
    def embed(req: EmbedRequest):
        return {"vector": run("embedder", engines.embedder.embed, req.text)}

    @app.post("/fallback")
    def fallback(req: FallbackRequest):
        return {"texts": run("fallback", engines.fallback.recognize_all,
                             req.image_id)}

    return app


def serve(cfg: ServerConfig, host: str = "127.0.0.1") -> None:
    """Build engines (refusing to start on a load failure) and run forever."""
    app = create_app(cfg)
    uvicorn.run(app, host=host, port=cfg.port)
