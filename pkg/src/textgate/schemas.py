"""Request/response models for the HTTP service.

Requests forbid unknown fields so a typo fails loudly (422) instead of being
silently ignored; numeric ranges are enforced by the core config types after
parsing, which keeps validation in one place.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from .harness import DEFAULT_DECOY

Backend = Literal["replay", "remote"]
Embedder = Literal["toy", "replay", "remote"]
DescLength = Literal["short", "medium", "long"]
FallbackPolicy = Literal["any", "all", "majority"]
Scenario = Literal["none", "wrong", "correct"]


class _Request(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LocalizeRequest(_Request):
    mask_pgm_b64: str
    padding: int = 5
    min_area: int = 100
    max_blocks: int = 10
    connectivity: int = 8
    threshold: int = 128


class BlockModel(BaseModel):
    rank: int
    x_min: int
    y_min: int
    x_max: int
    y_max: int
    area: int
    label: int


class LocalizeResponse(BaseModel):
    width: int
    height: int
    blocks: list[BlockModel]


class ScoreRequest(_Request):
    t1: str
    t2: str
    t3: str
    alpha: float = 0.6
    beta: float = 0.4
    tau: float = 0.8
    token_best: bool = False
    embedder: Embedder = "toy"
    # replay embedder: raw text -> vector, looked up after normalization
    embeddings: dict[str, list[float]] | None = None
    endpoint: str | None = None
    timeout_ms: int = 30000


class BreakdownModel(BaseModel):
    s1: float
    s3: float
    l1: float
    l3: float
    selected: Literal["t1", "t3"]
    s_selected: float
    l_selected: float
    confidence: float
    selected_text: str


class DecisionModel(BaseModel):
    outcome: Literal["confident", "fallback"]
    final_text: str | None


class ScoreResponse(BaseModel):
    breakdown: BreakdownModel
    decision: DecisionModel


class RunRequest(_Request):
    manifest_path: str
    out_dir: str | None = None
    backend: Backend = "replay"
    endpoint: str | None = None
    timeout_ms: int = 30000
    alpha: float = 0.6
    beta: float = 0.4
    tau: float = 0.8
    token_best: bool = False
    padding: int = 5
    min_area: int = 100
    max_blocks: int = 10
    connectivity: int = 8
    workers: int = 1
    fallback_policy: FallbackPolicy = "any"
    desc_length: DescLength = "medium"


class RunResponse(BaseModel):
    metrics: dict
    images: int
    failed_images: int
    out_dir: str | None
    config: dict


class AblateRequest(_Request):
    manifest_path: str
    grid: list[tuple[float, float, float]] = Field(min_length=1)
    out_dir: str | None = None
    backend: Backend = "replay"
    endpoint: str | None = None
    timeout_ms: int = 30000
    padding: int = 5
    min_area: int = 100
    max_blocks: int = 10
    connectivity: int = 8
    workers: int = 1
    fallback_policy: FallbackPolicy = "any"
    desc_length: DescLength = "medium"


class AblateResponse(BaseModel):
    rows: list[dict]
    out_dir: str | None
    config: dict


class ScenariosRequest(_Request):
    manifest_path: str
    scenario: Scenario
    out_dir: str | None = None
    backend: Backend = "replay"
    endpoint: str | None = None
    timeout_ms: int = 30000
    alpha: float = 0.6
    beta: float = 0.4
    tau: float = 0.8
    token_best: bool = False
    padding: int = 5
    min_area: int = 100
    max_blocks: int = 10
    connectivity: int = 8
    workers: int = 1
    fallback_policy: FallbackPolicy = "any"
    desc_length: DescLength = "medium"
    decoy: str = DEFAULT_DECOY


class ScenariosResponse(BaseModel):
    metrics: dict
    images: int
    failed_images: int
    out_dir: str | None
    config: dict


class MaskMetricsRequest(_Request):
    pred_pgm_b64: str
    gt_pgm_b64: str
    threshold: int = 128


class MaskMetricsResponse(BaseModel):
    fg_iou: float
    f1_foreground: float
