"""Confidence gating: score candidate texts against the scene description,
select the stronger candidate, and route to confident emit or fallback.

Scoring combines a semantic channel (cosine over embeddings against the
description) and a lexical channel (fuzz ratio against the description),
weighted alpha/beta. The candidate with the higher semantic score wins the
selection; the boundary confidence == tau routes as confident.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from .lexsem import Embedding, cosine_similarity, fuzz_ratio, normalize, token_best_ratio

__all__ = [
    "CandidateTexts",
    "GateConfig",
    "ScoreBreakdown",
    "RoutingDecision",
    "score",
    "route",
]

_WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CandidateTexts:
    """The three normalized texts: full-image (t1), description (t2), crop (t3).

    Empty strings are legal values, not absences. Construction assumes the
    values are already normalized; use from_raw for raw model output.
    """

    t1: str
    t2: str
    t3: str

    @classmethod
    def from_raw(cls, t1: str, t2: str, t3: str) -> "CandidateTexts":
        return cls(t1=normalize(t1), t2=normalize(t2), t3=normalize(t3))


@dataclass(frozen=True)
class GateConfig:
    alpha: float = 0.6
    beta: float = 0.4
    tau: float = 0.8
    token_best: bool = False

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError(f"weights must be non-negative: alpha={self.alpha}, beta={self.beta}")
        if abs(self.alpha + self.beta - 1.0) > _WEIGHT_TOLERANCE:
            raise ValueError(f"alpha + beta must equal 1, got {self.alpha + self.beta}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")


@dataclass(frozen=True)
class ScoreBreakdown:
    s1: float
    s3: float
    l1: float
    l3: float
    selected: Literal["t1", "t3"]
    s_selected: float
    l_selected: float
    confidence: float
    selected_text: str

    def to_dict(self) -> dict:
        return {
            "s1": self.s1, "s3": self.s3, "l1": self.l1, "l3": self.l3,
            "selected": self.selected,
            "s_selected": self.s_selected, "l_selected": self.l_selected,
            "confidence": self.confidence, "selected_text": self.selected_text,
        }


@dataclass(frozen=True)
class RoutingDecision:
    outcome: Literal["confident", "fallback"]
    final_text: str | None
    breakdown: ScoreBreakdown

    @property
    def confident(self) -> bool:
        return self.outcome == "confident"

    def to_dict(self) -> dict:
        return {"outcome": self.outcome, "final_text": self.final_text,
                "breakdown": self.breakdown.to_dict()}


def score(c: CandidateTexts, e1: Embedding, e2: Embedding, e3: Embedding,
          cfg: GateConfig) -> ScoreBreakdown:
    """Compute both channels for both candidates and combine.

    Args:
        c: normalized candidate texts.
        e1, e2, e3: embeddings of t1, t2, t3 (same dimension).
        cfg: weights and threshold.
    """
    s1 = cosine_similarity(e1, e2)
    s3 = cosine_similarity(e3, e2)
    ratio = token_best_ratio if cfg.token_best else fuzz_ratio
    l1 = ratio(c.t1, c.t2)
    l3 = ratio(c.t3, c.t2)
    if s1 > s3:  # strict: ties go to the crop candidate
        selected, s_sel, l_sel, text = "t1", s1, l1, c.t1
    else:
        selected, s_sel, l_sel, text = "t3", s3, l3, c.t3
    return ScoreBreakdown(
        s1=s1, s3=s3, l1=l1, l3=l3,
        selected=selected, s_selected=s_sel, l_selected=l_sel,
        confidence=cfg.alpha * s_sel + cfg.beta * l_sel,
        selected_text=text,
    )


def route(b: ScoreBreakdown, cfg: GateConfig) -> RoutingDecision:
    """Threshold the confidence; meeting tau exactly counts as confident."""
    if b.confidence >= cfg.tau:
        return RoutingDecision(outcome="confident", final_text=b.selected_text,
                               breakdown=b)
    return RoutingDecision(outcome="fallback", final_text=None, breakdown=b)
