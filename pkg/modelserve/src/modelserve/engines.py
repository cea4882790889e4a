"""Inference engines: the deterministic echo family plus the loading registry.

Echo engines fabricate stable outputs from request fields alone, so the full
protocol can run in CI with no checkpoints and no GPU.  Real model bindings
plug into the same registry; a name the registry cannot satisfy refuses to
load with a role-specific message instead of starting a broken server.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

from modelserve.config import ROLES, ServerConfig


class RoleLoadError(RuntimeError):
    """A role's model could not be loaded at startup."""

    def __init__(self, role: str, model: str, reason: str):
        super().__init__(f"cannot load {role} model {model!r}: {reason}")
        self.role = role
        self.model = model


def _stable(seed: str) -> int:
    # process-independent, unlike hash()
    return zlib.crc32(seed.encode("utf-8"))


_WORDS = ("open", "exit", "sale", "menu", "stop", "fresh", "corner", "daily")

_CAPTION_FILLER = (
    "a", "storefront", "scene", "with", "painted", "lettering", "near",
    "the", "window", "and", "a", "metal", "awning", "over", "the", "door",
    "in", "soft", "morning", "light",
)


class EchoRecognizer:
    model_name = "echo"

    def recognize(self, image_id: str, bbox: tuple[int, int, int, int] | None = None) -> str:
        seed = image_id if bbox is None else f"{image_id}:{bbox}"
        return _WORDS[_stable(seed) % len(_WORDS)]


class EchoCaptioner:
    model_name = "echo"

    def caption(self, image_id: str, max_length: int, min_length: int) -> str:
        span = max_length - min_length
        count = min_length + _stable("cap:" + image_id) % (span + 1)
        return " ".join(_CAPTION_FILLER[i % len(_CAPTION_FILLER)]
                        for i in range(count))


class EchoEmbedder:
    """Character-trigram counts hashed into a fixed-width unit vector."""

    model_name = "echo"
    dim = 32

    def embed(self, text: str) -> list[float]:
        padded = f" {text} "
        counts = [0] * self.dim
        for i in range(len(padded) - 2):
            counts[_stable(padded[i:i + 3]) % self.dim] += 1
        norm = math.sqrt(sum(c * c for c in counts))
        if norm == 0.0:
            return [0.0] * self.dim
        return [c / norm for c in counts]


class EchoFallback:
    model_name = "echo"

    def recognize_all(self, image_id: str) -> list[str]:
        h = _stable("fb:" + image_id)
        count = 1 + h % 3
        return [_WORDS[(h + 7 * k) % len(_WORDS)] for k in range(count)]


_FACTORIES = {
    "recognizer": {"echo": EchoRecognizer},
    "captioner": {"echo": EchoCaptioner},
    "embedder": {"echo": EchoEmbedder},
    "fallback": {"echo": EchoFallback},
}


@dataclass(frozen=True)
class Engines:
    recognizer: EchoRecognizer
    captioner: EchoCaptioner
    embedder: EchoEmbedder
    fallback: EchoFallback


def build_engines(cfg: ServerConfig) -> Engines:
    """Instantiate one engine per role, or refuse with the failing role named."""
    built = {}
    for role in ROLES:
        name = getattr(cfg, role)
        factory = _FACTORIES[role].get(name)
        if factory is None:
            known = ", ".join(sorted(_FACTORIES[role]))
            raise RoleLoadError(role, name,
                                f"unknown model name; this build ships: {known}")
        try:
            built[role] = factory()
        except Exception as exc:  # checkpoint/download failures land here
            raise RoleLoadError(role, name, str(exc)) from exc
    return Engines(**built)
