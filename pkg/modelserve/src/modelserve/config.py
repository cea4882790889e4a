"""Server configuration: one model choice per role plus runtime knobs."""

from __future__ import annotations

from dataclasses import dataclass

ROLES = ("recognizer", "captioner", "embedder", "fallback")

# preset -> (max_length, min_length) in whitespace tokens
DESC_PRESETS = {
    "short": (40, 20),
    "medium": (80, 40),
    "long": (120, 80),
}


@dataclass(frozen=True)
class ServerConfig:
    recognizer: str = "echo"
    captioner: str = "echo"
    embedder: str = "echo"
    fallback: str = "echo"
    device: str = "cpu"
    port: int = 8093
    description_length: str = "medium"

    def __post_init__(self):
        for role in ROLES:
            if not getattr(self, role):
                raise ValueError(f"{role} model name must be non-empty")
        if not self.device:
            raise ValueError("device must be non-empty")
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port must be in [1, 65535], got {self.port}")
        if self.description_length not in DESC_PRESETS:
            raise ValueError(
                f"unknown description length {self.description_length!r}; "
                f"choose from {sorted(DESC_PRESETS)}")

    def caption_bounds(self) -> tuple[int, int]:
        """(max_length, min_length) for the configured preset."""
        return DESC_PRESETS[self.description_length]
