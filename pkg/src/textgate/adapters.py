"""Model-call adapters.

Three interchangeable backends sit behind the pipeline:

* ``ReplayBackend`` serves answers recorded in a manifest, for deterministic
  offline runs.  Anything the fixture cannot answer raises ``FixtureError``
  naming the missing piece instead of inventing a value.
* ``ToyEmbedder`` is a dependency-free text embedder used when no recorded
  embeddings exist.  It only promises that strings sharing character bigrams
  score higher than disjoint ones.
* ``RemoteBackend`` speaks the HTTP wire protocol to a live model server.
  Network and protocol failures surface as ``TransportError``.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import httpx

from .lexsem import normalize
from .localizer import TextBlock

# token-count bounds per caption length preset: (max_length, min_length)
DESC_LENGTH_BOUNDS: dict[str, tuple[int, int]] = {
    "short": (40, 20),
    "medium": (80, 40),
    "long": (120, 80),
}

_TOY_DIM = 64
_FNV_OFFSET = 0x811C9DC5
_FNV_PRIME = 0x01000193


class FixtureError(RuntimeError):
    """A replay fixture cannot answer the call it was asked to serve."""


class TransportError(RuntimeError):
    """A remote adapter call failed at the HTTP or protocol level."""


@dataclass(frozen=True)
class AdapterEndpoint:
    base_url: str
    timeout_ms: int = 30000
    description_length: str = "medium"

    def __post_init__(self):
        if not self.base_url:
            raise ValueError("base_url must be non-empty")
        if self.timeout_ms <= 0:
            raise ValueError(f"timeout_ms must be > 0, got {self.timeout_ms}")
        if self.description_length not in DESC_LENGTH_BOUNDS:
            raise ValueError(
                f"unknown description length {self.description_length!r}; "
                f"expected one of {sorted(DESC_LENGTH_BOUNDS)}")


def caption_length_warning(text: str, preset: str) -> str | None:
    """Return a warning string when the caption token count is out of bounds."""
    max_len, min_len = DESC_LENGTH_BOUNDS[preset]
    n = len(text.split())
    if min_len <= n <= max_len:
        return None
    return (f"caption is {n} tokens, outside [{min_len}, {max_len}] "
            f"for preset {preset!r}")


# --------------------------------------------------------------------------- #
# toy embedder

def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & 0xFFFFFFFF
    return h


class ToyEmbedder:
    """Hashed character-bigram embedding, unit-norm, 64 dims.

    Strings shorter than one bigram embed to the zero vector, which makes
    their cosine against anything 0.0.
    """

    dim = _TOY_DIM

    def embed(self, text: str, image_ref=None) -> tuple[float, ...]:
        counts = [0] * _TOY_DIM
        for i in range(len(text) - 1):
            bucket = _fnv1a(text[i:i + 2].encode("utf-8")) % _TOY_DIM
            counts[bucket] += 1
        norm = math.sqrt(sum(c * c for c in counts))
        if norm == 0.0:
            return (0.0,) * _TOY_DIM
        return tuple(c / norm for c in counts)

    def embedding_source(self, image_ref=None) -> str:
        return "toy"


# --------------------------------------------------------------------------- #
# replay

def _as_vector(values: Any, what: str) -> tuple[float, ...]:
    if not isinstance(values, Sequence) or isinstance(values, (str, bytes)):
        raise FixtureError(f"{what}: embedding must be a list of numbers")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) \
                or not math.isfinite(v):
            raise FixtureError(f"{what}: embedding must be a list of "
                               f"finite numbers, got {v!r}")
        out.append(float(v))
    if not out:
        raise FixtureError(f"{what}: embedding must be non-empty")
    return tuple(out)


@dataclass(frozen=True)
class ReplayBundle:
    """Recorded model answers for one image."""

    t1: str
    t2: str
    t3_by_rank: tuple[str, ...]
    fallback_text: str | None = None
    embeddings: Mapping[str, tuple[float, ...]] | None = None

    @classmethod
    def from_entry(cls, entry) -> "ReplayBundle":
        rec = entry.recorded
        if rec is None:
            raise FixtureError(
                f"image '{entry.image_id}' has no recorded bundle")
        embeddings = dict(rec.get("embeddings") or {})
        if entry.embeddings_path is not None:
            embeddings = _merge_sidecar(embeddings, entry.embeddings_path,
                                        entry.image_id)
        bundle = cls(
            t1=rec["t1"],
            t2=rec["t2"],
            t3_by_rank=tuple(rec["t3_by_rank"]),
            fallback_text=rec.get("fallback_text"),
            embeddings={k: _as_vector(v, f"image '{entry.image_id}', key {k}")
                        for k, v in embeddings.items()} or None,
        )
        bundle._check_embedding_keys(entry.image_id)
        return bundle

    def _check_embedding_keys(self, image_id: str):
        if self.embeddings is None:
            return
        for key in self.embeddings:
            if key in ("t1", "t2"):
                continue
            if key.startswith("t3@") and key[3:].isdigit():
                idx = int(key[3:])
                if idx < len(self.t3_by_rank):
                    continue
                raise FixtureError(
                    f"image '{image_id}': embedding key {key!r} refers to "
                    f"rank {idx} but only {len(self.t3_by_rank)} crop "
                    f"candidates are recorded")
            raise FixtureError(
                f"image '{image_id}': bad embedding key {key!r}")

    def text_for_key(self, key: str) -> str:
        if key == "t1":
            return self.t1
        if key == "t2":
            return self.t2
        return self.t3_by_rank[int(key[3:])]


def _merge_sidecar(embeddings: dict, path: Path, image_id: str) -> dict:
    try:
        loaded = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise FixtureError(
            f"image '{image_id}': cannot read embeddings file {path}: {exc}"
        ) from exc
    if not isinstance(loaded, dict):
        raise FixtureError(
            f"image '{image_id}': embeddings file {path} must hold an object")
    for key, vec in loaded.items():
        if key in embeddings and embeddings[key] != vec:
            raise FixtureError(
                f"image '{image_id}': embedding key {key!r} appears in both "
                f"the manifest and {path} with different values")
        embeddings[key] = vec
    return embeddings


class ReplayBackend:
    """Serves recorded answers; embeds with recorded vectors or the toy model.

    An image whose bundle declares embeddings is strict: every embed call
    scoped to it must hit a recorded vector.  Images without declared
    embeddings fall through to the toy embedder.
    """

    checks_caption_length = False

    def __init__(self, entries, toy: ToyEmbedder | None = None):
        self._toy = toy or ToyEmbedder()
        self._bundles: dict[str, ReplayBundle | None] = {}
        self._vectors: dict[str, tuple[float, ...]] = {}
        self._strict: set[str] = set()
        for entry in entries:
            bundle = (ReplayBundle.from_entry(entry)
                      if entry.recorded is not None else None)
            self._bundles[entry.image_id] = bundle
            if bundle is None or bundle.embeddings is None:
                continue
            self._strict.add(entry.image_id)
            for key, vec in bundle.embeddings.items():
                text = normalize(bundle.text_for_key(key))
                known = self._vectors.get(text)
                if known is not None and known != vec:
                    raise FixtureError(
                        f"conflicting recorded embeddings for text {text!r}")
                self._vectors[text] = vec

    def _bundle(self, image_ref) -> ReplayBundle:
        if image_ref.image_id not in self._bundles:
            raise FixtureError(f"no fixture for image '{image_ref.image_id}'")
        bundle = self._bundles[image_ref.image_id]
        if bundle is None:
            raise FixtureError(
                f"image '{image_ref.image_id}' has no recorded bundle")
        return bundle

    def recognize(self, image_ref, region=None) -> str:
        bundle = self._bundle(image_ref)
        if region is None:
            return bundle.t1
        if not isinstance(region, TextBlock) or region.rank < 0:
            raise FixtureError(
                f"image '{image_ref.image_id}': replay recognition on a crop "
                f"needs a ranked block, got {region!r}")
        if region.rank >= len(bundle.t3_by_rank):
            raise FixtureError(
                f"image '{image_ref.image_id}': no recorded text for crop "
                f"rank {region.rank} (have {len(bundle.t3_by_rank)})")
        return bundle.t3_by_rank[region.rank]

    def caption(self, image_ref, length: str | None = None) -> str:
        return self._bundle(image_ref).t2

    def embed(self, text: str, image_ref=None) -> tuple[float, ...]:
        key = normalize(text)
        if image_ref is not None and image_ref.image_id in self._strict:
            vec = self._vectors.get(key)
            if vec is None:
                raise FixtureError(
                    f"image '{image_ref.image_id}': no recorded embedding "
                    f"for text {text!r}")
            return vec
        return self._toy.embed(key)

    def embedding_source(self, image_ref=None) -> str:
        if image_ref is not None and image_ref.image_id in self._strict:
            return "replay"
        return "toy"

    def fallback_recognize(self, image_ref) -> list[str]:
        bundle = self._bundle(image_ref)
        if bundle.fallback_text is None:
            raise FixtureError(
                f"fixture incomplete: image '{image_ref.image_id}' was "
                f"routed to fallback but records no fallback_text")
        return [bundle.fallback_text]


# --------------------------------------------------------------------------- #
# remote

class RemoteBackend:
    """HTTP client for a live model server."""

    checks_caption_length = True

    def __init__(self, endpoint: AdapterEndpoint,
                 client: httpx.Client | None = None):
        self.endpoint = endpoint
        self._client = client or httpx.Client(
            base_url=endpoint.base_url,
            timeout=endpoint.timeout_ms / 1000.0)

    def close(self):
        self._client.close()

    # -- wire helpers --

    def _request(self, method: str, path: str, payload=None) -> dict:
        try:
            resp = self._client.request(method, path, json=payload)
        except httpx.HTTPError as exc:
            raise TransportError(f"{method} {path} failed: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(
                f"{method} {path} returned HTTP {resp.status_code}")
        try:
            body = resp.json()
        except ValueError as exc:
            raise TransportError(
                f"{method} {path} returned a non-JSON body") from exc
        if not isinstance(body, dict):
            raise TransportError(f"{method} {path} returned a non-object body")
        return body

    @staticmethod
    def _text_field(body: dict, path: str) -> str:
        text = body.get("text")
        if not isinstance(text, str):
            raise TransportError(f"malformed response from {path}: "
                                 f"missing string field 'text'")
        return text

    @staticmethod
    def _image_payload(image_ref) -> dict:
        payload: dict[str, Any] = {"image_id": image_ref.image_id}
        if image_ref.path is not None:
            try:
                raw = Path(image_ref.path).read_bytes()
            except OSError as exc:
                raise TransportError(
                    f"cannot read image file {image_ref.path}: {exc}") from exc
            payload["image_b64"] = base64.b64encode(raw).decode("ascii")
        return payload

    # -- adapter calls --

    def recognize(self, image_ref, region=None) -> str:
        payload = self._image_payload(image_ref)
        if region is not None:
            bbox = region.bbox if isinstance(region, TextBlock) else region
            payload["bbox"] = bbox.to_dict()
        return self._text_field(self._request("POST", "/recognize", payload),
                                "/recognize")

    def caption(self, image_ref, length: str | None = None) -> str:
        preset = length or self.endpoint.description_length
        if preset not in DESC_LENGTH_BOUNDS:
            raise ValueError(f"unknown description length {preset!r}")
        max_len, min_len = DESC_LENGTH_BOUNDS[preset]
        payload = self._image_payload(image_ref)
        payload["max_length"] = max_len
        payload["min_length"] = min_len
        return self._text_field(self._request("POST", "/caption", payload),
                                "/caption")

    def embed(self, text: str, image_ref=None) -> tuple[float, ...]:
        body = self._request("POST", "/embed", {"text": text})
        vector = body.get("vector")
        try:
            return _as_vector(vector, "/embed response")
        except FixtureError as exc:
            raise TransportError(str(exc)) from exc

    def embedding_source(self, image_ref=None) -> str:
        return "remote"

    def fallback_recognize(self, image_ref) -> list[str]:
        body = self._request("POST", "/fallback",
                             self._image_payload(image_ref))
        texts = body.get("texts")
        if not isinstance(texts, list) or \
                any(not isinstance(t, str) for t in texts):
            raise TransportError("malformed response from /fallback: "
                                 "missing list field 'texts'")
        return texts

    def info(self) -> dict:
        body = self._request("GET", "/info")
        if not isinstance(body.get("dim"), int) or \
                not isinstance(body.get("model_name"), str):
            raise TransportError("malformed response from /info")
        return {"dim": body["dim"], "model_name": body["model_name"]}
