"""Mask and manifest I/O.

Masks are 8-bit grayscale PGM files (P2 accepted on read, P5 on read and
write), binarized at a configurable threshold. Datasets are described by a
UTF-8 JSONL manifest, one image record per line. Everything here is immutable
after construction and safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

__all__ = [
    "BinaryMask",
    "SourceImageRef",
    "ManifestEntry",
    "MaskFormatError",
    "UnsupportedMaskFormat",
    "TruncatedMask",
    "ManifestError",
    "parse_mask",
    "read_mask",
    "write_mask",
    "load_manifest",
]


class MaskFormatError(ValueError):
    """Raised for malformed mask files; message names the byte offset."""


class UnsupportedMaskFormat(MaskFormatError):
    """Well-formed but outside the supported subset (e.g. maxval != 255)."""


class TruncatedMask(MaskFormatError):
    """Header promised more payload than the file contains."""


class ManifestError(ValueError):
    """Raised for malformed manifests; message carries the line number."""


_WHITESPACE = b" \t\r\n\x0b\x0c"
_DIGITS = b"0123456789"


@dataclass(frozen=True)
class BinaryMask:
    """Row-major binary raster. data holds one byte per pixel, each 0 or 1."""

    width: int
    height: int
    data: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(
                f"mask dimensions must be positive, got {self.width}x{self.height}"
            )
        if len(self.data) != self.width * self.height:
            raise ValueError(
                f"mask data length {len(self.data)} != "
                f"{self.width}x{self.height} = {self.width * self.height}"
            )
        if set(self.data) - {0, 1}:
            raise ValueError("mask data must contain only 0 and 1")

    def foreground_count(self) -> int:
        return sum(self.data)


@dataclass(frozen=True)
class SourceImageRef:
    """Reference to a source image; pixel payloads never enter this package."""

    image_id: str
    path: str | None = None
    width: int | None = None
    height: int | None = None


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    mask_path: Path
    ground_truth: tuple[str, ...]
    recorded: Mapping[str, Any] | None = None
    embeddings_path: Path | None = None


# --------------------------------------------------------------------------- #
# PGM reading

def _skip_separators(raw: bytes, pos: int) -> int:
    # whitespace and '#' comments are interchangeable separators in the header
    n = len(raw)
    while pos < n:
        b = raw[pos]
        if b in _WHITESPACE:
            pos += 1
        elif b == 0x23:  # '#'
            while pos < n and raw[pos] != 0x0A:
                pos += 1
        else:
            break
    return pos


def _read_int(raw: bytes, pos: int, what: str, source: str) -> tuple[int, int, int]:
    pos = _skip_separators(raw, pos)
    start = pos
    while pos < len(raw) and raw[pos] in _DIGITS:
        pos += 1
    if pos == start:
        raise MaskFormatError(
            f"{source}: expected {what} at byte offset {start}"
        )
    return int(raw[start:pos]), pos, start


def parse_mask(raw: bytes, threshold: int = 128,
               source: str = "<bytes>") -> BinaryMask:
    """Parse P2/P5 PGM bytes and binarize: pixel >= threshold maps to 1.

    Args:
        raw: the complete file content.
        threshold: integer in [0, 255]; default 128.
        source: label used in error messages.
    """
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {threshold}")

    magic = raw[:2]
    if magic not in (b"P2", b"P5"):
        raise MaskFormatError(
            f"{source}: not a P2/P5 PGM (magic {magic!r} at byte offset 0)"
        )
    width, pos, at = _read_int(raw, 2, "width", source)
    if width < 1:
        raise MaskFormatError(f"{source}: invalid width {width} at byte offset {at}")
    height, pos, at = _read_int(raw, pos, "height", source)
    if height < 1:
        raise MaskFormatError(f"{source}: invalid height {height} at byte offset {at}")
    maxval, pos, at = _read_int(raw, pos, "maxval", source)
    if maxval != 255:
        raise UnsupportedMaskFormat(
            f"{source}: maxval {maxval} unsupported, only 8-bit (255) masks are accepted"
        )

    count = width * height
    table = bytes(1 if v >= threshold else 0 for v in range(256))

    if magic == b"P5":
        if pos >= len(raw) or raw[pos] not in _WHITESPACE:
            raise MaskFormatError(
                f"{source}: expected single separator byte after maxval at offset {pos}"
            )
        pos += 1
        payload = raw[pos:pos + count]
        if len(payload) < count:
            raise TruncatedMask(
                f"{source}: payload truncated at byte offset {pos}: "
                f"expected {count} bytes, found {len(payload)}"
            )
        return BinaryMask(width, height, payload.translate(table))

    # P2: ASCII pixel values
    values = bytearray(count)
    for i in range(count):
        probe = _skip_separators(raw, pos)
        if probe >= len(raw):
            raise TruncatedMask(
                f"{source}: payload truncated at byte offset {probe}: "
                f"expected {count} pixel values, found {i}"
            )
        value, pos, at = _read_int(raw, pos, f"pixel value {i}", source)
        if value > maxval:
            raise MaskFormatError(
                f"{source}: pixel value {value} exceeds maxval at byte offset {at}"
            )
        values[i] = table[value]
    return BinaryMask(width, height, bytes(values))


def read_mask(path: str | Path, threshold: int = 128) -> BinaryMask:
    """Read a P2/P5 PGM file and binarize it; see parse_mask."""
    path = Path(path)
    return parse_mask(path.read_bytes(), threshold, source=str(path))


def write_mask(mask: BinaryMask, path: str | Path) -> None:
    """Write a P5 PGM with maxval 255: foreground 255, background 0."""
    path = Path(path)
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    table = bytes(255 if v == 1 else 0 for v in range(256))
    path.write_bytes(header + mask.data.translate(table))


# --------------------------------------------------------------------------- #
# manifest

_EMBED_KEY_NOTE = "embeddings keys must be 't1', 't2', or 't3@<rank>'"


def _fail(path: Path, lineno: int, msg: str) -> ManifestError:
    return ManifestError(f"{path}: line {lineno}: {msg}")


def _check_str(obj: Mapping[str, Any], key: str, path: Path, lineno: int) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        raise _fail(path, lineno, f"missing or non-string field '{key}'")
    return value


def _validate_recorded(rec: Any, path: Path, lineno: int) -> Mapping[str, Any]:
    if not isinstance(rec, dict):
        raise _fail(path, lineno, "'recorded' must be an object")
    _check_str(rec, "t1", path, lineno)
    _check_str(rec, "t2", path, lineno)
    t3 = rec.get("t3_by_rank")
    if not isinstance(t3, list) or not all(isinstance(t, str) for t in t3):
        raise _fail(path, lineno, "'recorded.t3_by_rank' must be a list of strings")
    fb = rec.get("fallback_text")
    if fb is not None and not isinstance(fb, str):
        raise _fail(path, lineno, "'recorded.fallback_text' must be a string")
    emb = rec.get("embeddings")
    if emb is not None:
        if not isinstance(emb, dict):
            raise _fail(path, lineno, "'recorded.embeddings' must be an object")
        for key, vec in emb.items():
            if not _valid_embed_key(key):
                raise _fail(path, lineno, f"bad embeddings key {key!r}; {_EMBED_KEY_NOTE}")
            if not isinstance(vec, list) or not vec or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in vec
            ):
                raise _fail(path, lineno, f"embeddings[{key!r}] must be a non-empty number list")
    return rec


def _valid_embed_key(key: Any) -> bool:
    if not isinstance(key, str):
        return False
    if key in ("t1", "t2"):
        return True
    return key.startswith("t3@") and key[3:].isdigit()


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    """Parse a JSONL manifest. Paths inside resolve relative to the manifest.

    Every line either yields an entry or raises a located error; blank lines
    are errors, not skips. Duplicate image_id is rejected naming the id.
    """
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            raise _fail(path, lineno, "blank line (one record per line, no gaps)")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise _fail(path, lineno, f"invalid record: {exc}") from exc
        if not isinstance(obj, dict):
            raise _fail(path, lineno, "record must be an object")

        image_id = _check_str(obj, "image_id", path, lineno)
        mask_path = _check_str(obj, "mask_path", path, lineno)
        gt = obj.get("ground_truth")
        if not isinstance(gt, list) or not all(isinstance(g, str) for g in gt):
            raise _fail(path, lineno, "missing or non-string-list field 'ground_truth'")
        if image_id in seen:
            raise _fail(path, lineno, f"duplicate image_id '{image_id}'")
        seen.add(image_id)

        recorded = obj.get("recorded")
        if recorded is not None:
            recorded = _validate_recorded(recorded, path, lineno)
        emb_path = obj.get("embeddings_path")
        if emb_path is not None and not isinstance(emb_path, str):
            raise _fail(path, lineno, "'embeddings_path' must be a string")

        entries.append(ManifestEntry(
            image_id=image_id,
            mask_path=base / mask_path,
            ground_truth=tuple(gt),
            recorded=recorded,
            embeddings_path=(base / emb_path) if emb_path else None,
        ))
    return entries
