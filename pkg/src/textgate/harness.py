"""Batch evaluation over a manifest.

The run is split into two phases so parameter sweeps stay cheap:

* gather: localize blocks and collect every candidate text and embedding for
  an image.  This part never depends on gate weights.
* finish: score, route, and (lazily) invoke the fallback recognizer under one
  gate setting.

``ablate`` gathers once and finishes per grid row; ``run_pipeline`` is the
single-setting composition.  Records are emitted in manifest order no matter
how many workers ran the gather phase, and report writers sort JSON keys, so
reruns are byte-identical.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from .adapters import FixtureError, ToyEmbedder, TransportError, caption_length_warning
from .gate import CandidateTexts, GateConfig, RoutingDecision, ScoreBreakdown, route, score
from .lexsem import normalize
from .localizer import LocalizerConfig, TextBlock, localize
from .maskio import BinaryMask, ManifestEntry, SourceImageRef, read_mask

__all__ = [
    "DEFAULT_DECOY",
    "EvalRecord",
    "MetricsReport",
    "run_pipeline",
    "compute_metrics",
    "ablate",
    "context_scenarios",
    "fg_iou",
    "f1_foreground",
    "write_trace",
    "write_metrics",
]

# the pinned stand-in description for the `wrong` context scenario; already in
# normalized form and chosen to share no vocabulary with any text fixture
DEFAULT_DECOY = "a painting of flowers in a quiet meadow"

SCENARIOS = ("none", "wrong", "correct")
FALLBACK_POLICIES = ("any", "all", "majority")

_ADAPTER_ERRORS = (FixtureError, TransportError)


@dataclass(frozen=True)
class EvalRecord:
    """One replayable pipeline trace for one image."""

    image_id: str
    blocks: tuple[TextBlock, ...]
    candidates: tuple[CandidateTexts, ...]
    breakdowns: tuple[ScoreBreakdown, ...]
    decisions: tuple[RoutingDecision, ...]
    final_texts: tuple[str, ...]
    ground_truth: tuple[str, ...]
    adapter_calls: Mapping[str, int]
    embedding_source: str
    fallback_texts: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()
    error: str | None = None

    def __post_init__(self):
        if not (len(self.candidates) == len(self.breakdowns)
                == len(self.decisions)):
            raise ValueError("candidates, breakdowns and decisions must be "
                             "parallel per scored block")
        if self.adapter_calls.get("fallback", 0) not in (0, 1):
            raise ValueError("fallback is invoked at most once per image")

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "blocks": [b.to_dict() for b in self.blocks],
            "candidates": [{"t1": c.t1, "t2": c.t2, "t3": c.t3}
                           for c in self.candidates],
            "breakdowns": [b.to_dict() for b in self.breakdowns],
            "decisions": [d.to_dict() for d in self.decisions],
            "final_texts": list(self.final_texts),
            "ground_truth": list(self.ground_truth),
            "adapter_calls": dict(self.adapter_calls),
            "embedding_source": self.embedding_source,
            "fallback_texts": list(self.fallback_texts),
            "warnings": list(self.warnings),
            "error": self.error,
        }


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    cbr: int
    fallbacks: int
    false_positives: int
    images: int
    failed_images: int
    matched: int
    total_ground_truth: int
    setting: Mapping[str, Any] | None = None

    def to_dict(self) -> dict:
        row = {
            "accuracy": self.accuracy,
            "cbr": self.cbr,
            "fallbacks": self.fallbacks,
            "false_positives": self.false_positives,
            "images": self.images,
            "failed_images": self.failed_images,
            "matched": self.matched,
            "total_ground_truth": self.total_ground_truth,
        }
        if self.setting:
            row.update(self.setting)
        return row


# --------------------------------------------------------------------------- #
# gather phase

@dataclass
class _Gathered:
    """Gate-independent image state; everything finish() needs."""

    entry: ManifestEntry
    ref: SourceImageRef | None = None
    blocks: tuple[TextBlock, ...] = ()
    candidates: tuple[CandidateTexts, ...] = ()
    e1: tuple[float, ...] = ()
    e2: tuple[float, ...] = ()
    e3s: tuple[tuple[float, ...], ...] = ()
    calls: dict = field(default_factory=lambda: {
        "recognize": 0, "caption": 0, "embed": 0, "fallback": 0})
    warnings: tuple[str, ...] = ()
    embedding_source: str = "toy"
    error: str | None = None


def _gather_image(entry: ManifestEntry, loc_cfg: LocalizerConfig, backend,
                  desc_length: str, scenario: str, decoy: str) -> _Gathered:
    g = _Gathered(entry=entry)
    try:
        mask = read_mask(entry.mask_path)
        g.blocks = tuple(localize(mask, loc_cfg))
        if not g.blocks:
            return g
        ref = SourceImageRef(entry.image_id, width=mask.width,
                             height=mask.height)
        g.ref = ref

        t1 = backend.recognize(ref)
        g.calls["recognize"] += 1
        warnings = []
        if scenario == "correct":
            t2 = backend.caption(ref, desc_length)
            g.calls["caption"] += 1
            if getattr(backend, "checks_caption_length", False):
                warning = caption_length_warning(t2, desc_length)
                if warning:
                    warnings.append(warning)
        else:
            # the scenario overrides the description; the captioner is
            # never consulted
            t2 = "" if scenario == "none" else decoy

        t3s = []
        for block in g.blocks:
            t3s.append(backend.recognize(ref, block))
            g.calls["recognize"] += 1
        g.candidates = tuple(CandidateTexts.from_raw(t1, t2, t3)
                             for t3 in t3s)

        if scenario == "correct":
            def embed(text: str) -> tuple[float, ...]:
                g.calls["embed"] += 1
                return tuple(backend.embed(text, ref))
            g.embedding_source = backend.embedding_source(ref)
        else:
            # rewritten descriptions have no recorded vectors, so both
            # channels must come from the same local embedding space
            toy = ToyEmbedder()
            embed = toy.embed
            g.embedding_source = "toy"

        first = g.candidates[0]
        g.e1 = embed(first.t1)
        g.e2 = embed(first.t2)
        g.e3s = tuple(embed(c.t3) for c in g.candidates)
        g.warnings = tuple(warnings)
    except (RuntimeError, ValueError, OSError) as exc:
        g.error = f"{type(exc).__name__}: {exc}"
    return g


def _image_falls_back(decisions: Sequence[RoutingDecision],
                      policy: str) -> bool:
    doubters = sum(1 for d in decisions if not d.confident)
    if policy == "any":
        return doubters >= 1
    if policy == "all":
        return doubters == len(decisions)
    return 2 * doubters > len(decisions)


def _finish_image(g: _Gathered, gate_cfg: GateConfig, policy: str,
                  fallback_fn: Callable) -> EvalRecord:
    calls = dict(g.calls)
    if g.error is not None:
        return EvalRecord(
            image_id=g.entry.image_id, blocks=g.blocks, candidates=(),
            breakdowns=(), decisions=(), final_texts=(),
            ground_truth=g.entry.ground_truth, adapter_calls=calls,
            embedding_source=g.embedding_source, error=g.error)

    breakdowns = tuple(score(c, g.e1, g.e2, e3, gate_cfg)
                       for c, e3 in zip(g.candidates, g.e3s))
    decisions = tuple(route(b, gate_cfg) for b in breakdowns)
    confident = tuple(d.final_text for d in decisions if d.confident)

    fallback_texts: tuple[str, ...] = ()
    error = None
    if decisions and _image_falls_back(decisions, policy):
        try:
            fallback_texts = tuple(fallback_fn(g.ref))
            calls["fallback"] = 1
        except _ADAPTER_ERRORS as exc:
            error = f"{type(exc).__name__}: {exc}"

    return EvalRecord(
        image_id=g.entry.image_id,
        blocks=g.blocks,
        candidates=g.candidates,
        breakdowns=breakdowns,
        decisions=decisions,
        final_texts=confident + fallback_texts,
        ground_truth=g.entry.ground_truth,
        adapter_calls=calls,
        embedding_source=g.embedding_source,
        fallback_texts=fallback_texts,
        warnings=g.warnings,
        error=error,
    )


def _check_run_args(scenario: str, fallback_policy: str, workers: int):
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; "
                         f"expected one of {SCENARIOS}")
    if fallback_policy not in FALLBACK_POLICIES:
        raise ValueError(f"unknown fallback policy {fallback_policy!r}; "
                         f"expected one of {FALLBACK_POLICIES}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")


def _gather_all(manifest: Iterable[ManifestEntry], loc_cfg, backend,
                desc_length: str, scenario: str, decoy: str,
                workers: int) -> list[_Gathered]:
    entries = list(manifest)

    def gather(entry):
        return _gather_image(entry, loc_cfg, backend, desc_length, scenario,
                             decoy)

    if workers == 1:
        return [gather(e) for e in entries]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map() preserves manifest order regardless of completion order
        return list(pool.map(gather, entries))


def run_pipeline(manifest, loc_cfg: LocalizerConfig, gate_cfg: GateConfig,
                 backend, *, workers: int = 1, fallback_policy: str = "any",
                 desc_length: str = "medium", scenario: str = "correct",
                 decoy: str = DEFAULT_DECOY) -> list[EvalRecord]:
    """Run the full pipeline over every manifest entry.

    Per-image failures are recorded on that image's EvalRecord and the batch
    continues.  The fallback recognizer runs only for images whose decisions
    trip the fallback policy.
    """
    _check_run_args(scenario, fallback_policy, workers)
    gathered = _gather_all(manifest, loc_cfg, backend, desc_length, scenario,
                           decoy, workers)
    return [_finish_image(g, gate_cfg, fallback_policy,
                          backend.fallback_recognize)
            for g in gathered]


# --------------------------------------------------------------------------- #
# metrics

def compute_metrics(records: Sequence[EvalRecord]) -> MetricsReport:
    """Score a batch: greedy one-to-one text matching after normalization.

    Confident texts consume ground-truth strings first (they alone can be
    false positives), then fallback texts take what remains.
    """
    total_gt = 0
    matched = 0
    cbr = 0
    fallbacks = 0
    false_positives = 0
    failed = 0
    for r in records:
        total_gt += len(r.ground_truth)
        if r.error is not None:
            failed += 1
        remaining = [normalize(t) for t in r.ground_truth]
        for d in r.decisions:
            if d.confident:
                cbr += 1
            else:
                fallbacks += 1
        for text in (d.final_text for d in r.decisions if d.confident):
            key = normalize(text)
            if key in remaining:
                remaining.remove(key)
                matched += 1
            else:
                false_positives += 1
        for text in r.fallback_texts:
            key = normalize(text)
            if key in remaining:
                remaining.remove(key)
                matched += 1
    return MetricsReport(
        accuracy=matched / total_gt if total_gt else 1.0,
        cbr=cbr,
        fallbacks=fallbacks,
        false_positives=false_positives,
        images=len(records),
        failed_images=failed,
        matched=matched,
        total_ground_truth=total_gt,
    )


def ablate(manifest, loc_cfg: LocalizerConfig, backend,
           grid: Sequence[tuple[float, float, float]], *, workers: int = 1,
           fallback_policy: str = "any",
           desc_length: str = "medium") -> list[MetricsReport]:
    """Sweep (alpha, beta, tau) settings over one shared gather pass.

    The recognizer, captioner and embedder run once per image; each grid row
    rescores from the cache.  The fallback recognizer is invoked at most once
    per image across the whole sweep, on first need.
    """
    _check_run_args("correct", fallback_policy, workers)
    gathered = _gather_all(manifest, loc_cfg, backend, desc_length,
                           "correct", DEFAULT_DECOY, workers)

    cache: dict[str, list[str] | Exception] = {}

    def cached_fallback(ref):
        if ref.image_id not in cache:
            try:
                cache[ref.image_id] = list(backend.fallback_recognize(ref))
            except _ADAPTER_ERRORS as exc:
                cache[ref.image_id] = exc
        hit = cache[ref.image_id]
        if isinstance(hit, Exception):
            raise hit
        return hit

    rows = []
    for alpha, beta, tau in grid:
        cfg = GateConfig(alpha=alpha, beta=beta, tau=tau)
        records = [_finish_image(g, cfg, fallback_policy, cached_fallback)
                   for g in gathered]
        rows.append(replace(compute_metrics(records),
                            setting={"alpha": alpha, "beta": beta,
                                     "tau": tau}))
    return rows


def context_scenarios(manifest, loc_cfg: LocalizerConfig,
                      gate_cfg: GateConfig, backend, scenario: str, *,
                      workers: int = 1, fallback_policy: str = "any",
                      desc_length: str = "medium",
                      decoy: str = DEFAULT_DECOY) -> MetricsReport:
    """Metrics under a description rewrite: none (blank), wrong (decoy), or
    correct (pass-through)."""
    records = run_pipeline(manifest, loc_cfg, gate_cfg, backend,
                           workers=workers, fallback_policy=fallback_policy,
                           desc_length=desc_length, scenario=scenario,
                           decoy=decoy)
    return replace(compute_metrics(records), setting={"scenario": scenario})


# --------------------------------------------------------------------------- #
# mask metrics

def _mask_counts(pred: BinaryMask, gt: BinaryMask) -> tuple[int, int, int]:
    if pred.width != gt.width or pred.height != gt.height:
        raise ValueError(
            f"mask dimensions differ: {pred.width}x{pred.height} vs "
            f"{gt.width}x{gt.height}")
    # bytes hold 0/1, so a big-int AND leaves one set bit per overlapping
    # foreground pixel
    inter = (int.from_bytes(pred.data, "big")
             & int.from_bytes(gt.data, "big")).bit_count()
    return pred.data.count(1), gt.data.count(1), inter


def fg_iou(pred: BinaryMask, gt: BinaryMask) -> float:
    p, g, inter = _mask_counts(pred, gt)
    union = p + g - inter
    return inter / union if union else 1.0


def f1_foreground(pred: BinaryMask, gt: BinaryMask) -> float:
    p, g, inter = _mask_counts(pred, gt)
    return 2 * inter / (p + g) if p + g else 1.0


# --------------------------------------------------------------------------- #
# report files

def _write_jsonl(rows: Iterable[dict], path) -> None:
    text = "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)
    Path(path).write_text(text, encoding="utf-8")


def write_trace(records: Sequence[EvalRecord], path) -> None:
    _write_jsonl((r.to_dict() for r in records), path)


def write_metrics(rows: Sequence[MetricsReport], path) -> None:
    _write_jsonl((r.to_dict() for r in rows), path)
