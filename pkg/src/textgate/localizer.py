"""Block-level text localization from binary segmentation masks.

Pipeline: connected components -> small-component filter -> bbox -> padding
with clamping -> sort by area (descending) -> cap at max_blocks. Coordinates
are inclusive on both ends; crop extraction re-adds the +1 when slicing.

Component labeling is run-based: numpy extracts foreground runs per row in
one vectorized pass, then a union-find over runs merges vertically adjacent
ones. Work is linear in H*W for the scan plus near-linear in the number of
runs, so all-background masks cost a single raster sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Iterator

import numpy as np

from .maskio import BinaryMask

__all__ = [
    "BBox",
    "Component",
    "TextBlock",
    "LocalizerConfig",
    "bbox_area",
    "find_components",
    "component_bbox",
    "pad_bbox",
    "filter_by_area",
    "sort_and_limit",
    "localize",
]


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box; all four coordinates are inclusive."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if not (0 <= self.x_min <= self.x_max and 0 <= self.y_min <= self.y_max):
            raise ValueError(f"degenerate bbox {self}")

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "y_min": self.y_min,
                "x_max": self.x_max, "y_max": self.y_max}


def bbox_area(b: BBox) -> int:
    # coordinate-span area; a single-pixel box spans 0
    return (b.x_max - b.x_min) * (b.y_max - b.y_min)


@dataclass(frozen=True)
class Component:
    """One connected foreground region.

    runs holds (row, x_start, x_end) triples with inclusive ends, in raster
    order; they are the compact membership representation.
    """

    label: int
    pixel_count: int
    bbox_raw: BBox
    runs: tuple[tuple[int, int, int], ...]

    def pixels(self) -> Iterator[tuple[int, int]]:
        for row, x0, x1 in self.runs:
            for x in range(x0, x1 + 1):
                yield (x, row)


@dataclass(frozen=True)
class TextBlock:
    """Crop-region descriptor: padded bbox plus ranking metadata.

    rank is -1 until assigned by sort_and_limit.
    """

    bbox: BBox
    area: int
    source_component: int
    rank: int = -1

    def to_dict(self) -> dict:
        return {"rank": self.rank, **self.bbox.to_dict(),
                "area": self.area, "label": self.source_component}


@dataclass(frozen=True)
class LocalizerConfig:
    padding: int = 5
    min_area: int = 100
    max_blocks: int = 10
    connectivity: int = 8

    def __post_init__(self):
        if self.padding < 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")
        if self.min_area < 0:
            raise ValueError(f"min_area must be >= 0, got {self.min_area}")
        if self.max_blocks < 1:
            raise ValueError(f"max_blocks must be >= 1, got {self.max_blocks}")
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")


# --------------------------------------------------------------------------- #
# connected components

def find_components(mask: BinaryMask, connectivity: int = 8) -> list[Component]:
    """Label maximal connected foreground regions.

    Labels are assigned in first-encounter raster order starting at 1;
    the returned list is ordered by label.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    h, w = mask.height, mask.width
    arr = np.frombuffer(mask.data, dtype=np.uint8).reshape(h, w)

    # run extraction: +1 marks a run start, -1 one past a run end
    padded = np.zeros((h, w + 2), dtype=np.int8)
    padded[:, 1:-1] = arr
    edges = padded[:, 1:] - padded[:, :-1]
    start_rows, start_cols = np.nonzero(edges == 1)
    _, end_cols = np.nonzero(edges == -1)

    rows = start_rows.tolist()
    starts = start_cols.tolist()
    ends = (end_cols - 1).tolist()  # inclusive
    n_runs = len(rows)
    if n_runs == 0:
        return []

    parent = list(range(n_runs))

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:  # path compression
            parent[i], i = root, parent[i]
        return root

    # spans of each row within the raster-ordered run arrays
    bounds = np.searchsorted(start_rows, np.arange(h + 1)).tolist()
    slack = 1 if connectivity == 8 else 0
    for row in range(1, h):
        i, i_end = bounds[row - 1], bounds[row]
        j, j_end = bounds[row], bounds[row + 1]
        while i < i_end and j < j_end:
            if starts[i] <= ends[j] + slack and starts[j] <= ends[i] + slack:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
            if ends[i] < ends[j]:
                i += 1
            else:
                j += 1

    # group runs; raster order of runs gives first-encounter label order
    label_of_root: dict[int, int] = {}
    agg: list[list] = []  # per label: [count, x_min, y_min, x_max, y_max, runs]
    for k in range(n_runs):
        root = find(k)
        label = label_of_root.get(root)
        row, x0, x1 = rows[k], starts[k], ends[k]
        if label is None:
            label_of_root[root] = len(agg)
            agg.append([x1 - x0 + 1, x0, row, x1, row, [(row, x0, x1)]])
        else:
            a = agg[label]
            a[0] += x1 - x0 + 1
            if x0 < a[1]:
                a[1] = x0
            if x1 > a[3]:
                a[3] = x1
            a[4] = row  # runs arrive in raster order, so row is the max so far
            a[5].append((row, x0, x1))

    return [
        Component(label=i + 1, pixel_count=count,
                  bbox_raw=BBox(x0, y0, x1, y1), runs=tuple(runs))
        for i, (count, x0, y0, x1, y1, runs) in enumerate(agg)
    ]


def component_bbox(pixels: Iterable[tuple[int, int]]) -> BBox:
    """Tight min/max fold over member pixel coordinates."""
    it = iter(pixels)
    try:
        x, y = next(it)
    except StopIteration:
        raise ValueError("component_bbox requires at least one pixel") from None
    x_min = x_max = x
    y_min = y_max = y
    for x, y in it:
        if x < x_min:
            x_min = x
        elif x > x_max:
            x_max = x
        if y < y_min:
            y_min = y
        elif y > y_max:
            y_max = y
    return BBox(x_min, y_min, x_max, y_max)


def pad_bbox(b: BBox, p: int, width: int, height: int) -> BBox:
    """Grow the box by p on every side, clamped to the frame (inclusive)."""
    if p < 0:
        raise ValueError(f"padding must be >= 0, got {p}")
    return BBox(
        max(0, b.x_min - p),
        max(0, b.y_min - p),
        min(width - 1, b.x_max + p),
        min(height - 1, b.y_max + p),
    )


def filter_by_area(blocks: list[TextBlock], min_area: int) -> list[TextBlock]:
    return [b for b in blocks if b.area >= min_area]


def sort_and_limit(blocks: list[TextBlock], max_blocks: int) -> list[TextBlock]:
    """Sort by area desc (ties: y_min, x_min, then label), cap, re-rank."""
    if max_blocks < 1:
        raise ValueError(f"max_blocks must be >= 1, got {max_blocks}")
    ordered = sorted(blocks, key=lambda b: (
        -b.area, b.bbox.y_min, b.bbox.x_min, b.source_component))
    return [replace(b, rank=i) for i, b in enumerate(ordered[:max_blocks])]


def localize(mask: BinaryMask, cfg: LocalizerConfig) -> list[TextBlock]:
    """Full localization: components -> filter -> pad -> sort/limit.

    Filtering uses the unpadded bbox area; the blocks that survive are padded
    and then ranked by their padded area.
    """
    comps = find_components(mask, cfg.connectivity)
    raw = [
        TextBlock(bbox=c.bbox_raw, area=bbox_area(c.bbox_raw),
                  source_component=c.label)
        for c in comps
    ]
    padded = []
    for b in filter_by_area(raw, cfg.min_area):
        grown = pad_bbox(b.bbox, cfg.padding, mask.width, mask.height)
        padded.append(replace(b, bbox=grown, area=bbox_area(grown)))
    return sort_and_limit(padded, cfg.max_blocks)
