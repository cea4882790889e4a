"""Independent reference implementations used only by the test suite.

Everything here is written against first principles (brute-force flood fill,
full-matrix DP, plain python sorts) so that the production code in textgate
is checked by a second, unrelated derivation. Keep this module free of any
textgate imports.
"""

from __future__ import annotations

# --------------------------------------------------------------------------- #
# connected components: brute-force flood fill


def flood_fill_components(width, height, foreground, connectivity=8):
    """Partition foreground pixels into connected components by BFS flood fill.

    Args:
        width, height: mask dimensions.
        foreground: iterable of (x, y) pixel coordinates.
        connectivity: 4 or 8.

    Returns:
        List of frozensets of (x, y), ordered by first raster encounter
        (row-major: y, then x).
    """
    # encode pixels into a padded index grid so neighbor deltas never wrap rows
    stride = width + 2
    encode = lambda x, y: (y + 1) * stride + (x + 1)  # noqa: E731
    remaining = {encode(x, y) for (x, y) in foreground}
    if connectivity == 4:
        deltas = (-1, 1, -stride, stride)
    elif connectivity == 8:
        deltas = (-1, 1, -stride, stride, -stride - 1, -stride + 1, stride - 1, stride + 1)
    else:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")

    seeds = sorted(remaining)  # ascending index == raster order
    components = []
    for seed in seeds:
        if seed not in remaining:
            continue
        remaining.discard(seed)
        comp = {seed}
        frontier = {seed}
        while frontier:
            grown = set()
            for d in deltas:
                grown |= {p + d for p in frontier}
            frontier = grown & remaining
            remaining -= frontier
            comp |= frontier
        components.append(
            frozenset((p % stride - 1, p // stride - 1) for p in comp)
        )
    return components


def mask_foreground(width, height, data):
    """Turn a row-major 0/1 buffer into a set of (x, y) coordinates."""
    return {
        (i % width, i // width)
        for i, v in enumerate(data)
        if v
    }


# --------------------------------------------------------------------------- #
# localization: composed oracle (flood fill + min/max fold + clamp + sort)


def brute_localize(width, height, foreground, padding, min_area, max_blocks,
                   connectivity=8):
    """Reference pipeline: components -> bbox -> area filter -> pad -> sort/limit.

    Returns a list of dicts with keys rank, x_min, y_min, x_max, y_max, area,
    label. Filtering uses the unpadded bbox area; sorting uses the padded one.
    """
    comps = flood_fill_components(width, height, foreground, connectivity)
    blocks = []
    for label, comp in enumerate(comps, start=1):
        xs = [x for x, _ in comp]
        ys = [y for _, y in comp]
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        if (x1 - x0) * (y1 - y0) < min_area:
            continue
        px0 = max(0, x0 - padding)
        py0 = max(0, y0 - padding)
        px1 = min(width - 1, x1 + padding)
        py1 = min(height - 1, y1 + padding)
        blocks.append({
            "label": label,
            "x_min": px0, "y_min": py0, "x_max": px1, "y_max": py1,
            "area": (px1 - px0) * (py1 - py0),
        })
    blocks.sort(key=lambda b: (-b["area"], b["y_min"], b["x_min"], b["label"]))
    del blocks[max_blocks:]
    for rank, b in enumerate(blocks):
        b["rank"] = rank
    return blocks


# --------------------------------------------------------------------------- #
# string similarity oracles

def lcs_length(a, b):
    """Longest common subsequence length, full-matrix DP."""
    n, m = len(a), len(b)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        row = table[i]
        prev = table[i - 1]
        ca = a[i - 1]
        for j in range(1, m + 1):
            if ca == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = prev[j] if prev[j] >= row[j - 1] else row[j - 1]
    return table[n][m]


def oracle_fuzz_ratio(a, b):
    """Similarity ratio derived from LCS.

    With substitution cost 2 a substitution never beats delete+insert, so the
    weighted edit distance collapses to indel distance = len(a)+len(b)-2*LCS,
    giving ratio = 2*LCS / (len(a)+len(b)).
    """
    lensum = len(a) + len(b)
    if lensum == 0:
        return 1.0
    return (2 * lcs_length(a, b)) / lensum


def levenshtein_unit(a, b):
    """Classic unit-cost Levenshtein distance, full-matrix DP."""
    n, m = len(a), len(b)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for j in range(m + 1):
        table[0][j] = j
    for i in range(1, n + 1):
        table[i][0] = i
        for j in range(1, m + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i][j] = min(
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
                table[i - 1][j - 1] + cost,
            )
    return table[n][m]
