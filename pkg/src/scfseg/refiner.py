"""Border refinement and overlap removal for candidate boxes."""

from dataclasses import dataclass

import numpy as np

from .pixmap import Pixmap
from .segmenter import BoundingBox, box_order


@dataclass(frozen=True)
class RefinerConfig:
    top_k: int = 10
    max_adjust: int = 15
    synthetic_row_fraction: float = 0.5

    def __post_init__(self):
        if self.max_adjust < 0:
            raise ValueError("max_adjust must be >= 0")
        if not 0 < self.synthetic_row_fraction < 1:
            raise ValueError("synthetic_row_fraction must be in (0, 1)")


def top_colour_mask(img: Pixmap, top_colours) -> np.ndarray:
    keys = np.array(sorted(c.packed() for c in top_colours), dtype=np.uint32)
    return np.isin(img.packed(), keys)


def refine_borders(img: Pixmap, box: BoundingBox, top_colours, cfg: RefinerConfig = RefinerConfig()):
    """Move each border of ``box`` out over natural lines or in over synthetic ones."""
    return refine_with_mask(top_colour_mask(img, top_colours), box, cfg)


def refine_with_mask(mask: np.ndarray, box: BoundingBox, cfg: RefinerConfig = RefinerConfig()):
    """Same as :func:`refine_borders` with a precomputed per-pixel "is top colour" mask."""
    h, w = mask.shape
    x0, y0, x1, y1 = box
    limit = cfg.max_adjust
    thr = cfg.synthetic_row_fraction

    def synthetic(line):
        return line.mean() > thr

    # left
    moved = 0
    while moved < limit and x0 > 0 and not synthetic(mask[y0:y1, x0 - 1]):
        x0 -= 1
        moved += 1
    if not moved:
        while moved < limit and x1 - x0 > 1 and synthetic(mask[y0:y1, x0]):
            x0 += 1
            moved += 1
    # right
    moved = 0
    while moved < limit and x1 < w and not synthetic(mask[y0:y1, x1]):
        x1 += 1
        moved += 1
    if not moved:
        while moved < limit and x1 - x0 > 1 and synthetic(mask[y0:y1, x1 - 1]):
            x1 -= 1
            moved += 1
    # top
    moved = 0
    while moved < limit and y0 > 0 and not synthetic(mask[y0 - 1, x0:x1]):
        y0 -= 1
        moved += 1
    if not moved:
        while moved < limit and y1 - y0 > 1 and synthetic(mask[y0, x0:x1]):
            y0 += 1
            moved += 1
    # bottom
    moved = 0
    while moved < limit and y1 < h and not synthetic(mask[y1, x0:x1]):
        y1 += 1
        moved += 1
    if not moved:
        while moved < limit and y1 - y0 > 1 and synthetic(mask[y1 - 1, x0:x1]):
            y1 -= 1
            moved += 1
    return BoundingBox(x0, y0, x1, y1)


def _truncations(small, large):
    """Single-axis cuts of ``small`` that clear ``large`` without discarding
    any part of ``small`` lying beyond ``large``. Horizontal cuts come first."""
    out = []
    if small.x0 < large.x0 and large.x1 >= small.x1:
        out.append(small._replace(x1=large.x0))
    if large.x1 < small.x1 and large.x0 <= small.x0:
        out.append(small._replace(x0=large.x1))
    if small.y0 < large.y0 and large.y1 >= small.y1:
        out.append(small._replace(y1=large.y0))
    if large.y1 < small.y1 and large.y0 <= small.y0:
        out.append(small._replace(y0=large.y1))
    return out


def resolve_pair(a: BoundingBox, b: BoundingBox):
    """Resolve one overlapping pair; returns the replacement boxes."""
    large, small = (a, b) if (a.area, box_order(b)) >= (b.area, box_order(a)) else (b, a)
    if large.contains(small):
        return [large]
    cuts = _truncations(small, large)
    if cuts:
        keep = max(c.area for c in cuts)
        # first match wins, so equal losses cut horizontally
        return [large, next(c for c in cuts if c.area == keep)]
    return [large.union(small)]


def resolve_overlaps(boxes):
    """Make ``boxes`` pairwise disjoint: drop contained boxes, trim corner
    overlaps on the smaller box, merge crossing ("edge") overlaps."""
    boxes = sorted(set(boxes), key=box_order)
    while True:
        worst = None
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                a, b = boxes[i], boxes[j]
                if a.intersection(b):
                    key = (max(a.area, b.area), min(a.area, b.area), -i, -j)
                    if worst is None or key > worst[0]:
                        worst = (key, i, j)
        if worst is None:
            return boxes
        _, i, j = worst
        repl = resolve_pair(boxes[i], boxes[j])
        rest = [bx for k, bx in enumerate(boxes) if k != i and k != j]
        boxes = sorted(set(rest + repl), key=box_order)


def box_overlay(img: Pixmap, boxes, colour=(0, 255, 0), thickness=2) -> Pixmap:
    """Debug view: ``boxes`` outlined just inside their borders."""
    out = img.array.copy()
    c = np.array(colour, dtype=np.uint8)
    for b in boxes:
        t = max(1, min(thickness, b.width // 2, b.height // 2))
        out[b.y0 : b.y0 + t, b.x0 : b.x1] = c
        out[b.y1 - t : b.y1, b.x0 : b.x1] = c
        out[b.y0 : b.y1, b.x0 : b.x0 + t] = c
        out[b.y0 : b.y1, b.x1 - t : b.x1] = c
    return Pixmap(out)
