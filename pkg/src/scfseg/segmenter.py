"""Block classification and candidate natural-region extraction.

The image is tiled into ``block_size`` squares (edge tiles are clipped to the
image). A tile with more than ``natural_colour_threshold`` distinct colours is
natural. Natural tiles are grouped into 8-connected components, and each
component's bounding rectangle survives only if it is large enough, dense
enough in natural tiles and colourful enough on average.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .pixmap import Pixmap


class BoundingBox(NamedTuple):
    """Half-open pixel rectangle ``[x0, x1) x [y0, y1)``."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def area(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def intersection(self, other):
        w = min(self.x1, other.x1) - max(self.x0, other.x0)
        h = min(self.y1, other.y1) - max(self.y0, other.y0)
        return w * h if w > 0 and h > 0 else 0

    def contains(self, other):
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def union(self, other):
        return BoundingBox(
            min(self.x0, other.x0),
            min(self.y0, other.y0),
            max(self.x1, other.x1),
            max(self.y1, other.y1),
        )

    def is_valid(self, width, height):
        return 0 <= self.x0 < self.x1 <= width and 0 <= self.y0 < self.y1 <= height

    def to_dict(self):
        return {"x0": self.x0, "y0": self.y0, "x1": self.x1, "y1": self.y1}


def box_order(box):
    return (box.y0, box.x0, box.y1, box.x1)


@dataclass(frozen=True)
class SegmenterConfig:
    block_size: int = 16
    natural_colour_threshold: int = 128
    min_blocks: int = 16
    min_natural_fraction: float = 0.60
    min_avg_colours: float = 128

    def __post_init__(self):
        if self.block_size < 2:
            raise ValueError("block_size must be >= 2")
        if not 0 < self.min_natural_fraction <= 1:
            raise ValueError("min_natural_fraction must be in (0, 1]")


@dataclass
class BlockGrid:
    block_size: int
    width: int
    height: int
    colour_counts: np.ndarray  # (rows, cols) distinct colours per block
    labels: np.ndarray  # (rows, cols) bool, True = natural

    @property
    def rows(self):
        return self.colour_counts.shape[0]

    @property
    def cols(self):
        return self.colour_counts.shape[1]

    def block_box(self, row0, col0, row1, col1):
        """Pixel rectangle covering blocks ``[row0, row1) x [col0, col1)``."""
        b = self.block_size
        return BoundingBox(
            col0 * b, row0 * b, min(col1 * b, self.width), min(row1 * b, self.height)
        )


def count_block_colours(img: Pixmap, block_size: int) -> np.ndarray:
    packed = img.packed()
    h, w = packed.shape
    b = block_size
    rows, cols = -(-h // b), -(-w // b)
    counts = np.zeros((rows, cols), dtype=np.int64)
    for r in range(rows):
        band = packed[r * b : (r + 1) * b]
        for c in range(cols):
            counts[r, c] = np.unique(band[:, c * b : (c + 1) * b]).size
    return counts


def classify_blocks(img: Pixmap, cfg: SegmenterConfig = SegmenterConfig()) -> BlockGrid:
    counts = count_block_colours(img, cfg.block_size)
    return BlockGrid(
        block_size=cfg.block_size,
        width=img.width,
        height=img.height,
        colour_counts=counts,
        labels=counts > cfg.natural_colour_threshold,
    )


_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def label_components(grid: BlockGrid) -> np.ndarray:
    """Component id per block (0 for synthetic blocks, 1.. for natural ones)."""
    labels, _ = ndimage.label(grid.labels, structure=_EIGHT_CONNECTED)
    return labels


def extract_candidates(grid: BlockGrid, cfg: SegmenterConfig = SegmenterConfig(), components=None):
    """Bounding boxes of the components that pass all three filters, sorted by (y0, x0)."""
    if components is None:
        components = label_components(grid)
    boxes = []
    for sl in ndimage.find_objects(components):
        if sl is None:
            continue
        rs, cs = sl
        nblocks = (rs.stop - rs.start) * (cs.stop - cs.start)
        if nblocks < cfg.min_blocks:
            continue
        # density and colour filters look at every block inside the box, not just the component
        if grid.labels[sl].mean() < cfg.min_natural_fraction:
            continue
        if grid.colour_counts[sl].mean() < cfg.min_avg_colours:
            continue
        boxes.append(grid.block_box(rs.start, cs.start, rs.stop, cs.stop))
    boxes.sort(key=box_order)
    return boxes


def block_overlay(img: Pixmap, grid: BlockGrid, tint=(255, 0, 0)) -> Pixmap:
    """Debug view: natural blocks blended half-way towards ``tint``."""
    b = grid.block_size
    mask = np.kron(grid.labels, np.ones((b, b), dtype=bool))[: img.height, : img.width]
    out = img.array.astype(np.uint16)
    out[mask] = (out[mask] + np.array(tint, dtype=np.uint16)) // 2
    return Pixmap(out.astype(np.uint8))
