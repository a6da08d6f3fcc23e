from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scfseg.pixmap import Pixmap
from scfseg.segmenter import (
    BlockGrid,
    BoundingBox,
    SegmenterConfig,
    block_overlay,
    classify_blocks,
    extract_candidates,
    label_components,
)


def image_from_block_counts(counts, b=16):
    """Image whose block (r, c) holds exactly counts[r][c] distinct colours."""
    counts = np.asarray(counts)
    rows, cols = counts.shape
    packed = np.zeros((rows * b, cols * b), dtype=np.uint32)
    for r in range(rows):
        for c in range(cols):
            n = int(counts[r, c])
            packed[r * b : (r + 1) * b, c * b : (c + 1) * b] = (np.arange(b * b) % n).reshape(b, b) * 997
    return Pixmap.from_packed(packed)


def grid_from_counts(counts, b=16):
    counts = np.asarray(counts)
    rows, cols = counts.shape
    return BlockGrid(b, cols * b, rows * b, counts, counts > 128)


def flood_fill_components(mask):
    """Partition of natural cells into 8-connected sets, by BFS."""
    rows, cols = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    parts = []
    for r in range(rows):
        for c in range(cols):
            if not mask[r, c] or seen[r, c]:
                continue
            part = set()
            todo = deque([(r, c)])
            seen[r, c] = True
            while todo:
                y, x = todo.popleft()
                part.add((y, x))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        v, u = y + dy, x + dx
                        if 0 <= v < rows and 0 <= u < cols and mask[v, u] and not seen[v, u]:
                            seen[v, u] = True
                            todo.append((v, u))
            parts.append(frozenset(part))
    return set(parts)


@pytest.mark.parametrize("n, natural", [(1, False), (128, False), (129, True), (256, True)])
def test_block_colour_threshold(n, natural):
    grid = classify_blocks(image_from_block_counts([[n]]))
    assert grid.colour_counts[0, 0] == n
    assert bool(grid.labels[0, 0]) is natural


def test_partial_edge_blocks_use_actual_pixels():
    packed = np.zeros((16, 26), dtype=np.uint32)
    packed[:, 16:] = np.arange(160).reshape(16, 10) + 1  # 160 px, all distinct
    grid = classify_blocks(Pixmap.from_packed(packed))
    assert grid.colour_counts.tolist() == [[1, 160]]
    assert grid.labels.tolist() == [[False, True]]
    packed = np.arange(16 * 24, dtype=np.uint32).reshape(16, 24)  # last block 8x16 = 128 px
    assert classify_blocks(Pixmap.from_packed(packed)).labels.tolist() == [[True, False]]


def test_diagonal_blocks_are_connected():
    grid = grid_from_counts([[256, 1], [1, 256]])
    comp = label_components(grid)
    assert comp[0, 0] == comp[1, 1] != 0
    assert comp[0, 1] == comp[1, 0] == 0


def test_separated_blocks_are_distinct():
    grid = grid_from_counts([[256, 1, 256], [1, 1, 1], [256, 1, 256]])
    comp = label_components(grid)
    ids = {comp[0, 0], comp[0, 2], comp[2, 0], comp[2, 2]}
    assert len(ids) == 4 and 0 not in ids


@settings(max_examples=80, deadline=None)
@given(arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_components_match_flood_fill(mask):
    grid = BlockGrid(16, mask.shape[1] * 16, mask.shape[0] * 16, mask.astype(int) * 200, mask)
    comp = label_components(grid)
    got = {
        frozenset(map(tuple, np.argwhere(comp == k).tolist()))
        for k in np.unique(comp) if k != 0
    }
    assert got == flood_fill_components(mask)
    assert ((comp != 0) == mask).all()


def test_fifteen_block_box_discarded():
    counts = np.full((5, 7), 1)
    counts[1:4, 1:6] = 256  # 3x5 = 15 blocks
    assert extract_candidates(grid_from_counts(counts)) == []


def test_four_by_four_natural_box_kept():
    counts = np.full((6, 6), 1)
    counts[1:5, 2:6] = 256
    assert extract_candidates(grid_from_counts(counts)) == [BoundingBox(32, 16, 96, 80)]


def _five_by_five(extra):
    counts = np.full((5, 5), 1)
    counts[0:2, :] = 256
    counts[2:5, 0] = 256
    counts[4, 1] = 256
    for r, c in extra:
        counts[r, c] = 256
    return counts


def test_density_below_sixty_percent_discarded():
    counts = _five_by_five([])
    assert (counts > 128).sum() == 14
    assert extract_candidates(grid_from_counts(counts)) == []


def test_density_exactly_sixty_percent_kept():
    counts = _five_by_five([(4, 2)])
    assert (counts > 128).sum() == 15
    assert extract_candidates(grid_from_counts(counts)) == [BoundingBox(0, 0, 80, 80)]


def test_average_colour_filter():
    counts = np.full((4, 4), 130)
    assert extract_candidates(grid_from_counts(counts)) == [BoundingBox(0, 0, 64, 64)]
    counts[0, 0] = 1  # mean drops below 128
    assert extract_candidates(grid_from_counts(counts)) == []


def test_end_to_end_on_pixels():
    counts = np.full((6, 6), 3)
    counts[1:5, 1:5] = 256
    img = image_from_block_counts(counts)
    grid = classify_blocks(img)
    assert extract_candidates(grid) == [BoundingBox(16, 16, 80, 80)]


def test_clipped_box_stays_inside_image():
    packed = np.zeros((70, 70), dtype=np.uint32)
    rng = np.random.default_rng(1)
    packed[:, :] = rng.integers(0, 1 << 24, (70, 70))
    img = Pixmap.from_packed(packed)
    boxes = extract_candidates(classify_blocks(img))
    # 6-pixel edge strips hold at most 96 colours, so only the 4x4 core is natural
    assert boxes == [BoundingBox(0, 0, 64, 64)]
    assert all(b.is_valid(70, 70) for b in boxes)


def test_all_synthetic_image_has_no_candidates():
    img = Pixmap(np.zeros((100, 130, 3), dtype=np.uint8))
    assert extract_candidates(classify_blocks(img)) == []


counts_grid = arrays(np.int64, st.tuples(st.integers(1, 10), st.integers(1, 10)), elements=st.integers(1, 256))


@settings(max_examples=80, deadline=None)
@given(counts_grid, st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.integers(0, 256), st.integers(0, 256))
def test_filters_are_monotone(counts, f1, f2, a1, a2):
    grid = grid_from_counts(counts)
    lo = SegmenterConfig(min_natural_fraction=min(f1, f2), min_avg_colours=min(a1, a2))
    hi = SegmenterConfig(min_natural_fraction=max(f1, f2), min_avg_colours=max(a1, a2))
    assert set(extract_candidates(grid, hi)) <= set(extract_candidates(grid, lo))


@settings(max_examples=60, deadline=None)
@given(counts_grid)
def test_candidates_are_aligned_sorted_and_inside(counts):
    grid = grid_from_counts(counts)
    boxes = extract_candidates(grid)
    assert boxes == sorted(boxes, key=lambda b: (b.y0, b.x0))
    for b in boxes:
        assert b.is_valid(grid.width, grid.height)
        assert all(v % 16 == 0 for v in b)
    assert boxes == extract_candidates(grid)


def test_all_synthetic_grid_property():
    counts = np.random.default_rng(0).integers(1, 129, (9, 9))
    assert extract_candidates(grid_from_counts(counts)) == []


def test_config_validation():
    with pytest.raises(ValueError):
        SegmenterConfig(block_size=1)
    with pytest.raises(ValueError):
        SegmenterConfig(min_natural_fraction=0)


def test_block_overlay_marks_only_natural_blocks():
    img = image_from_block_counts([[256, 1]])
    out = block_overlay(img, classify_blocks(img), tint=(255, 0, 0))
    assert (out.array[:, 16:] == img.array[:, 16:]).all()
    assert (out.array[:, :16] != img.array[:, :16]).any()
