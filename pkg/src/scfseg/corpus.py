"""Synthetic screen-content test images with known natural regions."""

import numpy as np

from .pixmap import Pixmap
from .segmenter import BoundingBox

UI_COLOURS = np.array(
    [
        [255, 255, 255],
        [20, 20, 20],
        [128, 128, 128],
        [200, 200, 200],
        [30, 90, 200],
        [230, 235, 240],
    ],
    dtype=np.uint8,
)

# 5x7 bitmaps, reused so text repeats like rendered fonts do
_GLYPHS = np.random.default_rng(7).random((24, 7, 5)) < 0.4


def flat(width, height, colour=(255, 255, 255)):
    return Pixmap(np.broadcast_to(np.array(colour, dtype=np.uint8), (height, width, 3)))


def gradient(width, height):
    x = np.linspace(0, 255, width, dtype=np.float64)[None, :]
    y = np.linspace(0, 255, height, dtype=np.float64)[:, None]
    a = np.stack(np.broadcast_arrays(x, y, (x + y) / 2), axis=-1)
    return Pixmap(a.astype(np.uint8))


def noise(width, height, rng):
    return Pixmap(rng.integers(0, 256, (height, width, 3), dtype=np.uint8))


def text_like(width, height, rng, colours=UI_COLOURS):
    """Light background with rows of glyphs, a title bar and grey
    anti-aliasing fringes: few colours, lots of repetition."""
    a = np.empty((height, width, 3), dtype=np.uint8)
    a[:] = colours[0]
    bar = min(12, height // 4)
    a[:bar] = colours[4]
    ink, fringe = colours[1], colours[2]
    y = bar + 4
    while y + 7 <= height:
        x = 4 + int(rng.integers(0, 8))
        line_end = width - int(rng.integers(4, max(5, width // 3)))
        while x + 5 <= line_end:
            if rng.random() < 0.15:
                x += 4  # word gap
                continue
            g = _GLYPHS[rng.integers(0, len(_GLYPHS))]
            cell = a[y : y + 7, x : x + 5]
            cell[g] = ink
            edge = np.zeros_like(g)
            edge[:, 1:] |= g[:, :-1]
            cell[edge & ~g] = fringe
            x += 6
        y += 11
    return Pixmap(a)


def dithered(width, height, rng):
    """Two-colour ordered dither over a text-like image."""
    base = text_like(width, height, rng).array.copy()
    yy, xx = np.mgrid[0:height, 0:width]
    checker = ((yy + xx) % 2 == 0) & (base == UI_COLOURS[0]).all(axis=-1)
    base[checker] = UI_COLOURS[5]
    return Pixmap(base)


def place_rectangles(width, height, sizes, rng, gap=32, tries=500):
    """Non-overlapping boxes of the given (w, h) sizes, ``gap`` pixels apart."""
    for _ in range(tries):
        boxes = []
        for w, h in sizes:
            x0 = int(rng.integers(0, width - w + 1))
            y0 = int(rng.integers(0, height - h + 1))
            b = BoundingBox(x0, y0, x0 + w, y0 + h)
            grown = BoundingBox(b.x0 - gap, b.y0 - gap, b.x1 + gap, b.y1 + gap)
            if any(grown.intersection(o) for o in boxes):
                break
            boxes.append(b)
        else:
            return boxes
    raise ValueError("could not place rectangles; image too small")


def mixed(width, height, rng, k=1, min_size=64, max_size=128, background="text"):
    """Low-colour background with ``k`` random-noise rectangles.

    Returns ``(image, rectangles)``; rectangle origins are generally not
    block aligned.
    """
    if background == "text":
        a = text_like(width, height, rng).array.copy()
    elif background == "flat":
        a = flat(width, height, (240, 240, 240)).array.copy()
    else:
        raise ValueError(f"unknown background {background!r}")
    sizes = [tuple(int(v) for v in rng.integers(min_size, max_size + 1, 2)) for _ in range(k)]
    rects = place_rectangles(width, height, sizes, rng)
    for r in rects:
        a[r.y0 : r.y1, r.x0 : r.x1] = rng.integers(0, 256, (r.height, r.width, 3), dtype=np.uint8)
    return Pixmap(a), rects


def iou(a: BoundingBox, b: BoundingBox) -> float:
    inter = a.intersection(b)
    return inter / (a.area + b.area - inter)
