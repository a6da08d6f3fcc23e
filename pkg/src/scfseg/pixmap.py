"""RGB image container and PPM/PNG file I/O."""

from typing import NamedTuple

import numpy as np
from PIL import Image


class ImageFormatError(ValueError):
    pass


class Colour(NamedTuple):
    r: int
    g: int
    b: int

    def packed(self) -> int:
        return (self.r << 16) | (self.g << 8) | self.b

    @classmethod
    def unpack(cls, v: int) -> "Colour":
        return cls((v >> 16) & 0xFF, (v >> 8) & 0xFF, v & 0xFF)


class Pixmap:
    """Immutable 8-bit RGB image backed by a ``(height, width, 3)`` uint8 array.

    Colours are also available packed as ``0xRRGGBB`` integers, which sort in
    the same order as ``Colour`` tuples.
    """

    __slots__ = ("_a",)

    def __init__(self, array):
        a = np.array(array, dtype=np.uint8, copy=True)
        if a.ndim != 3 or a.shape[2] != 3:
            raise ValueError(f"expected (height, width, 3) array, got {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        a.setflags(write=False)
        self._a = a

    @classmethod
    def from_colours(cls, width, height, data):
        data = list(data)
        if len(data) != width * height:
            raise ValueError(f"expected {width * height} pixels, got {len(data)}")
        return cls(np.array(data, dtype=np.uint8).reshape(height, width, 3))

    @classmethod
    def from_packed(cls, packed):
        p = np.asarray(packed, dtype=np.uint32)
        return cls(np.stack([(p >> 16) & 0xFF, (p >> 8) & 0xFF, p & 0xFF], axis=-1))

    @property
    def width(self) -> int:
        return self._a.shape[1]

    @property
    def height(self) -> int:
        return self._a.shape[0]

    @property
    def array(self) -> np.ndarray:
        return self._a

    def pixel(self, x, y) -> Colour:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise IndexError(f"pixel ({x}, {y}) outside {self.width}x{self.height} image")
        return Colour(*(int(v) for v in self._a[y, x]))

    @property
    def data(self):
        return [Colour(*map(int, px)) for px in self._a.reshape(-1, 3)]

    def packed(self) -> np.ndarray:
        a = self._a.astype(np.uint32)
        return (a[..., 0] << 16) | (a[..., 1] << 8) | a[..., 2]

    def __eq__(self, other):
        if not isinstance(other, Pixmap):
            return NotImplemented
        return self._a.shape == other._a.shape and bool(np.array_equal(self._a, other._a))

    def __hash__(self):
        return hash((self._a.shape, self._a.tobytes()))

    def __repr__(self):
        return f"Pixmap({self.width}x{self.height})"


def _ppm_tokens(buf):
    """Yield (token, end_offset) for the three header integers after 'P6'."""
    pos = 2
    n = len(buf)
    for _ in range(3):
        while pos < n and (buf[pos : pos + 1].isspace() or buf[pos] == ord("#")):
            if buf[pos] == ord("#"):
                while pos < n and buf[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and buf[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ImageFormatError("malformed PPM header")
        yield int(buf[start:pos]), pos


def _read_ppm(buf):
    end = 0
    vals = []
    for v, end in _ppm_tokens(buf):
        vals.append(v)
    width, height, maxval = vals
    if maxval != 255:
        raise ImageFormatError(f"unsupported PPM maxval {maxval} (only 255)")
    if width < 1 or height < 1:
        raise ImageFormatError("PPM dimensions must be positive")
    if end >= len(buf) or not buf[end : end + 1].isspace():
        raise ImageFormatError("truncated PPM header")
    start = end + 1
    need = width * height * 3
    payload = buf[start : start + need]
    if len(payload) < need:
        raise ImageFormatError(f"truncated PPM: {len(payload)} of {need} payload bytes")
    return Pixmap(np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3))


_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _read_png(path, buf):
    if len(buf) < 33 or buf[12:16] != b"IHDR":
        raise ImageFormatError("truncated PNG")
    bit_depth = buf[24]
    if bit_depth != 8:
        raise ImageFormatError(f"unsupported bit depth {bit_depth}")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "RGBA":
                a = np.asarray(im)
                if not np.all(a[..., 3] == 255):
                    raise ImageFormatError("PNG alpha channel is not fully opaque")
                return Pixmap(a[..., :3])
            if "transparency" in im.info:
                raise ImageFormatError("PNG transparency is not supported")
            if mode in ("P", "L"):
                im = im.convert("RGB")
            elif mode != "RGB":
                raise ImageFormatError(f"unsupported PNG mode {mode}")
            return Pixmap(np.asarray(im))
    except (OSError, SyntaxError) as e:
        raise ImageFormatError(f"cannot decode PNG: {e}") from e


def load_image(path) -> Pixmap:
    """Load a binary PPM (P6, maxval 255) or an 8-bit PNG."""
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:2] == b"P6":
        return _read_ppm(buf)
    if buf[:8] == _PNG_SIG:
        return _read_png(path, buf)
    raise ImageFormatError(f"{path}: unsupported image format")


def save_image(img: Pixmap, path) -> None:
    """Write ``img`` as a binary P6 PPM."""
    header = b"P6\n%d %d\n255\n" % (img.width, img.height)
    with open(path, "wb") as f:
        f.write(header)
        f.write(img.array.tobytes())


def top_k_colours(img: Pixmap, k: int):
    """The ``k`` most frequent colours as ``(Colour, count)``, most frequent first.

    Ties are broken by ascending colour so the result is deterministic.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    values, counts = np.unique(img.packed().ravel(), return_counts=True)
    # np.unique sorts by colour; a stable sort on -count keeps that order within ties
    order = np.argsort(-counts, kind="stable")[:k]
    return [(Colour.unpack(int(values[i])), int(counts[i])) for i in order]
