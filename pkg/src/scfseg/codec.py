"""Segmentation-aware container: header, two coding passes, reconstruction.

Stream layout (big-endian)::

    "SCFS" | version u8 | width u32 | height u32 | flags u8 (bit 0: segmented)
    | soft_radius u16 | pattern_capacity u32
    segmented:   policy u8 | fill r,g,b | box_count u8 | box_count * (x0,y0,x1,y1 u16)
                 | pass-A length u32 | pass-A payload | pass-B payload
    unsegmented: payload

Pass A codes the whole image with every box filled with the fill colour
(the image's most frequent colour). Pass B codes the box interiors in header
order; template neighbours outside the current box read as the fill colour.
"""

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .entropy import RangeDecoder, RangeEncoder, TruncatedStreamError
from .pixmap import Pixmap, top_k_colours
from .refiner import RefinerConfig, refine_with_mask, resolve_overlaps, top_colour_mask
from .scf_core import (
    DEFAULT_CAPACITY,
    DEFAULT_POLICY,
    ResetPolicy,
    ScfModel,
    StageStats,
    decode_region,
    encode_region,
)
from .segmenter import (
    BoundingBox,
    SegmenterConfig,
    box_order,
    classify_blocks,
    extract_candidates,
    label_components,
)

log = logging.getLogger(__name__)

MAGIC = b"SCFS"
VERSION = 1
UNSEGMENTED_FILL = 0x000000
MAX_BOXES = 255
MAX_COORD = 0xFFFF

_POLICY_CODES = {ResetPolicy.KEEP: 0, ResetPolicy.RESET_COUNTS: 1, ResetPolicy.REMOVE: 2}
_POLICY_FROM_CODE = {v: k for k, v in _POLICY_CODES.items()}


class StreamError(ValueError):
    pass


@dataclass(frozen=True)
class CodecConfig:
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    refiner: RefinerConfig = field(default_factory=RefinerConfig)
    reset_policy: tuple = DEFAULT_POLICY
    soft_radius: int = 0
    pattern_capacity: int = DEFAULT_CAPACITY
    force_unsegmented: bool = False

    def __post_init__(self):
        if self.refiner.max_adjust >= self.segmenter.block_size:
            raise ValueError("max_adjust must be smaller than block_size")
        if not 0 <= self.soft_radius <= 0xFFFF:
            raise ValueError("soft_radius must fit in 16 bits")
        if not 1 <= self.pattern_capacity <= 0xFFFFFFFF:
            raise ValueError("pattern_capacity must fit in 32 bits")
        if len(self.reset_policy) != 2 or not all(isinstance(p, ResetPolicy) for p in self.reset_policy):
            raise ValueError("reset_policy must be a pair of ResetPolicy")


@dataclass
class Header:
    width: int
    height: int
    soft_radius: int = 0
    pattern_capacity: int = DEFAULT_CAPACITY
    segmented: bool = False
    reset_policy: tuple = DEFAULT_POLICY
    fill: int = UNSEGMENTED_FILL
    boxes: list = field(default_factory=list)

    def pack(self) -> bytes:
        out = bytearray(MAGIC)
        out += struct.pack(
            ">BIIBHI", VERSION, self.width, self.height, int(self.segmented),
            self.soft_radius, self.pattern_capacity,
        )
        if self.segmented:
            pat, pal = self.reset_policy
            out.append(_POLICY_CODES[pat] << 4 | _POLICY_CODES[pal])
            out += self.fill.to_bytes(3, "big")
            out.append(len(self.boxes))
            for b in self.boxes:
                out += struct.pack(">HHHH", *b)
        return bytes(out)

    @classmethod
    def unpack(cls, data):
        """Parse and validate a header; returns ``(header, offset)``."""
        if len(data) < 20:
            raise StreamError("truncated header")
        if data[:4] != MAGIC:
            raise StreamError("bad magic")
        version, width, height, flags, radius, capacity = struct.unpack_from(">BIIBHI", data, 4)
        if version != VERSION:
            raise StreamError(f"unsupported version {version}")
        if width < 1 or height < 1:
            raise StreamError("image dimensions must be positive")
        if flags & ~1:
            raise StreamError("unknown header flags")
        if capacity < 1:
            raise StreamError("pattern capacity must be positive")
        hdr = cls(width, height, radius, capacity)
        pos = 20
        if flags & 1:
            if len(data) < pos + 5:
                raise StreamError("truncated header")
            code = data[pos]
            try:
                hdr.reset_policy = (_POLICY_FROM_CODE[code >> 4], _POLICY_FROM_CODE[code & 0xF])
            except KeyError:
                raise StreamError(f"bad reset policy code {code:#x}") from None
            hdr.segmented = True
            hdr.fill = int.from_bytes(data[pos + 1 : pos + 4], "big")
            count = data[pos + 4]
            pos += 5
            if len(data) < pos + 8 * count:
                raise StreamError("truncated box list")
            hdr.boxes = [BoundingBox(*struct.unpack_from(">HHHH", data, pos + 8 * i)) for i in range(count)]
            pos += 8 * count
            validate_boxes(hdr.boxes, width, height)
        return hdr, pos


def validate_boxes(boxes, width, height):
    if not boxes:
        raise StreamError("segmented stream without boxes")
    if len(boxes) > MAX_BOXES:
        raise StreamError("too many boxes")
    for b in boxes:
        if not b.is_valid(width, height):
            raise StreamError(f"box {tuple(b)} outside {width}x{height} image")
    if sorted(boxes, key=box_order) != list(boxes):
        raise StreamError("boxes not in (y0, x0) order")
    for i, a in enumerate(boxes):
        for b in boxes[i + 1 :]:
            if a.intersection(b):
                raise StreamError(f"boxes {tuple(a)} and {tuple(b)} overlap")


@dataclass
class SegmentationResult:
    grid: object
    components: np.ndarray
    candidates: list
    refined: list
    boxes: list
    top_colours: list


def segment_image(img: Pixmap, seg=SegmenterConfig(), ref=RefinerConfig()):
    """Run classification, candidate extraction, border refinement and overlap removal."""
    grid = classify_blocks(img, seg)
    components = label_components(grid)
    candidates = extract_candidates(grid, seg, components)
    top = [c for c, _ in top_k_colours(img, ref.top_k)]
    refined = []
    if candidates:
        mask = top_colour_mask(img, top)
        refined = [refine_with_mask(mask, b, ref) for b in candidates]
    boxes = resolve_overlaps(refined)
    return SegmentationResult(grid, components, candidates, refined, boxes, top)


@dataclass
class EncodeResult:
    data: bytes
    boxes: list
    fill: int
    stats: StageStats
    pass_stats: list

    @property
    def segmented(self):
        return bool(self.boxes)

    def summary(self):
        return {
            "bytes": len(self.data),
            "boxes": len(self.boxes),
            "segmented": self.segmented,
            "stats": self.stats.as_dict(),
        }


def _choose_boxes(img, cfg):
    if cfg.force_unsegmented:
        return []
    if img.width > MAX_COORD or img.height > MAX_COORD:
        log.info("image too large for 16-bit box coordinates; coding unsegmented")
        return []
    boxes = segment_image(img, cfg.segmenter, cfg.refiner).boxes
    if len(boxes) > MAX_BOXES:
        log.info("%d boxes exceed the header limit; coding unsegmented", len(boxes))
        return []
    return boxes


def encode_image(img: Pixmap, cfg=CodecConfig(), boxes=None, observer=None) -> EncodeResult:
    """Encode ``img``.

    ``boxes`` overrides the segmentation (must be valid and non-overlapping);
    ``observer(model)`` is called after every coded pixel.
    """
    if boxes is None:
        boxes = _choose_boxes(img, cfg)
    else:
        boxes = sorted(boxes, key=box_order)
        if boxes:
            if img.width > MAX_COORD or img.height > MAX_COORD:
                raise ValueError("box coordinates need width and height <= 65535")
            validate_boxes(boxes, img.width, img.height)
    packed = img.packed()
    model = ScfModel(cfg.soft_radius, cfg.pattern_capacity)
    hdr = Header(img.width, img.height, cfg.soft_radius, cfg.pattern_capacity)

    if not boxes:
        enc = RangeEncoder()
        encode_region(model, enc, packed.tolist(), UNSEGMENTED_FILL, observer)
        data = hdr.pack() + enc.flush()
        return EncodeResult(data, [], UNSEGMENTED_FILL, model.stats, [model.stats])

    fill = top_k_colours(img, 1)[0][0].packed()
    hdr.segmented = True
    hdr.reset_policy = cfg.reset_policy
    hdr.fill = fill
    hdr.boxes = boxes

    background = packed.copy()
    for b in boxes:
        background[b.y0 : b.y1, b.x0 : b.x1] = fill
    enc = RangeEncoder()
    encode_region(model, enc, background.tolist(), fill, observer)
    pass_a = enc.flush()
    stats_a = model.stats
    model.stats = StageStats()

    model.apply_reset_policy(cfg.reset_policy)
    enc = RangeEncoder()
    for b in boxes:
        encode_region(model, enc, packed[b.y0 : b.y1, b.x0 : b.x1].tolist(), fill, observer)
    pass_b = enc.flush()
    stats_b = model.stats

    data = hdr.pack() + struct.pack(">I", len(pass_a)) + pass_a + pass_b
    return EncodeResult(data, boxes, fill, stats_a + stats_b, [stats_a, stats_b])


def encode(img: Pixmap, cfg=CodecConfig(), boxes=None) -> bytes:
    return encode_image(img, cfg, boxes).data


def _decode_pass(model, payload, regions, fill, observer=None):
    dec = RangeDecoder(payload)
    try:
        out = [decode_region(model, dec, w, h, fill, observer) for w, h in regions]
    except TruncatedStreamError as e:
        raise StreamError(str(e)) from e
    except ValueError as e:
        raise StreamError(str(e)) from e
    if not dec.exhausted():
        raise StreamError("trailing bytes after payload")
    return out


def decode(data: bytes, observer=None) -> Pixmap:
    """Decode a stream produced by :func:`encode`.

    ``observer(model)`` is called after every decoded pixel (test hook).
    """
    hdr, pos = Header.unpack(data)
    model = ScfModel(hdr.soft_radius, hdr.pattern_capacity)
    size = [(hdr.width, hdr.height)]
    if not hdr.segmented:
        (rows,) = _decode_pass(model, data[pos:], size, UNSEGMENTED_FILL, observer)
        return Pixmap.from_packed(np.array(rows, dtype=np.uint32))

    if len(data) < pos + 4:
        raise StreamError("truncated stream")
    (len_a,) = struct.unpack_from(">I", data, pos)
    pos += 4
    if len(data) < pos + len_a:
        raise StreamError("truncated pass-A payload")
    (rows,) = _decode_pass(model, data[pos : pos + len_a], size, hdr.fill, observer)
    background = Pixmap.from_packed(np.array(rows, dtype=np.uint32))

    model.stats = StageStats()
    model.apply_reset_policy(hdr.reset_policy)
    regions = [(b.width, b.height) for b in hdr.boxes]
    blocks = _decode_pass(model, data[pos + len_a :], regions, hdr.fill, observer)
    segments = [
        (b, Pixmap.from_packed(np.array(rows, dtype=np.uint32)))
        for b, rows in zip(hdr.boxes, blocks)
    ]
    return reconstruct(background, segments)


def reconstruct(background: Pixmap, segments) -> Pixmap:
    """Copy each ``(box, block)`` segment into ``background``."""
    out = background.array.copy()
    boxes = [b for b, _ in segments]
    for i, a in enumerate(boxes):
        if not a.is_valid(background.width, background.height):
            raise ValueError(f"box {tuple(a)} outside the image")
        for b in boxes[i + 1 :]:
            if a.intersection(b):
                raise ValueError(f"boxes {tuple(a)} and {tuple(b)} overlap")
    for box, block in segments:
        arr = block.array if isinstance(block, Pixmap) else np.asarray(block, dtype=np.uint8)
        if arr.shape != (box.height, box.width, 3):
            raise ValueError(f"segment shape {arr.shape} does not match box {tuple(box)}")
        out[box.y0 : box.y1, box.x0 : box.x1] = arr
    return Pixmap(out)
