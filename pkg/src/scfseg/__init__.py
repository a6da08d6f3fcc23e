"""Segmentation-aware lossless coding of screen content images."""

from .codec import CodecConfig, StreamError, decode, encode, encode_image, segment_image
from .pixmap import Colour, ImageFormatError, Pixmap, load_image, save_image, top_k_colours
from .refiner import RefinerConfig, refine_borders, resolve_overlaps
from .scf_core import ALL_POLICIES, DEFAULT_POLICY, ResetPolicy, StageStats
from .segmenter import BoundingBox, SegmenterConfig, classify_blocks, extract_candidates, label_components

__all__ = [
    "ALL_POLICIES",
    "BoundingBox",
    "CodecConfig",
    "Colour",
    "DEFAULT_POLICY",
    "ImageFormatError",
    "Pixmap",
    "RefinerConfig",
    "ResetPolicy",
    "SegmenterConfig",
    "StageStats",
    "StreamError",
    "classify_blocks",
    "decode",
    "encode",
    "encode_image",
    "extract_candidates",
    "label_components",
    "load_image",
    "refine_borders",
    "resolve_overlaps",
    "save_image",
    "segment_image",
    "top_k_colours",
]
