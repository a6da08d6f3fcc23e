"""Command-line front end: encode, decode, segment, bench."""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import codec
from .pixmap import ImageFormatError, load_image, save_image
from .refiner import RefinerConfig, box_overlay
from .scf_core import ALL_POLICIES, DEFAULT_CAPACITY, ResetPolicy
from .segmenter import SegmenterConfig, block_overlay

log = logging.getLogger("scfseg")

IMAGE_SUFFIXES = {".ppm", ".png"}
_POLICY_CHOICES = [p.value for p in ResetPolicy]


def _add_config_flags(p):
    g = p.add_argument_group("codec configuration")
    g.add_argument("--block-size", type=int, default=16)
    g.add_argument("--colour-threshold", type=int, default=128)
    g.add_argument("--min-blocks", type=int, default=16)
    g.add_argument("--min-natural-fraction", type=float, default=0.60)
    g.add_argument("--min-avg-colours", type=float, default=128)
    g.add_argument("--top-k", type=int, default=10)
    g.add_argument("--max-adjust", type=int, default=15)
    g.add_argument(
        "--reset-policy", nargs=2, choices=_POLICY_CHOICES, default=["keep", "remove"],
        metavar=("PATTERNS", "PALETTE"),
        help="statistics handling between passes: keep | resetcounts | remove, "
        "for the pattern list and the colour palette",
    )
    g.add_argument("--soft-radius", type=int, default=0)
    g.add_argument("--pattern-capacity", type=int, default=DEFAULT_CAPACITY)
    g.add_argument("--force-unsegmented", action="store_true")


def config_from_args(args, **overrides) -> codec.CodecConfig:
    kw = dict(
        segmenter=SegmenterConfig(
            block_size=args.block_size,
            natural_colour_threshold=args.colour_threshold,
            min_blocks=args.min_blocks,
            min_natural_fraction=args.min_natural_fraction,
            min_avg_colours=args.min_avg_colours,
        ),
        refiner=RefinerConfig(top_k=args.top_k, max_adjust=args.max_adjust),
        reset_policy=tuple(ResetPolicy(v) for v in args.reset_policy),
        soft_radius=args.soft_radius,
        pattern_capacity=args.pattern_capacity,
        force_unsegmented=args.force_unsegmented,
    )
    kw.update(overrides)
    return codec.CodecConfig(**kw)


def cmd_encode(args):
    img = load_image(args.input)
    res = codec.encode_image(img, config_from_args(args))
    Path(args.output).write_bytes(res.data)
    print(json.dumps({"input": str(args.input), "output": str(args.output), **res.summary()}))
    return 0


def cmd_decode(args):
    img = codec.decode(Path(args.input).read_bytes())
    save_image(img, args.output)
    return 0


def cmd_segment(args):
    img = load_image(args.input)
    cfg = config_from_args(args)
    seg = codec.segment_image(img, cfg.segmenter, cfg.refiner)
    prefix = args.out_prefix
    save_image(block_overlay(img, seg.grid), f"{prefix}_blocks.ppm")
    save_image(box_overlay(img, seg.candidates, (255, 0, 0)), f"{prefix}_candidates.ppm")
    save_image(box_overlay(img, seg.boxes, (0, 200, 0)), f"{prefix}_refined.ppm")
    boxes = [b.to_dict() for b in seg.boxes]
    Path(f"{prefix}_boxes.json").write_text(json.dumps(boxes) + "\n")
    print(json.dumps(boxes))
    return 0


def _bench_one(path, configs):
    """Encode one file under every config; None marks a failed round trip."""
    img = load_image(path)
    sizes = {}
    for name, cfg in configs:
        data = codec.encode(img, cfg)
        try:
            ok = codec.decode(data) == img
        except codec.StreamError:
            ok = False
        sizes[name] = len(data) if ok else None
    return str(path), sizes


def bench_configs(args):
    base = config_from_args(args, force_unsegmented=False)
    configs = [("unsegmented", config_from_args(args, force_unsegmented=True))]
    policies = ALL_POLICIES if args.all_policies else [base.reset_policy]
    for pol in policies:
        name = f"segmented:{pol[0].value}/{pol[1].value}"
        configs.append((name, config_from_args(args, force_unsegmented=False, reset_policy=pol)))
    return configs


def run_bench(files, configs, jobs=1):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bench_one, files, [configs] * len(files)))
    else:
        results = [_bench_one(f, configs) for f in files]
    return sorted(results)


def summarise(results, names):
    """Per-config total bytes over images whose every round trip passed."""
    good = [(f, s) for f, s in results if all(v is not None for v in s.values())]
    totals = {n: sum(s[n] for _, s in good) for n in names}
    best = min(totals.values()) if good else 0
    rows = []
    for n in names:
        pct = 100.0 * totals[n] / best if best else float("nan")
        rows.append({"config": n, "images": len(good), "total_bytes": totals[n], "percent": round(pct, 2)})
    failed = [f for f, s in results if any(v is None for v in s.values())]
    return rows, failed


def cmd_bench(args):
    corpus = Path(args.corpus)
    files = sorted(p for p in corpus.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES) if corpus.is_dir() else []
    if not files:
        print(f"error: no .ppm/.png images in {corpus}", file=sys.stderr)
        return 2
    configs = bench_configs(args)
    results = run_bench(files, configs, args.jobs)
    rows, failed = summarise(results, [n for n, _ in configs])
    if args.json:
        for f, sizes in results:
            print(json.dumps({"file": f, "sizes": sizes}))
        for r in rows:
            print(json.dumps(r))
    else:
        print(f"{'config':<34}{'images':>8}{'total bytes':>14}{'percent':>10}")
        for r in rows:
            print(f"{r['config']:<34}{r['images']:>8}{r['total_bytes']:>14}{r['percent']:>9.2f}%")
    for f in failed:
        print(f"round trip FAILED: {f}", file=sys.stderr)
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="scfseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="compress an image")
    p.add_argument("input")
    p.add_argument("output")
    _add_config_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decompress a stream to PPM")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("segment", help="write segmentation debug images and box list")
    p.add_argument("input")
    p.add_argument("out_prefix")
    _add_config_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("bench", help="compare segmented and unsegmented coding over a directory")
    p.add_argument("corpus")
    _add_config_flags(p)
    p.add_argument("--all-policies", action="store_true", help="run all nine reset policies")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", action="store_true", help="emit JSON lines instead of a table")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    logging.basicConfig(
        level=os.environ.get("SCFSEG_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ImageFormatError, codec.StreamError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
