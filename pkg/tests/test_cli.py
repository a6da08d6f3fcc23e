import json

import numpy as np
import pytest

from scfseg import corpus
from scfseg.cli import build_parser, main, summarise
from scfseg.pixmap import load_image, save_image


@pytest.fixture
def images(tmp_path):
    rng = np.random.default_rng(9)
    flat = tmp_path / "flat.ppm"
    save_image(corpus.flat(48, 40, (10, 20, 30)), flat)
    mixed_img, rects = corpus.mixed(192, 176, rng, k=1, min_size=64, max_size=72, background="flat")
    mixed = tmp_path / "mixed.ppm"
    save_image(mixed_img, mixed)
    return flat, mixed, rects[0]


def test_encode_flat(images, tmp_path, capsys):
    flat, _, _ = images
    assert main(["encode", str(flat), str(tmp_path / "f.scf")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["boxes"] == 0 and out["bytes"] == (tmp_path / "f.scf").stat().st_size
    assert out["stats"]["stage1"] + out["stats"]["stage2"] + out["stats"]["stage3"] == 48 * 40


def test_encode_decode_mixed(images, tmp_path, capsys):
    _, mixed, _ = images
    stream, back = tmp_path / "m.scf", tmp_path / "m.ppm"
    assert main(["encode", str(mixed), str(stream)]) == 0
    assert json.loads(capsys.readouterr().out)["boxes"] >= 1
    assert main(["decode", str(stream), str(back)]) == 0
    assert load_image(back) == load_image(mixed)


def test_flag_zero_stream_decodes(images, tmp_path):
    _, mixed, _ = images
    stream, back = tmp_path / "u.scf", tmp_path / "u.ppm"
    assert main(["encode", "--force-unsegmented", str(mixed), str(stream)]) == 0
    assert stream.read_bytes()[13] == 0
    assert main(["decode", str(stream), str(back)]) == 0
    assert load_image(back) == load_image(mixed)


def test_encode_missing_file(tmp_path, capsys):
    assert main(["encode", str(tmp_path / "missing.ppm"), str(tmp_path / "x")]) != 0
    assert "error" in capsys.readouterr().err


def test_decode_corrupt_stream(tmp_path):
    bad = tmp_path / "bad.scf"
    bad.write_bytes(b"SCFS\x01garbage")
    assert main(["decode", str(bad), str(tmp_path / "o.ppm")]) != 0


def test_segment_outputs(images, tmp_path, capsys):
    flat, mixed, rect = images
    assert main(["segment", str(flat), str(tmp_path / "f")]) == 0
    assert json.loads(capsys.readouterr().out) == []
    assert main(["segment", str(mixed), str(tmp_path / "m")]) == 0
    boxes = json.loads(capsys.readouterr().out)
    assert boxes == [rect.to_dict()]
    assert json.loads((tmp_path / "m_boxes.json").read_text()) == boxes
    for suffix in ("blocks", "candidates", "refined"):
        assert load_image(tmp_path / f"m_{suffix}.ppm").width == 192


def test_segment_invalid_file(tmp_path):
    bad = tmp_path / "bad.ppm"
    bad.write_bytes(b"not an image")
    assert main(["segment", str(bad), str(tmp_path / "o")]) != 0


def test_bench_table(tmp_path, capsys):
    rng = np.random.default_rng(4)
    for i in range(3):
        img, _ = corpus.mixed(176, 160, rng, k=1, min_size=64, max_size=80)
        save_image(img, tmp_path / f"m{i}.ppm")
    assert main(["bench", str(tmp_path), "--json"]) == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    rows = {r["config"]: r for r in lines if "config" in r}
    assert rows["segmented:keep/remove"]["total_bytes"] < rows["unsegmented"]["total_bytes"]
    assert min(r["percent"] for r in rows.values()) == 100.0
    assert sum("file" in l for l in lines) == 3


def test_bench_all_policies_parallel(tmp_path, capsys):
    save_image(corpus.flat(32, 32), tmp_path / "a.ppm")
    assert main(["bench", str(tmp_path), "--all-policies", "--jobs", "2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 1 + 1 + 9


def test_bench_empty_corpus(tmp_path):
    assert main(["bench", str(tmp_path)]) != 0


def test_bench_reports_failures_without_sizes():
    results = [("a", {"x": 10, "y": 12}), ("b", {"x": None, "y": 5})]
    rows, failed = summarise(results, ["x", "y"])
    assert failed == ["b"]
    assert [r["total_bytes"] for r in rows] == [10, 12]
    assert rows[1]["percent"] == 120.0


def test_every_codec_flag_is_exposed():
    args = build_parser().parse_args(
        ["encode", "a", "b", "--block-size", "8", "--colour-threshold", "40", "--min-blocks", "4",
         "--min-natural-fraction", "0.5", "--min-avg-colours", "30", "--top-k", "5", "--max-adjust", "7",
         "--reset-policy", "remove", "resetcounts", "--soft-radius", "12", "--pattern-capacity", "99",
         "--force-unsegmented"]
    )
    from scfseg.cli import config_from_args
    cfg = config_from_args(args)
    assert cfg.segmenter.block_size == 8 and cfg.refiner.max_adjust == 7
    assert cfg.reset_policy[0].value == "remove" and cfg.reset_policy[1].value == "resetcounts"
    assert cfg.soft_radius == 12 and cfg.pattern_capacity == 99 and cfg.force_unsegmented


def test_invalid_config_is_an_error(images, tmp_path):
    flat, _, _ = images
    assert main(["encode", "--max-adjust", "20", str(flat), str(tmp_path / "x")]) != 0
