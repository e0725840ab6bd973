"""PNG round-trips, manifest persistence, content hashing."""

from __future__ import annotations

import json

import numpy as np

from densaug.records import Manifest
from densaug.storage import (
    load_manifest,
    manifest_content_hash,
    read_png,
    rebase_manifest_paths,
    save_manifest,
    write_png,
    write_rejects_report,
)


def test_png_16bit_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    image = rng.integers(0, 65536, size=(64, 48)).astype(np.uint16)
    write_png(image, tmp_path / "x.png", bit_depth=16)
    back = read_png(tmp_path / "x.png")
    assert back.dtype == np.uint16
    np.testing.assert_array_equal(back, image)


def test_png_8bit_roundtrip(tmp_path):
    image = np.arange(0, 256, dtype=np.uint8).reshape(16, 16)
    write_png(image, tmp_path / "x.png", bit_depth=8)
    np.testing.assert_array_equal(read_png(tmp_path / "x.png"), image)


def test_manifest_roundtrip_with_images(tmp_path, small_corpus):
    manifest = Manifest(records=small_corpus.records[:6], provenance={"note": "test"})
    path = save_manifest(manifest, tmp_path / "m")
    loaded = load_manifest(path, load_images=True)
    assert loaded.ids() == manifest.ids()
    assert loaded.provenance == {"note": "test"}
    for a, b in zip(manifest, loaded):
        np.testing.assert_array_equal(a.image, b.image)
        assert a.density == b.density
        assert a.annotations == b.annotations
        assert a.view == b.view and a.laterality == b.laterality and a.health == b.health


def test_manifest_loads_lazily(tmp_path, small_corpus):
    path = save_manifest(Manifest(records=small_corpus.records[:2]), tmp_path / "m")
    lazy = load_manifest(path)
    assert all(r.image is None and r.image_path for r in lazy)


def test_content_hash_is_stable(small_corpus):
    m1 = Manifest(records=small_corpus.records[:4])
    m2 = Manifest(records=small_corpus.records[:4])
    assert manifest_content_hash(m1) == manifest_content_hash(m2)
    m3 = Manifest(records=small_corpus.records[1:5])
    assert manifest_content_hash(m1) != manifest_content_hash(m3)


def test_rejects_report_jsonl(tmp_path):
    rows = [{"id": "a", "reason": "missing density measure"}, {"id": "b", "reason": "x"}]
    path = write_rejects_report(rows, tmp_path / "rejects.jsonl")
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert json.loads(lines[0])["id"] == "a"


def test_rebase_paths(tmp_path, small_corpus):
    src = tmp_path / "orig"
    path = save_manifest(Manifest(records=small_corpus.records[:2]), src)
    lazy = load_manifest(path)
    moved = rebase_manifest_paths(lazy, src, tmp_path / "elsewhere")
    out = save_manifest(moved, tmp_path / "elsewhere", write_images=False)
    roundtrip = load_manifest(out, load_images=True)
    np.testing.assert_array_equal(roundtrip.records[0].image, small_corpus.records[0].image)
