"""Manifest and image persistence.

Manifest JSON schema (one document per manifest)::

    {
      "split_tag": "TRAIN" | "VAL" | "TEST",
      "provenance": <string or object>,
      "records": [
        {
          "id": str,
          "dataset_tag": str,
          "view": "CC" | "MLO",
          "laterality": "L" | "R",
          "health": "NORMAL" | "WITH_MASSES",
          "image_path": str,            # relative to the manifest file
          "image_shape": [h, w],
          "bit_depth": 8 | 16,
          "density": {"kind": str, "value": num|str} | null,
          "annotations": [{"x": num, "y": num, "w": num, "h": num}, ...],
          "provenance": object | null   # synthetic records: source id + model key
        }, ...
      ]
    }

Images are stored losslessly as 16-bit (or 8-bit) grayscale PNG. Rejects
reports are JSON lines, one object per rejected record.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np
from PIL import Image

from .records import (
    DensityMeasure,
    MammogramRecord,
    Manifest,
    MassBox,
    relative_image_path,
)

MANIFEST_NAME = "manifest.json"


def write_png(image: np.ndarray, path: Path | str, bit_depth: int = 16) -> None:
    """Write a 2-D intensity grid as a grayscale PNG at the declared bit depth."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if bit_depth == 16:
        arr = np.ascontiguousarray(image.astype(np.uint16))
        Image.fromarray(arr).save(path, format="PNG")  # uint16 -> 16-bit grayscale
    elif bit_depth == 8:
        Image.fromarray(image.astype(np.uint8), mode="L").save(path, format="PNG")
    else:
        raise ValueError(f"unsupported bit depth: {bit_depth}")


def read_png(path: Path | str) -> np.ndarray:
    """Read a grayscale PNG into uint8/uint16 matching its bit depth."""
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected single-channel image, got shape {arr.shape}")
    if arr.dtype in (np.int32, np.int64):  # PIL mode "I"
        arr = arr.astype(np.uint16)
    return arr


def record_to_meta(record: MammogramRecord, image_path: str | None = None) -> dict:
    return {
        "id": record.id,
        "dataset_tag": record.dataset_tag,
        "view": record.view.value,
        "laterality": record.laterality.value,
        "health": record.health.value,
        "image_path": image_path if image_path is not None else record.image_path,
        "image_shape": list(record.image_shape),
        "bit_depth": record.bit_depth,
        "density": (
            None
            if record.density is None
            else {"kind": record.density.kind.value, "value": record.density.value}
        ),
        "annotations": [{"x": b.x, "y": b.y, "w": b.w, "h": b.h} for b in record.annotations],
        "provenance": record.provenance,
    }


def record_from_meta(meta: dict) -> MammogramRecord:
    density = meta.get("density")
    return MammogramRecord(
        id=meta["id"],
        dataset_tag=meta["dataset_tag"],
        view=meta["view"],
        laterality=meta["laterality"],
        health=meta["health"],
        image_shape=tuple(meta["image_shape"]),
        bit_depth=meta.get("bit_depth", 16),
        image_path=meta.get("image_path"),
        density=None if density is None else DensityMeasure(density["kind"], density["value"]),
        annotations=[MassBox(**b) for b in meta.get("annotations", [])],
        provenance=meta.get("provenance"),
    )


def save_manifest(manifest: Manifest, out_dir: Path | str, write_images: bool = True) -> Path:
    """Persist a manifest under ``out_dir``; returns the manifest.json path.

    Records with in-memory pixels are written as PNGs under ``out_dir`` and
    referenced by relative path; records that only carry an ``image_path``
    keep it verbatim.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for rec in manifest:
        rel = rec.image_path
        if rec.image is not None and write_images:
            rel = relative_image_path(rec)
            write_png(rec.image, out_dir / rel, bit_depth=rec.bit_depth)
        rows.append(record_to_meta(rec, image_path=rel))
    doc = {
        "split_tag": manifest.split_tag.value,
        "provenance": manifest.provenance,
        "records": rows,
    }
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return path


def load_manifest(path: Path | str, load_images: bool = False) -> Manifest:
    """Load a manifest.json; optionally materialize all record images."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    doc = json.loads(path.read_text())
    root = path.parent
    records = []
    for meta in doc["records"]:
        rec = record_from_meta(meta)
        if load_images:
            rec = load_record_image(rec, root)
        records.append(rec)
    return Manifest(
        records=records,
        split_tag=doc.get("split_tag", "TRAIN"),
        provenance=doc.get("provenance", ""),
    )


def load_record_image(record: MammogramRecord, root: Path | str) -> MammogramRecord:
    if record.image is not None:
        return record
    if not record.image_path:
        raise ValueError(f"record {record.id} has neither pixels nor an image path")
    return record.with_image(read_png(Path(root) / record.image_path))


def write_rejects_report(rows: list[dict], path: Path | str) -> Path:
    """Write a rejects report as JSON lines (one object per rejected record)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


def manifest_content_hash(manifest: Manifest) -> str:
    """SHA-256 over record metadata and pixel contents; stable across runs."""
    h = hashlib.sha256()
    for rec in manifest:
        meta = record_to_meta(rec, image_path="")
        h.update(json.dumps(meta, sort_keys=True).encode())
        if rec.image is not None:
            h.update(np.ascontiguousarray(rec.image).tobytes())
    return h.hexdigest()


def rebase_manifest_paths(manifest: Manifest, old_root: Path | str, new_root: Path | str) -> Manifest:
    """Rewrite record image paths so they stay valid from a new manifest location."""
    import os as _os

    old_root = Path(old_root).resolve()
    new_root = Path(new_root).resolve()
    records = []
    for rec in manifest:
        if rec.image_path and rec.image is None:
            absolute = (old_root / rec.image_path).resolve()
            rec = replace_record_path(rec, _os.path.relpath(absolute, new_root))
        records.append(rec)
    return Manifest(records=records, split_tag=manifest.split_tag, provenance=manifest.provenance)


def replace_record_path(record: MammogramRecord, new_path: str) -> MammogramRecord:
    from dataclasses import replace

    return replace(record, image_path=new_path)


def atomic_write_text(path: Path | str, text: str) -> None:
    """Write text atomically (tmp file + rename) so readers never see partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
