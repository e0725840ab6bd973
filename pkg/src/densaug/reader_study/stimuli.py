"""Stimulus-set construction for the blinded real-vs-synthetic study.

The default composition is 90 real high-density images (30 per source
dataset) plus 90 synthetic ones (30 per generating model family),
balanced by view inside every cell. Display copies are downsized to a
maximum height and written as 8-bit PNGs. Stimulus ids are assigned after
a seeded shuffle of the combined list so that neither the id nor the
serving order leaks which images are synthetic.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from ..records import MammogramRecord, Manifest, View
from ..storage import write_png

STUDY_FILE = "stimuli.json"
CONFIG_FILE = "study.json"


@dataclass(frozen=True)
class StudyConfig:
    real_per_dataset: int = 30
    synthetic_per_family: int = 30
    max_height: int = 532
    n_choices: int = 6
    shuffle_seed: int = 0

    def __post_init__(self) -> None:
        for name in ("real_per_dataset", "synthetic_per_family"):
            count = getattr(self, name)
            if count <= 0 or count % 2:
                raise ValueError(f"{name} must be positive and even for view balance: {count}")


@dataclass
class Stimulus:
    """One study item; ``truth`` and model fields never leave the server."""

    id: str
    image_path: str
    truth: str  # "REAL" | "SYNTHETIC"
    source_dataset: str
    view: str
    model_family: str | None = None
    model_key: str | None = None

    def public_payload(self, index: int, total: int) -> dict:
        return {
            "id": self.id,
            "index": index,
            "total": total,
            "image_url": f"/api/image/{self.id}.png",
        }


def downsize_for_display(record: MammogramRecord, max_height: int) -> np.ndarray:
    """Cap image height preserving aspect; returns an 8-bit display copy."""
    image = record.require_image().astype(np.float64) / record.max_value
    h, w = image.shape
    if h > max_height:
        scale = max_height / h
        image = ndimage.zoom(image, (scale, scale), order=1, mode="grid-constant", grid_mode=True)
        image = image[:max_height]
    return np.clip(np.rint(image * 255), 0, 255).astype(np.uint8)


def _take_balanced(
    records: list[MammogramRecord], count: int, rng: np.random.Generator, cell: str
) -> list[MammogramRecord]:
    chosen: list[MammogramRecord] = []
    for view in (View.CC, View.MLO):
        pool = [r for r in records if r.view is view]
        need = count // 2
        if len(pool) < need:
            raise ValueError(
                f"insufficient source images for cell {cell}/{view.value}: "
                f"need {need}, have {len(pool)}"
            )
        idx = rng.choice(len(pool), size=need, replace=False)
        chosen += [pool[i] for i in sorted(idx)]
    return chosen


def build_stimulus_set(
    real_pools: dict[str, Manifest],
    low_density_pool: Manifest,
    registry,
    config: StudyConfig,
    out_dir: Path | str,
) -> list[Stimulus]:
    """Assemble, downsize and persist the stimulus set; deterministic in the seed."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(config.shuffle_seed))

    items: list[tuple[MammogramRecord, str, str, str | None, str | None]] = []
    for tag in sorted(real_pools):
        for rec in _take_balanced(
            list(real_pools[tag].records), config.real_per_dataset, rng, f"real/{tag}"
        ):
            items.append((rec, "REAL", tag, None, None))
    low_records = list(low_density_pool.records)
    for family in registry.families():
        for rec in _take_balanced(
            low_records, config.synthetic_per_family, rng, f"synthetic/{family}"
        ):
            model = registry.model_for(family, rec.view)
            translated = model.transform(rec)
            items.append((translated, "SYNTHETIC", rec.dataset_tag, family, model.model_key))

    order = rng.permutation(len(items))
    stimuli: list[Stimulus] = []
    for new_index, item_index in enumerate(order):
        rec, truth, dataset, family, model_key = items[item_index]
        stim_id = f"S{new_index:04d}"
        display = downsize_for_display(rec, config.max_height)
        rel = f"images/{stim_id}.png"
        write_png(display, out_dir / rel, bit_depth=8)
        stimuli.append(
            Stimulus(
                id=stim_id,
                image_path=rel,
                truth=truth,
                source_dataset=dataset,
                view=rec.view.value,
                model_family=family,
                model_key=model_key,
            )
        )
    (out_dir / STUDY_FILE).write_text(
        json.dumps([asdict(s) for s in stimuli], indent=2, sort_keys=True)
    )
    (out_dir / CONFIG_FILE).write_text(json.dumps(asdict(config), indent=2, sort_keys=True))
    return stimuli


def load_stimuli(study_dir: Path | str) -> tuple[list[Stimulus], StudyConfig]:
    study_dir = Path(study_dir)
    stimuli = [Stimulus(**doc) for doc in json.loads((study_dir / STUDY_FILE).read_text())]
    config = StudyConfig(**json.loads((study_dir / CONFIG_FILE).read_text()))
    return stimuli, config


def reader_order(n_stimuli: int, reader_id: str, shuffle_seed: int) -> list[int]:
    """Per-reader presentation order: a seeded permutation of stimulus indices."""
    digest = hashlib.sha256(f"{shuffle_seed}/{reader_id}".encode()).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "big")))
    return [int(i) for i in rng.permutation(n_stimuli)]
