"""Detection training-set construction with density-balancing synthetic companions.

Strategies: BASELINE passes the (D-policy-filtered) real set through
unchanged; SINGLE_SOURCE adds one translation per real mammogram from the
named model family (matching view); COMBINED_ALL adds one translation per
family, three in total. The real BI-RADS D policy runs first: either all
real D records are excluded, or a seeded sample of a fixed fraction enters
training while the remainder is reserved for test/validation.

Translations are precomputed into an on-disk cache keyed by (source id,
model key), so every detector seed trains against the identical synthetic
set.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .density import map_density
from .records import DensityCategory, MammogramRecord, Manifest
from .storage import read_png, record_from_meta, record_to_meta, write_png
from .translator.registry import ModelRegistry

STRATEGIES = ("BASELINE", "SINGLE_SOURCE", "COMBINED_ALL")


@dataclass(frozen=True)
class AugmentationPlan:
    strategy: str
    model_family: str | None = None
    ratio: tuple[int, int] = (1, 1)
    include_real_d: bool = False
    real_d_train_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}: {self.strategy!r}")
        if tuple(self.ratio) not in ((1, 1), (1, 3)):
            raise ValueError(f"ratio must be (1, 1) or (1, 3): {self.ratio}")
        if not (0.0 <= self.real_d_train_fraction <= 1.0):
            raise ValueError(f"real_d_train_fraction must be in [0, 1]: {self.real_d_train_fraction}")
        if self.strategy == "SINGLE_SOURCE":
            if not self.model_family:
                raise ValueError("SINGLE_SOURCE requires model_family")
            if tuple(self.ratio) != (1, 1):
                raise ValueError("SINGLE_SOURCE uses a 1:1 real-to-synthetic ratio")
        if self.strategy == "COMBINED_ALL" and tuple(self.ratio) != (1, 3):
            raise ValueError("COMBINED_ALL uses a 1:3 real-to-synthetic ratio")
        object.__setattr__(self, "ratio", tuple(self.ratio))

    @classmethod
    def from_dict(cls, doc: dict) -> "AugmentationPlan":
        doc = dict(doc)
        if "ratio" in doc:
            doc["ratio"] = tuple(doc["ratio"])
        return cls(**doc)


@dataclass
class AugmentationResult:
    manifest: Manifest
    reserved_d: Manifest
    n_real: int
    n_synthetic: int
    sampled_d_ids: list[str] = field(default_factory=list)


def _is_real_d(record: MammogramRecord) -> bool:
    if record.density is None:
        raise ValueError(f"record {record.id} has no density measure; manifest not stratifiable")
    return map_density(record.density) is DensityCategory.D


class TranslationCache:
    """Disk cache of translated records keyed by (source id, model key)."""

    def __init__(self, cache_dir: Path | str | None):
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _paths(self, source_id: str, model_key: str) -> tuple[Path, Path]:
        safe = "".join(c if (c.isalnum() or c in "-_.") else "_" for c in f"{source_id}__{model_key}")
        return self.cache_dir / f"{safe}.png", self.cache_dir / f"{safe}.json"

    def get_or_translate(self, model, record: MammogramRecord) -> MammogramRecord:
        if self.cache_dir is None:
            return model.transform(record)
        png, meta = self._paths(record.id, model.model_key or "G")
        if png.exists() and meta.exists():
            cached = record_from_meta(json.loads(meta.read_text()))
            return cached.with_image(read_png(png))
        translated = model.transform(record)
        tmp_png = png.with_suffix(".png.tmp")
        write_png(translated.image, tmp_png, bit_depth=translated.bit_depth)
        tmp_png.replace(png)
        tmp_meta = meta.with_suffix(".json.tmp")
        tmp_meta.write_text(json.dumps(record_to_meta(translated, image_path=png.name), sort_keys=True))
        tmp_meta.replace(meta)
        return translated


def build_augmented_set(
    real: Manifest,
    registry: ModelRegistry,
    plan: AugmentationPlan,
    cache_dir: Path | str | None = None,
) -> AugmentationResult:
    """Apply the D policy, then mix in per-real synthetic companions."""
    d_records = [r for r in real if _is_real_d(r)]
    non_d = [r for r in real if not _is_real_d(r)]

    sampled_ids: list[str] = []
    if plan.include_real_d and d_records:
        k = int(np.floor(plan.real_d_train_fraction * len(d_records)))
        rng = np.random.Generator(np.random.PCG64(plan.seed))
        ordered = sorted(d_records, key=lambda r: r.id)
        chosen = rng.choice(len(ordered), size=k, replace=False) if k else np.array([], dtype=int)
        sampled_ids = [ordered[i].id for i in sorted(chosen)]
    sampled_set = set(sampled_ids)
    train_reals = non_d + [r for r in d_records if r.id in sampled_set]
    reserved = [r for r in d_records if r.id not in sampled_set]

    if plan.strategy == "BASELINE":
        families: list[str] = []
    elif plan.strategy == "SINGLE_SOURCE":
        if plan.model_family not in registry.families():
            raise ValueError(
                f"registry has no models for family {plan.model_family!r}; "
                f"available: {registry.families()}"
            )
        families = [plan.model_family]
    else:  # COMBINED_ALL
        families = registry.families()
        if len(families) != plan.ratio[1]:
            raise ValueError(
                f"COMBINED_ALL with ratio 1:{plan.ratio[1]} needs {plan.ratio[1]} model "
                f"families, registry has {len(families)}: {families}"
            )

    cache = TranslationCache(cache_dir)
    records: list[MammogramRecord] = []
    n_synthetic = 0
    for rec in train_reals:
        records.append(rec)
        for family in families:
            model = registry.model_for(family, rec.view)  # raises naming the gap
            records.append(cache.get_or_translate(model, rec))
            n_synthetic += 1

    manifest = Manifest(
        records=records,
        split_tag=real.split_tag,
        provenance={
            "plan": asdict(plan),
            "n_real": len(train_reals),
            "n_synthetic": n_synthetic,
            "sampled_real_d_ids": sampled_ids,
            "reserved_real_d_ids": [r.id for r in reserved],
        },
    )
    reserved_manifest = Manifest(records=reserved, split_tag="TEST", provenance="reserved real D pool")
    return AugmentationResult(
        manifest=manifest,
        reserved_d=reserved_manifest,
        n_real=len(train_reals),
        n_synthetic=n_synthetic,
        sampled_d_ids=sampled_ids,
    )
