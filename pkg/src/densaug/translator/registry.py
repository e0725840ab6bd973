"""Per-dataset, per-view translator registry.

Small datasets get one model covering both views; large datasets get
separate CC and MLO models. With one small and two large datasets this
yields the five-model layout the augmentation strategies expect.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..records import Health, Manifest, View
from .cyclegan import CycleGanTranslator, TranslatorConfig, train_cyclegan

VIEW_SCOPES = ("CC", "MLO", "BOTH")

# Datasets with fewer healthy training images than this train one BOTH-view model.
DEFAULT_VIEW_SPLIT_THRESHOLD = 200


@dataclass(frozen=True)
class ModelKey:
    family: str
    view_scope: str

    def __post_init__(self) -> None:
        if self.view_scope not in VIEW_SCOPES:
            raise ValueError(f"view_scope must be one of {VIEW_SCOPES}: {self.view_scope!r}")

    def __str__(self) -> str:
        return f"{self.family}-{self.view_scope}"


def plan_registry(
    datasets: dict[str, tuple[Manifest, Manifest]],
    view_split_threshold: int = DEFAULT_VIEW_SPLIT_THRESHOLD,
) -> list[ModelKey]:
    """Decide the per-dataset model layout from healthy-source set sizes."""
    keys: list[ModelKey] = []
    for family in sorted(datasets):
        source, target = datasets[family]
        n = min(len(source), len(target))
        if n >= view_split_threshold:
            keys.append(ModelKey(family, "CC"))
            keys.append(ModelKey(family, "MLO"))
        else:
            keys.append(ModelKey(family, "BOTH"))
    return keys


class ModelRegistry:
    """Keyed store of trained translators; keys are unique and enumerable."""

    def __init__(self) -> None:
        self._models: dict[ModelKey, CycleGanTranslator] = {}

    def register(self, key: ModelKey, model: CycleGanTranslator) -> None:
        if key in self._models:
            raise ValueError(f"duplicate registry key: {key}")
        model.model_key = str(key)
        self._models[key] = model

    def keys(self) -> list[ModelKey]:
        return sorted(self._models, key=str)

    def families(self) -> list[str]:
        return sorted({k.family for k in self._models})

    def __len__(self) -> int:
        return len(self._models)

    def __contains__(self, key: ModelKey) -> bool:
        return key in self._models

    def get(self, key: ModelKey) -> CycleGanTranslator:
        return self._models[key]

    def model_for(self, family: str, view: View | str) -> CycleGanTranslator:
        """Resolve the model serving (family, view): exact view first, then BOTH."""
        view = View(view).value
        for scope in (view, "BOTH"):
            key = ModelKey(family, scope)
            if key in self._models:
                return self._models[key]
        raise KeyError(
            f"no translator for family={family!r} view={view}: registry has "
            f"{[str(k) for k in self.keys()]}"
        )

    # -- persistence ---------------------------------------------------------

    def save(self, out_dir: Path | str) -> Path:
        """Write all checkpoints plus an index JSON; returns the index path."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for key in self.keys():
            rel = f"{key}.pt"
            self._models[key].save_checkpoint(out_dir / rel)
            entries.append({"family": key.family, "view_scope": key.view_scope, "path": rel})
        index = out_dir / "registry.json"
        index.write_text(json.dumps({"models": entries}, indent=2, sort_keys=True))
        return index

    @classmethod
    def load(cls, index_path: Path | str) -> "ModelRegistry":
        index_path = Path(index_path)
        if index_path.is_dir():
            index_path = index_path / "registry.json"
        doc = json.loads(index_path.read_text())
        reg = cls()
        for entry in doc["models"]:
            key = ModelKey(entry["family"], entry["view_scope"])
            reg.register(key, CycleGanTranslator.load_checkpoint(index_path.parent / entry["path"]))
        return reg


def _records_for_scope(manifest: Manifest, scope: str) -> Manifest:
    if scope == "BOTH":
        return manifest
    return manifest.filtered(lambda r: r.view is View(scope))


def build_registry(
    datasets: dict[str, tuple[Manifest, Manifest]],
    config: TranslatorConfig | None = None,
    view_split_threshold: int = DEFAULT_VIEW_SPLIT_THRESHOLD,
    train_fn=None,
) -> ModelRegistry:
    """Train one translator per planned key and register it.

    ``datasets`` maps family tag -> (healthy low-density manifest, healthy
    high-density manifest). ``train_fn`` may replace the trainer in tests.
    """
    config = config or TranslatorConfig()
    train = train_fn or (lambda src, tgt, cfg: train_cyclegan(src, tgt, cfg)[0])
    registry = ModelRegistry()
    for key in plan_registry(datasets, view_split_threshold):
        source, target = datasets[key.family]
        for manifest, name in ((source, "source"), (target, "target")):
            bad = [r.id for r in manifest if r.health is not Health.NORMAL]
            if bad:
                raise ValueError(f"{key} {name} manifest contains annotated records: {bad[:3]}")
        src = _records_for_scope(source, key.view_scope)
        tgt = _records_for_scope(target, key.view_scope)
        model = train(src, tgt, config)
        registry.register(key, model)
    return registry
