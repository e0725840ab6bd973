"""Build a self-contained demo study directory from phantoms.

Produces the default 180-stimulus layout (three real pools of 30, three
model families of 30) using freshly initialized translators, so the
service and the browser client can be exercised without any trained
models or clinical data.

Usage: python3 -m densaug.reader_study.demo OUT_DIR [SEED]
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

from ..phantom import CorpusConfig, generate_corpus
from ..records import Health, Manifest
from ..translator import CycleGanTranslator
from ..translator.registry import ModelKey, ModelRegistry
from .stimuli import StudyConfig, build_stimulus_set

CANVAS = (128, 80)


def build_demo_study(out_dir: Path | str, seed: int = 0, per_cell: int = 30) -> Path:
    out_dir = Path(out_dir)
    corpus = generate_corpus(
        CorpusConfig(
            counts={"A": {"normal": 3 * per_cell}, "D": {"normal": 3 * per_cell}},
            seed=seed,
            canvas=CANVAS,
        )
    )
    low = [r for r in corpus if r.health is Health.NORMAL and r.id.startswith("PH-A")]
    high = [r for r in corpus if r.id.startswith("PH-D")]
    pools = {}
    for i, tag in enumerate(("SRC1", "SRC2", "SRC3")):
        chunk = [replace(r, dataset_tag=tag) for r in high[i * per_cell : (i + 1) * per_cell]]
        pools[tag] = Manifest(records=chunk)

    registry = ModelRegistry()
    low_manifest = Manifest(records=low)
    for i, family in enumerate(("GEN1", "GEN2", "GEN3")):
        model = CycleGanTranslator(
            max_epochs=0, image_size=CANVAS, ngf=8, ndf=8, n_res_blocks=2, seed=seed + i
        )
        model.fit(low_manifest, Manifest(records=high))
        registry.register(ModelKey(family, "BOTH"), model)

    config = StudyConfig(
        real_per_dataset=per_cell, synthetic_per_family=per_cell, shuffle_seed=seed
    )
    build_stimulus_set(pools, low_manifest, registry, config, out_dir)
    return out_dir


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "demo_study"
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    path = build_demo_study(target, seed)
    print(f"demo study written to {path}")
