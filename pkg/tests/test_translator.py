"""Translator mechanics at tiny scale: guards, determinism, registry layout."""

from __future__ import annotations

import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from densaug.phantom import CorpusConfig, generate_corpus
from densaug.records import DensityKind, Health, Manifest, View
from densaug.translator import (
    CycleGanTranslator,
    ModelKey,
    ModelRegistry,
    TranslatorConfig,
    build_registry,
    plan_registry,
)

TINY = dict(image_size=(64, 40), ngf=4, ndf=4, n_res_blocks=2)


@pytest.fixture(scope="module")
def tiny_corpus():
    config = CorpusConfig(
        counts={"A": {"normal": 6, "with_masses": 2}, "D": {"normal": 6}},
        seed=3,
        canvas=(64, 40),
    )
    manifest = generate_corpus(config)
    low = [r for r in manifest if r.id.startswith("PH-A-N")]
    high = [r for r in manifest if r.id.startswith("PH-D-N")]
    masses = [r for r in manifest if r.annotations]
    return low, high, masses


def test_annotated_target_rejected(tiny_corpus):
    low, high, masses = tiny_corpus
    est = CycleGanTranslator(max_epochs=1, max_steps=1, **TINY)
    with pytest.raises(ValueError, match="healthy records only"):
        est.fit(low, high + masses[:1])
    with pytest.raises(ValueError, match="healthy records only"):
        est.fit(masses[:1], high)


def test_zero_step_model_equals_initialization(tiny_corpus):
    low, high, _ = tiny_corpus
    trained = CycleGanTranslator(max_epochs=0, seed=5, **TINY).fit(low, high)
    fresh = CycleGanTranslator(max_epochs=0, seed=5, **TINY)
    fresh._build_networks()
    for p1, p2 in zip(trained.g_.parameters(), fresh.g_.parameters()):
        np.testing.assert_array_equal(p1.detach().numpy(), p2.detach().numpy())
    out1 = trained.translate_image(low[0].image)
    out2 = trained.translate_image(low[0].image)
    np.testing.assert_array_equal(out1, out2)  # deterministic inference


def test_training_deterministic_under_seed(tiny_corpus):
    low, high, _ = tiny_corpus
    a = CycleGanTranslator(max_epochs=1, max_steps=4, seed=9, **TINY).fit(low, high)
    b = CycleGanTranslator(max_epochs=1, max_steps=4, seed=9, **TINY).fit(low, high)
    out_a = a.translate_image(low[0].image)
    out_b = b.translate_image(low[0].image)
    np.testing.assert_array_equal(out_a, out_b)
    assert a.train_log_.cycle_values() == b.train_log_.cycle_values()


def test_transform_preserves_annotations_and_marks_synthetic(tiny_corpus):
    low, high, masses = tiny_corpus
    est = CycleGanTranslator(max_epochs=1, max_steps=2, **TINY).fit(low, high)
    est.model_key = "PHANTOM-BOTH"
    record = masses[0]
    out = est.transform(record)
    assert out.annotations == record.annotations
    assert out.health == record.health
    assert out.view == record.view and out.laterality == record.laterality
    assert out.dataset_tag == f"{record.dataset_tag}-SYN"
    assert out.density.kind is DensityKind.BIRADS_DIRECT and out.density.value == "D"
    assert out.provenance == {"source_id": record.id, "model_key": "PHANTOM-BOTH"}
    assert out.image.shape == record.image.shape


def test_transform_rejects_wrong_dims(tiny_corpus):
    low, high, _ = tiny_corpus
    est = CycleGanTranslator(max_epochs=0, **TINY).fit(low, high)
    with pytest.raises(ValueError, match="does not match model"):
        est.translate_image(np.zeros((32, 32), dtype=np.uint16))


def test_unfitted_transform_raises():
    with pytest.raises(NotFittedError):
        CycleGanTranslator().translate_image(np.zeros((256, 160), dtype=np.uint16))


def test_checkpoint_roundtrip(tmp_path, tiny_corpus):
    low, high, _ = tiny_corpus
    est = CycleGanTranslator(max_epochs=1, max_steps=2, seed=2, **TINY).fit(low, high)
    est.model_key = "PHANTOM-BOTH"
    path = est.save_checkpoint(tmp_path / "ck.pt", epoch=1)
    loaded = CycleGanTranslator.load_checkpoint(path)
    np.testing.assert_array_equal(
        est.translate_image(low[0].image), loaded.translate_image(low[0].image)
    )
    assert loaded.model_key == "PHANTOM-BOTH"
    assert loaded.get_params()["ngf"] == 4


def test_train_log_csv(tmp_path, tiny_corpus):
    low, high, _ = tiny_corpus
    est = CycleGanTranslator(max_epochs=1, max_steps=3, **TINY).fit(low, high)
    path = est.train_log_.to_csv(tmp_path / "log.csv")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("step,epoch,adv_g_xy")
    assert len(lines) == 4


def test_periodic_checkpoints(tmp_path, tiny_corpus):
    from densaug.records import Manifest
    from densaug.translator import TranslatorConfig, train_cyclegan

    low, high, _ = tiny_corpus
    config = TranslatorConfig(max_epochs=2, checkpoint_every=1, **TINY)
    model, _ = train_cyclegan(
        Manifest(records=low), Manifest(records=high), config, checkpoint_dir=tmp_path / "ck"
    )
    assert (tmp_path / "ck" / "epoch0001.pt").exists()
    assert (tmp_path / "ck" / "epoch0002.pt").exists()
    resumed = CycleGanTranslator.load_checkpoint(tmp_path / "ck" / "epoch0002.pt")
    np.testing.assert_array_equal(
        model.translate_image(low[0].image), resumed.translate_image(low[0].image)
    )


# -- registry ------------------------------------------------------------------


def _stub_manifests(n: int):
    records = []
    for i in range(n):
        from densaug.records import MammogramRecord

        records.append(
            MammogramRecord(
                id=f"r{i}",
                dataset_tag="X",
                view=View.CC if i % 2 == 0 else View.MLO,
                laterality="L",
                health=Health.NORMAL,
                image_shape=(64, 40),
                image_path=f"r{i}.png",
            )
        )
    return Manifest(records=records)


def test_plan_registry_five_model_layout():
    datasets = {
        "SMALL": (_stub_manifests(40), _stub_manifests(40)),
        "BIG1": (_stub_manifests(300), _stub_manifests(250)),
        "BIG2": (_stub_manifests(400), _stub_manifests(500)),
    }
    keys = plan_registry(datasets, view_split_threshold=200)
    assert len(keys) == 5
    assert ModelKey("SMALL", "BOTH") in keys
    assert ModelKey("BIG1", "CC") in keys and ModelKey("BIG1", "MLO") in keys
    assert ModelKey("BIG2", "CC") in keys and ModelKey("BIG2", "MLO") in keys


def test_empty_registry_plan():
    assert plan_registry({}) == []


def test_registry_duplicate_key_rejected():
    registry = ModelRegistry()
    est = CycleGanTranslator(**TINY)
    registry.register(ModelKey("X", "BOTH"), est)
    with pytest.raises(ValueError, match="duplicate registry key"):
        registry.register(ModelKey("X", "BOTH"), est)


def test_registry_lookup_falls_back_to_both():
    registry = ModelRegistry()
    est = CycleGanTranslator(**TINY)
    registry.register(ModelKey("X", "BOTH"), est)
    assert registry.model_for("X", View.CC) is est
    with pytest.raises(KeyError, match="no translator for family='Y'"):
        registry.model_for("Y", View.CC)


def test_build_registry_trains_per_plan(tiny_corpus):
    low, high, _ = tiny_corpus
    datasets = {"PH": (Manifest(records=low), Manifest(records=high))}
    calls = []

    def stub_train(src, tgt, cfg):
        calls.append((len(src), len(tgt)))
        est = CycleGanTranslator(**TINY)
        est._build_networks()
        return est

    registry = build_registry(datasets, TranslatorConfig(**TINY), train_fn=stub_train)
    assert [str(k) for k in registry.keys()] == ["PH-BOTH"]
    assert calls == [(6, 6)]


def test_registry_save_load_roundtrip(tmp_path, tiny_corpus):
    low, high, _ = tiny_corpus
    est = CycleGanTranslator(max_epochs=0, **TINY).fit(low, high)
    registry = ModelRegistry()
    registry.register(ModelKey("PH", "BOTH"), est)
    registry.save(tmp_path / "reg")
    loaded = ModelRegistry.load(tmp_path / "reg")
    assert [str(k) for k in loaded.keys()] == ["PH-BOTH"]
    np.testing.assert_array_equal(
        est.translate_image(low[0].image),
        loaded.model_for("PH", "CC").translate_image(low[0].image),
    )
