"""Operator command line wiring all pipeline stages into reproducible runs.

Every subcommand resolves its configuration (file values overridden by
flags), executes one stage, and writes a ``run_info.json`` next to its
outputs recording the resolved config, its hash, and the artifacts
produced. Exit codes: 0 ok, 1 stage failure, 2 usage error.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from pathlib import Path

import click

from . import __version__
from .augmentor import AugmentationPlan, build_augmented_set
from .density import stratify
from .detection import (
    SlidingWindowBackend,
    load_predictions,
    predict_all,
    save_predictions,
    train_detector,
)
from .fid import ReferenceEmbedder, bounds_report_csv, fid_bounds_protocol
from .froc import froc_curve, write_curve_csv
from .phantom import CorpusConfig, generate_corpus
from .records import Manifest
from .reporting import ReportGroup, StrategyResult, aggregate_seeds, emit_report, plot_froc_curves
from .storage import (
    load_manifest,
    manifest_content_hash,
    record_from_meta,
    rebase_manifest_paths,
    save_manifest,
    write_rejects_report,
)
from .translator import CycleGanTranslator, ModelRegistry, TranslatorConfig, train_cyclegan


def _config_hash(doc) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()


def _write_run_info(out_dir: Path, command: str, config, artifacts: list[Path], t0: float) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    info = {
        "command": command,
        "version": __version__,
        "config": config,
        "config_hash": _config_hash(config),
        "artifacts": [str(p) for p in artifacts],
        "elapsed_seconds": round(time.time() - t0, 3),
    }
    (out_dir / "run_info.json").write_text(json.dumps(info, indent=2, sort_keys=True, default=str))


def _load_json(path: str | None) -> dict:
    return json.loads(Path(path).read_text()) if path else {}


def _stage(fn):
    """Stage errors exit 1 with the message; usage errors keep click's exit 2."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except Exception as exc:  # noqa: BLE001 - single stage boundary
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Density-balancing augmentation pipeline for mass detection."""


# -- ingest -------------------------------------------------------------------


@main.command()
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@_stage
def ingest(records_path: str, out_dir: str) -> None:
    """Validate a record-listing JSON into a canonical manifest plus rejects report."""
    t0 = time.time()
    doc = _load_json(records_path)
    root = Path(records_path).parent
    accepted, rejects = [], []
    for meta in doc.get("records", []):
        try:
            rec = record_from_meta(meta)
            if rec.image_path and not (root / rec.image_path).exists():
                raise FileNotFoundError(f"image not found: {rec.image_path}")
            accepted.append(rec)
        except Exception as exc:  # noqa: BLE001 - per-record validation boundary
            rejects.append({"id": meta.get("id", "?"), "reason": str(exc)})
    manifest = Manifest(records=accepted, split_tag=doc.get("split_tag", "TRAIN"))
    manifest = rebase_manifest_paths(manifest, root, out_dir)
    out = Path(out_dir)
    artifacts = [save_manifest(manifest, out, write_images=False)]
    artifacts.append(write_rejects_report(rejects, out / "rejects.jsonl"))
    _write_run_info(out, "ingest", {"records": records_path, "n": len(accepted)}, artifacts, t0)
    click.echo(f"ingested {len(accepted)} records, rejected {len(rejects)}")


# -- phantom ------------------------------------------------------------------


@main.group()
def phantom() -> None:
    """Procedural phantom corpora."""


@phantom.command("gen")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@_stage
def phantom_gen(config_path: str, out_dir: str, seed: int | None) -> None:
    """Generate a phantom corpus from a JSON config."""
    t0 = time.time()
    doc = _load_json(config_path)
    if seed is not None:
        doc["seed"] = seed
    config = CorpusConfig.from_dict(doc)
    manifest = generate_corpus(config)
    out = Path(out_dir)
    artifacts = [save_manifest(manifest, out)]
    doc["content_hash"] = manifest_content_hash(manifest)
    _write_run_info(out, "phantom gen", doc, artifacts, t0)
    click.echo(f"generated {len(manifest)} phantoms (hash {doc['content_hash'][:12]})")


# -- stratify -----------------------------------------------------------------


@main.command("stratify")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@_stage
def stratify_cmd(manifest_path: str, out_dir: str) -> None:
    """Partition a manifest into the four density buckets plus a rejects report."""
    t0 = time.time()
    manifest = load_manifest(manifest_path)
    buckets = stratify(manifest)
    out = Path(out_dir)
    root = Path(manifest_path).parent if not Path(manifest_path).is_dir() else Path(manifest_path)
    artifacts = []
    for category, bucket in buckets.buckets.items():
        rebased = rebase_manifest_paths(bucket, root, out / category.name)
        artifacts.append(save_manifest(rebased, out / category.name, write_images=False))
    artifacts.append(write_rejects_report(buckets.reject_rows(), out / "rejects.jsonl"))
    _write_run_info(out, "stratify", {"manifest": manifest_path, "counts": buckets.counts()}, artifacts, t0)
    click.echo(json.dumps(buckets.counts()))


# -- translator ---------------------------------------------------------------


@main.command("train-translator")
@click.option("--source", "source_path", required=True, type=click.Path(exists=True))
@click.option("--target", "target_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@_stage
def train_translator(source_path, target_path, config_path, out_dir, seed) -> None:
    """Train the low-to-high-density translation model on two healthy manifests."""
    t0 = time.time()
    doc = _load_json(config_path)
    if seed is not None:
        doc["seed"] = seed
    config = TranslatorConfig.from_dict(doc)
    source = load_manifest(source_path, load_images=True)
    target = load_manifest(target_path, load_images=True)
    out = Path(out_dir)
    model, log = train_cyclegan(source, target, config, checkpoint_dir=out / "checkpoints")
    artifacts = [model.save_checkpoint(out / "translator.pt"), log.to_csv(out / "train_log.csv")]
    _write_run_info(out, "train-translator", doc, artifacts, t0)
    click.echo(f"trained {model.n_steps_} steps in {model.train_seconds_:.1f}s")


@main.command("translate")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@_stage
def translate_cmd(model_path, manifest_path, out_dir) -> None:
    """Translate every record in a manifest through a trained model."""
    t0 = time.time()
    model = CycleGanTranslator.load_checkpoint(model_path)
    manifest = load_manifest(manifest_path, load_images=True)
    translated = Manifest(
        records=[model.transform(r) for r in manifest],
        split_tag=manifest.split_tag,
        provenance={"translated_from": str(manifest_path), "model": str(model_path)},
    )
    out = Path(out_dir)
    artifacts = [save_manifest(translated, out)]
    _write_run_info(out, "translate", {"model": model_path, "manifest": manifest_path}, artifacts, t0)
    click.echo(f"translated {len(translated)} records")


# -- augmentation -------------------------------------------------------------


@main.command("build-augset")
@click.option("--real", "real_path", required=True, type=click.Path(exists=True))
@click.option("--registry", "registry_path", required=True, type=click.Path(exists=True))
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--cache", "cache_dir", type=click.Path(), default=None)
@_stage
def build_augset(real_path, registry_path, plan_path, out_dir, cache_dir) -> None:
    """Mix real records with cached synthetic companions per the augmentation plan."""
    t0 = time.time()
    plan = AugmentationPlan.from_dict(_load_json(plan_path))
    registry = ModelRegistry.load(registry_path)
    real = load_manifest(real_path, load_images=True)
    result = build_augmented_set(real, registry, plan, cache_dir=cache_dir)
    out = Path(out_dir)
    artifacts = [save_manifest(result.manifest, out / "train")]
    artifacts.append(save_manifest(result.reserved_d, out / "reserved_d"))
    config = {"plan": plan_path, "n_real": result.n_real, "n_synthetic": result.n_synthetic}
    _write_run_info(out, "build-augset", config, artifacts, t0)
    click.echo(f"train set: {result.n_real} real + {result.n_synthetic} synthetic")


# -- detection ----------------------------------------------------------------


@main.command("train-detector")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=0)
@click.option("--epochs", type=int, default=None)
@click.option("--predict", "predict_path", type=click.Path(exists=True), default=None,
              help="Optional manifest to run predictions on after training.")
@_stage
def train_detector_cmd(train_path, out_dir, seed, epochs, predict_path) -> None:
    """Train the reference detector (random horizontal flip is the only augmentation)."""
    t0 = time.time()
    manifest = load_manifest(train_path, load_images=True)
    model = train_detector(SlidingWindowBackend(), manifest, seed=seed, epochs=epochs)
    out = Path(out_dir)
    artifacts = [model.save(out / "detector.pt")]
    if predict_path:
        probe = load_manifest(predict_path, load_images=True)
        preds = predict_all(model, probe)
        artifacts.append(save_predictions(preds, out / "predictions.jsonl"))
    _write_run_info(out, "train-detector", {"train": train_path, "seed": seed, "epochs": epochs}, artifacts, t0)
    click.echo("detector trained")


# -- evaluation ---------------------------------------------------------------


@main.group("eval")
def eval_group() -> None:
    """Detection and synthesis quality metrics."""


@eval_group.command("froc")
@click.option("--predictions", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--truth", "truth_path", required=True, type=click.Path(exists=True))
@click.option("--iou", "iou_thresh", type=float, default=0.1)
@click.option("--out", "out_dir", required=True, type=click.Path())
@_stage
def eval_froc(pred_path, truth_path, iou_thresh, out_dir) -> None:
    """FROC curve and AUC for one prediction file against ground truth."""
    t0 = time.time()
    preds = load_predictions(pred_path)
    truth_manifest = load_manifest(truth_path)
    groundtruth = {r.id: list(r.annotations) for r in truth_manifest}
    result = froc_curve(preds, groundtruth, iou_thresh=iou_thresh)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_curve_csv(result, out / "froc_curve.csv")
    summary = {
        "auc_percent": result.auc_percent,
        "n_images": result.n_images,
        "n_lesions": result.n_lesions,
        "iou_threshold": result.iou_threshold,
    }
    (out / "froc_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    _write_run_info(out, "eval froc", {"predictions": pred_path, "iou": iou_thresh}, [out / "froc_curve.csv"], t0)
    click.echo(f"FROC AUC {result.auc_percent:.2f}% over {result.n_images} images")


@eval_group.command("fid")
@click.option("--real-low", "real_low_path", required=True, type=click.Path(exists=True))
@click.option("--real-high", "real_high_path", required=True, type=click.Path(exists=True))
@click.option("--synthetic", "synthetic_specs", multiple=True, help="NAME=MANIFEST, repeatable.")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", required=True, type=click.Path())
@_stage
def eval_fid(real_low_path, real_high_path, synthetic_specs, seed, out_dir) -> None:
    """Bounded distribution distances between real and synthetic sets."""
    t0 = time.time()
    real_low = load_manifest(real_low_path, load_images=True)
    real_high = load_manifest(real_high_path, load_images=True)
    synthetic = {}
    for spec in synthetic_specs:
        name, _, path = spec.partition("=")
        if not path:
            raise click.UsageError(f"--synthetic expects NAME=MANIFEST, got {spec!r}")
        synthetic[name] = [r.image for r in load_manifest(path, load_images=True)]
    result = fid_bounds_protocol(
        [r.image for r in real_low],
        [r.image for r in real_high],
        synthetic,
        embedder=ReferenceEmbedder(),
        split_seed=seed,
        descriptor={"real_low": real_low_path, "real_high": real_high_path},
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bounds_report_csv([result], out / "fid_bounds.csv")
    _write_run_info(out, "eval fid", {"seed": seed}, [out / "fid_bounds.csv"], t0)
    click.echo(
        f"lower {result.lower_bound:.3f} | upper {result.upper_bound:.3f} | "
        + ", ".join(f"{k}={v:.3f}" for k, v in result.synthetic.items())
    )


# -- report -------------------------------------------------------------------


@main.command("report")
@click.option("--results", "results_path", required=True, type=click.Path(exists=True),
              help="JSON: groups -> rows with per-seed AUCs and p-values.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@_stage
def report_cmd(results_path, out_dir) -> None:
    """Emit the strategy-comparison report (CSV + Markdown) from cached results."""
    t0 = time.time()
    doc = _load_json(results_path)
    groups = []
    for g in doc["groups"]:
        rows = [
            StrategyResult(
                strategy=r["strategy"],
                aggregate=aggregate_seeds(r["aucs"]),
                p_value=r.get("p_value"),
                is_baseline=r.get("is_baseline", False),
            )
            for r in g["rows"]
        ]
        groups.append(ReportGroup(test_set=g["test_set"], scenario=g["scenario"], rows=rows))
    paths = emit_report(groups, Path(out_dir))
    _write_run_info(Path(out_dir), "report", doc, list(paths.values()), t0)
    click.echo(f"report written to {paths['csv']}")


# -- reader study -------------------------------------------------------------


@main.group()
def study() -> None:
    """Blinded real-vs-synthetic reader study."""


@study.command("serve")
@click.option("--study-dir", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.option("--ui", "ui_dir", type=click.Path(), default=None)
@_stage
def study_serve(study_dir, host, port, ui_dir) -> None:
    """Serve the reader-study API (and the browser UI when --ui points at a build)."""
    from .reader_study import serve

    click.echo(f"serving study {study_dir} on http://{host}:{port}")
    serve(study_dir, host=host, port=port, ui_dir=ui_dir)


@study.command("report")
@click.option("--study-dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@_stage
def study_report(study_dir, out_path) -> None:
    """Score completed sessions offline into the per-reader AUC table."""
    from .reader_study import ResponseStore, load_stimuli, score_study

    t0 = time.time()
    stimuli, _config = load_stimuli(study_dir)
    store = ResponseStore(study_dir)
    completed = [r for r in store.readers() if store.is_complete(r, len(stimuli))]
    responses = [r for r in store.responses() if r.reader_id in completed]
    table = score_study(responses, stimuli)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out)
    _write_run_info(out.parent, "study report", {"study_dir": study_dir, "readers": completed}, [out], t0)
    click.echo(f"scored {len(completed)} completed reader(s)")


# -- plots --------------------------------------------------------------------


@main.group()
def plot() -> None:
    """Chart emitters."""


@plot.command("froc")
@click.option("--curve", "curves", multiple=True, required=True, help="LABEL=CSV, repeatable.")
@click.option("--title", default="FROC")
@click.option("--out", "out_path", required=True, type=click.Path())
@_stage
def plot_froc(curves, title, out_path) -> None:
    """Render FROC curve CSVs into one chart."""
    series = {}
    for spec in curves:
        label, _, path = spec.partition("=")
        if not path:
            raise click.UsageError(f"--curve expects LABEL=CSV, got {spec!r}")
        points = []
        for line in Path(path).read_text().splitlines()[1:]:
            if line.strip():
                fppi, sens = line.split(",")
                points.append((float(fppi), float(sens)))
        series[label] = points
    plot_froc_curves(series, out_path, title=title)
    click.echo(f"chart written to {out_path}")


if __name__ == "__main__":
    main()
