"""Pluggable mass-detector contract plus a CPU-scale reference detector.

The reference detector scores fixed-size sliding windows with a small
convolutional net and merges overlapping hits with non-maximum suppression.
It exists to make the augmentation -> detection -> evaluation loop runnable
in minutes on desk-scale phantoms; a heavyweight detector attaches through
the same backend protocol. The only geometric augmentation applied during
training is a random horizontal flip, with boxes flipped consistently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
import torch
import torch.nn as nn
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .records import Health, MammogramRecord, Manifest, MassBox


@dataclass(frozen=True)
class ScoredBox:
    """A detector output: bounding box plus confidence in [0, 1]."""

    box: MassBox
    score: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.score) or not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be finite and in [0, 1]: {self.score}")


@runtime_checkable
class DetectorBackend(Protocol):
    def train(self, records: list[MammogramRecord], seed: int, epochs: int | None = None): ...


def flip_record(record: MammogramRecord) -> MammogramRecord:
    """Mirror a record horizontally; boxes move to x' = W - x - w."""
    image = record.require_image()
    w = image.shape[1]
    boxes = [MassBox(x=w - b.x - b.w, y=b.y, w=b.w, h=b.h) for b in record.annotations]
    return replace(record, image=image[:, ::-1].copy(), annotations=boxes, image_path=None)


def box_iou(a: MassBox, b: MassBox) -> float:
    ix = max(0.0, min(a.x2, b.x2) - max(a.x, b.x))
    iy = max(0.0, min(a.y2, b.y2) - max(a.y, b.y))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def nms(candidates: list[ScoredBox], iou_threshold: float = 0.3) -> list[ScoredBox]:
    """Greedy non-maximum suppression by descending score."""
    ordered = sorted(candidates, key=lambda s: -s.score)
    kept: list[ScoredBox] = []
    for cand in ordered:
        if all(box_iou(cand.box, k.box) <= iou_threshold for k in kept):
            kept.append(cand)
    return kept


class _WindowNet(nn.Module):
    def __init__(self, window: int):
        super().__init__()
        feat = window // 4
        self.net = nn.Sequential(
            nn.Conv2d(1, 8, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(8, 16, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Flatten(),
            nn.Linear(16 * feat * feat, 32),
            nn.ReLU(inplace=True),
            nn.Linear(32, 1),
        )

    def forward(self, x):
        return self.net(x)


class SlidingWindowDetector(BaseEstimator):
    """Convolutional window scorer with NMS merging.

    fit() trains the window classifier on positive windows centered on
    annotated masses and random non-overlapping negatives; predict() scores
    a dense window grid and returns merged boxes.
    """

    def __init__(
        self,
        window: int = 24,
        stride: int = 6,
        epochs: int = 4,
        lr: float = 2e-3,
        batch_size: int = 64,
        pos_per_mass: int = 6,
        neg_per_image: int = 12,
        score_threshold: float = 0.2,
        nms_iou: float = 0.3,
        max_boxes: int = 8,
        random_state: int = 0,
    ):
        self.window = window
        self.stride = stride
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.pos_per_mass = pos_per_mass
        self.neg_per_image = neg_per_image
        self.score_threshold = score_threshold
        self.nms_iou = nms_iou
        self.max_boxes = max_boxes
        self.random_state = random_state

    def _normalized(self, record: MammogramRecord) -> np.ndarray:
        return record.require_image().astype(np.float32) / float(record.max_value) - 0.5

    def _sample_patches(
        self, record: MammogramRecord, rng: np.random.Generator
    ) -> tuple[list[np.ndarray], list[float]]:
        img = self._normalized(record)
        h, w = img.shape
        win = self.window
        if h < win or w < win:
            return [], []
        patches: list[np.ndarray] = []
        labels: list[float] = []

        def window_at(cy: float, cx: float) -> tuple[int, int]:
            y = int(round(cy - win / 2))
            x = int(round(cx - win / 2))
            return min(max(y, 0), h - win), min(max(x, 0), w - win)

        for box in record.annotations:
            cy, cx = box.y + box.h / 2, box.x + box.w / 2
            for _ in range(self.pos_per_mass):
                jy, jx = rng.integers(-3, 4, size=2)
                y, x = window_at(cy + jy, cx + jx)
                patches.append(img[y : y + win, x : x + win])
                labels.append(1.0)
        placed = 0
        for _ in range(self.neg_per_image * 10):
            if placed >= self.neg_per_image:
                break
            y = int(rng.integers(0, h - win + 1))
            x = int(rng.integers(0, w - win + 1))
            wbox = MassBox(x=x, y=y, w=win, h=win)
            if any(box_iou(wbox, b) > 0.1 for b in record.annotations):
                continue
            patches.append(img[y : y + win, x : x + win])
            labels.append(0.0)
            placed += 1
        return patches, labels

    def fit(self, records) -> "SlidingWindowDetector":
        records = list(records.records) if isinstance(records, Manifest) else list(records)
        if not records:
            raise ValueError("empty training set")
        if not any(r.annotations for r in records):
            raise ValueError("training set contains no annotated records")
        torch.manual_seed(self.random_state)
        rng = np.random.Generator(np.random.PCG64(self.random_state))
        self.net_ = _WindowNet(self.window)
        opt = torch.optim.Adam(self.net_.parameters(), lr=self.lr)
        bce = nn.BCEWithLogitsLoss()
        for _epoch in range(self.epochs):
            patches: list[np.ndarray] = []
            labels: list[float] = []
            for idx in rng.permutation(len(records)):
                rec = records[idx]
                if rng.random() < 0.5:  # random horizontal flip, the only augmentation
                    rec = flip_record(rec)
                p, l = self._sample_patches(rec, rng)
                patches += p
                labels += l
            if not patches:
                raise ValueError("no trainable windows; images smaller than the window size")
            x = torch.from_numpy(np.stack(patches))[:, None]
            y = torch.tensor(labels, dtype=torch.float32)[:, None]
            order = torch.from_numpy(rng.permutation(len(patches)))
            self.net_.train()
            for start in range(0, len(patches), self.batch_size):
                sel = order[start : start + self.batch_size]
                loss = bce(self.net_(x[sel]), y[sel])
                opt.zero_grad(set_to_none=True)
                loss.backward()
                opt.step()
        self.net_.eval()
        return self

    def predict(self, record: MammogramRecord) -> list[ScoredBox]:
        """Score the window grid of one record; deterministic for a fitted model."""
        if not hasattr(self, "net_"):
            raise NotFittedError("detector is not fitted")
        img = self._normalized(record)
        h, w = img.shape
        win, stride = self.window, self.stride
        if h < win or w < win:
            return []
        ys = list(range(0, h - win + 1, stride))
        xs = list(range(0, w - win + 1, stride))
        t = torch.from_numpy(img)[None, None]
        tiles = torch.nn.functional.unfold(t, kernel_size=win, stride=stride)
        tiles = tiles.squeeze(0).T.reshape(-1, 1, win, win)
        with torch.no_grad():
            scores = torch.sigmoid(self.net_(tiles)).squeeze(1).numpy()
        candidates = []
        k = 0
        for y in ys:
            for x in xs:
                s = float(scores[k])
                k += 1
                if s >= self.score_threshold:
                    candidates.append(ScoredBox(box=MassBox(x=x, y=y, w=win, h=win), score=s))
        kept = nms(candidates, self.nms_iou)[: self.max_boxes]
        return sorted(kept, key=lambda s: -s.score)

    def save(self, path: Path | str) -> Path:
        if not hasattr(self, "net_"):
            raise NotFittedError("detector is not fitted")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(
            {"format": "densaug-detector", "params": self.get_params(), "state": self.net_.state_dict()},
            path,
        )
        return path

    @classmethod
    def load(cls, path: Path | str) -> "SlidingWindowDetector":
        doc = torch.load(Path(path), map_location="cpu", weights_only=False)
        if doc.get("format") != "densaug-detector":
            raise ValueError(f"{path} is not a detector checkpoint")
        est = cls(**doc["params"])
        est.net_ = _WindowNet(est.window)
        est.net_.load_state_dict(doc["state"])
        est.net_.eval()
        return est


class SlidingWindowBackend:
    """Backend adapter: train() yields a fitted reference detector."""

    def __init__(self, **params):
        self.params = params

    def train(self, records, seed: int, epochs: int | None = None) -> SlidingWindowDetector:
        params = dict(self.params)
        if epochs is not None:
            params["epochs"] = epochs
        det = SlidingWindowDetector(random_state=seed, **params)
        return det.fit(records)


def train_detector(backend: DetectorBackend, manifest: Manifest, seed: int, epochs: int | None = None):
    """Train a detector; rejects manifests without any annotated record."""
    records = list(manifest.records)
    if not records:
        raise ValueError("empty manifest")
    if not any(r.health is Health.WITH_MASSES for r in records):
        raise ValueError("manifest has no annotated records; nothing to learn")
    return backend.train(records, seed=seed, epochs=epochs)


def predict_all(model, manifest: Manifest, root: Path | str | None = None) -> dict[str, list[ScoredBox]]:
    """Per-image predictions keyed by record id; order-independent."""
    from .storage import load_record_image

    out: dict[str, list[ScoredBox]] = {}
    for rec in manifest:
        if rec.image is None and root is not None:
            rec = load_record_image(rec, root)
        out[rec.id] = model.predict(rec)
    return out


def save_predictions(predictions: dict[str, list[ScoredBox]], path: Path | str) -> Path:
    """Persist predictions as JSON lines: {"id", "boxes": [{x, y, w, h, score}]}."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for image_id in sorted(predictions):
            boxes = [
                {"x": s.box.x, "y": s.box.y, "w": s.box.w, "h": s.box.h, "score": s.score}
                for s in predictions[image_id]
            ]
            fh.write(json.dumps({"id": image_id, "boxes": boxes}, sort_keys=True) + "\n")
    return path


def load_predictions(path: Path | str) -> dict[str, list[ScoredBox]]:
    out: dict[str, list[ScoredBox]] = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        out[doc["id"]] = [
            ScoredBox(box=MassBox(x=b["x"], y=b["y"], w=b["w"], h=b["h"]), score=b["score"])
            for b in doc["boxes"]
        ]
    return out
