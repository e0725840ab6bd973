"""Canonical data model shared by every pipeline stage."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class View(str, enum.Enum):
    CC = "CC"
    MLO = "MLO"


class Laterality(str, enum.Enum):
    L = "L"
    R = "R"


class Health(str, enum.Enum):
    NORMAL = "NORMAL"
    WITH_MASSES = "WITH_MASSES"


class Split(str, enum.Enum):
    TRAIN = "TRAIN"
    VAL = "VAL"
    TEST = "TEST"


class DensityKind(str, enum.Enum):
    VOLPARA_VBD_PERCENT = "VOLPARA_VBD_PERCENT"
    LIBRA_PERCENT = "LIBRA_PERCENT"
    ACR_CLASS = "ACR_CLASS"
    BIRADS_DIRECT = "BIRADS_DIRECT"


class DensityCategory(enum.IntEnum):
    """Four-level breast composition scale, totally ordered A < B < C < D."""

    A = 1
    B = 2
    C = 3
    D = 4

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class DensityMeasure:
    """One density reading: a percent, an ACR class, or a direct category code.

    Percent kinds must lie in [0, 100]; ACR classes in {1, 2, 3, 4};
    direct codes in {"A", "B", "C", "D"}.
    """

    kind: DensityKind
    value: float | int | str

    def __post_init__(self) -> None:
        kind = DensityKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (DensityKind.VOLPARA_VBD_PERCENT, DensityKind.LIBRA_PERCENT):
            v = float(self.value)
            if not np.isfinite(v) or not (0.0 <= v <= 100.0):
                raise ValueError(f"density percent out of range for {kind.value}: {self.value!r}")
            object.__setattr__(self, "value", v)
        elif kind is DensityKind.ACR_CLASS:
            v = int(self.value)
            if v != self.value or v not in (1, 2, 3, 4):
                raise ValueError(f"ACR class must be 1..4, got {self.value!r}")
            object.__setattr__(self, "value", v)
        else:  # BIRADS_DIRECT
            v = str(self.value).upper()
            if v not in ("A", "B", "C", "D"):
                raise ValueError(f"direct BI-RADS code must be A..D, got {self.value!r}")
            object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class MassBox:
    """Axis-aligned mass bounding box: top-left (x, y) plus extents (w, h) in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not all(np.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ValueError(f"box coordinates must be finite: {self}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extents must be positive: w={self.w}, h={self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"box coordinates must be non-negative: x={self.x}, y={self.y}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass
class MammogramRecord:
    """One image with its view, laterality, density reading, health status and annotations.

    ``image`` holds the pixel grid when materialized; manifest entries may
    carry only ``image_path`` + ``image_shape`` until loaded. ``health`` is
    NORMAL exactly when ``annotations`` is empty, and every annotation must
    lie fully inside the image bounds.
    """

    id: str
    dataset_tag: str
    view: View
    laterality: Laterality
    health: Health
    image_shape: tuple[int, int]
    bit_depth: int = 16
    image: np.ndarray | None = None
    image_path: str | None = None
    density: DensityMeasure | None = None
    annotations: list[MassBox] = field(default_factory=list)
    provenance: dict | None = None

    def __post_init__(self) -> None:
        self.view = View(self.view)
        self.laterality = Laterality(self.laterality)
        self.health = Health(self.health)
        if not self.id:
            raise ValueError("record id must be non-empty")
        if self.bit_depth not in (8, 16):
            raise ValueError(f"unsupported bit depth: {self.bit_depth}")
        if self.image is not None:
            if self.image.ndim != 2:
                raise ValueError(f"image must be 2-D grayscale, got shape {self.image.shape}")
            self.image_shape = tuple(int(s) for s in self.image.shape)
        h, w = self.image_shape
        if h <= 0 or w <= 0:
            raise ValueError(f"empty image shape: {self.image_shape}")
        if (self.health is Health.NORMAL) != (len(self.annotations) == 0):
            raise ValueError(
                f"record {self.id}: health={self.health.value} inconsistent with "
                f"{len(self.annotations)} annotation(s)"
            )
        for box in self.annotations:
            if box.x2 > w or box.y2 > h:
                raise ValueError(f"record {self.id}: box {box} exceeds image bounds {h}x{w}")

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1

    def with_image(self, image: np.ndarray) -> "MammogramRecord":
        return replace(self, image=image, image_shape=tuple(int(s) for s in image.shape))

    def require_image(self) -> np.ndarray:
        if self.image is None:
            raise ValueError(f"record {self.id} has no pixel data loaded (path={self.image_path})")
        return self.image


@dataclass
class Manifest:
    """An ordered collection of records plus provenance notes and a split tag.

    Record ids must be unique. Manifests are treated as read-only once built.
    """

    records: list[MammogramRecord]
    split_tag: Split = Split.TRAIN
    provenance: dict | str = ""

    def __post_init__(self) -> None:
        self.split_tag = Split(self.split_tag)
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise ValueError(f"duplicate record id in manifest: {rec.id}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def ids(self) -> list[str]:
        return [rec.id for rec in self.records]

    def get(self, record_id: str) -> MammogramRecord:
        for rec in self.records:
            if rec.id == record_id:
                return rec
        raise KeyError(record_id)

    def filtered(self, predicate) -> "Manifest":
        return Manifest(
            records=[r for r in self.records if predicate(r)],
            split_tag=self.split_tag,
            provenance=self.provenance,
        )


def relative_image_path(record: MammogramRecord) -> str:
    """Default on-disk location for a record's pixels, relative to the manifest."""
    safe = "".join(c if (c.isalnum() or c in "-_.") else "_" for c in record.id)
    return str(Path("images") / f"{safe}.png")
