"""Density-balancing synthetic augmentation and evaluation toolkit for mammogram mass detection."""

__version__ = "0.1.0"

from .density import map_density, stratify
from .froc import froc_curve, iou
from .geometry import GeometryTransform, crop_to_breast, resize_keep_aspect
from .records import (
    DensityCategory,
    DensityKind,
    DensityMeasure,
    Health,
    Laterality,
    MammogramRecord,
    Manifest,
    MassBox,
    Split,
    View,
)

__all__ = [
    "DensityCategory",
    "DensityKind",
    "DensityMeasure",
    "GeometryTransform",
    "Health",
    "Laterality",
    "MammogramRecord",
    "Manifest",
    "MassBox",
    "Split",
    "View",
    "crop_to_breast",
    "froc_curve",
    "iou",
    "map_density",
    "resize_keep_aspect",
    "stratify",
    "__version__",
]
