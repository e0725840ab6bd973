"""Breast-region cropping and aspect-preserving resizing.

The pipeline geometry is a single affine chain: crop to the breast bounding
rectangle, scale by one factor, zero-pad on the right/bottom edges. Padding
on the trailing edges keeps box transforms to a subtract-and-scale, so the
whole chain inverts exactly (box round-trips are within 1 pixel).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .records import MammogramRecord, MassBox

# Foreground = intensity strictly above this fraction of the image maximum.
FOREGROUND_FRACTION = 0.02

DEFAULT_TARGET = (1332, 800)  # (height, width)


@dataclass(frozen=True)
class GeometryTransform:
    """Composable crop + scale + pad mapping from source to target pixel frames."""

    crop_x: int = 0
    crop_y: int = 0
    scale: float = 1.0
    pad_left: int = 0
    pad_top: int = 0
    target_height: int = DEFAULT_TARGET[0]
    target_width: int = DEFAULT_TARGET[1]

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def apply_box(self, box: MassBox) -> MassBox:
        return MassBox(
            x=(box.x - self.crop_x) * self.scale + self.pad_left,
            y=(box.y - self.crop_y) * self.scale + self.pad_top,
            w=box.w * self.scale,
            h=box.h * self.scale,
        )

    def invert_box(self, box: MassBox) -> MassBox:
        return MassBox(
            x=(box.x - self.pad_left) / self.scale + self.crop_x,
            y=(box.y - self.pad_top) / self.scale + self.crop_y,
            w=box.w / self.scale,
            h=box.h / self.scale,
        )


def foreground_mask(image: np.ndarray) -> np.ndarray:
    """Boolean mask of pixels above the fixed foreground fraction of the image max."""
    if image.size == 0:
        raise ValueError("empty image")
    return image > FOREGROUND_FRACTION * float(image.max())


def crop_to_breast(image: np.ndarray) -> tuple[np.ndarray, GeometryTransform]:
    """Crop to the bounding rectangle of the largest 4-connected foreground component."""
    if image.ndim != 2:
        raise ValueError(f"expected a single-channel 2-D image, got shape {image.shape}")
    mask = foreground_mask(image)
    if not mask.any():
        raise ValueError("no breast region: image is entirely background")
    labels, n = ndimage.label(mask)  # default structure = 4-connectivity
    if n > 1:
        sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, n + 1))
        keep = int(np.argmax(sizes)) + 1
    else:
        keep = 1
    rows, cols = np.nonzero(labels == keep)
    y0, y1 = int(rows.min()), int(rows.max()) + 1
    x0, x1 = int(cols.min()), int(cols.max()) + 1
    transform = GeometryTransform(
        crop_x=x0, crop_y=y0, scale=1.0, target_height=y1 - y0, target_width=x1 - x0
    )
    return image[y0:y1, x0:x1], transform


def resize_keep_aspect(
    image: np.ndarray,
    boxes: list[MassBox] | None = None,
    target: tuple[int, int] = DEFAULT_TARGET,
    prior: GeometryTransform | None = None,
) -> tuple[np.ndarray, list[MassBox], GeometryTransform]:
    """Scale by min(target_h/h, target_w/w) and zero-pad right/bottom to target dims.

    Boxes are mapped by the same single scale factor (plus the crop offset of
    ``prior`` when the image was cropped first). Output dims are exactly
    ``target``.
    """
    th, tw = int(target[0]), int(target[1])
    if th <= 0 or tw <= 0:
        raise ValueError(f"target dims must be positive, got {target}")
    if image.size == 0:
        raise ValueError("empty image")
    h, w = image.shape
    scale = min(th / h, tw / w)
    new_h = min(th, max(1, round(h * scale)))
    new_w = min(tw, max(1, round(w * scale)))
    if (new_h, new_w) == (h, w):
        resized = image.copy()
    else:
        zoomed = ndimage.zoom(
            image.astype(np.float64),
            (new_h / h, new_w / w),
            order=1,
            mode="grid-constant",
            grid_mode=True,
        )
        zoomed = np.clip(zoomed, 0, None)
        if np.issubdtype(image.dtype, np.integer):
            resized = np.rint(zoomed).astype(image.dtype)
        else:
            resized = zoomed.astype(image.dtype)
        resized = resized[:new_h, :new_w]
    out = np.zeros((th, tw), dtype=image.dtype)
    out[:new_h, :new_w] = resized

    transform = GeometryTransform(
        crop_x=prior.crop_x if prior else 0,
        crop_y=prior.crop_y if prior else 0,
        scale=scale,
        pad_left=0,
        pad_top=0,
        target_height=th,
        target_width=tw,
    )
    mapped = [transform.apply_box(b) for b in (boxes or [])]
    return out, mapped, transform


def preprocess_record(
    record: MammogramRecord, target: tuple[int, int] = DEFAULT_TARGET
) -> tuple[MammogramRecord, GeometryTransform]:
    """Crop a record to its breast region and resize to target dims, mapping boxes."""
    image = record.require_image()
    cropped, crop_t = crop_to_breast(image)
    resized, boxes, transform = resize_keep_aspect(
        cropped, record.annotations, target=target, prior=crop_t
    )
    out = replace(
        record,
        image=resized,
        image_shape=resized.shape,
        annotations=boxes,
        image_path=None,
    )
    return out, transform
