"""Free-response ROC evaluation for lesion detection.

A prediction is a true positive when its IoU with an unmatched ground-truth
lesion exceeds the threshold (default 0.1); matching is one-to-one and
greedy by descending confidence. The curve sweeps every distinct score as a
threshold (ties enter together), and the AUC is the trapezoidal integral of
sensitivity over FPPI clipped to (0, 1), expressed in percent.

Integration convention: the curve is anchored at (0, 0), linearly
interpolated between operating points, extended horizontally past its last
point when max FPPI < 1, and truncated by interpolation when it exceeds 1.
"""

from __future__ import annotations

from dataclasses import dataclass

from .detection import ScoredBox
from .records import MassBox


def iou(a: MassBox, b: MassBox) -> float:
    """Intersection-over-union of two boxes, in [0, 1]."""
    ix = max(0.0, min(a.x2, b.x2) - max(a.x, b.x))
    iy = max(0.0, min(a.y2, b.y2) - max(a.y, b.y))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


@dataclass
class FrocResult:
    """Operating points sorted by FPPI plus the normalized AUC over FPPI in (0, 1)."""

    operating_points: list[tuple[float, float]]  # (fppi, sensitivity)
    auc_percent: float
    n_images: int
    n_lesions: int
    iou_threshold: float = 0.1

    def __post_init__(self) -> None:
        last = -1.0
        prev_sens = -1.0
        for fppi, sens in self.operating_points:
            if fppi < 0 or sens < 0:
                raise ValueError(f"negative operating point ({fppi}, {sens})")
            if fppi < last or (fppi == last and sens < prev_sens):
                raise ValueError("operating points must be sorted with non-decreasing sensitivity")
            last, prev_sens = fppi, sens
        if not (0.0 <= self.auc_percent <= 100.0):
            raise ValueError(f"auc_percent out of range: {self.auc_percent}")

    def to_rows(self) -> list[dict]:
        return [{"fppi": f, "sensitivity": s} for f, s in self.operating_points]


def integrate_sensitivity(points: list[tuple[float, float]]) -> float:
    """Area under the piecewise-linear (FPPI, sensitivity) curve over FPPI in [0, 1]."""
    pts = [(0.0, 0.0)] + list(points)
    area = 0.0
    for (x0, s0), (x1, s1) in zip(pts, pts[1:]):
        if x0 >= 1.0:
            return area
        if x1 <= 1.0:
            area += (x1 - x0) * (s0 + s1) / 2.0
        else:
            s_at_1 = s0 + (s1 - s0) * (1.0 - x0) / (x1 - x0)
            area += (1.0 - x0) * (s0 + s_at_1) / 2.0
            return area
    x_last, s_last = pts[-1]
    if x_last < 1.0:
        area += (1.0 - x_last) * s_last
    return area


def match_predictions(
    predictions: list[ScoredBox], lesions: list[MassBox], iou_threshold: float
) -> list[bool]:
    """Greedy one-to-one matching by descending score within a single image.

    Returns one flag per prediction (in the order given, which must already
    be descending by score): True for a matched lesion, False for a false
    positive. Each lesion absorbs at most one prediction; each prediction
    claims the highest-IoU unmatched lesion above the threshold.
    """
    taken = [False] * len(lesions)
    flags = []
    for pred in predictions:
        best, best_iou = -1, iou_threshold
        for j, lesion in enumerate(lesions):
            if taken[j]:
                continue
            v = iou(pred.box, lesion)
            if v > best_iou:
                best, best_iou = j, v
        if best >= 0:
            taken[best] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def froc_curve(
    predictions: dict[str, list[ScoredBox]],
    groundtruth: dict[str, list[MassBox]],
    iou_thresh: float = 0.1,
) -> FrocResult:
    """Sweep every distinct confidence threshold and build the FROC curve.

    ``groundtruth`` must cover every evaluated image (images without lesions
    included); prediction keys must be a subset of its keys.
    """
    unknown = set(predictions) - set(groundtruth)
    if unknown:
        raise ValueError(f"predictions reference unknown image ids: {sorted(unknown)[:5]}")
    n_images = len(groundtruth)
    n_lesions = sum(len(boxes) for boxes in groundtruth.values())
    if n_lesions == 0:
        raise ValueError("ground truth contains zero lesions; sensitivity is undefined")

    # Global descending-score order with a deterministic tie-break.
    flat: list[tuple[float, str, int, ScoredBox]] = []
    for image_id in sorted(groundtruth):
        for idx, pred in enumerate(predictions.get(image_id, [])):
            flat.append((pred.score, image_id, idx, pred))
    flat.sort(key=lambda t: (-t[0], t[1], t[2]))

    taken: dict[str, list[bool]] = {i: [False] * len(b) for i, b in groundtruth.items()}
    points: list[tuple[float, float]] = []
    tp = fp = 0
    i = 0
    while i < len(flat):
        threshold = flat[i][0]
        while i < len(flat) and flat[i][0] == threshold:
            score, image_id, _, pred = flat[i]
            lesions = groundtruth[image_id]
            flags = taken[image_id]
            best, best_iou = -1, iou_thresh
            for j, lesion in enumerate(lesions):
                if flags[j]:
                    continue
                v = iou(pred.box, lesion)
                if v > best_iou:
                    best, best_iou = j, v
            if best >= 0:
                flags[best] = True
                tp += 1
            else:
                fp += 1
            i += 1
        points.append((fp / n_images, tp / n_lesions))

    auc = integrate_sensitivity(points) * 100.0
    return FrocResult(
        operating_points=points,
        auc_percent=auc,
        n_images=n_images,
        n_lesions=n_lesions,
        iou_threshold=iou_thresh,
    )


def write_curve_csv(result: FrocResult, path) -> None:
    """Persist operating points for plotting."""
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["fppi,sensitivity"]
    lines += [f"{f:.10g},{s:.10g}" for f, s in result.operating_points]
    path.write_text("\n".join(lines) + "\n")
