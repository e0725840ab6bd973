"""Paired comparison of correlated ROC AUCs via DeLong's structural components.

Variances come from the midrank formulation (Sun & Xu 2014), which is
O(n log n) and agrees exactly with the classic O(n^2) structural-components
construction (DeLong et al. 1988). The paired input for two detectors is
built from a shared case list: one positive case per ground-truth lesion
(its best-overlapping prediction score, 0 when missed) and per-image
false-positive scores truncated to the top ``fppi_cap`` per image, padded
with zeros so both models see identical case identities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata

from .detection import ScoredBox
from .froc import iou
from .records import MassBox

DEGENERATE_VAR = 1e-15


@dataclass
class DelongInput:
    """Paired score vectors over a shared case list; labels mark lesion-positive cases."""

    scores_a: np.ndarray
    scores_b: np.ndarray
    labels: np.ndarray
    case_ids: list[str]
    fppi_cap: int = 10

    def __post_init__(self) -> None:
        self.scores_a = np.asarray(self.scores_a, dtype=np.float64)
        self.scores_b = np.asarray(self.scores_b, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self.labels)
        if not (len(self.scores_a) == len(self.scores_b) == n == len(self.case_ids)):
            raise ValueError("paired inputs must share one case list")


@dataclass
class DelongResult:
    auc_a: float
    auc_b: float
    z: float
    p_value: float
    degenerate: bool = False


def midrank_components(positives: np.ndarray, negatives: np.ndarray):
    """AUC and structural components V10/V01 for one score vector, via midranks."""
    m, n = len(positives), len(negatives)
    combined = np.concatenate([positives, negatives])
    tz = rankdata(combined)  # midranks
    tx = rankdata(positives)
    ty = rankdata(negatives)
    v10 = (tz[:m] - tx) / n
    v01 = 1.0 - (tz[m:] - ty) / m
    auc = tz[:m].sum() / (m * n) - (m + 1.0) / (2.0 * n)
    return auc, v10, v01


def paired_variance(
    pos: np.ndarray, neg: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """AUCs and the 2x2 covariance of (auc_a, auc_b) from paired (n, 2) score arrays."""
    m, n = pos.shape[0], neg.shape[0]
    if m == 0 or n == 0:
        raise ValueError("need at least one positive and one negative case")
    aucs = np.zeros(2)
    v10 = np.zeros((m, 2))
    v01 = np.zeros((n, 2))
    for r in range(2):
        aucs[r], v10[:, r], v01[:, r] = midrank_components(pos[:, r], neg[:, r])
    s10 = np.cov(v10, rowvar=False) if m > 1 else np.zeros((2, 2))
    s01 = np.cov(v01, rowvar=False) if n > 1 else np.zeros((2, 2))
    cov = s10 / m + s01 / n
    return aucs, cov, np.stack([v10.mean(axis=0), v01.mean(axis=0)])


def delong_compare(a: DelongInput | np.ndarray, b: np.ndarray | None = None, labels=None) -> DelongResult:
    """Two-sided paired DeLong test between two score vectors on shared cases.

    Accepts either one :class:`DelongInput` or (scores_a, scores_b, labels).
    Degenerate variance (all scores tied) yields p = 1 with the flag set.
    """
    if isinstance(a, DelongInput):
        scores_a, scores_b, y = a.scores_a, a.scores_b, a.labels
    else:
        scores_a = np.asarray(a, dtype=np.float64)
        scores_b = np.asarray(b, dtype=np.float64)
        y = np.asarray(labels, dtype=np.int64)
    if not (len(scores_a) == len(scores_b) == len(y)):
        raise ValueError("score vectors and labels must have equal length")
    pos_mask = y == 1
    pos = np.stack([scores_a[pos_mask], scores_b[pos_mask]], axis=1)
    neg = np.stack([scores_a[~pos_mask], scores_b[~pos_mask]], axis=1)
    aucs, cov, _ = paired_variance(pos, neg)
    var = cov[0, 0] + cov[1, 1] - 2.0 * cov[0, 1]
    diff = aucs[0] - aucs[1]
    degenerate = var <= DEGENERATE_VAR
    if degenerate:
        z = 0.0
        p = 1.0
    else:
        z = diff / np.sqrt(var)
        p = float(2.0 * norm.sf(abs(z)))
    return DelongResult(
        auc_a=float(aucs[0]), auc_b=float(aucs[1]), z=float(z), p_value=p, degenerate=degenerate
    )


def build_delong_input(
    predictions_a: dict[str, list[ScoredBox]],
    predictions_b: dict[str, list[ScoredBox]],
    groundtruth: dict[str, list[MassBox]],
    iou_thresh: float = 0.1,
    fppi_cap: int = 10,
    pad_to_cap: bool = False,
) -> DelongInput:
    """Assemble the paired case list for two detectors over one test set.

    Positive case per lesion: the max score among predictions overlapping it
    (IoU above threshold), 0 when missed. Negative cases per image: each
    model's non-overlapping prediction scores, descending, truncated to the
    top ``fppi_cap``; the two models are aligned per (image, rank) with zero
    padding up to the longer list (or to exactly ``fppi_cap`` rows per image
    when ``pad_to_cap`` is set, which keeps case lists identical across
    prediction sets and lets callers average paired inputs).
    """
    scores_a: list[float] = []
    scores_b: list[float] = []
    labels: list[int] = []
    case_ids: list[str] = []
    for image_id in sorted(groundtruth):
        lesions = groundtruth[image_id]
        preds = {
            "a": predictions_a.get(image_id, []),
            "b": predictions_b.get(image_id, []),
        }
        for j, lesion in enumerate(lesions):
            best = {}
            for tag, plist in preds.items():
                matching = [p.score for p in plist if iou(p.box, lesion) > iou_thresh]
                best[tag] = max(matching, default=0.0)
            scores_a.append(best["a"])
            scores_b.append(best["b"])
            labels.append(1)
            case_ids.append(f"{image_id}/lesion{j}")
        fps = {}
        for tag, plist in preds.items():
            vals = sorted(
                (
                    p.score
                    for p in plist
                    if all(iou(p.box, lesion) <= iou_thresh for lesion in lesions)
                ),
                reverse=True,
            )
            fps[tag] = vals[:fppi_cap]
        depth = fppi_cap if pad_to_cap else max(len(fps["a"]), len(fps["b"]))
        for r in range(depth):
            scores_a.append(fps["a"][r] if r < len(fps["a"]) else 0.0)
            scores_b.append(fps["b"][r] if r < len(fps["b"]) else 0.0)
            labels.append(0)
            case_ids.append(f"{image_id}/fp{r}")
    return DelongInput(
        scores_a=np.array(scores_a),
        scores_b=np.array(scores_b),
        labels=np.array(labels),
        case_ids=case_ids,
        fppi_cap=fppi_cap,
    )


def rank_auc(pos_scores, neg_scores) -> float:
    """Tie-aware ROC AUC from positive and negative score samples (midrank form)."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("need at least one positive and one negative score")
    auc, _, _ = midrank_components(pos, neg)
    return float(auc)
