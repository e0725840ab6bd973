"""Choice-to-probability mapping and per-reader ROC scoring.

The six-point certainty scale runs from 1 = "certainly synthetic" to
6 = "certainly real" and maps onto equally spaced probabilities of the
image being real. Each (model family, view) cell is scored as an ROC over
that family's synthetic stimuli versus all real stimuli of the matching
view, with truth REAL as the positive class; the AUC is rank-based, so any
strictly increasing remapping of the probabilities leaves it unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..delong import rank_auc
from .stimuli import Stimulus

CHOICE_PROBABILITIES: dict[int, float] = {
    1: 0.05,
    2: 0.23,
    3: 0.41,
    4: 0.59,
    5: 0.77,
    6: 0.95,
}


def choice_to_probability(choice: int) -> float:
    """Probability-of-real for one certainty choice (1..6, increasing certainty of real)."""
    if choice not in CHOICE_PROBABILITIES:
        raise ValueError(f"choice must be an integer 1..6, got {choice!r}")
    return CHOICE_PROBABILITIES[choice]


@dataclass(frozen=True)
class StudyResponse:
    reader_id: str
    stimulus_id: str
    choice: int
    timestamp: float

    def __post_init__(self) -> None:
        choice_to_probability(self.choice)

    @property
    def probability(self) -> float:
        return choice_to_probability(self.choice)


@dataclass
class StudyScoreTable:
    """Per-reader, per-(family, view) ROC AUCs plus the reader average rows."""

    readers: list[str]
    cells: list[tuple[str, str]]  # (model_family, view)
    auc: dict[tuple[str, str, str], float | None]  # (reader, family, view)

    def average(self, family: str, view: str) -> tuple[float, float] | None:
        values = [
            self.auc[(r, family, view)]
            for r in self.readers
            if self.auc.get((r, family, view)) is not None
        ]
        if not values:
            return None
        arr = np.asarray(values)
        return float(arr.mean()), float(arr.std(ddof=0))

    def to_csv(self, path: Path | str | None = None) -> str:
        header = ["reader"] + [f"{fam}_{view}" for fam, view in self.cells]
        lines = [",".join(header)]
        for reader in self.readers:
            row = [reader]
            for fam, view in self.cells:
                value = self.auc.get((reader, fam, view))
                row.append("n/a" if value is None else f"{value:.3f}")
            lines.append(",".join(row))
        avg_row = ["average"]
        for fam, view in self.cells:
            stats = self.average(fam, view)
            avg_row.append("n/a" if stats is None else f"{stats[0]:.3f} ± {stats[1]:.3f}")
        lines.append(",".join(avg_row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def score_study(responses: list[StudyResponse], stimuli: list[Stimulus]) -> StudyScoreTable:
    """Score completed reader responses into the per-cell AUC table."""
    by_id = {s.id: s for s in stimuli}
    readers = sorted({r.reader_id for r in responses})
    families = sorted({s.model_family for s in stimuli if s.model_family})
    views = sorted({s.view for s in stimuli})
    cells = [(fam, view) for fam in families for view in views]

    table: dict[tuple[str, str, str], float | None] = {}
    for reader in readers:
        probs = {
            r.stimulus_id: r.probability for r in responses if r.reader_id == reader
        }
        for fam, view in cells:
            pos = [
                probs[s.id]
                for s in stimuli
                if s.truth == "REAL" and s.view == view and s.id in probs
            ]
            neg = [
                probs[s.id]
                for s in stimuli
                if s.truth == "SYNTHETIC"
                and s.model_family == fam
                and s.view == view
                and s.id in probs
            ]
            if not pos or not neg:
                table[(reader, fam, view)] = None
            else:
                table[(reader, fam, view)] = rank_auc(pos, neg)
    for r in responses:
        if r.stimulus_id not in by_id:
            raise ValueError(f"response references unknown stimulus {r.stimulus_id}")
    return StudyScoreTable(readers=readers, cells=cells, auc=table)
