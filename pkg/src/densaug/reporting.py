"""Seed aggregation and the strategy-comparison report.

Reports are grouped by test set and training scenario; each group lists
one row per augmentation strategy with its FROC AUC (mean across seeds
plus a 95% confidence interval), the gain over the baseline row and the
paired significance of the score difference. The baseline row is marked
"Ref".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class SeedAggregate:
    """Per-seed AUCs with mean and a normal-approximation 95% CI.

    The CI is mean +/- 1.96 * sd / sqrt(n) across seeds; with a single
    seed the CI is undefined and flagged instead of silently zero.
    """

    aucs: list[float]
    mean: float = field(init=False)
    sd: float | None = field(init=False)
    ci_low: float | None = field(init=False)
    ci_high: float | None = field(init=False)

    def __post_init__(self) -> None:
        if not self.aucs:
            raise ValueError("need at least one AUC")
        arr = np.asarray(self.aucs, dtype=np.float64)
        self.mean = float(arr.mean())
        if len(arr) < 2:
            self.sd = None
            self.ci_low = None
            self.ci_high = None
        else:
            self.sd = float(arr.std(ddof=1))
            half = 1.96 * self.sd / np.sqrt(len(arr))
            self.ci_low = self.mean - half
            self.ci_high = self.mean + half
        if self.ci_low is not None and not (self.ci_low <= self.mean <= self.ci_high):
            raise AssertionError("confidence interval must bracket the mean")

    @property
    def ci_defined(self) -> bool:
        return self.ci_low is not None

    def display(self) -> str:
        if not self.ci_defined:
            return f"{self.mean:.2f}% (CI undefined: single seed)"
        return f"{self.mean:.2f}% ({self.ci_low:.2f}, {self.ci_high:.2f})"


def aggregate_seeds(aucs: list[float]) -> SeedAggregate:
    return SeedAggregate(list(aucs))


@dataclass
class StrategyResult:
    """One report row: a strategy's aggregate and its significance vs the baseline."""

    strategy: str
    aggregate: SeedAggregate
    p_value: float | None = None
    is_baseline: bool = False


@dataclass
class ReportGroup:
    test_set: str
    scenario: str
    rows: list[StrategyResult]

    def baseline(self) -> StrategyResult:
        for row in self.rows:
            if row.is_baseline:
                return row
        raise ValueError(f"group ({self.test_set}, {self.scenario}) has no baseline row")


def format_p(p: float | None) -> str:
    if p is None:
        return "n/a"
    if p >= 1e-4:
        return f"{p:.4f}"
    return f"{p:.2e}"


FOOTNOTES = [
    "CI: normal approximation across seeds, mean +/- 1.96*sd/sqrt(n).",
    "p-value: paired DeLong test on per-case scores (per-lesion best match, "
    "per-image false positives capped at 10), two-sided; seed-replicated "
    "strategies enter with per-case scores averaged across seeds.",
    "Gain: difference of mean FROC AUC vs the baseline row (Ref).",
]


def emit_report(groups: list[ReportGroup], out_dir: Path | str, stem: str = "report") -> dict:
    """Write the strategy-comparison report as CSV and Markdown; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_lines = [
        "test_set,scenario,strategy,auc_mean,ci_low,ci_high,auc_display,gain,p_value"
    ]
    md_lines = ["# Mass-detection augmentation report", ""]
    for group in groups:
        base_mean = group.baseline().aggregate.mean if group.rows else 0.0
        md_lines += [
            f"## Test set: {group.test_set} | scenario: {group.scenario}",
            "",
            "| Strategy | FROC AUC (95% CI) | Gain | p-value |",
            "|---|---|---|---|",
        ]
        for row in group.rows:
            agg = row.aggregate
            if row.is_baseline:
                gain_s, p_s = "Ref", "Ref"
            else:
                gain_s = f"{agg.mean - base_mean:+.2f}"
                p_s = format_p(row.p_value)
            csv_lines.append(
                ",".join(
                    [
                        group.test_set,
                        group.scenario,
                        row.strategy,
                        f"{agg.mean:.4f}",
                        f"{agg.ci_low:.4f}" if agg.ci_defined else "",
                        f"{agg.ci_high:.4f}" if agg.ci_defined else "",
                        f'"{agg.display()}"',
                        gain_s,
                        p_s,
                    ]
                )
            )
            md_lines.append(f"| {row.strategy} | {agg.display()} | {gain_s} | {p_s} |")
        md_lines.append("")
    md_lines += ["### Notes", ""] + [f"- {note}" for note in FOOTNOTES]
    csv_path = out_dir / f"{stem}.csv"
    md_path = out_dir / f"{stem}.md"
    csv_path.write_text("\n".join(csv_lines) + "\n")
    md_path.write_text("\n".join(md_lines) + "\n")
    return {"csv": csv_path, "markdown": md_path}


def plot_froc_curves(curves: dict[str, list[tuple[float, float]]], out_path: Path | str, title: str = "FROC") -> Path:
    """Render FROC operating-point curves to an image file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, points in curves.items():
        if not points:
            continue
        xs = [0.0] + [p[0] for p in points]
        ys = [0.0] + [p[1] for p in points]
        if xs[-1] < 1.0:
            xs.append(1.0)
            ys.append(ys[-1])
        ax.plot(xs, ys, label=label, linewidth=1.5)
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel("False positives per image")
    ax.set_ylabel("Sensitivity")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    ax.grid(alpha=0.3)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
