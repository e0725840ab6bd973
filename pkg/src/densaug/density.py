"""Density-category mapping and density-stratified manifest partitioning.

Boundary table
--------------
Mixed open/closed interval notation in vendor documentation leaves the
interior cut points ambiguous, so the assignment used throughout this
package is pinned here and exercised by the test suite:

==================  =====  ============  =============  ======
kind                A      B             C              D
==================  =====  ============  =============  ======
VOLPARA_VBD_PERCENT <=3.5  (3.5, 7.5]    (7.5, 15.5)    >=15.5
LIBRA_PERCENT       <=2.8  (2.8, 25)     [25, 75)       >=75
ACR_CLASS           1      2             3              4
==================  =====  ============  =============  ======

Both mappings are monotone: for a fixed kind, increasing the value never
decreases the category.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .records import (
    DensityCategory,
    DensityKind,
    DensityMeasure,
    MammogramRecord,
    Manifest,
)

VBD_CUTS = (3.5, 7.5, 15.5)
LIBRA_CUTS = (2.8, 25.0, 75.0)


def map_density(measure: DensityMeasure) -> DensityCategory:
    """Map one density reading onto the four-level A..D category scale."""
    kind = measure.kind
    value = measure.value
    if kind is DensityKind.VOLPARA_VBD_PERCENT:
        if value <= VBD_CUTS[0]:
            return DensityCategory.A
        if value <= VBD_CUTS[1]:
            return DensityCategory.B
        if value < VBD_CUTS[2]:
            return DensityCategory.C
        return DensityCategory.D
    if kind is DensityKind.LIBRA_PERCENT:
        if value <= LIBRA_CUTS[0]:
            return DensityCategory.A
        if value < LIBRA_CUTS[1]:
            return DensityCategory.B
        if value < LIBRA_CUTS[2]:
            return DensityCategory.C
        return DensityCategory.D
    if kind is DensityKind.ACR_CLASS:
        return DensityCategory(int(value))
    # BIRADS_DIRECT passes through.
    return DensityCategory[str(value)]


@dataclass
class StratifiedBuckets:
    """Partition of a manifest into the four density categories plus rejects.

    ``rejects`` lists records without a density measure; they are reported,
    never silently dropped. Bucket manifests preserve input order, and the
    union of all buckets plus rejects equals the input exactly.
    """

    buckets: dict[DensityCategory, Manifest]
    rejects: list[MammogramRecord] = field(default_factory=list)

    def __getitem__(self, category: DensityCategory) -> Manifest:
        return self.buckets[DensityCategory(category)]

    def counts(self) -> dict[str, int]:
        out = {cat.name: len(m) for cat, m in self.buckets.items()}
        out["rejected"] = len(self.rejects)
        return out

    def reject_rows(self) -> list[dict]:
        return [
            {"id": rec.id, "dataset_tag": rec.dataset_tag, "reason": "missing density measure"}
            for rec in self.rejects
        ]


def stratify(manifest: Manifest) -> StratifiedBuckets:
    """Partition a manifest by density category.

    Deterministic: bucket membership depends only on each record's density
    measure, and record order is preserved within each bucket.
    """
    grouped: dict[DensityCategory, list[MammogramRecord]] = {c: [] for c in DensityCategory}
    rejects: list[MammogramRecord] = []
    for rec in manifest:
        if rec.density is None:
            rejects.append(rec)
        else:
            grouped[map_density(rec.density)].append(rec)
    buckets = {
        cat: Manifest(records=recs, split_tag=manifest.split_tag, provenance=manifest.provenance)
        for cat, recs in grouped.items()
    }
    return StratifiedBuckets(buckets=buckets, rejects=rejects)
