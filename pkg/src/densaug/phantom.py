"""Procedural mammogram-like phantoms with controllable density and insertable masses.

These are measurability-first test images, not anatomical models. The
breast is a half-ellipse against the chest-wall edge (plus a pectoral wedge
for the MLO view), "fibroglandular" texture is a set of bright blobs carved
out of a band-limited noise field, and masses are bright ellipses rendered
additively inside a texture-cleared neighbourhood so their contrast against
local background stays measurable.

Density is controlled by a single parameter d in [0, 1] that fixes the
fraction of in-breast pixels lying above the bright-pixel threshold. Blob
pixels are topped up to that exact count, so the measured density proxy of
a generated phantom is, by construction, BRIGHT_FRACTION_AT(d) percent
(masses can only push it slightly higher when they alone exceed the budget).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .density import map_density
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

DESK_CANVAS = (256, 160)  # (height, width); same portrait layout as the full-scale frames

# Normalized intensity levels; the bright threshold separates fibroglandular
# texture and mass cores from base tissue and the pectoral wedge. The
# fibroglandular model is two-level: a carpet of irregular blobs plus a few
# brighter compact nodules, so dense tissue contains bright-on-bright
# structure at every density (masses mimic that structure rather than being
# the only compact bright objects in existence).
BASE_TISSUE = 0.25
PECTORAL = 0.35
BLOB = 0.56
NODULE = 0.78
BRIGHT_THRESHOLD = 0.45

# Fraction of the bright-pixel budget reserved for nodules, and a hard cap
# on how many nodules one phantom renders.
NODULE_BUDGET_FRACTION = 0.30
NODULE_MAX_COUNT = 24

# Bright-pixel percent as a function of the density parameter d: spans
# category A (well under 2.8%) at d=0 up to category D (over 75%) at d=1.
def bright_fraction_percent(d: float) -> float:
    return 0.5 + 84.5 * float(d)


@dataclass(frozen=True)
class MassSpec:
    """One mass to render: ellipse center (row, col), radii (ry, rx), additive contrast.

    The contrast cap keeps mass pixels below saturation even on the
    brightest neighbourhood pedestal.
    """

    center: tuple[float, float]
    radii: tuple[float, float]
    contrast: float

    MAX_CONTRAST = 0.42

    def __post_init__(self) -> None:
        ry, rx = self.radii
        if ry <= 0 or rx <= 0:
            raise ValueError(f"mass radii must be positive: {self.radii}")
        if not (0 < self.contrast <= self.MAX_CONTRAST):
            raise ValueError(f"mass contrast must be in (0, {self.MAX_CONTRAST}]: {self.contrast}")

    def box(self) -> MassBox:
        """Tight continuous-coordinate box: pixel index i covers [i, i+1)."""
        cy, cx = self.center
        ry, rx = self.radii
        return MassBox(x=cx - rx, y=cy - ry, w=2 * rx + 1, h=2 * ry + 1)


@dataclass(frozen=True)
class PhantomSpec:
    """Full description of one phantom; the same spec yields a bit-identical image."""

    seed: int
    view: View = View.CC
    density_param: float = 0.2
    masses: tuple[MassSpec, ...] = ()
    canvas: tuple[int, int] = DESK_CANVAS
    laterality: Laterality = Laterality.L
    dataset_tag: str = "PHANTOM"
    record_id: str | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.density_param <= 1.0):
            raise ValueError(f"density_param must be in [0, 1]: {self.density_param}")
        h, w = self.canvas
        if h < 32 or w < 32:
            raise ValueError(f"canvas too small: {self.canvas}")
        object.__setattr__(self, "view", View(self.view))
        object.__setattr__(self, "laterality", Laterality(self.laterality))
        object.__setattr__(self, "masses", tuple(self.masses))


def _smooth_field(rng: np.random.Generator, shape: tuple[int, int], sigma: float) -> np.ndarray:
    """Band-limited unit-variance noise field."""
    f = gaussian_filter(rng.standard_normal(shape), sigma)
    return f / (f.std() + 1e-12)


def breast_mask(spec: PhantomSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Foreground masks in the chest-at-left frame: (breast incl. pectoral, pectoral only)."""
    h, w = spec.canvas
    rows = np.arange(h)[:, None]
    cols = np.arange(w)[None, :]
    if spec.view is View.CC:
        cy = h * (0.50 + 0.03 * rng.uniform(-1, 1))
        a = h * (0.40 + 0.03 * rng.uniform(-1, 1))
        b = w * (0.70 + 0.04 * rng.uniform(-1, 1))
    else:
        cy = h * (0.55 + 0.03 * rng.uniform(-1, 1))
        a = h * (0.38 + 0.03 * rng.uniform(-1, 1))
        b = w * (0.66 + 0.04 * rng.uniform(-1, 1))
    ellipse = ((rows - cy) / a) ** 2 + (cols / b) ** 2 <= 1.0
    pectoral = np.zeros((h, w), dtype=bool)
    if spec.view is View.MLO:
        depth = h * (0.55 + 0.04 * rng.uniform(-1, 1))
        width = w * (0.38 + 0.04 * rng.uniform(-1, 1))
        pectoral = (rows < depth) & (cols < width * (1.0 - rows / depth))
    return ellipse | pectoral, pectoral


def _ellipse_mask(
    shape: tuple[int, int], center: tuple[float, float], radii: tuple[float, float]
) -> np.ndarray:
    cy, cx = center
    ry, rx = radii
    rows = np.arange(shape[0])[:, None]
    cols = np.arange(shape[1])[None, :]
    return ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2 <= 1.0


def neighbourhood_pedestal(density_param: float) -> float:
    """Flat intensity of the texture-cleared region around a mass.

    Scales with density so dense phantoms keep masses on locally bright
    tissue (and the cleared pixels still count toward the bright budget).
    """
    return BASE_TISSUE + (BLOB - BASE_TISSUE) * float(density_param)


def _neighbourhood_margin(box: MassBox) -> int:
    return max(3, round(0.5 * max(box.w, box.h)))


def _box_slice(box: MassBox, shape: tuple[int, int], margin: int = 0) -> tuple[slice, slice]:
    y0 = max(0, int(np.floor(box.y)) - margin)
    x0 = max(0, int(np.floor(box.x)) - margin)
    y1 = min(shape[0], int(np.ceil(box.y2)) + margin)
    x1 = min(shape[1], int(np.ceil(box.x2)) + margin)
    return slice(y0, y1), slice(x0, x1)


def generate_phantom(spec: PhantomSpec) -> MammogramRecord:
    """Render one phantom record; the same PhantomSpec yields identical pixels."""
    h, w = spec.canvas
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    mask, pectoral = breast_mask(spec, rng)
    tissue_noise = np.clip(0.04 * _smooth_field(rng, (h, w), 4.0), -0.10, 0.10)
    blob_field = _smooth_field(rng, (h, w), 6.0)
    blob_noise = np.clip(0.03 * _smooth_field(rng, (h, w), 3.0), -0.06, 0.06)

    image = np.zeros((h, w), dtype=np.float64)
    image[mask] = BASE_TISSUE + tissue_noise[mask]
    image[pectoral] = PECTORAL + 0.5 * tissue_noise[pectoral]

    carve = np.zeros((h, w), dtype=bool)
    boxes: list[MassBox] = []
    for mass in spec.masses:
        box = mass.box()
        ys, xs = _box_slice(box, (h, w), margin=_neighbourhood_margin(box) + 1)
        region = np.zeros((h, w), dtype=bool)
        region[ys, xs] = True
        if not mask[region].all():
            raise ValueError(f"mass at {mass.center} (radii {mass.radii}) lies outside the breast")
        carve |= region
        boxes.append(box)
    # A flat pedestal inside the cleared neighbourhoods keeps mass contrast
    # exact: mass ellipse = pedestal + contrast, annulus = pedestal.
    image[carve] = neighbourhood_pedestal(spec.density_param)
    for mass in spec.masses:
        image[_ellipse_mask((h, w), mass.center, mass.radii)] += mass.contrast

    full = 65535
    quant = np.clip(np.rint(image * full), 0, full).astype(np.uint16)

    # Fill the bright-pixel budget: first a few compact nodules, then carpet
    # blobs topped up to the exact count.
    thresh = int(np.ceil(BRIGHT_THRESHOLD * full))
    target = int(round(bright_fraction_percent(spec.density_param) / 100.0 * mask.sum()))
    bright0 = int(((quant >= thresh) & mask).sum())
    occupied = carve | (quant >= thresh)
    headroom = max(0, target - bright0)
    nodule_budget = min(int(NODULE_BUDGET_FRACTION * target), headroom)
    placed = 0
    nodules = 0
    # Nodule size tracks the canvas (like masses) so the mass/nodule size
    # distinction survives at every desk scale.
    nodule_scale = max(min(spec.canvas) / DESK_CANVAS[1], 0.45)
    while placed < nodule_budget and nodules < NODULE_MAX_COUNT:
        ry = rng.uniform(2.5, 4.5) * nodule_scale
        rx = rng.uniform(2.5, 4.5) * nodule_scale
        est = np.pi * ry * rx
        # Never overshoot the bright budget: the carpet top-up can only add.
        if placed + est > headroom:
            break
        cy = rng.uniform(ry + 1, h - ry - 1)
        cx = rng.uniform(rx + 1, w - rx - 1)
        nod_box = MassBox(x=cx - rx, y=cy - ry, w=2 * rx, h=2 * ry)
        ys, xs = _box_slice(nod_box, (h, w), margin=2)
        if not mask[ys, xs].all() or occupied[ys, xs].any():
            nodules += 1  # counts attempts so crowded phantoms still terminate
            continue
        ell = _ellipse_mask((h, w), (cy, cx), (ry, rx))
        values = np.clip(NODULE + blob_noise[ell], 0.70, 0.86)
        quant[ell] = np.rint(values * full).astype(np.uint16)
        occupied[ys, xs] = True
        placed += int(ell.sum())
        nodules += 1
    bright1 = int(((quant >= thresh) & mask).sum())
    need = target - bright1
    if need > 0:
        candidates = mask & ~carve & (quant < thresh)
        cand_idx = np.flatnonzero(candidates.ravel())
        order = np.argsort(-blob_field.ravel()[cand_idx], kind="stable")
        chosen = cand_idx[order[:need]]
        values = np.clip(BLOB + blob_noise.ravel()[chosen], 0.50, 0.62)
        flat = quant.ravel()
        flat[chosen] = np.rint(values * full).astype(np.uint16)
        quant = flat.reshape(h, w)

    if spec.laterality is Laterality.R:
        quant = quant[:, ::-1].copy()
        boxes = [MassBox(x=w - b.x - b.w, y=b.y, w=b.w, h=b.h) for b in boxes]

    proxy = measure_density_proxy(quant)
    record_id = spec.record_id or f"PH-{spec.seed:010d}"
    return MammogramRecord(
        id=record_id,
        dataset_tag=spec.dataset_tag,
        view=spec.view,
        laterality=spec.laterality,
        health=Health.WITH_MASSES if boxes else Health.NORMAL,
        image=quant,
        image_shape=(h, w),
        bit_depth=16,
        density=DensityMeasure(DensityKind.LIBRA_PERCENT, proxy),
        annotations=boxes,
    )


def measure_density_proxy(image: np.ndarray) -> float:
    """Percent of in-breast pixels above the fixed bright threshold.

    The breast interior is the foreground (intensity above 2% of the image
    max); the bright threshold is a fixed fraction of the dtype's full
    scale, so the proxy is deterministic and comparable across images.
    """
    if image.size == 0 or float(image.max()) <= 0:
        raise ValueError("no breast region: image is empty or all background")
    if np.issubdtype(image.dtype, np.integer):
        full = float(np.iinfo(image.dtype).max)
    else:
        full = 1.0
    mask = image > 0.02 * float(image.max())
    if not mask.any():
        raise ValueError("no breast region: no foreground pixels")
    bright = image >= BRIGHT_THRESHOLD * full
    return 100.0 * float((bright & mask).sum()) / float(mask.sum())


def mass_contrast(image: np.ndarray, box: MassBox) -> float:
    """Mean intensity of the inscribed mass ellipse minus its local annulus, in [0, 1] units.

    The annulus is the texture-cleared neighbourhood the generator reserves
    around each mass, so on phantoms this measures the rendered contrast
    directly; after translation it measures how much of it survived.
    """
    if np.issubdtype(image.dtype, np.integer):
        full = float(np.iinfo(image.dtype).max)
    else:
        full = 1.0
    shape = image.shape
    # Back from continuous box coords to pixel-index center/radii.
    center = (box.y + box.h / 2.0 - 0.5, box.x + box.w / 2.0 - 0.5)
    radii = (max((box.h - 1) / 2.0, 1.0), max((box.w - 1) / 2.0, 1.0))
    inner = _ellipse_mask(shape, center, radii)
    ys, xs = _box_slice(box, shape, margin=_neighbourhood_margin(box))
    ring = np.zeros(shape, dtype=bool)
    ring[ys, xs] = True
    ys_in, xs_in = _box_slice(box, shape)
    ring[ys_in, xs_in] = False
    if not inner.any() or not ring.any():
        raise ValueError(f"box {box} leaves no measurable interior/annulus")
    return (float(image[inner].mean()) - float(image[ring].mean())) / full


# Corpus generation ----------------------------------------------------------

# Density-parameter ranges that land safely inside each category's proxy
# interval, leaving headroom for mass pixels near the A and B upper edges.
CATEGORY_D_RANGES: dict[DensityCategory, tuple[float, float]] = {
    DensityCategory.A: (0.000, 0.015),
    DensityCategory.B: (0.080, 0.260),
    DensityCategory.C: (0.340, 0.780),
    DensityCategory.D: (0.920, 1.000),
}


@dataclass
class CorpusConfig:
    """Counts and rendering knobs for a procedurally generated corpus.

    ``counts`` maps category name -> {"normal": n, "with_masses": m}. Views
    and lateralities alternate deterministically so every bucket stays
    balanced.
    """

    counts: dict[str, dict[str, int]]
    seed: int = 0
    canvas: tuple[int, int] = DESK_CANVAS
    dataset_tag: str = "PHANTOM"
    id_prefix: str = "PH"
    split_tag: Split = Split.TRAIN
    masses_per_record: tuple[int, int] = (1, 2)
    mass_radius: tuple[float, float] = (5.0, 10.0)  # at the default canvas width; scaled below
    mass_contrast: tuple[float, float] = (0.25, 0.40)

    @classmethod
    def from_dict(cls, doc: dict) -> "CorpusConfig":
        kwargs = dict(doc)
        for key in ("canvas", "masses_per_record", "mass_radius", "mass_contrast"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def _derived_seed(*parts) -> int:
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _place_masses(
    spec_seed: int,
    category: DensityCategory,
    config: CorpusConfig,
    n_masses: int,
    view: View,
    canvas: tuple[int, int],
) -> tuple[MassSpec, ...]:
    """Rejection-sample mass placements whose cleared neighbourhood fits the breast."""
    rng = np.random.Generator(np.random.PCG64(spec_seed ^ 0x6D617373))
    probe = PhantomSpec(seed=spec_seed, view=view, canvas=canvas)
    mask, _ = breast_mask(probe, np.random.Generator(np.random.PCG64(spec_seed)))
    h, w = canvas
    # Radii are configured for the default canvas width; scale for others so
    # masses (and their cleared neighbourhoods) keep the same areal share.
    scale = min(canvas) / DESK_CANVAS[1]
    r_lo = max(2.0, config.mass_radius[0] * scale)
    r_hi = max(r_lo + 0.5, config.mass_radius[1] * scale)
    if category is DensityCategory.A:  # keep A proxies under the first cut point
        r_hi = max(min(r_hi, 7.0 * scale), r_lo + 0.3)
        n_masses = min(n_masses, 1)
    masses: list[MassSpec] = []
    for _ in range(n_masses):
        for _attempt in range(300):
            ry = rng.uniform(r_lo, r_hi)
            rx = rng.uniform(r_lo, r_hi)
            cy = rng.uniform(ry + 1, h - ry - 1)
            cx = rng.uniform(rx + 1, w - rx - 1)
            contrast = rng.uniform(*config.mass_contrast)
            mass = MassSpec(center=(cy, cx), radii=(ry, rx), contrast=contrast)
            box = mass.box()
            ys, xs = _box_slice(box, canvas, margin=_neighbourhood_margin(box) + 1)
            if not mask[ys, xs].all():
                continue
            if any(
                abs(m.center[0] - cy) < 2.5 * (m.radii[0] + ry)
                and abs(m.center[1] - cx) < 2.5 * (m.radii[1] + rx)
                for m in masses
            ):
                continue
            masses.append(mass)
            break
        else:
            raise RuntimeError("could not place a mass inside the breast after 300 attempts")
    return tuple(masses)


def generate_corpus(config: CorpusConfig) -> Manifest:
    """Generate a corpus matching the per-category counts; deterministic in the seed."""
    records = []
    views = (View.CC, View.MLO)
    lateralities = (Laterality.L, Laterality.R)
    for cat_name in sorted(config.counts):
        category = DensityCategory[cat_name]
        d_lo, d_hi = CATEGORY_D_RANGES[category]
        for kind, key in (("N", "normal"), ("M", "with_masses")):
            n = int(config.counts[cat_name].get(key, 0))
            for i in range(n):
                seed = _derived_seed(config.seed, cat_name, kind, i)
                rng = np.random.Generator(np.random.PCG64(seed))
                d = rng.uniform(d_lo, d_hi)
                view = views[i % 2]
                n_masses = 0
                if kind == "M":
                    lo, hi = config.masses_per_record
                    n_masses = int(rng.integers(lo, hi + 1))
                masses = (
                    _place_masses(seed, category, config, n_masses, view, config.canvas)
                    if n_masses
                    else ()
                )
                spec = PhantomSpec(
                    seed=seed,
                    view=view,
                    density_param=d,
                    masses=masses,
                    canvas=config.canvas,
                    laterality=lateralities[(i // 2) % 2],
                    dataset_tag=config.dataset_tag,
                    record_id=f"{config.id_prefix}-{cat_name}-{kind}{i:04d}",
                )
                record = generate_phantom(spec)
                got = map_density(record.density)
                if got is not category:
                    raise RuntimeError(
                        f"{record.id}: generated proxy {record.density.value:.2f}% maps to "
                        f"{got.name}, wanted {cat_name}"
                    )
                records.append(record)
    return Manifest(
        records=records,
        split_tag=config.split_tag,
        provenance={"generator": "phantom", "seed": config.seed, "counts": config.counts},
    )
