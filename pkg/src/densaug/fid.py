"""Fréchet distance between embedding distributions and the bounds protocol.

The Fréchet distance between Gaussians fitted to two embedding sets is
``|mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2})``. Because the value is not
an absolute measure, synthetic sets are judged against two references: a
lower bound (distance between two random halves of the real high-density
set) and an upper bound (distance between the real low- and high-density
sets).

Embedders are pluggable; the bundled reference embedder computes fixed
handcrafted statistics (intensity histogram, gradient-magnitude histogram,
foreground/bright-area summary), so its values are deterministic and
comparable only to themselves. An external deep-feature embedder can be
attached through the same interface when comparability with published
numbers is needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, TransformerMixin

from .phantom import BRIGHT_THRESHOLD

IMAG_TOLERANCE = 1e-6


@dataclass
class EmbeddingSet:
    """n feature vectors of dim d plus a descriptor of where they came from."""

    features: np.ndarray
    descriptor: dict = field(default_factory=dict)
    regularized: bool = False

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError(f"features must be (n, d), got shape {self.features.shape}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def gaussian(self) -> tuple[np.ndarray, np.ndarray, bool]:
        """Fit (mu, covariance); regularizes when n < d + 1 and flags it."""
        mu = self.features.mean(axis=0)
        if self.n < 2:
            raise ValueError("need at least two samples to fit a covariance")
        cov = np.cov(self.features, rowvar=False)
        regularized = False
        if self.n < self.dim + 1:
            eps = 1e-6 * max(np.trace(cov) / self.dim, 1e-12)
            cov = cov + eps * np.eye(self.dim)
            regularized = True
        return mu, cov, regularized


class ReferenceEmbedder(BaseEstimator, TransformerMixin):
    """Deterministic handcrafted image statistics, d = 32.

    16 intensity-histogram bins over the foreground, 12 gradient-magnitude
    bins, plus mean, standard deviation, bright-area fraction and
    foreground fraction.
    """

    def __init__(self, intensity_bins: int = 16, gradient_bins: int = 12):
        self.intensity_bins = intensity_bins
        self.gradient_bins = gradient_bins

    def fit(self, X=None, y=None):
        return self

    def _embed_one(self, image: np.ndarray) -> np.ndarray:
        if np.issubdtype(image.dtype, np.integer):
            full = float(np.iinfo(image.dtype).max)
        else:
            full = 1.0
        x = image.astype(np.float64) / full
        fg = x > 0.02 * float(x.max()) if x.max() > 0 else np.zeros_like(x, dtype=bool)
        inside = x[fg] if fg.any() else x.ravel()
        hist, _ = np.histogram(inside, bins=self.intensity_bins, range=(0.0, 1.0))
        hist = hist / max(1, inside.size)
        gy, gx = np.gradient(x)
        gmag = np.hypot(gy, gx)
        ghist, _ = np.histogram(gmag, bins=self.gradient_bins, range=(0.0, 0.5))
        ghist = ghist / gmag.size
        stats = np.array(
            [
                inside.mean() if inside.size else 0.0,
                inside.std() if inside.size else 0.0,
                float((inside >= BRIGHT_THRESHOLD).mean()) if inside.size else 0.0,
                float(fg.mean()),
            ]
        )
        return np.concatenate([hist, ghist, stats])

    def transform(self, images) -> np.ndarray:
        rows = [self._embed_one(np.asarray(img)) for img in images]
        if not rows:
            raise ValueError("no images to embed")
        return np.stack(rows)


def embed(images, embedder=None, descriptor: dict | None = None) -> EmbeddingSet:
    """Embed a list of images (or records) into an EmbeddingSet."""
    embedder = embedder if embedder is not None else ReferenceEmbedder()
    arrays = [img.image if hasattr(img, "image") else img for img in images]
    return EmbeddingSet(features=embedder.transform(arrays), descriptor=descriptor or {})


def frechet_distance(
    mu1: np.ndarray, sigma1: np.ndarray, mu2: np.ndarray, sigma2: np.ndarray
) -> float:
    """Fréchet distance between two Gaussians; symmetric and >= 0."""
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=np.float64))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=np.float64))
    sigma1 = np.atleast_2d(np.asarray(sigma1, dtype=np.float64))
    sigma2 = np.atleast_2d(np.asarray(sigma2, dtype=np.float64))
    for arr in (mu1, mu2, sigma1, sigma2):
        if not np.isfinite(arr).all():
            raise ValueError("non-finite values in Fréchet distance inputs")
    diff = mu1 - mu2
    prod = sigma1 @ sigma2
    covmean, _ = linalg.sqrtm(prod, disp=False)
    if not np.isfinite(covmean).all():
        # Rank-deficient product: retry on a slightly loaded diagonal.
        eps = 1e-6 * max(np.trace(sigma1) + np.trace(sigma2), 1.0) / sigma1.shape[0]
        offset = eps * np.eye(sigma1.shape[0])
        covmean, _ = linalg.sqrtm((sigma1 + offset) @ (sigma2 + offset), disp=False)
    if np.iscomplexobj(covmean):
        scale = max(np.abs(covmean.real).max(), 1e-12)
        if np.abs(covmean.imag).max() / scale > IMAG_TOLERANCE:
            raise ValueError(
                f"matrix square root has a non-negligible imaginary part "
                f"(max {np.abs(covmean.imag).max():.3e})"
            )
        covmean = covmean.real
    value = float(diff @ diff + np.trace(sigma1) + np.trace(sigma2) - 2.0 * np.trace(covmean))
    return max(value, 0.0)


def fid_between(a: EmbeddingSet, b: EmbeddingSet) -> tuple[float, bool]:
    """Fréchet distance between two embedding sets; flags covariance regularization."""
    mu1, s1, r1 = a.gaussian()
    mu2, s2, r2 = b.gaussian()
    return frechet_distance(mu1, s1, mu2, s2), (r1 or r2)


@dataclass
class FidBoundsResult:
    """Lower/upper reference distances plus one value per synthetic set."""

    descriptor: dict
    lower_bound: float
    upper_bound: float
    synthetic: dict[str, float]
    within_bounds: dict[str, bool]
    warnings: list[str] = field(default_factory=list)

    def to_row(self) -> dict:
        row = dict(self.descriptor)
        row["lower_bound"] = self.lower_bound
        row["upper_bound"] = self.upper_bound
        for key, value in sorted(self.synthetic.items()):
            row[key] = value
            row[f"{key}_within_bounds"] = self.within_bounds[key]
        row["warnings"] = "; ".join(self.warnings)
        return row


def fid_bounds_protocol(
    real_low,
    real_high,
    synthetic_sets: dict[str, list],
    embedder=None,
    split_seed: int = 0,
    n_splits: int = 1,
    descriptor: dict | None = None,
) -> FidBoundsResult:
    """Bound the per-model synthetic distances by two real-data references.

    Lower bound: distance between two seeded 50/50 splits of the real
    high-density set (averaged when ``n_splits`` > 1). Upper bound:
    distance between the real low- and high-density sets. Each synthetic
    set is measured against the full real high-density set.
    """
    embedder = embedder if embedder is not None else ReferenceEmbedder()
    warnings: list[str] = []
    low_emb = embed(real_low, embedder, {"role": "real_low"})
    high_emb = embed(real_high, embedder, {"role": "real_high"})

    n = high_emb.n
    if n < 4:
        raise ValueError(f"real high-density set too small to split: n={n}")
    lowers = []
    for k in range(max(1, n_splits)):
        rng = np.random.Generator(np.random.PCG64(split_seed + k))
        perm = rng.permutation(n)
        half = n // 2
        s1 = EmbeddingSet(high_emb.features[perm[:half]])
        s2 = EmbeddingSet(high_emb.features[perm[half:]])
        value, reg = fid_between(s1, s2)
        if reg:
            warnings.append(f"lower-bound split {k}: covariance regularized (small split)")
        lowers.append(value)
    lower = float(np.mean(lowers))

    upper, reg = fid_between(low_emb, high_emb)
    if reg:
        warnings.append("upper bound: covariance regularized")
    if upper <= lower:
        warnings.append(
            f"degenerate bounds: upper ({upper:.4g}) does not exceed lower ({lower:.4g})"
        )

    synthetic: dict[str, float] = {}
    within: dict[str, bool] = {}
    for key in sorted(synthetic_sets):
        syn_emb = embed(synthetic_sets[key], embedder, {"role": "synthetic", "model": key})
        value, reg = fid_between(syn_emb, high_emb)
        if reg:
            warnings.append(f"synthetic set {key}: covariance regularized")
        synthetic[key] = value
        within[key] = lower <= value <= upper
    return FidBoundsResult(
        descriptor=descriptor or {},
        lower_bound=lower,
        upper_bound=upper,
        synthetic=synthetic,
        within_bounds=within,
        warnings=warnings,
    )


def save_embeddings(emb: EmbeddingSet, path) -> None:
    """Cache an embedding set: .npy matrix plus a JSON sidecar descriptor."""
    import json
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path.with_suffix(".npy"), emb.features)
    path.with_suffix(".json").write_text(
        json.dumps(
            {"descriptor": emb.descriptor, "n": emb.n, "dim": emb.dim}, indent=2, sort_keys=True
        )
    )


def load_embeddings(path) -> EmbeddingSet:
    import json
    from pathlib import Path

    path = Path(path)
    features = np.load(path.with_suffix(".npy"))
    sidecar = json.loads(path.with_suffix(".json").read_text())
    return EmbeddingSet(features=features, descriptor=sidecar.get("descriptor", {}))


def bounds_report_csv(results: list[FidBoundsResult], path) -> None:
    """One row per (dataset, view) group: lower bound, synthetic values, upper bound."""
    from pathlib import Path

    rows = [r.to_row() for r in results]
    cols: list[str] = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(row.get(c, "")) for c in cols) + "\n")


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    text = str(value)
    return f'"{text}"' if ("," in text or '"' in text) else text
