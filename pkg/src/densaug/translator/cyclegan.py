"""Unpaired low-to-high-density image translation estimator.

``CycleGanTranslator`` follows the fit/transform estimator convention: fit
on two unpaired healthy-only record sets (source domain X, target domain
Y), then transform source records through the learned X->Y generator.
Training optimizes two generators and two patch discriminators under the
combined adversarial + weighted cycle-consistency objective.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..records import DensityKind, DensityMeasure, Health, MammogramRecord, Manifest
from .losses import cycle_loss, gan_d_loss, gan_g_loss
from .networks import PatchDiscriminator, ResnetGenerator, init_weights


@dataclass
class TranslatorConfig:
    """Training hyperparameters; lambda_cyc weighs cycle consistency against adversarial terms."""

    lambda_cyc: float = 10.0
    max_epochs: int = 200
    max_steps: int | None = None
    batch_size: int = 1
    lr: float = 2e-4
    image_size: tuple[int, int] = (256, 160)
    n_res_blocks: int = 6
    ngf: int = 16
    ndf: int = 16
    adv_mode: str = "lsgan"
    identity_weight: float = 0.0
    seed: int = 0
    checkpoint_every: int | None = None

    def __post_init__(self) -> None:
        if self.lambda_cyc <= 0:
            raise ValueError(f"lambda_cyc must be positive: {self.lambda_cyc}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1: {self.batch_size}")
        self.image_size = tuple(int(v) for v in self.image_size)

    @classmethod
    def from_dict(cls, doc: dict) -> "TranslatorConfig":
        return cls(**doc)


@dataclass
class TrainLog:
    """One row per optimization step plus epoch markers."""

    rows: list[dict] = field(default_factory=list)

    def append(self, **row) -> None:
        self.rows.append(row)

    def cycle_values(self) -> list[float]:
        return [r["cycle"] for r in self.rows]

    def to_csv(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        cols = ["step", "epoch", "adv_g_xy", "adv_g_yx", "cycle", "d_x", "d_y", "lr"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for r in self.rows:
                fh.write(",".join(f"{r[c]:.6g}" if c not in ("step", "epoch") else str(r[c]) for c in cols) + "\n")
        return path


def record_to_tensor(record: MammogramRecord) -> torch.Tensor:
    """Map a record's pixels to a (1, 1, H, W) float tensor in [-1, 1]."""
    image = record.require_image().astype(np.float32)
    scaled = image / float(record.max_value) * 2.0 - 1.0
    return torch.from_numpy(scaled)[None, None]


def tensor_to_image(t: torch.Tensor, bit_depth: int = 16) -> np.ndarray:
    """Map a [-1, 1] tensor back to the integer intensity grid."""
    full = (1 << bit_depth) - 1
    arr = ((t.detach().cpu().numpy().squeeze() + 1.0) / 2.0 * full).round()
    dtype = np.uint16 if bit_depth == 16 else np.uint8
    return np.clip(arr, 0, full).astype(dtype)


def _ensure_records(data) -> list[MammogramRecord]:
    records = list(data.records) if isinstance(data, Manifest) else list(data)
    if not records:
        raise ValueError("empty record set")
    return records


def reject_annotated(records: list[MammogramRecord], domain: str) -> None:
    """Refuse any record carrying lesions: translation models train on healthy images only."""
    bad = [r.id for r in records if r.health is not Health.NORMAL or r.annotations]
    if bad:
        raise ValueError(
            f"{domain} set contains {len(bad)} annotated record(s) (e.g. {bad[0]}); "
            "translation training accepts healthy records only"
        )


class CycleGanTranslator(BaseEstimator):
    """Two-generator, two-discriminator unpaired translation model.

    Parameters mirror :class:`TranslatorConfig`. After ``fit`` the learned
    networks live in ``g_`` (X->Y), ``f_`` (Y->X), ``d_x_`` and ``d_y_``,
    with the per-step history in ``train_log_``.
    """

    def __init__(
        self,
        lambda_cyc: float = 10.0,
        max_epochs: int = 200,
        max_steps: int | None = None,
        batch_size: int = 1,
        lr: float = 2e-4,
        image_size: tuple[int, int] = (256, 160),
        n_res_blocks: int = 6,
        ngf: int = 16,
        ndf: int = 16,
        adv_mode: str = "lsgan",
        identity_weight: float = 0.0,
        seed: int = 0,
        checkpoint_every: int | None = None,
        checkpoint_dir: str | None = None,
        model_key: str | None = None,
    ):
        self.lambda_cyc = lambda_cyc
        self.max_epochs = max_epochs
        self.max_steps = max_steps
        self.batch_size = batch_size
        self.lr = lr
        self.image_size = image_size
        self.n_res_blocks = n_res_blocks
        self.ngf = ngf
        self.ndf = ndf
        self.adv_mode = adv_mode
        self.identity_weight = identity_weight
        self.seed = seed
        self.checkpoint_every = checkpoint_every
        self.checkpoint_dir = checkpoint_dir
        self.model_key = model_key

    # -- construction -------------------------------------------------------

    def config(self) -> TranslatorConfig:
        return TranslatorConfig(
            lambda_cyc=self.lambda_cyc,
            max_epochs=self.max_epochs,
            max_steps=self.max_steps,
            batch_size=self.batch_size,
            lr=self.lr,
            image_size=tuple(self.image_size),
            n_res_blocks=self.n_res_blocks,
            ngf=self.ngf,
            ndf=self.ndf,
            adv_mode=self.adv_mode,
            identity_weight=self.identity_weight,
            seed=self.seed,
            checkpoint_every=self.checkpoint_every,
        )

    def _build_networks(self) -> None:
        torch.manual_seed(self.seed)
        self.g_ = ResnetGenerator(1, self.ngf, self.n_res_blocks)
        self.f_ = ResnetGenerator(1, self.ngf, self.n_res_blocks)
        self.d_x_ = PatchDiscriminator(1, self.ndf)
        self.d_y_ = PatchDiscriminator(1, self.ndf)
        for net in (self.g_, self.f_, self.d_x_, self.d_y_):
            init_weights(net)

    def _check_fitted(self) -> None:
        if not hasattr(self, "g_"):
            raise NotFittedError("translator is not fitted; call fit() or load a checkpoint")

    # -- training ------------------------------------------------------------

    def fit(self, source, target) -> "CycleGanTranslator":
        """Train on two unpaired healthy-only record sets (source X, target Y)."""
        src = _ensure_records(source)
        tgt = _ensure_records(target)
        reject_annotated(src, "source")
        reject_annotated(tgt, "target")
        h, w = self.image_size
        for rec in src + tgt:
            if tuple(rec.image_shape) != (h, w):
                raise ValueError(
                    f"record {rec.id} has shape {rec.image_shape}, model expects {(h, w)}"
                )

        self._build_networks()
        rng = np.random.Generator(np.random.PCG64(self.seed))
        x_all = torch.cat([record_to_tensor(r) for r in src])
        y_all = torch.cat([record_to_tensor(r) for r in tgt])

        opt_g = torch.optim.Adam(
            list(self.g_.parameters()) + list(self.f_.parameters()), lr=self.lr, betas=(0.5, 0.999)
        )
        opt_d = torch.optim.Adam(
            list(self.d_x_.parameters()) + list(self.d_y_.parameters()),
            lr=self.lr,
            betas=(0.5, 0.999),
        )
        # Constant rate for the first half of the epoch budget, then linear decay to zero.
        half = max(1, self.max_epochs // 2)

        def lr_factor(epoch: int) -> float:
            if epoch < half:
                return 1.0
            return max(0.0, 1.0 - (epoch - half) / max(1, self.max_epochs - half))

        sched_g = torch.optim.lr_scheduler.LambdaLR(opt_g, lr_factor)
        sched_d = torch.optim.lr_scheduler.LambdaLR(opt_d, lr_factor)

        log = TrainLog()
        steps_per_epoch = max(
            1, int(np.ceil(max(len(src), len(tgt)) / self.batch_size))
        )
        step = 0
        done = False
        t0 = time.time()
        for epoch in range(self.max_epochs):
            x_order = rng.permutation(len(src))
            y_order = rng.permutation(len(tgt))
            for i in range(steps_per_epoch):
                xi = [x_order[(i * self.batch_size + j) % len(src)] for j in range(self.batch_size)]
                yi = [y_order[(i * self.batch_size + j) % len(tgt)] for j in range(self.batch_size)]
                x = x_all[xi]
                y = y_all[yi]

                fake_y = self.g_(x)
                fake_x = self.f_(y)
                rec_x = self.f_(fake_y)
                rec_y = self.g_(fake_x)

                adv_g_xy = gan_g_loss(self.d_y_(fake_y), self.adv_mode)
                adv_g_yx = gan_g_loss(self.d_x_(fake_x), self.adv_mode)
                cyc = cycle_loss(x, rec_x, y, rec_y)
                g_total = adv_g_xy + adv_g_yx + self.lambda_cyc * cyc
                if self.identity_weight > 0:
                    idt = (self.g_(y) - y).abs().mean() + (self.f_(x) - x).abs().mean()
                    g_total = g_total + self.identity_weight * self.lambda_cyc * idt
                if not torch.isfinite(g_total):
                    raise FloatingPointError(
                        f"non-finite generator loss at step {step}; aborting training"
                    )
                opt_g.zero_grad(set_to_none=True)
                g_total.backward()
                opt_g.step()

                d_y_loss = gan_d_loss(self.d_y_(y), self.d_y_(fake_y.detach()), self.adv_mode)
                d_x_loss = gan_d_loss(self.d_x_(x), self.d_x_(fake_x.detach()), self.adv_mode)
                d_total = d_x_loss + d_y_loss
                if not torch.isfinite(d_total):
                    raise FloatingPointError(
                        f"non-finite discriminator loss at step {step}; aborting training"
                    )
                opt_d.zero_grad(set_to_none=True)
                d_total.backward()
                opt_d.step()

                step += 1
                log.append(
                    step=step,
                    epoch=epoch,
                    adv_g_xy=adv_g_xy.detach().item(),
                    adv_g_yx=adv_g_yx.detach().item(),
                    cycle=cyc.detach().item(),
                    d_x=d_x_loss.detach().item(),
                    d_y=d_y_loss.detach().item(),
                    lr=opt_g.param_groups[0]["lr"],
                )
                if self.max_steps is not None and step >= self.max_steps:
                    done = True
                    break
            sched_g.step()
            sched_d.step()
            if (
                self.checkpoint_every
                and self.checkpoint_dir
                and (epoch + 1) % self.checkpoint_every == 0
            ):
                self.save_checkpoint(
                    Path(self.checkpoint_dir) / f"epoch{epoch + 1:04d}.pt", epoch=epoch + 1
                )
            if done:
                break
        self.train_log_ = log
        self.train_seconds_ = time.time() - t0
        self.n_steps_ = step
        for net in (self.g_, self.f_, self.d_x_, self.d_y_):
            net.eval()
        return self

    # -- inference -----------------------------------------------------------

    def translate_image(self, image: np.ndarray, bit_depth: int = 16) -> np.ndarray:
        self._check_fitted()
        if tuple(image.shape) != tuple(self.image_size):
            raise ValueError(f"image shape {image.shape} does not match model {self.image_size}")
        full = (1 << bit_depth) - 1
        t = torch.from_numpy(image.astype(np.float32) / full * 2.0 - 1.0)[None, None]
        with torch.no_grad():
            out = self.g_(t)
        return tensor_to_image(out, bit_depth)

    def transform(self, record: MammogramRecord) -> MammogramRecord:
        """Translate one record through G, preserving geometry, annotations and health."""
        self._check_fitted()
        image = self.translate_image(record.require_image(), record.bit_depth)
        key = self.model_key or "G"
        return replace(
            record,
            id=f"{record.id}::syn::{key}",
            dataset_tag=f"{record.dataset_tag}-SYN",
            image=image,
            image_path=None,
            density=DensityMeasure(DensityKind.BIRADS_DIRECT, "D"),
            provenance={"source_id": record.id, "model_key": key},
        )

    # -- persistence ---------------------------------------------------------

    def save_checkpoint(self, path: Path | str, epoch: int | None = None) -> Path:
        """Self-describing archive: config, epoch, seed and all four state dicts."""
        self._check_fitted()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(
            {
                "format": "densaug-translator",
                "version": 1,
                "config": asdict(self.config()),
                "model_key": self.model_key,
                "epoch": epoch,
                "seed": self.seed,
                "g": self.g_.state_dict(),
                "f": self.f_.state_dict(),
                "d_x": self.d_x_.state_dict(),
                "d_y": self.d_y_.state_dict(),
            },
            path,
        )
        return path

    @classmethod
    def load_checkpoint(cls, path: Path | str) -> "CycleGanTranslator":
        doc = torch.load(Path(path), map_location="cpu", weights_only=False)
        if doc.get("format") != "densaug-translator":
            raise ValueError(f"{path} is not a translator checkpoint")
        cfg = TranslatorConfig.from_dict(doc["config"])
        est = cls(
            lambda_cyc=cfg.lambda_cyc,
            max_epochs=cfg.max_epochs,
            max_steps=cfg.max_steps,
            batch_size=cfg.batch_size,
            lr=cfg.lr,
            image_size=cfg.image_size,
            n_res_blocks=cfg.n_res_blocks,
            ngf=cfg.ngf,
            ndf=cfg.ndf,
            adv_mode=cfg.adv_mode,
            identity_weight=cfg.identity_weight,
            seed=cfg.seed,
            checkpoint_every=cfg.checkpoint_every,
            model_key=doc.get("model_key"),
        )
        est._build_networks()
        est.g_.load_state_dict(doc["g"])
        est.f_.load_state_dict(doc["f"])
        est.d_x_.load_state_dict(doc["d_x"])
        est.d_y_.load_state_dict(doc["d_y"])
        for net in (est.g_, est.f_, est.d_x_, est.d_y_):
            net.eval()
        est.train_log_ = TrainLog()
        return est


def train_cyclegan(
    source: Manifest,
    target: Manifest,
    config: TranslatorConfig,
    checkpoint_dir: Path | str | None = None,
) -> tuple[CycleGanTranslator, TrainLog]:
    """Train a translator from two healthy-only manifests.

    When ``checkpoint_dir`` is given and the config sets
    ``checkpoint_every``, an epoch checkpoint lands there every N epochs.
    """
    est = CycleGanTranslator(
        lambda_cyc=config.lambda_cyc,
        max_epochs=config.max_epochs,
        max_steps=config.max_steps,
        batch_size=config.batch_size,
        lr=config.lr,
        image_size=config.image_size,
        n_res_blocks=config.n_res_blocks,
        ngf=config.ngf,
        ndf=config.ndf,
        adv_mode=config.adv_mode,
        identity_weight=config.identity_weight,
        seed=config.seed,
        checkpoint_every=config.checkpoint_every,
        checkpoint_dir=str(checkpoint_dir) if checkpoint_dir else None,
    )
    est.fit(source, target)
    return est, est.train_log_


def translate(model: CycleGanTranslator, record: MammogramRecord) -> MammogramRecord:
    """Translate one record low -> high density through the model's G generator."""
    return model.transform(record)
