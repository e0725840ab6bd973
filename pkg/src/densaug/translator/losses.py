"""Adversarial and cycle-consistency objectives.

``adversarial_loss`` is the probability-form binary cross-entropy objective
E[log D(y)] + E[log(1 - D(G(x)))]: the discriminator ascends it, the
generator descends its second term. Training defaults to the least-squares
variant for stability; the probability form stays the reference for loss
values and gradient checks.
"""

from __future__ import annotations

import torch

EPS = 1e-7


def _as_tensor(values) -> torch.Tensor:
    t = values if isinstance(values, torch.Tensor) else torch.as_tensor(values, dtype=torch.float64)
    if t.numel() == 0:
        raise ValueError("empty batch")
    return t


def adversarial_loss(d_real, d_fake) -> torch.Tensor:
    """Probability-form adversarial objective over one real and one translated batch.

    Inputs are discriminator probabilities, clamped to [EPS, 1-EPS] before
    the logarithms.
    """
    real = _as_tensor(d_real).clamp(EPS, 1 - EPS)
    fake = _as_tensor(d_fake).clamp(EPS, 1 - EPS)
    return torch.log(real).mean() + torch.log1p(-fake).mean()


def cycle_loss(x_batch, x_reconstructed, y_batch, y_reconstructed) -> torch.Tensor:
    """Two-sided L1 reconstruction penalty, per-pixel mean within each term."""
    x = _as_tensor(x_batch)
    x_rec = _as_tensor(x_reconstructed)
    y = _as_tensor(y_batch)
    y_rec = _as_tensor(y_reconstructed)
    if x.shape != x_rec.shape or y.shape != y_rec.shape:
        raise ValueError(
            f"reconstruction shape mismatch: {tuple(x.shape)} vs {tuple(x_rec.shape)}, "
            f"{tuple(y.shape)} vs {tuple(y_rec.shape)}"
        )
    return (x_rec - x).abs().mean() + (y_rec - y).abs().mean()


def combine_objective(adv_xy, adv_yx, cyc, lambda_cyc: float):
    """Total objective from its three components: adv(X->Y) + adv(Y->X) + lambda * cycle."""
    return adv_xy + adv_yx + lambda_cyc * cyc


def full_objective(g, f, d_x, d_y, x, y, lambda_cyc: float = 10.0) -> tuple[torch.Tensor, dict]:
    """Evaluate the complete translation objective on one unpaired batch.

    ``d_x``/``d_y`` must emit probabilities here (the reference form).
    Returns the scalar objective plus its components; calling backward() on
    it yields gradients for whichever parameters require them, so the
    minimax roles are exercised by ascending/descending the same scalar.
    """
    fake_y = g(x)
    fake_x = f(y)
    rec_x = f(fake_y)
    rec_y = g(fake_x)
    adv_xy = adversarial_loss(d_y(y), d_y(fake_y))
    adv_yx = adversarial_loss(d_x(x), d_x(fake_x))
    cyc = cycle_loss(x, rec_x, y, rec_y)
    total = combine_objective(adv_xy, adv_yx, cyc, lambda_cyc)
    if not torch.isfinite(total):
        raise FloatingPointError(f"non-finite objective: {total}")
    return total, {"adv_xy": adv_xy, "adv_yx": adv_yx, "cycle": cyc}


# Training-mode criteria -----------------------------------------------------


def gan_g_loss(fake_logits: torch.Tensor, mode: str) -> torch.Tensor:
    """Generator-side adversarial criterion (to minimize)."""
    if mode == "lsgan":
        return ((fake_logits - 1.0) ** 2).mean()
    if mode == "bce":  # non-saturating form
        return torch.nn.functional.binary_cross_entropy_with_logits(
            fake_logits, torch.ones_like(fake_logits)
        )
    raise ValueError(f"unknown adversarial mode: {mode!r}")


def gan_d_loss(real_logits: torch.Tensor, fake_logits: torch.Tensor, mode: str) -> torch.Tensor:
    """Discriminator-side adversarial criterion (to minimize)."""
    if mode == "lsgan":
        return 0.5 * (((real_logits - 1.0) ** 2).mean() + (fake_logits**2).mean())
    if mode == "bce":
        bce = torch.nn.functional.binary_cross_entropy_with_logits
        return 0.5 * (
            bce(real_logits, torch.ones_like(real_logits))
            + bce(fake_logits, torch.zeros_like(fake_logits))
        )
    raise ValueError(f"unknown adversarial mode: {mode!r}")
