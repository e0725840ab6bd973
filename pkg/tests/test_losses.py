"""Adversarial and cycle objectives: pinned values and the finite-difference check."""

from __future__ import annotations

import math

import pytest
import torch

from densaug.translator.losses import (
    adversarial_loss,
    combine_objective,
    cycle_loss,
    full_objective,
    gan_d_loss,
    gan_g_loss,
)


def test_adversarial_perfect_discriminator_near_zero():
    eps = 1e-7
    value = adversarial_loss([1 - eps], [eps]).item()
    assert abs(value) < 1e-5


def test_adversarial_half_half():
    value = adversarial_loss([0.5], [0.5]).item()
    assert value == pytest.approx(2 * math.log(0.5), abs=1e-9)
    assert value == pytest.approx(-1.3862943611, abs=1e-6)


def test_adversarial_permutation_invariant():
    a = adversarial_loss([0.3, 0.7], [0.3, 0.7]).item()
    b = adversarial_loss([0.7, 0.3], [0.7, 0.3]).item()
    assert a == pytest.approx(b, abs=1e-12)


def test_adversarial_empty_batch_rejected():
    with pytest.raises(ValueError, match="empty batch"):
        adversarial_loss([], [0.5])


def test_cycle_identity_is_zero():
    x = torch.rand(2, 1, 8, 8)
    y = torch.rand(2, 1, 8, 8)
    assert cycle_loss(x, x.clone(), y, y.clone()).item() == 0.0


def test_cycle_constant_offset():
    x = torch.rand(1, 1, 16, 16, dtype=torch.float64)
    y = torch.rand(1, 1, 16, 16, dtype=torch.float64)
    value = cycle_loss(x, x + 0.25, y, y).item()
    assert value == pytest.approx(0.25, abs=1e-12)


def test_cycle_term_swap_symmetric():
    x = torch.rand(1, 1, 8, 8, dtype=torch.float64)
    xr = torch.rand(1, 1, 8, 8, dtype=torch.float64)
    y = torch.rand(1, 1, 8, 8, dtype=torch.float64)
    yr = torch.rand(1, 1, 8, 8, dtype=torch.float64)
    assert cycle_loss(x, xr, y, yr).item() == pytest.approx(cycle_loss(y, yr, x, xr).item(), abs=1e-12)


def test_cycle_dim_mismatch_rejected():
    with pytest.raises(ValueError, match="mismatch"):
        cycle_loss(torch.rand(1, 1, 8, 8), torch.rand(1, 1, 4, 4), torch.rand(1), torch.rand(1))


def test_cycle_nonnegative_zero_iff_exact():
    x = torch.rand(1, 1, 8, 8)
    y = torch.rand(1, 1, 8, 8)
    perturbed = x.clone()
    perturbed[0, 0, 0, 0] += 0.5
    assert cycle_loss(x, perturbed, y, y).item() > 0.0


def test_combine_objective_arithmetic():
    # lambda=10, cycle 0.2, adversarial terms -1.0 each -> -2.0 + 2.0 = 0.0
    assert combine_objective(-1.0, -1.0, 0.2, 10.0) == pytest.approx(0.0, abs=1e-12)
    # lambda=0 reduces to the two adversarial terms
    assert combine_objective(-0.7, -0.9, 5.0, 0.0) == pytest.approx(-1.6, abs=1e-12)


class _ToyGenerator(torch.nn.Module):
    """Three-parameter scalar map: g(v) = w1*v + w2*tanh(w3*v)."""

    def __init__(self, seed: int):
        super().__init__()
        g = torch.Generator().manual_seed(seed)
        self.w = torch.nn.Parameter(torch.randn(3, generator=g, dtype=torch.float64) * 0.5)

    def forward(self, v):
        return self.w[0] * v + self.w[1] * torch.tanh(self.w[2] * v)


def _toy_discriminator(a: float, b: float):
    def d(v):
        return torch.sigmoid(a * v + b)

    return d


def test_gradient_matches_central_differences():
    torch.manual_seed(0)
    g = _ToyGenerator(seed=1)
    f = _ToyGenerator(seed=2)
    d_x = _toy_discriminator(0.8, -0.1)
    d_y = _toy_discriminator(-0.6, 0.2)
    x = torch.linspace(-1, 1, 7, dtype=torch.float64)
    y = torch.linspace(-0.5, 0.9, 7, dtype=torch.float64)

    total, _ = full_objective(g, f, d_x, d_y, x, y, lambda_cyc=10.0)
    total.backward()

    for net in (g, f):
        analytic = net.w.grad.clone()
        for i in range(3):
            step = 1e-6
            with torch.no_grad():
                net.w[i] += step
            plus, _ = full_objective(g, f, d_x, d_y, x, y, lambda_cyc=10.0)
            with torch.no_grad():
                net.w[i] -= 2 * step
            minus, _ = full_objective(g, f, d_x, d_y, x, y, lambda_cyc=10.0)
            with torch.no_grad():
                net.w[i] += step
            fd = (plus.item() - minus.item()) / (2 * step)
            denom = max(abs(fd), abs(analytic[i].item()), 1e-8)
            assert abs(analytic[i].item() - fd) / denom < 1e-3


def test_training_criteria_shapes():
    logits = torch.tensor([[0.2], [-0.4]])
    for mode in ("lsgan", "bce"):
        assert gan_g_loss(logits, mode).ndim == 0
        assert gan_d_loss(logits, logits, mode).ndim == 0
    with pytest.raises(ValueError):
        gan_g_loss(logits, "wgan")


def test_full_objective_nonfinite_rejected():
    g = _ToyGenerator(seed=1)
    f = _ToyGenerator(seed=2)

    def bad_d(v):
        return torch.full_like(v, float("nan"))

    x = torch.linspace(-1, 1, 3, dtype=torch.float64)
    with pytest.raises(FloatingPointError):
        full_objective(g, f, bad_d, bad_d, x, x, lambda_cyc=10.0)
