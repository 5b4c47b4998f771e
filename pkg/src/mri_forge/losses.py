"""Evaluative implementations of the generator and discriminator objectives.

Everything here is a pure function over numpy batches: no gradients, no
state. The trainer package optimizes its own copies of these formulas
and is cross-checked against this module, which is the single source of
truth for the loss arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .perceptual import SsimConfig, ssim_index

LOG_EPS = 1e-12


@dataclass(frozen=True)
class LossConfig:
    """Weights of the composite generator loss and the discriminator scale.

    recon_weight multiplies the whole reconstruction block; l2_fraction
    mixes the pixel-difference term against the perceptual term (1 means
    pixel-only, 0 means perceptual-only); disc_scale slows the
    discriminator relative to the generator.
    """

    recon_weight: float = 100.0
    l2_fraction: float = 0.3
    disc_scale: float = 0.5

    def __post_init__(self):
        if self.recon_weight < 0:
            raise ValueError("recon_weight must be >= 0")
        if not 0.0 <= self.l2_fraction <= 1.0:
            raise ValueError("l2_fraction must lie in [0, 1]")
        if self.disc_scale <= 0:
            raise ValueError("disc_scale must be > 0")


def _as_grid_batch(grids) -> np.ndarray:
    a = np.asarray(grids, dtype=np.float64)
    if a.ndim == 2:
        a = a[None, :, :]
    if a.ndim != 3:
        raise ValueError(f"expected a batch of 2-D score grids, got shape {a.shape}")
    return a


def cgan_generator_term(d_on_generated) -> float:
    """Mean log(1 - D(G)) over a batch of realness-score grids.

    Scores are probabilities that a generated sample passes as real;
    the log argument is clamped at 1e-12 so a fully fooled
    discriminator yields a finite value.
    """
    scores = _as_grid_batch(d_on_generated)
    if scores.min() < 0.0 or scores.max() > 1.0:
        raise ValueError(
            f"scores must lie in [0, 1], got range "
            f"[{scores.min():g}, {scores.max():g}]"
        )
    return float(np.mean(np.log(np.maximum(1.0 - scores, LOG_EPS))))


def _pair_batch(generated, truth):
    gen = [np.asarray(g, dtype=np.float64) for g in generated]
    tru = [np.asarray(t, dtype=np.float64) for t in truth]
    if len(gen) != len(tru):
        raise ValueError(f"batch lengths differ: {len(gen)} vs {len(tru)}")
    if not gen:
        raise ValueError("empty batch")
    for i, (g, t) in enumerate(zip(gen, tru)):
        if g.shape != t.shape:
            raise ValueError(f"pair {i} shape mismatch: {g.shape} vs {t.shape}")
    return gen, tru


def l2_term(generated, truth, reduction: str = "mse") -> float:
    """Mean over the batch of per-sample pixel difference.

    reduction "mse" is the mean squared difference per sample; "rms"
    takes the square root per sample first (the unsquared-norm reading,
    kept behind this switch so either convention can be matched).
    """
    if reduction not in ("mse", "rms"):
        raise ValueError(f"unknown reduction {reduction!r}")
    gen, tru = _pair_batch(generated, truth)
    per_sample = []
    for g, t in zip(gen, tru):
        mse = np.mean((g - t) ** 2)
        per_sample.append(np.sqrt(mse) if reduction == "rms" else mse)
    return float(np.mean(per_sample))


def perceptual_term(generated, truth, cfg: SsimConfig = SsimConfig()) -> float:
    """Mean over the batch of sqrt(1 - SSIM index) per pair.

    The square root of the SSIM complement behaves like a distance, and
    the max(0, .) guard keeps anticorrelated pairs (SSIM < 0) real.
    """
    gen, tru = _pair_batch(generated, truth)
    vals = [
        np.sqrt(max(0.0, 1.0 - ssim_index(g, t, cfg))) for g, t in zip(gen, tru)
    ]
    return float(np.mean(vals))


def generator_loss(cgan: float, l2: float, per: float, cfg: LossConfig = LossConfig()) -> float:
    """Composite generator objective: cgan + weight*(mix*l2 + (1-mix)*per).

    The endpoint mixes kill the opposite term exactly: l2_fraction 1
    ignores per entirely, 0 ignores l2 entirely.
    """
    tau = cfg.l2_fraction
    recon = 0.0
    if tau != 0.0:
        recon += tau * l2
    if tau != 1.0:
        recon += (1.0 - tau) * per
    return float(cgan + cfg.recon_weight * recon)


def discriminator_loss(
    fake_target,
    fake_pred,
    real_target,
    real_pred,
    cfg: LossConfig = LossConfig(),
) -> float:
    """Scaled squared-error objective over fake-side and real-side grids."""
    ft = _as_grid_batch(fake_target)
    fp = _as_grid_batch(fake_pred)
    rt = _as_grid_batch(real_target)
    rp = _as_grid_batch(real_pred)
    if ft.shape != fp.shape:
        raise ValueError(f"fake grids differ: {ft.shape} vs {fp.shape}")
    if rt.shape != rp.shape:
        raise ValueError(f"real grids differ: {rt.shape} vs {rp.shape}")
    return float(cfg.disc_scale * (np.mean((ft - fp) ** 2) + np.mean((rt - rp) ** 2)))


def mean_ssim_score(generated, truth, cfg: SsimConfig = SsimConfig()) -> float:
    """Mean SSIM index over a set of (generated, ground truth) pairs."""
    gen, tru = _pair_batch(generated, truth)
    return float(np.mean([ssim_index(g, t, cfg) for g, t in zip(gen, tru)]))
