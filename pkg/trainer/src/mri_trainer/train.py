"""Adversarial training loop for the MRI generator.

Per batch the discriminator takes a scaled squared-error step on
(real pair, generated pair) score grids, and the generator a step on
log(1 - realness-of-generated) plus the weighted pixel/perceptual
reconstruction block. Logged loss values are recomputed in float64 on
the detached batch tensors, so a re-evaluation of the same tensors by
the companion toolkit reproduces them to float precision rather than
float32 training noise.

Score convention: the discriminator emits a grid in (0, 1) where the
configured real label (default 0) marks genuine (face, MRI) pairs. The
adversarial term consumes realness probabilities, so outputs are
flipped accordingly before the log.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .config import TrainConfig
from .data import epoch_indices, load_batch, split_records
from .models import MriGenerator, PatchDiscriminator
from .ssim_torch import ssim_index

LOG_EPS = 1e-12


def _seed_everything(seed: int):
    torch.manual_seed(seed)
    np.random.seed(seed & 0xFFFFFFFF)


def _to_numpy_bhwc(t: torch.Tensor) -> np.ndarray:
    return t.detach().permute(0, 2, 3, 1).cpu().numpy().astype(np.float32)


def _realness(grid: torch.Tensor, real_label_is_zero: bool) -> torch.Tensor:
    return 1.0 - grid if real_label_is_zero else grid


class LossMeter:
    """Float64 recomputation of the per-batch loss row for logging."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg

    def row(self, gen01, target01, realness_on_gen, fake_t, fake_p, real_t, real_p):
        cfg = self.cfg
        gen64 = gen01.detach().double()
        tgt64 = target01.detach().double()
        cgan = float(torch.log((1.0 - realness_on_gen.detach().double()).clamp(min=LOG_EPS)).mean())
        l2 = float(((gen64 - tgt64) ** 2).mean(dim=(1, 2, 3)).mean())
        per_sample = ssim_index(gen64, tgt64, window=cfg.ssim_window)
        per = float(torch.sqrt((1.0 - per_sample).clamp(min=0.0)).mean())
        tau = cfg.l2_fraction
        recon = (tau * l2 if tau != 0.0 else 0.0) + ((1.0 - tau) * per if tau != 1.0 else 0.0)
        total_g = cgan + cfg.recon_weight * recon
        total_d = float(
            cfg.disc_scale
            * (
                ((fake_t.detach().double() - fake_p.detach().double()) ** 2).mean()
                + ((real_t.detach().double() - real_p.detach().double()) ** 2).mean()
            )
        )
        return {"cgan": cgan, "l2": l2, "per": per, "total_G": total_g, "total_D": total_d}


def _mean_ssim(generator, records, indices, cfg) -> float:
    """Mean SSIM of predicted vs ground-truth MRIs, dropout off."""
    generator.eval()
    with torch.no_grad():
        faces, targets = load_batch(records, indices, cfg.image_size)
        pred01 = (generator(faces) + 1.0) / 2.0
        values = ssim_index(pred01.double(), targets.double(), window=cfg.ssim_window)
    generator.train()
    return float(values.mean())


def _blank_baseline(records, indices, cfg) -> float:
    _, targets = load_batch(records, indices, cfg.image_size)
    blanks = torch.zeros_like(targets)
    return float(ssim_index(blanks.double(), targets.double(), window=cfg.ssim_window).mean())


def train(manifest_records, out_dir, cfg: TrainConfig, epoch_dir=None) -> dict:
    """Run the full training loop; returns the loss-log dict it also writes.

    Writes generator.pt / discriminator.pt checkpoints, loss_log.json,
    and (when cfg.dump_every > 0) one .npz batch dump per cadence under
    out_dir/batches for external loss cross-checks.
    """
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    dump_dir = out_root / "batches"
    if cfg.dump_every > 0:
        dump_dir.mkdir(exist_ok=True)

    _seed_everything(cfg.seed)
    train_records = split_records(manifest_records, "train")
    test_records = split_records(manifest_records, "test")
    if not train_records:
        raise ValueError("manifest has no train split")

    generator = MriGenerator(
        cfg.image_size, cfg.in_channels, cfg.out_channels, cfg.gen_width,
        cfg.dropout, cfg.leaky_slope,
    )
    discriminator = PatchDiscriminator(
        cfg.in_channels + cfg.out_channels, cfg.disc_width, cfg.leaky_slope
    )
    opt_g = torch.optim.Adam(generator.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))

    real_label = 0.0 if cfg.real_label_is_zero else 1.0
    fake_label = 1.0 - real_label
    meter = LossMeter(cfg)

    eval_pool = test_records if test_records else train_records
    eval_rng = np.random.default_rng(cfg.seed ^ 0x5EED)
    eval_indices = eval_rng.choice(
        len(eval_pool), size=min(cfg.eval_samples, len(eval_pool)), replace=False
    ).tolist()
    baseline = _blank_baseline(eval_pool, eval_indices, cfg)

    rows = []
    evals = [
        {"batch": 0, "mean_ssim": _mean_ssim(generator, eval_pool, eval_indices, cfg)}
    ]
    global_batch = 0
    for epoch in range(cfg.epochs):
        indices = epoch_indices(train_records, epoch, cfg.seed, epoch_dir)
        for start in range(0, len(indices), cfg.batch_size):
            chunk = indices[start : start + cfg.batch_size]
            faces, target01 = load_batch(train_records, chunk, cfg.image_size)
            target_norm = target01 * 2.0 - 1.0

            # discriminator step on real and detached generated pairs
            with torch.no_grad():
                gen_detached = generator(faces)
            d_real = discriminator(faces, target_norm)
            d_fake = discriminator(faces, gen_detached)
            real_t = torch.full_like(d_real, real_label)
            fake_t = torch.full_like(d_fake, fake_label)
            loss_d = cfg.disc_scale * (
                ((fake_t - d_fake) ** 2).mean() + ((real_t - d_real) ** 2).mean()
            )
            opt_d.zero_grad()
            loss_d.backward()
            opt_d.step()

            # generator step against the updated critic
            gen = generator(faces)
            gen01 = (gen + 1.0) / 2.0
            d_on_gen = discriminator(faces, gen)
            realness = _realness(d_on_gen, cfg.real_label_is_zero)
            cgan = torch.log((1.0 - realness).clamp(min=LOG_EPS)).mean()
            l2 = ((gen01 - target01) ** 2).mean()
            per_sample = ssim_index(gen01, target01, window=cfg.ssim_window)
            # the epsilon floor keeps sqrt's gradient finite when a batch
            # is reconstructed perfectly; logged values use the exact form
            per = torch.sqrt((1.0 - per_sample).clamp(min=1e-6)).mean()
            loss_g = cgan + cfg.recon_weight * (
                cfg.l2_fraction * l2 + (1.0 - cfg.l2_fraction) * per
            )
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()

            row = meter.row(gen01, target01, realness, fake_t, d_fake, real_t, d_real)
            if not np.isfinite(row["total_G"]):
                raise RuntimeError(
                    f"generator loss diverged at batch {global_batch}: {row['total_G']}"
                )
            row.update(
                {
                    "index": global_batch,
                    "batch": f"batch_{global_batch:06d}",
                    "epoch": epoch,
                    "mean_ssim": None,
                }
            )
            rows.append(row)

            if cfg.dump_every > 0 and global_batch % cfg.dump_every == 0:
                np.savez(
                    dump_dir / f"batch_{global_batch:06d}.npz",
                    item_keys=np.array([train_records[i].item_key for i in chunk]),
                    gen_mri=_to_numpy_bhwc(gen01),
                    true_mri=_to_numpy_bhwc(target01),
                    disc_on_gen=_to_numpy_bhwc(realness)[:, :, :, 0],
                    disc_fake_target=_to_numpy_bhwc(fake_t)[:, :, :, 0],
                    disc_fake_pred=_to_numpy_bhwc(d_fake)[:, :, :, 0],
                    disc_real_target=_to_numpy_bhwc(real_t)[:, :, :, 0],
                    disc_real_pred=_to_numpy_bhwc(d_real)[:, :, :, 0],
                )

            global_batch += 1
            if global_batch % cfg.eval_every == 0:
                evals.append(
                    {
                        "batch": global_batch,
                        "mean_ssim": _mean_ssim(generator, eval_pool, eval_indices, cfg),
                    }
                )

    # closing eval so short runs still get a curve endpoint
    if evals[-1]["batch"] != global_batch:
        evals.append(
            {"batch": global_batch, "mean_ssim": _mean_ssim(generator, eval_pool, eval_indices, cfg)}
        )

    torch.save(generator.state_dict(), out_root / "generator.pt")
    torch.save(discriminator.state_dict(), out_root / "discriminator.pt")
    log = {
        "config": cfg.as_dict(),
        "blank_baseline_mean_ssim": baseline,
        "batches": rows,
        "evals": evals,
    }
    (out_root / "loss_log.json").write_text(json.dumps(log, indent=2, sort_keys=True) + "\n")
    return log
