import numpy as np
import pytest
import torch

from mri_trainer.ssim_torch import perceptual_distance, ssim_index


def reference_index(x, y, window, k1=0.01, k2=0.03, dynamic_range=1.0):
    """Per-pixel windowed SSIM via explicit mirrored windows (numpy)."""
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    c3 = c2 / 2
    pad = window // 2
    n = window * window
    out = []
    for xc, yc in zip(x, y):  # over channels
        h, w = xc.shape
        xp = np.pad(xc, pad, mode="reflect")
        yp = np.pad(yc, pad, mode="reflect")
        vals = np.empty((h, w))
        for i in range(h):
            for j in range(w):
                wx = xp[i : i + window, j : j + window]
                wy = yp[i : i + window, j : j + window]
                mx, my = wx.mean(), wy.mean()
                vx = ((wx - mx) ** 2).sum() / (n - 1)
                vy = ((wy - my) ** 2).sum() / (n - 1)
                cov = ((wx - mx) * (wy - my)).sum() / (n - 1)
                sx, sy = np.sqrt(vx), np.sqrt(vy)
                vals[i, j] = (
                    (2 * mx * my + c1) / (mx**2 + my**2 + c1)
                    * (2 * sx * sy + c2) / (vx + vy + c2)
                    * (cov + c3) / (sx * sy + c3)
                )
        out.append(vals.mean())
    return float(np.mean(out))


def test_identity_is_one(rng):
    x = torch.from_numpy(rng.uniform(0, 1, (2, 3, 20, 20)))
    vals = ssim_index(x, x.clone(), window=11)
    assert torch.allclose(vals, torch.ones(2, dtype=x.dtype), atol=1e-12)


def test_matches_reference_windows(rng):
    x64 = rng.uniform(0, 1, (1, 1, 14, 14))
    y64 = rng.uniform(0, 1, (1, 1, 14, 14))
    ours = float(ssim_index(torch.from_numpy(x64), torch.from_numpy(y64), window=5)[0])
    ref = reference_index(x64[0], y64[0], window=5)
    assert ours == pytest.approx(ref, abs=1e-12)


def test_multichannel_mean(rng):
    x = rng.uniform(0, 1, (1, 3, 16, 16))
    y = rng.uniform(0, 1, (1, 3, 16, 16))
    full = float(ssim_index(torch.from_numpy(x), torch.from_numpy(y))[0])
    per_channel = [
        float(ssim_index(torch.from_numpy(x[:, c : c + 1]), torch.from_numpy(y[:, c : c + 1]))[0])
        for c in range(3)
    ]
    assert full == pytest.approx(np.mean(per_channel), abs=1e-12)


def test_differentiable(rng):
    x = torch.from_numpy(rng.uniform(0, 1, (1, 1, 16, 16))).requires_grad_(True)
    y = torch.from_numpy(rng.uniform(0, 1, (1, 1, 16, 16)))
    loss = perceptual_distance(x, y)
    loss.backward()
    assert x.grad is not None
    assert torch.isfinite(x.grad).all()


def test_shape_mismatch_rejected(rng):
    with pytest.raises(ValueError):
        ssim_index(torch.zeros(1, 1, 8, 8), torch.zeros(1, 1, 9, 8))
