"""Generator and discriminator networks.

The generator is a 16-module U-Net: eight down modules
(conv / instance-norm / leaky-ReLU / dropout) and eight up modules
(transposed-conv / instance-norm / ReLU), with skip connections joining
module i to module 16 - i and a final upsample / zero-pad / conv / tanh
stage. Dropout in every down module doubles as the training-time noise
source, so inference with dropout off is deterministic.

At 256x256 every down module halves the spatial size. Smaller inputs
run out of halvings before module 8, so modules switch to stride 1 once
the map reaches 1x1 (mirrored on the way up), and instance norm is
skipped on 1x1 maps where its statistics degenerate. Width doubles per
level and caps at 8x the base width, the reference image-to-image
translation ladder.

The discriminator is a patch critic: stacked conv / instance-norm /
leaky-ReLU stages over the concatenated (face, candidate MRI) pair,
ending in a sigmoid score grid, one score per receptive patch.
"""

from __future__ import annotations

import torch
import torch.nn as nn


def _down_sizes(image_size: int, depth: int = 8):
    sizes = [image_size]
    for _ in range(depth):
        sizes.append(max(1, sizes[-1] // 2))
    return sizes


class DownModule(nn.Module):
    def __init__(self, cin, cout, stride, normalize, dropout, slope):
        super().__init__()
        kernel, padding = (4, 1) if stride == 2 else (3, 1)
        layers = [nn.Conv2d(cin, cout, kernel, stride, padding)]
        if normalize:
            layers.append(nn.InstanceNorm2d(cout))
        layers.append(nn.LeakyReLU(slope))
        if dropout > 0:
            layers.append(nn.Dropout(dropout))
        self.block = nn.Sequential(*layers)

    def forward(self, x):
        return self.block(x)


class UpModule(nn.Module):
    def __init__(self, cin, cout, stride, normalize):
        super().__init__()
        kernel, padding = (4, 1) if stride == 2 else (3, 1)
        layers = [nn.ConvTranspose2d(cin, cout, kernel, stride, padding)]
        if normalize:
            layers.append(nn.InstanceNorm2d(cout))
        layers.append(nn.ReLU())
        self.block = nn.Sequential(*layers)

    def forward(self, x):
        return self.block(x)


class MriGenerator(nn.Module):
    def __init__(
        self,
        image_size: int = 64,
        in_channels: int = 3,
        out_channels: int = 3,
        width: int = 32,
        dropout: float = 0.5,
        leaky_slope: float = 0.2,
    ):
        super().__init__()
        if image_size < 16 or image_size & (image_size - 1):
            raise ValueError(f"image_size must be a power of two >= 16, got {image_size}")
        sizes = _down_sizes(image_size)
        mult = [1, 2, 4, 8, 8, 8, 8, 8]
        down_ch = [width * m for m in mult]
        strides = [2 if sizes[i] > 1 else 1 for i in range(8)]

        downs = []
        cin = in_channels
        for i in range(8):
            normalize = i > 0 and sizes[i + 1] > 1
            downs.append(
                DownModule(cin, down_ch[i], strides[i], normalize, dropout, leaky_slope)
            )
            cin = down_ch[i]
        self.downs = nn.ModuleList(downs)

        # up module j undoes down module 8 - j; inputs carry the skip concat
        ups = []
        up_out = [down_ch[6], down_ch[5], down_ch[4], down_ch[3], down_ch[2], down_ch[1], down_ch[0]]
        cin = down_ch[7]
        for j in range(7):
            stride = strides[7 - j]
            normalize = sizes[7 - j] > 1
            ups.append(UpModule(cin, up_out[j], stride, normalize))
            cin = up_out[j] + down_ch[6 - j]
        self.ups = nn.ModuleList(ups)

        self.final = nn.Sequential(
            nn.Upsample(scale_factor=2),
            nn.ZeroPad2d((1, 0, 1, 0)),
            nn.Conv2d(cin, out_channels, 4, padding=1),
            nn.Tanh(),
        )

    def forward(self, x):
        skips = []
        for down in self.downs:
            x = down(x)
            skips.append(x)
        x = skips[-1]
        for j, up in enumerate(self.ups):
            x = up(x)
            x = torch.cat([x, skips[6 - j]], dim=1)
        return self.final(x)


class PatchDiscriminator(nn.Module):
    def __init__(self, in_channels: int = 6, width: int = 32, leaky_slope: float = 0.2):
        super().__init__()
        layers = []
        cin = in_channels
        for i, cout in enumerate((width, width * 2, width * 4, width * 8)):
            layers.append(nn.Conv2d(cin, cout, 4, 2, 1))
            if i > 0:
                layers.append(nn.InstanceNorm2d(cout))
            layers.append(nn.LeakyReLU(leaky_slope))
            cin = cout
        layers += [
            nn.ZeroPad2d((1, 0, 1, 0)),
            nn.Conv2d(cin, 1, 4, padding=1),
            nn.Sigmoid(),
        ]
        self.model = nn.Sequential(*layers)

    def forward(self, face, candidate_mri):
        return self.model(torch.cat([face, candidate_mri], dim=1))
