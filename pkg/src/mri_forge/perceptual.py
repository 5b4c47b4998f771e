"""Windowed structural-similarity statistics, SSIM maps, and MRI images.

The per-pixel SSIM map is computed over a uniform NxN window centered at
each pixel, per channel, with mirror (reflect) padding at the borders so
map dimensions equal input dimensions and constant images keep their
statistics all the way to the edge. Window means divide by the sample
count N^2; deviations and covariance divide by N^2 - 1.

The MRI of an image pair is the pointwise complement 1 - SSIM: a blank
(all-zero) map for identical inputs, structure where the pair differs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imgcore import ImageBuf, save_image

MRI_SIDECAR_MAGIC = b"MRI0"


@dataclass(frozen=True)
class SsimConfig:
    """Window size, stabilizing constants, and component exponents.

    c1 = (k1*L)^2 and c2 = (k2*L)^2 guard the luminance and contrast
    ratios against near-zero denominators; c3 = c2/2 is the convention
    that collapses the three-component product into the simplified
    closed form when all exponents are 1.
    """

    window: int = 11
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if not (0.0 < self.k1 < 1.0 and 0.0 < self.k2 < 1.0):
            raise ValueError("k1 and k2 must lie in (0, 1)")
        if self.dynamic_range <= 0:
            raise ValueError("dynamic_range must be positive")
        if min(self.alpha, self.beta, self.gamma) <= 0:
            raise ValueError("component exponents must be positive")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2

    @property
    def c3(self) -> float:
        return self.c2 / 2.0

    @property
    def default_exponents(self) -> bool:
        return self.alpha == 1.0 and self.beta == 1.0 and self.gamma == 1.0


@dataclass(frozen=True)
class WindowStats:
    """Mean/deviation/covariance of one window pair at one pixel+channel."""

    mu_x: float
    mu_y: float
    sigma_x: float
    sigma_y: float
    sigma_xy: float

    def __post_init__(self):
        if self.sigma_x < 0 or self.sigma_y < 0:
            raise ValueError("deviations must be non-negative")
        bound = self.sigma_x * self.sigma_y
        if abs(self.sigma_xy) > bound + 1e-9 * max(1.0, bound):
            raise ValueError(
                f"covariance {self.sigma_xy:g} violates Cauchy-Schwarz "
                f"bound {bound:g}"
            )


@dataclass(frozen=True)
class SsimMap:
    """Per-pixel, per-channel SSIM scores; dims mirror the input pair."""

    values: np.ndarray

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class MriImage:
    """Pointwise 1 - SSIM, raw and unclamped (values can exceed 1)."""

    values: np.ndarray

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


def _as_pixels(img) -> np.ndarray:
    if isinstance(img, ImageBuf):
        return img.pixels
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    return a


def _check_pair(x: np.ndarray, y: np.ndarray, window: int):
    if x.shape != y.shape:
        raise ValueError(f"image dims differ: {x.shape} vs {y.shape}")
    pad = window // 2
    if min(x.shape[0], x.shape[1]) < pad + 1:
        raise ValueError(
            f"image {x.shape[1]}x{x.shape[0]} too small for window {window}"
        )


def _window_sums(chan: np.ndarray, window: int) -> np.ndarray:
    """Sum of each NxN mirror-padded window, one value per pixel."""
    pad = window // 2
    padded = np.pad(chan, pad, mode="reflect")
    return sliding_window_view(padded, (window, window)).sum(axis=(-2, -1))


def _map_stats(x: np.ndarray, y: np.ndarray, window: int):
    """Vectorized window statistics for one channel plane pair."""
    n = float(window * window)
    s1x = _window_sums(x, window)
    s1y = _window_sums(y, window)
    s2x = _window_sums(x * x, window)
    s2y = _window_sums(y * y, window)
    sxy = _window_sums(x * y, window)
    mu_x = s1x / n
    mu_y = s1y / n
    var_x = np.maximum(s2x - s1x * s1x / n, 0.0) / (n - 1.0)
    var_y = np.maximum(s2y - s1y * s1y / n, 0.0) / (n - 1.0)
    cov = (sxy - s1x * s1y / n) / (n - 1.0)
    return mu_x, mu_y, var_x, var_y, cov


def window_stats(X, Y, px: int, py: int, ch: int, cfg: SsimConfig) -> WindowStats:
    """Statistics of the window pair centered at pixel (px, py), channel ch."""
    x = _as_pixels(X)
    y = _as_pixels(Y)
    _check_pair(x, y, cfg.window)
    h, w = x.shape[:2]
    if not (0 <= px < w and 0 <= py < h):
        raise ValueError(f"pixel ({px}, {py}) outside {w}x{h} image")
    pad = cfg.window // 2
    xs = np.pad(x[:, :, ch], pad, mode="reflect")[py : py + cfg.window, px : px + cfg.window]
    ys = np.pad(y[:, :, ch], pad, mode="reflect")[py : py + cfg.window, px : px + cfg.window]
    n = cfg.window * cfg.window
    mu_x = xs.sum() / n
    mu_y = ys.sum() / n
    dx = xs - mu_x
    dy = ys - mu_y
    var_x = (dx * dx).sum() / (n - 1)
    var_y = (dy * dy).sum() / (n - 1)
    cov = (dx * dy).sum() / (n - 1)
    return WindowStats(
        mu_x=mu_x,
        mu_y=mu_y,
        sigma_x=float(np.sqrt(max(var_x, 0.0))),
        sigma_y=float(np.sqrt(max(var_y, 0.0))),
        sigma_xy=float(cov),
    )


def ssim_components(st: WindowStats, cfg: SsimConfig):
    """Luminance, contrast, and structure comparison scores for one window."""
    c1, c2, c3 = cfg.c1, cfg.c2, cfg.c3
    lum = (2.0 * st.mu_x * st.mu_y + c1) / (st.mu_x**2 + st.mu_y**2 + c1)
    con = (2.0 * st.sigma_x * st.sigma_y + c2) / (st.sigma_x**2 + st.sigma_y**2 + c2)
    stru = (st.sigma_xy + c3) / (st.sigma_x * st.sigma_y + c3)
    return lum, con, stru


def _pow_component(comp, exp: float, name: str):
    """Raise a component (scalar or map) to its exponent.

    Negative components with a fractional exponent have no real value;
    that combination is a domain error, not a NaN.
    """
    if exp == 1.0:
        return comp
    if not float(exp).is_integer() and np.any(np.asarray(comp) < 0.0):
        raise ValueError(
            f"fractional exponent {exp:g} of negative {name} component"
        )
    return np.power(comp, exp)


def ssim_pixel(st: WindowStats, cfg: SsimConfig) -> float:
    """SSIM score of one window pair: l^alpha * c^beta * s^gamma."""
    lum, con, stru = ssim_components(st, cfg)
    if cfg.default_exponents:
        return lum * con * stru
    return float(
        _pow_component(lum, cfg.alpha, "luminance")
        * _pow_component(con, cfg.beta, "contrast")
        * _pow_component(stru, cfg.gamma, "structure")
    )


def ssim_pixel_simplified(st: WindowStats, cfg: SsimConfig) -> float:
    """Collapsed two-factor form, valid when exponents are 1 and c3 = c2/2."""
    c1, c2 = cfg.c1, cfg.c2
    return ((2.0 * st.mu_x * st.mu_y + c1) * (2.0 * st.sigma_xy + c2)) / (
        (st.mu_x**2 + st.mu_y**2 + c1) * (st.sigma_x**2 + st.sigma_y**2 + c2)
    )


def ssim_image(X, Y, cfg: SsimConfig = SsimConfig()) -> SsimMap:
    """Per-pixel, per-channel SSIM map; output dims equal input dims."""
    x = _as_pixels(X)
    y = _as_pixels(Y)
    _check_pair(x, y, cfg.window)
    c1, c2, c3 = cfg.c1, cfg.c2, cfg.c3
    out = np.empty_like(x)
    for ch in range(x.shape[2]):
        mu_x, mu_y, var_x, var_y, cov = _map_stats(x[:, :, ch], y[:, :, ch], cfg.window)
        sig_x = np.sqrt(var_x)
        sig_y = np.sqrt(var_y)
        lum = (2.0 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
        con = (2.0 * sig_x * sig_y + c2) / (var_x + var_y + c2)
        stru = (cov + c3) / (sig_x * sig_y + c3)
        if cfg.default_exponents:
            out[:, :, ch] = lum * con * stru
        else:
            out[:, :, ch] = (
                _pow_component(lum, cfg.alpha, "luminance")
                * _pow_component(con, cfg.beta, "contrast")
                * _pow_component(stru, cfg.gamma, "structure")
            )
    return SsimMap(out)


def ssim_index(X, Y, cfg: SsimConfig = SsimConfig()) -> float:
    """Mean of the full SSIM map over all pixels and channels."""
    return float(np.mean(ssim_image(X, Y, cfg).values))


def mri_image(X, Y, cfg: SsimConfig = SsimConfig()) -> MriImage:
    """Pointwise perceptual difference 1 - SSIM; all zeros iff X == Y."""
    return MriImage(1.0 - ssim_image(X, Y, cfg).values)


def export_mri(m: MriImage, path, raw_path=None) -> None:
    """Save an MRI clamped to [0, 1] as an 8-bit PNG.

    When ``raw_path`` is given, the unclamped float values are written
    alongside as a little-endian float32 sidecar for exact loss math.
    """
    clamped = np.clip(m.values, 0.0, 1.0) * 255.0
    save_image(ImageBuf(clamped), path)
    if raw_path is not None:
        write_mri_sidecar(m, raw_path)


def write_mri_sidecar(m: MriImage, path) -> None:
    """Raw sidecar: 16-byte header (magic, width, height, channels) + f32 data."""
    header = MRI_SIDECAR_MAGIC + struct.pack(
        "<III", m.width, m.height, m.channels
    )
    data = np.ascontiguousarray(m.values, dtype="<f4").tobytes()
    Path(path).write_bytes(header + data)


def read_mri_sidecar(path) -> MriImage:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MRI_SIDECAR_MAGIC:
        raise ValueError(f"not an MRI sidecar file: {path}")
    width, height, channels = struct.unpack("<III", raw[4:16])
    expected = 16 + 4 * width * height * channels
    if len(raw) != expected:
        raise ValueError(
            f"sidecar {path} truncated: expected {expected} bytes, got {len(raw)}"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=16).astype(np.float64)
    return MriImage(values.reshape(height, width, channels))
