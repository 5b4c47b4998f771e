"""Image buffers, PNG/JPEG I/O, geometry, and per-item seeded randomness.

Every other module moves pixels through :class:`ImageBuf`: a float64
(height, width, channels) array in the [0, 255] domain. Randomness is
never global; each consumer derives its own stream from a
:class:`SeedSpec` so parallel pipelines stay order-independent.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

PIXEL_MAX = 255.0


@dataclass(frozen=True)
class ImageBuf:
    """An image in the float pixel domain [0, max_value].

    pixels is row-major (height, width, channels) float64; channels is
    1 (gray) or 3 (RGB). Values must be finite; operations that export
    to 8-bit clamp/round at the boundary, in-memory math may exceed the
    range transiently.
    """

    pixels: np.ndarray
    max_value: float = PIXEL_MAX

    def __post_init__(self):
        p = self.pixels
        if not isinstance(p, np.ndarray) or p.ndim != 3:
            raise ValueError("pixels must be a (height, width, channels) array")
        if p.shape[2] not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {p.shape[2]}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"empty image: shape {p.shape}")
        if p.dtype != np.float64:
            object.__setattr__(self, "pixels", p.astype(np.float64))
        if not np.all(np.isfinite(self.pixels)):
            raise ValueError("pixels contain non-finite values")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @classmethod
    def from_array(cls, arr, max_value: float = PIXEL_MAX) -> "ImageBuf":
        """Wrap a 2-D (gray) or 3-D array, copying and casting to float64."""
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim == 2:
            a = a[:, :, None]
        return cls(a.copy(), max_value)

    def with_pixels(self, pixels: np.ndarray) -> "ImageBuf":
        return replace(self, pixels=pixels)

    def to_uint8(self) -> np.ndarray:
        """Round half-away-from-zero to 8-bit; values must be in [0, 255]."""
        p = self.pixels
        if p.min() < 0.0 or p.max() > PIXEL_MAX:
            raise ValueError(
                f"pixel values outside [0, {PIXEL_MAX:g}]: "
                f"min {p.min():g}, max {p.max():g}"
            )
        # values are non-negative, so half-away-from-zero == floor(x + 0.5)
        return np.floor(p + 0.5).astype(np.uint8)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel rectangle: top-left corner plus extents."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extents must be positive, got w={self.w} h={self.h}")


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus an item key naming one unit of work.

    The derived stream is a pure function of (master_seed, item_key):
    identical across runs, platforms, and any degree of parallelism.
    """

    master_seed: int
    item_key: str = ""

    def child(self, suffix: str) -> "SeedSpec":
        """Derive a sub-stream spec, e.g. per frame or per video."""
        key = f"{self.item_key}/{suffix}" if self.item_key else suffix
        return SeedSpec(self.master_seed, key)

    def rng(self) -> np.random.Generator:
        seed64 = self.master_seed & 0xFFFFFFFFFFFFFFFF
        digest = hashlib.sha256(
            seed64.to_bytes(8, "little") + b"\x00" + self.item_key.encode("utf-8")
        ).digest()
        return np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))


def load_image(path) -> ImageBuf:
    """Decode an 8-bit grayscale or RGB PNG/JPEG into an ImageBuf.

    Pixel values are exactly the decoded 8-bit values as floats.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image file not found: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode not in ("L", "RGB"):
                raise ValueError(
                    f"unsupported image mode {mode!r} in {path}: "
                    "expected 8-bit grayscale (L) or RGB"
                )
            arr = np.asarray(im, dtype=np.float64)
    except UnidentifiedImageError as exc:
        raise ValueError(f"cannot decode image file {path}: {exc}") from exc
    except OSError as exc:
        raise ValueError(f"corrupt or truncated image file {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return ImageBuf(arr)


def save_image(img: ImageBuf, path) -> None:
    """Write a lossless 8-bit PNG; values rounded half-away-from-zero."""
    data = img.to_uint8()
    if img.channels == 1:
        pil = Image.fromarray(data[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(data, mode="RGB")
    path = Path(path)
    try:
        pil.save(path, format="PNG")
    except OSError as exc:
        raise OSError(f"cannot write image to {path}: {exc}") from exc


def crop(img: ImageBuf, box: BBox) -> ImageBuf:
    """Extract a sub-rectangle, clipping the box to image bounds first."""
    x0 = max(box.x, 0)
    y0 = max(box.y, 0)
    x1 = min(box.x + box.w, img.width)
    y1 = min(box.y + box.h, img.height)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(
            f"crop box {box} does not intersect image {img.width}x{img.height}"
        )
    return img.with_pixels(img.pixels[y0:y1, x0:x1, :].copy())


def _linear_axis(n_out: int, n_in: int):
    # half-pixel-center alignment: output center i maps to (i+0.5)*scale - 0.5
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def resize(img: ImageBuf, width: int, height: int) -> ImageBuf:
    """Bilinear resize with half-pixel-center alignment."""
    if width <= 0 or height <= 0:
        raise ValueError(f"target dims must be positive, got {width}x{height}")
    if width == img.width and height == img.height:
        return img.with_pixels(img.pixels.copy())
    ylo, yhi, yf = _linear_axis(height, img.height)
    xlo, xhi, xf = _linear_axis(width, img.width)
    p = img.pixels
    rows = p[ylo, :, :] * (1.0 - yf)[:, None, None] + p[yhi, :, :] * yf[:, None, None]
    out = (
        rows[:, xlo, :] * (1.0 - xf)[None, :, None]
        + rows[:, xhi, :] * xf[None, :, None]
    )
    return img.with_pixels(out)
