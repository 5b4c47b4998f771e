"""Seed-deterministic image augmentations: noise models plus photometric
and geometric transforms, composable into per-video plans.

Noise semantics (the conventional definitions behind the names):
gaussian adds N(0, var); speckle multiplies by (1 + N(0, var));
salt/pepper force a seeded fraction of pixels to 255/0 (salt_pepper
splits them by a ratio); poisson redraws each pixel from a Poisson
distribution with the pixel value as its mean; localvar adds Gaussian
noise with a per-pixel variance map. Outputs are clamped to [0, 255].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imgcore import ImageBuf, SeedSpec, resize

KINDS = (
    "gaussian",
    "speckle",
    "salt_pepper",
    "pepper",
    "salt",
    "poisson",
    "localvar",
    "blur",
    "rotate",
    "hflip",
    "rescale",
    "brightness",
    "contrast",
)

# parameters that are integral by nature
_INT_PARAMS = {"radius"}


@dataclass(frozen=True)
class AugmentSpec:
    """One augmentation: a kind plus its kind-specific parameters."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown augmentation kind {self.kind!r}")
        _validate_params(self.kind, self.params)


@dataclass(frozen=True)
class AugmentPlan:
    """Ordered specs plus the seed their stochastic draws derive from."""

    specs: tuple
    seed: SeedSpec

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))


def _validate_params(kind: str, params: dict) -> None:
    def positive(name, default=None, minimum=0.0):
        val = params.get(name, default)
        if val is None:
            raise ValueError(f"{kind} requires parameter {name!r}")
        if val < minimum:
            raise ValueError(f"{kind} parameter {name}={val} must be >= {minimum}")
        return val

    def fraction(name, default=None):
        val = positive(name, default)
        if val > 1.0:
            raise ValueError(f"{kind} parameter {name}={val} must be <= 1")
        return val

    if kind in ("gaussian", "speckle"):
        positive("variance")
    elif kind == "salt_pepper":
        fraction("amount")
        fraction("salt_ratio", 0.5)
    elif kind in ("pepper", "salt"):
        fraction("amount")
    elif kind == "localvar":
        if "variance_map" not in params:
            positive("max_variance")
    elif kind == "blur":
        radius = params.get("radius")
        if radius is None or int(radius) < 1:
            raise ValueError(f"blur radius must be >= 1, got {radius}")
    elif kind == "rotate":
        positive("degrees", minimum=-math.inf)
    elif kind == "rescale":
        positive("factor", minimum=1e-6)
    elif kind == "brightness":
        positive("offset", minimum=-math.inf)
    elif kind == "contrast":
        positive("factor")


def _impulse_masks(rng, shape, amount):
    return rng.random(shape[:2]) < amount


def _rotate(pixels: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate about the image center, bilinear, exposed corners black."""
    h, w = pixels.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    dx = xx - cx
    dy = yy - cy
    # inverse mapping: sample the source at the un-rotated location
    src_x = cx + cos_t * dx + sin_t * dy
    src_y = cy - sin_t * dx + cos_t * dy
    x0 = np.floor(src_x).astype(np.intp)
    y0 = np.floor(src_y).astype(np.intp)
    fx = src_x - x0
    fy = src_y - y0
    out = np.zeros_like(pixels)
    for oy, ox, wgt in (
        (0, 0, (1 - fy) * (1 - fx)),
        (0, 1, (1 - fy) * fx),
        (1, 0, fy * (1 - fx)),
        (1, 1, fy * fx),
    ):
        sy = y0 + oy
        sx = x0 + ox
        valid = (sy >= 0) & (sy < h) & (sx >= 0) & (sx < w)
        vy = np.clip(sy, 0, h - 1)
        vx = np.clip(sx, 0, w - 1)
        out += pixels[vy, vx, :] * (wgt * valid)[:, :, None]
    return out


def _box_blur(pixels: np.ndarray, radius: int) -> np.ndarray:
    k = 2 * radius + 1
    padded = np.pad(pixels, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    windows = sliding_window_view(padded, (k, k), axis=(0, 1))
    return windows.mean(axis=(-2, -1))


def _apply(img: ImageBuf, spec: AugmentSpec, rng: np.random.Generator) -> ImageBuf:
    p = img.pixels
    kind = spec.kind
    params = spec.params
    if kind == "gaussian":
        out = p + rng.normal(0.0, math.sqrt(params["variance"]), p.shape)
    elif kind == "speckle":
        out = p * (1.0 + rng.normal(0.0, math.sqrt(params["variance"]), p.shape))
    elif kind == "salt_pepper":
        hit = _impulse_masks(rng, p.shape, params["amount"])
        salt = rng.random(p.shape[:2]) < params.get("salt_ratio", 0.5)
        out = p.copy()
        out[hit & salt] = 255.0
        out[hit & ~salt] = 0.0
    elif kind == "pepper":
        out = p.copy()
        out[_impulse_masks(rng, p.shape, params["amount"])] = 0.0
    elif kind == "salt":
        out = p.copy()
        out[_impulse_masks(rng, p.shape, params["amount"])] = 255.0
    elif kind == "poisson":
        out = rng.poisson(np.maximum(p, 0.0)).astype(np.float64)
    elif kind == "localvar":
        if "variance_map" in params:
            var = np.asarray(params["variance_map"], dtype=np.float64)
            if var.shape != p.shape[:2]:
                raise ValueError(
                    f"variance_map shape {var.shape} does not match image {p.shape[:2]}"
                )
        else:
            var = rng.uniform(0.0, params["max_variance"], p.shape[:2])
        out = p + rng.standard_normal(p.shape) * np.sqrt(var)[:, :, None]
    elif kind == "blur":
        out = _box_blur(p, int(params["radius"]))
    elif kind == "rotate":
        out = _rotate(p, params["degrees"])
    elif kind == "hflip":
        out = p[:, ::-1, :]
    elif kind == "rescale":
        factor = params["factor"]
        new_w = max(1, round(img.width * factor))
        new_h = max(1, round(img.height * factor))
        out = resize(img, new_w, new_h).pixels
    elif kind == "brightness":
        out = p + params["offset"]
    elif kind == "contrast":
        out = 127.5 + (p - 127.5) * params["factor"]
    else:  # pragma: no cover - guarded by AugmentSpec
        raise ValueError(f"unknown augmentation kind {kind!r}")
    return ImageBuf(np.clip(out, 0.0, 255.0))


def apply_augment(img: ImageBuf, spec: AugmentSpec, seed: SeedSpec) -> ImageBuf:
    """Apply one augmentation with a stream derived from the seed."""
    return _apply(img, spec, seed.rng())


def compose(img: ImageBuf, plan: AugmentPlan) -> ImageBuf:
    """Apply the plan's specs left to right, drawing from one stream in order."""
    rng = plan.seed.rng()
    for spec in plan.specs:
        img = _apply(img, spec, rng)
    return img


def random_plan(seed: SeedSpec, policy) -> AugmentPlan:
    """Draw a reproducible plan from a policy of candidates and count bounds.

    Each slot picks a candidate kind by normalized weight, then samples
    every ranged parameter uniformly from its [low, high] interval.
    """
    rng = seed.rng()
    count = int(rng.integers(policy.min_specs, policy.max_specs + 1))
    if count > 0 and not policy.candidates:
        raise ValueError("policy has no candidates but requires at least one spec")
    weights = np.array([c.weight for c in policy.candidates], dtype=np.float64)
    if len(weights) and weights.sum() <= 0:
        raise ValueError("candidate weights must sum to a positive value")
    specs = []
    for _ in range(count):
        cand = policy.candidates[int(rng.choice(len(weights), p=weights / weights.sum()))]
        params = {}
        for name, rng_or_val in sorted(cand.ranges.items()):
            if isinstance(rng_or_val, (list, tuple)):
                lo, hi = rng_or_val
                if name in _INT_PARAMS:
                    params[name] = int(rng.integers(int(lo), int(hi) + 1))
                else:
                    params[name] = float(rng.uniform(lo, hi))
            else:
                params[name] = rng_or_val
        specs.append(AugmentSpec(cand.kind, params))
    return AugmentPlan(tuple(specs), seed)
