"""Distraction overlays: random text and shapes stamped onto frame
sequences in static, rolling, or spontaneous modes.

Rolling overlays traverse the frame edge-to-edge along their direction
over the whole sequence; the perpendicular coordinate is drawn once per
sequence. Only overlay pixels are touched; everything else stays
bit-identical to the input frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .glyphs import GLYPH_HEIGHT, glyph_mask
from .imgcore import ImageBuf, SeedSpec

ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789"
TEXT_LENGTH = 8

OBJECTS = ("text", "circle", "rectangle")
MODES = ("static", "rolling", "spontaneous")
DIRECTIONS = ("right_to_left", "left_to_right", "up_to_down", "down_to_up")
COLORS = {
    "red": (255.0, 0.0, 0.0),
    "blue": (0.0, 0.0, 255.0),
    "green": (0.0, 255.0, 0.0),
    "white": (255.0, 255.0, 255.0),
    "black": (0.0, 0.0, 0.0),
}

# shape extents drawn from this fraction range of the frame's min dimension,
# bounded so a face stays partially visible
SHAPE_MIN_FRAC = 0.05
SHAPE_MAX_FRAC = 0.25


@dataclass(frozen=True)
class DistractionSpec:
    """What to overlay and how it behaves over the sequence."""

    obj: str = "text"
    mode: str = "static"
    text: str | None = None  # drawn from the stream when None
    font_scale: int = 2
    thickness: int = 1
    color: str = "white"
    direction: str = "left_to_right"
    appearance_probability: float = 0.2

    def __post_init__(self):
        if self.obj not in OBJECTS:
            raise ValueError(f"unknown distraction object {self.obj!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown distraction mode {self.mode!r}")
        if not 1 <= self.font_scale <= 6:
            raise ValueError(f"font_scale must be 1..6, got {self.font_scale}")
        if not 1 <= self.thickness <= 3:
            raise ValueError(f"thickness must be 1..3, got {self.thickness}")
        if self.color not in COLORS:
            raise ValueError(f"unknown color {self.color!r}")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.text is not None and (
            len(self.text) != TEXT_LENGTH or not self.text.isalnum()
        ):
            raise ValueError(f"text must be 8 alphanumeric chars, got {self.text!r}")
        if not 0.0 <= self.appearance_probability <= 1.0:
            raise ValueError("appearance_probability must lie in [0, 1]")


@dataclass(frozen=True)
class FrameSequence:
    """Ordered frames of identical dimensions plus their source indices."""

    frames: tuple
    indices: tuple = ()

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("frame sequence is empty")
        dims = {(f.height, f.width, f.channels) for f in frames}
        if len(dims) != 1:
            raise ValueError(f"frames have mixed dimensions: {sorted(dims)}")
        indices = tuple(self.indices) if self.indices else tuple(range(len(frames)))
        if len(indices) != len(frames):
            raise ValueError("indices length does not match frames")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "indices", indices)

    def __len__(self) -> int:
        return len(self.frames)


def _random_text(rng: np.random.Generator) -> str:
    picks = rng.integers(0, len(ALPHABET), size=TEXT_LENGTH)
    return "".join(ALPHABET[i] for i in picks)


def gen_random_text(seed: SeedSpec) -> str:
    """Eight alphanumeric characters, deterministic per seed."""
    return _random_text(seed.rng())


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return mask
    padded = np.pad(mask, radius)
    out = np.zeros_like(mask)
    h, w = mask.shape
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            out |= padded[dy : dy + h, dx : dx + w]
    return out


def _text_mask(text: str, scale: int, thickness: int) -> np.ndarray:
    gap = np.zeros((GLYPH_HEIGHT, 1), dtype=bool)
    columns = []
    for i, ch in enumerate(text):
        if i:
            columns.append(gap)
        columns.append(glyph_mask(ch))
    mask = np.concatenate(columns, axis=1)
    mask = np.kron(mask, np.ones((scale, scale), dtype=bool))
    return _dilate(mask, thickness - 1)


def _circle_mask(radius: int, thickness: int) -> np.ndarray:
    size = 2 * radius + thickness + 1
    c = (size - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    dist = np.hypot(yy - c, xx - c)
    return np.abs(dist - radius) <= thickness / 2.0 + 0.25


def _rect_mask(width: int, height: int, thickness: int) -> np.ndarray:
    mask = np.ones((height, width), dtype=bool)
    t = min(thickness, (min(width, height) - 1) // 2)
    if t >= 1 and height > 2 * t and width > 2 * t:
        mask[t:-t, t:-t] = False
    return mask


def _build_raster(spec: DistractionSpec, frame_h: int, frame_w: int, rng):
    """Raster mask for the overlay; draws geometry/text from the stream."""
    if spec.obj == "text":
        text = spec.text if spec.text is not None else _random_text(rng)
        return _text_mask(text, spec.font_scale, spec.thickness)
    lo = max(2, int(SHAPE_MIN_FRAC * min(frame_h, frame_w)))
    hi = max(lo + 1, int(SHAPE_MAX_FRAC * min(frame_h, frame_w)))
    if spec.obj == "circle":
        radius = int(rng.integers(lo, hi + 1))
        return _circle_mask(radius, spec.thickness)
    rw = int(rng.integers(lo, hi + 1)) * 2
    rh = int(rng.integers(lo, hi + 1)) * 2
    return _rect_mask(rw, rh, spec.thickness)


def _color_values(color: str, channels: int) -> np.ndarray:
    r, g, b = COLORS[color]
    if channels == 1:
        return np.array([round(0.299 * r + 0.587 * g + 0.114 * b)], dtype=np.float64)
    return np.array([r, g, b], dtype=np.float64)


def _stamp(pixels: np.ndarray, mask: np.ndarray, color: np.ndarray, x: int, y: int):
    """Write the masked overlay at (x, y), clipped to the frame."""
    h, w = pixels.shape[:2]
    mh, mw = mask.shape
    y0, y1 = max(y, 0), min(y + mh, h)
    x0, x1 = max(x, 0), min(x + mw, w)
    if y0 >= y1 or x0 >= x1:
        return
    sub = mask[y0 - y : y1 - y, x0 - x : x1 - x]
    region = pixels[y0:y1, x0:x1, :]
    region[sub] = color


def _copy_frames(seq: FrameSequence):
    return [f.pixels.copy() for f in seq.frames]


def _finish(seq: FrameSequence, planes) -> FrameSequence:
    return FrameSequence(tuple(ImageBuf(p) for p in planes), seq.indices)


def overlay_static(seq: FrameSequence, spec: DistractionSpec, seed: SeedSpec) -> FrameSequence:
    """One random location, the identical overlay on every frame."""
    if spec.mode != "static":
        raise ValueError(f"expected static mode, got {spec.mode!r}")
    rng = seed.rng()
    first = seq.frames[0]
    mask = _build_raster(spec, first.height, first.width, rng)
    mh, mw = mask.shape
    if mh > first.height or mw > first.width:
        raise ValueError(
            f"overlay {mw}x{mh} larger than frame {first.width}x{first.height}"
        )
    x = int(rng.integers(0, first.width - mw + 1))
    y = int(rng.integers(0, first.height - mh + 1))
    color = _color_values(spec.color, first.channels)
    planes = _copy_frames(seq)
    for p in planes:
        _stamp(p, mask, color, x, y)
    return _finish(seq, planes)


def overlay_rolling(seq: FrameSequence, spec: DistractionSpec, seed: SeedSpec) -> FrameSequence:
    """Overlay travels edge-to-edge along its direction across the sequence."""
    if spec.mode != "rolling":
        raise ValueError(f"expected rolling mode, got {spec.mode!r}")
    if len(seq) < 2:
        raise ValueError("rolling distraction needs at least two frames")
    rng = seed.rng()
    first = seq.frames[0]
    mask = _build_raster(spec, first.height, first.width, rng)
    mh, mw = mask.shape
    color = _color_values(spec.color, first.channels)
    steps = np.linspace(0.0, 1.0, len(seq))
    if spec.direction in ("left_to_right", "right_to_left"):
        span = max(first.width - mw, 0)
        fixed = int(rng.integers(0, max(first.height - mh, 0) + 1))
        travel = steps * span if spec.direction == "left_to_right" else (1.0 - steps) * span
        locations = [(int(round(t)), fixed) for t in travel]
    else:
        span = max(first.height - mh, 0)
        fixed = int(rng.integers(0, max(first.width - mw, 0) + 1))
        travel = steps * span if spec.direction == "up_to_down" else (1.0 - steps) * span
        locations = [(fixed, int(round(t))) for t in travel]
    planes = _copy_frames(seq)
    for p, (x, y) in zip(planes, locations):
        _stamp(p, mask, color, x, y)
    return _finish(seq, planes)


def overlay_spontaneous(seq: FrameSequence, spec: DistractionSpec, seed: SeedSpec) -> FrameSequence:
    """A seeded subset of frames gets the overlay at independent locations."""
    if spec.mode != "spontaneous":
        raise ValueError(f"expected spontaneous mode, got {spec.mode!r}")
    rng = seed.rng()
    first = seq.frames[0]
    mask = _build_raster(spec, first.height, first.width, rng)
    mh, mw = mask.shape
    color = _color_values(spec.color, first.channels)
    planes = _copy_frames(seq)
    for p in planes:
        if rng.random() < spec.appearance_probability:
            x = int(rng.integers(0, max(first.width - mw, 0) + 1))
            y = int(rng.integers(0, max(first.height - mh, 0) + 1))
            _stamp(p, mask, color, x, y)
    return _finish(seq, planes)


def overlay(seq: FrameSequence, spec: DistractionSpec, seed: SeedSpec) -> FrameSequence:
    """Dispatch on the spec's mode."""
    if spec.mode == "static":
        return overlay_static(seq, spec, seed)
    if spec.mode == "rolling":
        return overlay_rolling(seq, spec, seed)
    return overlay_spontaneous(seq, spec, seed)


def random_distraction(seed: SeedSpec, policy) -> DistractionSpec:
    """Draw a spec from the policy's enumerated options."""
    rng = seed.rng()
    return DistractionSpec(
        obj=policy.objects[int(rng.integers(0, len(policy.objects)))],
        mode=policy.modes[int(rng.integers(0, len(policy.modes)))],
        font_scale=int(policy.font_scales[int(rng.integers(0, len(policy.font_scales)))]),
        thickness=int(policy.thicknesses[int(rng.integers(0, len(policy.thicknesses)))]),
        color=policy.colors[int(rng.integers(0, len(policy.colors)))],
        direction=DIRECTIONS[int(rng.integers(0, len(DIRECTIONS)))],
        appearance_probability=policy.appearance_probability,
    )
