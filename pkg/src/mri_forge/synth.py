"""Procedural toy corpus: drawn "faces" with scripted tampering.

Stands in for a real video corpus at desk scale. Each real video is a
drifting cartoon face over a gradient background; its fake twin renders
the identical frames and then corrupts a sub-region of the face with a
blended checker/channel-swap pattern. Outside that region fake and real
frames are bit-identical, so ground truth for MRI locality exists by
construction. Everything derives from the master seed.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imgcore import ImageBuf, SeedSpec, save_image

TAMPER_BLEND = 0.55
BOX_MARGIN = 6


@dataclass(frozen=True)
class FaceParams:
    """Deterministic appearance and motion of one rendered face."""

    cx0: float
    cy0: float
    amp_x: float
    amp_y: float
    phase_x: float
    phase_y: float
    rx: float
    ry: float
    skin: tuple
    eye_color: tuple
    mouth_color: tuple
    bg_top: tuple
    bg_bottom: tuple
    blobs: tuple  # (cx, cy, radius, color) per blob


@dataclass(frozen=True)
class TamperParams:
    cell: int
    color_a: tuple
    color_b: tuple
    shift: int  # channel rotation amount, 1 or 2


def _rgb(rng, lo, hi):
    return tuple(float(v) for v in rng.uniform(lo, hi, 3))


def _face_params(seed: SeedSpec, real_id: str, size: int) -> FaceParams:
    rng = seed.child(f"video/{real_id}").rng()
    return FaceParams(
        cx0=size / 2 + rng.uniform(-size * 0.06, size * 0.06),
        cy0=size / 2 + rng.uniform(-size * 0.06, size * 0.06),
        amp_x=rng.uniform(2.0, 6.0),
        amp_y=rng.uniform(2.0, 6.0),
        phase_x=rng.uniform(0, 2 * np.pi),
        phase_y=rng.uniform(0, 2 * np.pi),
        rx=size * rng.uniform(0.20, 0.26),
        ry=size * rng.uniform(0.26, 0.33),
        skin=(rng.uniform(175, 230), rng.uniform(125, 180), rng.uniform(95, 150)),
        eye_color=_rgb(rng, 20, 70),
        mouth_color=(rng.uniform(120, 180), rng.uniform(30, 70), rng.uniform(30, 70)),
        bg_top=_rgb(rng, 30, 110),
        bg_bottom=_rgb(rng, 120, 210),
        blobs=tuple(
            (
                float(rng.uniform(0, size)),
                float(rng.uniform(0, size)),
                float(rng.uniform(size * 0.05, size * 0.15)),
                _rgb(rng, 40, 200),
            )
            for _ in range(2)
        ),
    )


def _tamper_params(seed: SeedSpec, fake_id: str) -> TamperParams:
    rng = seed.child(f"video/{fake_id}").rng()
    return TamperParams(
        cell=int(rng.integers(3, 7)),
        color_a=_rgb(rng, 150, 255),
        color_b=_rgb(rng, 0, 100),
        shift=int(rng.integers(1, 3)),
    )


def _face_center(p: FaceParams, t: int, n_frames: int):
    phase = 2 * np.pi * t / max(n_frames, 1)
    return (
        p.cx0 + p.amp_x * np.sin(phase + p.phase_x),
        p.cy0 + p.amp_y * np.sin(0.5 * phase + p.phase_y),
    )


def _fill_ellipse(pixels, cx, cy, rx, ry, color):
    h, w = pixels.shape[:2]
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    mask = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
    pixels[mask] = color
    return mask


def _render_frame(size: int, p: FaceParams, t: int, n_frames: int) -> np.ndarray:
    ramp = np.arange(size, dtype=np.float64)[:, None, None] / max(size - 1, 1)
    top = np.array(p.bg_top)
    bottom = np.array(p.bg_bottom)
    pixels = np.broadcast_to(top + (bottom - top) * ramp, (size, size, 3)).copy()
    for bx, by, br, bc in p.blobs:
        _fill_ellipse(pixels, bx, by, br, br, bc)
    cx, cy = _face_center(p, t, n_frames)
    _fill_ellipse(pixels, cx, cy, p.rx, p.ry, p.skin)
    eye_dx = 0.45 * p.rx
    eye_y = cy - 0.30 * p.ry
    for side in (-1, 1):
        _fill_ellipse(pixels, cx + side * eye_dx, eye_y, 0.16 * p.rx, 0.10 * p.ry, (245.0, 245.0, 245.0))
        _fill_ellipse(pixels, cx + side * eye_dx, eye_y, 0.07 * p.rx, 0.06 * p.ry, p.eye_color)
    _fill_ellipse(pixels, cx, cy + 0.15 * p.ry, 0.08 * p.rx, 0.18 * p.ry, tuple(v * 0.85 for v in p.skin))
    _fill_ellipse(pixels, cx, cy + 0.50 * p.ry, 0.45 * p.rx, 0.10 * p.ry, p.mouth_color)
    return np.clip(pixels, 0.0, 255.0)


def tamper_box(p: FaceParams, t: int, n_frames: int, size: int):
    """Frame-coordinate rectangle the fake twin corrupts at frame t."""
    cx, cy = _face_center(p, t, n_frames)
    half_w = 0.75 * p.rx
    half_h = 0.35 * p.ry
    x0 = int(max(cx - half_w, 0))
    y0 = int(max(cy + 0.25 * p.ry - half_h, 0))
    x1 = int(min(cx + half_w, size))
    y1 = int(min(cy + 0.25 * p.ry + half_h, size))
    return x0, y0, x1 - x0, y1 - y0


def _apply_tamper(pixels: np.ndarray, box, tp: TamperParams) -> np.ndarray:
    x0, y0, w, h = box
    region = pixels[y0 : y0 + h, x0 : x0 + w, :]
    rolled = np.roll(region, tp.shift, axis=2)
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    checker = ((yy // tp.cell + xx // tp.cell) % 2).astype(np.float64)[:, :, None]
    pattern = np.array(tp.color_a) * checker + np.array(tp.color_b) * (1.0 - checker)
    out = pixels.copy()
    out[y0 : y0 + h, x0 : x0 + w, :] = (
        (1.0 - TAMPER_BLEND) * rolled + TAMPER_BLEND * pattern
    )
    return np.clip(out, 0.0, 255.0)


def face_box(p: FaceParams, t: int, n_frames: int, size: int):
    """Detector stand-in: the face ellipse bounds plus a margin."""
    cx, cy = _face_center(p, t, n_frames)
    x0 = int(max(cx - p.rx - BOX_MARGIN, 0))
    y0 = int(max(cy - p.ry - BOX_MARGIN, 0))
    x1 = int(min(cx + p.rx + BOX_MARGIN, size))
    y1 = int(min(cy + p.ry + BOX_MARGIN, size))
    return x0, y0, x1 - x0, y1 - y0


def _render_video(args):
    (video_id, label, real_id, n_frames, size, seed, out_dir) = args
    params = _face_params(seed, real_id, size)
    tamper = _tamper_params(seed, video_id) if label == "fake" else None
    frame_dir = Path(out_dir) / "frames" / video_id
    frame_dir.mkdir(parents=True, exist_ok=True)
    boxes = []
    tampers = []
    for t in range(n_frames):
        pixels = _render_frame(size, params, t, n_frames)
        if tamper is not None:
            tbox = tamper_box(params, t, n_frames, size)
            pixels = _apply_tamper(pixels, tbox, tamper)
            tampers.append(
                {"video_id": video_id, "frame_idx": t, "x": tbox[0], "y": tbox[1], "w": tbox[2], "h": tbox[3]}
            )
        save_image(ImageBuf(pixels), frame_dir / f"{t:06d}.png")
        bx, by, bw, bh = face_box(params, t, n_frames, size)
        boxes.append(
            {"video_id": video_id, "frame_idx": t, "face_idx": 0, "x": bx, "y": by, "w": bw, "h": bh}
        )
    return {"video_id": video_id, "boxes": boxes, "tampers": tampers}


def generate_corpus(
    out_dir,
    n_videos: int,
    frames_per_video: int,
    seed: SeedSpec,
    frame_size: int = 160,
    corpus_tag: str = "dfdc",
    jobs: int = 1,
) -> dict:
    """Render the corpus and write sources/boxes/labels/tamper JSONL files.

    Half the videos are real, half are their tampered twins (one extra
    real when the count is odd). Returns a summary dict with the
    written paths.
    """
    if n_videos < 2:
        raise ValueError("need at least 2 videos (one real/fake pair)")
    if frames_per_video < 1:
        raise ValueError("frames_per_video must be >= 1")
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)

    n_pairs = n_videos // 2
    videos = []
    for i in range(n_pairs + n_videos % 2):
        videos.append((f"real_{i:03d}", "real", f"real_{i:03d}"))
    for i in range(n_pairs):
        videos.append((f"fake_{i:03d}", "fake", f"real_{i:03d}"))

    tasks = [
        (vid, label, real_id, frames_per_video, frame_size, seed, str(out_root))
        for vid, label, real_id in videos
    ]
    if jobs <= 1:
        results = [_render_video(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_render_video, tasks))
    by_id = {r["video_id"]: r for r in results}

    sources_path = out_root / "sources.jsonl"
    boxes_path = out_root / "boxes.jsonl"
    labels_path = out_root / "labels.jsonl"
    tamper_path = out_root / "tamper.jsonl"

    source_lines = []
    label_lines = []
    box_lines = []
    tamper_lines = []
    for vid, label, real_id in sorted(videos):
        rec = {
            "video_id": vid,
            "label": label,
            "frame_dir": f"frames/{vid}",
            "corpus": corpus_tag,
        }
        if label == "fake":
            rec["original_id"] = real_id
        source_lines.append(json.dumps(rec, sort_keys=True))
        label_lines.append(json.dumps({"video_id": vid, "label": label}, sort_keys=True))
        box_lines.extend(json.dumps(b, sort_keys=True) for b in by_id[vid]["boxes"])
        tamper_lines.extend(json.dumps(t, sort_keys=True) for t in by_id[vid]["tampers"])

    sources_path.write_text("\n".join(source_lines) + "\n")
    labels_path.write_text("\n".join(label_lines) + "\n")
    boxes_path.write_text("\n".join(box_lines) + "\n")
    tamper_path.write_text("\n".join(tamper_lines) + ("\n" if tamper_lines else ""))
    return {
        "videos": len(videos),
        "sources": str(sources_path),
        "boxes": str(boxes_path),
        "labels": str(labels_path),
        "tamper": str(tamper_path),
    }
