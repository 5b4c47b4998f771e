"""Dataset construction: frame striding, fake/real pairing, MRI target
generation, seeded splits, JSONL manifests, and balanced epoch sampling.

A build is a pure function of (sources, policy, seed): every random
choice derives from a per-item key, so parallel builds of any width
produce byte-identical trees. Fake entries store the face crop, the
paired reference crop, and the MRI computed between the two stored
(already quantized) crops; recomputing the MRI from the saved PNGs
reproduces the raw sidecar bit for bit. Real entries share one blank
target.

Build-time augmentation uses photometric/noise transforms only: the
face boxes come from an external detector run on the original frames,
and geometric transforms would break that alignment. Geometric kinds
remain available through the augment module and CLI for use upstream of
detection.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .augment import AugmentPlan, compose, random_plan
from .distract import FrameSequence, overlay, random_distraction
from .imgcore import BBox, ImageBuf, SeedSpec, crop, load_image, resize, save_image
from .perceptual import SsimConfig, export_mri, mri_image
from .policy import BuildPolicy

log = logging.getLogger(__name__)

CORPUS_TAGS = ("dfdc", "celeb", "fdf", "ffhq", "synthetic")
BLANK_TARGET_NAME = "blank_mri.png"
BLANK_TARGET_SIZE = 64


@dataclass(frozen=True)
class SourceVideoMeta:
    """One source video: its frames on disk plus pairing metadata."""

    video_id: str
    label: str
    frame_dir: str
    corpus: str
    original_id: str | None = None

    def __post_init__(self):
        if self.label not in ("real", "fake"):
            raise ValueError(f"label must be real or fake, got {self.label!r}")
        if self.corpus not in CORPUS_TAGS:
            raise ValueError(f"unknown corpus tag {self.corpus!r}")
        if self.label == "fake" and not self.original_id:
            raise ValueError(f"fake video {self.video_id} lacks an original_id")
        if self.label == "real" and self.original_id:
            raise ValueError(f"real video {self.video_id} must not set original_id")


@dataclass(frozen=True)
class ManifestEntry:
    """One (face image, MRI target) training record."""

    item_key: str
    face_path: str
    mri_path: str
    label: str
    split: str
    origin: str


@dataclass(frozen=True)
class FacePair:
    """Aligned fake/real crops for one (frame, face) slot."""

    fake_face: ImageBuf
    real_face: ImageBuf
    frame_idx: int
    face_idx: int


@dataclass(frozen=True)
class EpochSample:
    """Manifest indices for one balanced training epoch."""

    epoch: int
    indices: tuple
    with_replacement: bool = False

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))


def frame_path(frame_dir, idx: int) -> Path:
    return Path(frame_dir) / f"{idx:06d}.png"


def count_frames(frame_dir) -> int:
    return len(list(Path(frame_dir).glob("[0-9]*.png")))


def select_frames(frame_count: int, stride: int = 10) -> list:
    """Indices 0, stride, 2*stride, ... below frame_count."""
    if frame_count < 0:
        raise ValueError("frame_count must be >= 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return list(range(0, frame_count, stride))


def load_sources(path) -> list:
    """Read SourceVideoMeta records from JSONL; frame dirs resolve
    relative to the file's directory."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"sources file not found: {path}")
    base = path.parent
    sources = []
    for line_no, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        rec = json.loads(line)
        frame_dir = str((base / rec["frame_dir"]).resolve())
        sources.append(
            SourceVideoMeta(
                video_id=rec["video_id"],
                label=rec["label"],
                frame_dir=frame_dir,
                corpus=rec["corpus"],
                original_id=rec.get("original_id"),
            )
        )
    ids = [s.video_id for s in sources]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate video ids in {path}")
    return sources


def load_boxes(path) -> dict:
    """Read detector boxes: video_id -> frame_idx -> face boxes in order."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"boxes file not found: {path}")
    boxes: dict = {}
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        per_video = boxes.setdefault(rec["video_id"], {})
        per_frame = per_video.setdefault(int(rec["frame_idx"]), {})
        per_frame[int(rec["face_idx"])] = BBox(
            int(rec["x"]), int(rec["y"]), int(rec["w"]), int(rec["h"])
        )
    return {
        vid: {
            fidx: [faces[k] for k in sorted(faces)]
            for fidx, faces in frames.items()
        }
        for vid, frames in boxes.items()
    }


def write_manifest(entries, path) -> None:
    path = Path(path)
    lines = [
        json.dumps(
            {
                "item_key": e.item_key,
                "face_path": e.face_path,
                "mri_path": e.mri_path,
                "label": e.label,
                "split": e.split,
                "origin": e.origin,
            },
            sort_keys=True,
        )
        for e in entries
    ]
    path.write_text("\n".join(lines) + "\n")


def load_manifest(path) -> list:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    entries = []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        entries.append(ManifestEntry(**rec))
    return entries


def _quantize(img: ImageBuf) -> ImageBuf:
    # snap to the 8-bit grid the PNG will store, so MRI math sees
    # exactly what a reader of the saved files will see
    return ImageBuf(img.to_uint8().astype(np.float64))


def pair_faces(
    fake: SourceVideoMeta,
    real: SourceVideoMeta,
    boxes: dict,
    stride: int = 10,
    fake_frames: dict | None = None,
) -> list:
    """Aligned (fake crop, real crop) pairs over strided frames.

    Pairing matches (frame_idx, face_idx); slots missing a detection on
    either side are skipped and logged. The real crop is resized to the
    fake crop's dimensions. ``fake_frames`` supplies pre-transformed
    fake frames (by index) so builds can augment before cropping.
    """
    if real.video_id != fake.original_id:
        raise ValueError(
            f"video {real.video_id} is not the original of {fake.video_id} "
            f"(expected {fake.original_id})"
        )
    fake_boxes = boxes.get(fake.video_id, {})
    real_boxes = boxes.get(real.video_id, {})
    n_frames = count_frames(fake.frame_dir)
    pairs = []
    for fidx in select_frames(n_frames, stride):
        fb = fake_boxes.get(fidx, [])
        rb = real_boxes.get(fidx, [])
        if not fb or not rb:
            log.warning(
                "no detections for frame %d of %s/%s; skipped",
                fidx,
                fake.video_id,
                real.video_id,
            )
            continue
        if len(fb) != len(rb):
            log.warning(
                "face count mismatch at frame %d (%d fake vs %d real); "
                "pairing the common prefix",
                fidx,
                len(fb),
                len(rb),
            )
        fake_frame = (fake_frames or {}).get(fidx)
        if fake_frame is None:
            fpath = frame_path(fake.frame_dir, fidx)
            if not fpath.exists():
                log.warning("missing frame file %s; skipped", fpath)
                continue
            fake_frame = load_image(fpath)
        rpath = frame_path(real.frame_dir, fidx)
        if not rpath.exists():
            log.warning("missing frame file %s; skipped", rpath)
            continue
        real_frame = load_image(rpath)
        for face_idx in range(min(len(fb), len(rb))):
            fake_crop = crop(fake_frame, fb[face_idx])
            real_crop = crop(real_frame, rb[face_idx])
            real_crop = resize(real_crop, fake_crop.width, fake_crop.height)
            pairs.append(FacePair(fake_crop, real_crop, fidx, face_idx))
    if not pairs:
        log.warning("no face pairs for %s vs %s", fake.video_id, real.video_id)
    return pairs


def _seeded_subset(ids, fraction: float, seed: SeedSpec) -> set:
    """Exactly round(fraction * n) ids, chosen deterministically."""
    ids = sorted(ids)
    k = int(round(fraction * len(ids)))
    if k <= 0:
        return set()
    if k >= len(ids):
        return set(ids)
    picks = seed.rng().choice(len(ids), size=k, replace=False)
    return {ids[i] for i in picks}


def _item_key(corpus: str, video_id: str, frame_idx: int, face_idx: int) -> str:
    return f"{corpus}/{video_id}/f{frame_idx:06d}/p{face_idx}"


def _entry_stem(corpus: str, video_id: str, frame_idx: int, face_idx: int) -> str:
    return f"data/{corpus}/{video_id}/f{frame_idx:06d}_p{face_idx}"


def _transformed_frames(meta, policy, seed, do_augment, do_distract, stride):
    """Load strided frames and apply the video's seeded transforms."""
    n_frames = count_frames(meta.frame_dir)
    selected = select_frames(n_frames, stride)
    frames = {}
    order = []
    for fidx in selected:
        fpath = frame_path(meta.frame_dir, fidx)
        if not fpath.exists():
            log.warning("missing frame file %s; skipped", fpath)
            continue
        frames[fidx] = load_image(fpath)
        order.append(fidx)
    if not frames:
        return frames
    if do_distract:
        spec = random_distraction(seed.child(f"distract-spec/{meta.video_id}"), policy.distract)
        if spec.mode == "rolling" and len(order) < 2:
            spec = replace(spec, mode="static")
        seq = FrameSequence(tuple(frames[i] for i in order), tuple(order))
        done = overlay(seq, spec, seed.child(f"distract/{meta.video_id}"))
        frames = dict(zip(done.indices, done.frames))
    if do_augment:
        plan = random_plan(seed.child(f"plan/{meta.video_id}"), policy.augment)
        for fidx in order:
            frames[fidx] = compose(
                frames[fidx],
                AugmentPlan(plan.specs, seed.child(f"aug/{meta.video_id}/{fidx:06d}")),
            )
    return frames


def _build_video(args) -> list:
    """Worker: build all entries for one source video. Returns entry dicts."""
    (meta, real_meta, boxes, policy, seed, out_root, cfg, do_augment, do_distract) = args
    out_root = Path(out_root)
    stride = policy.frame_stride
    split = "test" if seed.child(f"split/{meta.video_id}").rng().random() < policy.test_fraction else "train"
    entries = []
    frames = _transformed_frames(meta, policy, seed, do_augment, do_distract, stride)
    if meta.label == "fake":
        pairs = pair_faces(meta, real_meta, boxes, stride, fake_frames=frames)
        for pair in pairs:
            stem = _entry_stem(meta.corpus, meta.video_id, pair.frame_idx, pair.face_idx)
            (out_root / stem).parent.mkdir(parents=True, exist_ok=True)
            face = _quantize(pair.fake_face)
            ref = _quantize(pair.real_face)
            try:
                target = mri_image(face, ref, cfg)
            except ValueError as exc:
                log.warning("MRI failed for %s: %s; entry skipped", stem, exc)
                continue
            save_image(face, out_root / f"{stem}_face.png")
            save_image(ref, out_root / f"{stem}_ref.png")
            export_mri(
                target,
                out_root / f"{stem}_mri.png",
                raw_path=out_root / f"{stem}_mri.raw",
            )
            entries.append(
                {
                    "item_key": _item_key(meta.corpus, meta.video_id, pair.frame_idx, pair.face_idx),
                    "face_path": f"{stem}_face.png",
                    "mri_path": f"{stem}_mri.png",
                    "label": "fake",
                    "split": split,
                    "origin": meta.corpus,
                }
            )
    else:
        video_boxes = boxes.get(meta.video_id, {})
        for fidx, frame in sorted(frames.items()):
            for face_idx, box in enumerate(video_boxes.get(fidx, [])):
                stem = _entry_stem(meta.corpus, meta.video_id, fidx, face_idx)
                (out_root / stem).parent.mkdir(parents=True, exist_ok=True)
                save_image(_quantize(crop(frame, box)), out_root / f"{stem}_face.png")
                entries.append(
                    {
                        "item_key": _item_key(meta.corpus, meta.video_id, fidx, face_idx),
                        "face_path": f"{stem}_face.png",
                        "mri_path": BLANK_TARGET_NAME,
                        "label": "real",
                        "split": split,
                        "origin": meta.corpus,
                    }
                )
    return entries


def build_manifest(
    sources,
    policy: BuildPolicy,
    out_dir,
    seed: SeedSpec,
    boxes: dict | None = None,
    jobs: int = 1,
    ssim_cfg: SsimConfig = SsimConfig(),
) -> list:
    """Build the full dataset tree and return its manifest entries.

    Transform gating is per corpus rule; with the shipped defaults only
    dfdc-tagged videos are eligible for augmentation/distraction.
    """
    if boxes is None:
        raise ValueError("boxes mapping is required")
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    by_id = {s.video_id: s for s in sources}

    included = []
    for corpus in sorted({s.corpus for s in sources}):
        rule = policy.rule_for(corpus)
        ids = [s.video_id for s in sources if s.corpus == corpus]
        chosen = _seeded_subset(ids, rule.include_fraction, seed.child(f"include/{corpus}"))
        included.extend(chosen)
    included = sorted(included)

    augment_ids: set = set()
    distract_ids: set = set()
    for corpus in sorted({by_id[v].corpus for v in included}):
        rule = policy.rule_for(corpus)
        ids = [v for v in included if by_id[v].corpus == corpus]
        augment_ids |= _seeded_subset(ids, rule.augment_fraction, seed.child(f"augment-select/{corpus}"))
        distract_ids |= _seeded_subset(ids, rule.distract_fraction, seed.child(f"distract-select/{corpus}"))

    tasks = []
    for vid in included:
        meta = by_id[vid]
        real_meta = None
        if meta.label == "fake":
            real_meta = by_id.get(meta.original_id)
            if real_meta is None:
                raise ValueError(
                    f"fake video {vid} references unknown original {meta.original_id!r}"
                )
        tasks.append(
            (
                meta,
                real_meta,
                boxes,
                policy,
                seed,
                str(out_root),
                ssim_cfg,
                vid in augment_ids,
                vid in distract_ids,
            )
        )

    save_image(
        ImageBuf(np.zeros((BLANK_TARGET_SIZE, BLANK_TARGET_SIZE, 3))),
        out_root / BLANK_TARGET_NAME,
    )

    if jobs <= 1:
        results = [_build_video(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_build_video, tasks))

    entries = sorted(
        (ManifestEntry(**rec) for recs in results for rec in recs),
        key=lambda e: e.item_key,
    )
    write_manifest(entries, out_root / "manifest.jsonl")
    return entries


def balanced_epoch_sample(entries, epoch: int, seed: SeedSpec) -> EpochSample:
    """Every fake entry once plus an equal count of seeded real entries.

    Reals are drawn without replacement when enough exist; otherwise
    with replacement, flagged on the sample.
    """
    fakes = [i for i, e in enumerate(entries) if e.label == "fake"]
    reals = [i for i, e in enumerate(entries) if e.label == "real"]
    if not fakes or not reals:
        raise ValueError(
            f"balanced sampling needs both classes, got {len(fakes)} fake "
            f"and {len(reals)} real"
        )
    rng = seed.child(f"epoch/{epoch}").rng()
    with_replacement = len(reals) < len(fakes)
    chosen = rng.choice(np.array(reals), size=len(fakes), replace=with_replacement)
    indices = np.concatenate([np.array(fakes), chosen])
    rng.shuffle(indices)
    return EpochSample(epoch, tuple(int(i) for i in indices), with_replacement)


def save_epoch_sample(sample: EpochSample, path) -> None:
    Path(path).write_text(
        json.dumps(
            {
                "epoch": sample.epoch,
                "indices": list(sample.indices),
                "with_replacement": sample.with_replacement,
            },
            sort_keys=True,
        )
        + "\n"
    )


def load_epoch_sample(path) -> EpochSample:
    rec = json.loads(Path(path).read_text())
    return EpochSample(rec["epoch"], tuple(rec["indices"]), rec["with_replacement"])
