"""Manifest-driven data access.

Reads only the dataset builder's published file formats: the JSONL
manifest, face/MRI PNGs, "MRI0" float sidecars, and optional balanced
epoch-sample JSON files. Faces are normalized to [-1, 1] for the
generator, MRI targets to [0, 1]; both are resized to the training
resolution with bilinear interpolation.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

MRI_SIDECAR_MAGIC = b"MRI0"


@dataclass(frozen=True)
class ManifestRecord:
    item_key: str
    face_path: Path
    mri_path: Path
    label: str
    split: str
    origin: str

    @property
    def video_id(self) -> str:
        # item keys look like corpus/video_id/f000010/p0
        return self.item_key.split("/")[1]

    @property
    def frame_idx(self) -> int:
        return int(self.item_key.split("/")[2][1:])

    @property
    def face_idx(self) -> int:
        return int(self.item_key.split("/")[3][1:])


def load_manifest(path) -> list:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    base = path.parent
    records = []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        records.append(
            ManifestRecord(
                item_key=rec["item_key"],
                face_path=base / rec["face_path"],
                mri_path=base / rec["mri_path"],
                label=rec["label"],
                split=rec["split"],
                origin=rec["origin"],
            )
        )
    if not records:
        raise ValueError(f"manifest is empty: {path}")
    return records


def read_mri_sidecar(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MRI_SIDECAR_MAGIC:
        raise ValueError(f"not an MRI sidecar: {path}")
    width, height, channels = struct.unpack("<III", raw[4:16])
    values = np.frombuffer(raw, dtype="<f4", offset=16)
    return values.reshape(height, width, channels).astype(np.float32)


def write_mri_sidecar(values: np.ndarray, path) -> None:
    h, w, c = values.shape
    header = MRI_SIDECAR_MAGIC + struct.pack("<III", w, h, c)
    Path(path).write_bytes(header + np.ascontiguousarray(values, dtype="<f4").tobytes())


def _to_tensor(arr: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1))).float()


def _resize(t: torch.Tensor, size: int) -> torch.Tensor:
    if t.shape[-1] == size and t.shape[-2] == size:
        return t
    return F.interpolate(t[None], size=(size, size), mode="bilinear", align_corners=False)[0]


def load_face(record: ManifestRecord, size: int) -> torch.Tensor:
    """Face image as a (C, size, size) tensor in [-1, 1]."""
    with Image.open(record.face_path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return _resize(_to_tensor(arr / 127.5 - 1.0), size)


def load_target(record: ManifestRecord, size: int) -> torch.Tensor:
    """MRI target as a (C, size, size) tensor in [0, 1].

    Prefers the raw sidecar next to the PNG (exact values, clamped to
    the representable [0, 1] output range); falls back to the PNG.
    """
    sidecar = record.mri_path.with_suffix(".raw")
    if sidecar.exists():
        arr = np.clip(read_mri_sidecar(sidecar), 0.0, 1.0)
    else:
        with Image.open(record.mri_path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return _resize(_to_tensor(arr), size)


def load_batch(records, indices, size: int):
    """Stack faces and targets for the given manifest indices."""
    faces = torch.stack([load_face(records[i], size) for i in indices])
    targets = torch.stack([load_target(records[i], size) for i in indices])
    return faces, targets


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng((seed * 1_000_003 + epoch) & 0xFFFFFFFF)


def balanced_epoch_indices(records, epoch: int, seed: int) -> list:
    """All fake entries plus an equal count of seeded real entries."""
    fakes = [i for i, r in enumerate(records) if r.label == "fake"]
    reals = [i for i, r in enumerate(records) if r.label == "real"]
    if not fakes or not reals:
        raise ValueError(
            f"balanced sampling needs both classes, got {len(fakes)} fake "
            f"and {len(reals)} real"
        )
    rng = _epoch_rng(seed, epoch)
    replace = len(reals) < len(fakes)
    chosen = rng.choice(np.array(reals), size=len(fakes), replace=replace)
    indices = np.concatenate([np.array(fakes), chosen])
    rng.shuffle(indices)
    return [int(i) for i in indices]


def epoch_indices(records, epoch: int, seed: int, epoch_dir=None) -> list:
    """Balanced indices, reusing a pre-built epoch file when one exists."""
    if epoch_dir is not None:
        path = Path(epoch_dir) / f"epoch_{epoch:04d}.json"
        if path.exists():
            rec = json.loads(path.read_text())
            return [int(i) for i in rec["indices"]]
    return balanced_epoch_indices(records, epoch, seed)


def split_records(records, split: str) -> list:
    out = [r for r in records if r.split == split]
    return out
