"""Inference: predicted MRIs and per-face fakeness scores.

The face classifier at this scale is deliberately small: summary
statistics of the predicted MRI (its energy) feed a tiny MLP head
trained on the manifest's train split. A blank predicted MRI therefore
lands on the real side of the head's decision.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from PIL import Image

from .config import TrainConfig
from .data import load_face, write_mri_sidecar
from .models import MriGenerator


def load_generator(checkpoint, cfg: TrainConfig) -> MriGenerator:
    generator = MriGenerator(
        cfg.image_size, cfg.in_channels, cfg.out_channels, cfg.gen_width,
        cfg.dropout, cfg.leaky_slope,
    )
    state = torch.load(checkpoint, map_location="cpu", weights_only=True)
    generator.load_state_dict(state)
    generator.eval()
    return generator


def predict_mri_batch(generator: MriGenerator, records, cfg: TrainConfig) -> torch.Tensor:
    """Predicted MRIs in [0, 1], (B, C, S, S); deterministic (dropout off)."""
    generator.eval()
    with torch.no_grad():
        faces = torch.stack([load_face(r, cfg.image_size) for r in records])
        return (generator(faces) + 1.0) / 2.0


def export_predictions(generator, records, cfg: TrainConfig, out_dir, batch_size: int = 32):
    """Write one MRI PNG + raw sidecar per face, named by item key."""
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    written = []
    for start in range(0, len(records), batch_size):
        chunk = records[start : start + batch_size]
        preds = predict_mri_batch(generator, chunk, cfg)
        for record, pred in zip(chunk, preds):
            arr = pred.permute(1, 2, 0).numpy()
            name = record.item_key.replace("/", "_")
            png_path = out_root / f"{name}_mri.png"
            byte_view = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
            Image.fromarray(byte_view, mode="RGB").save(png_path, format="PNG")
            write_mri_sidecar(arr.astype(np.float32), out_root / f"{name}_mri.raw")
            written.append(png_path)
    return written


def mri_features(pred01: torch.Tensor) -> torch.Tensor:
    """Energy summary of one predicted MRI: mean, std, bright fraction."""
    flat = pred01.reshape(-1)
    return torch.stack([flat.mean(), flat.std(), (flat > 0.25).float().mean()])


class ScoreHead(nn.Module):
    """Tiny MLP over MRI energy features -> probability the face is fake."""

    def __init__(self):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(3, 16), nn.ReLU(), nn.Linear(16, 1))

    def forward(self, x):
        return torch.sigmoid(self.net(x)).squeeze(-1)


def fit_score_head(generator, records, cfg: TrainConfig, steps: int = 400, seed: int = 0) -> ScoreHead:
    """Train the head on the train split's predicted MRIs."""
    train_records = [r for r in records if r.split == "train"]
    if not train_records:
        train_records = records
    preds = predict_mri_batch(generator, train_records, cfg)
    features = torch.stack([mri_features(p) for p in preds])
    labels = torch.tensor([1.0 if r.label == "fake" else 0.0 for r in train_records])
    torch.manual_seed(seed)
    head = ScoreHead()
    optimizer = torch.optim.Adam(head.parameters(), lr=0.05)
    criterion = nn.BCELoss()
    for _ in range(steps):
        optimizer.zero_grad()
        loss = criterion(head(features), labels)
        loss.backward()
        optimizer.step()
    head.eval()
    return head


def score_faces(generator, head: ScoreHead, records, cfg: TrainConfig, out_path, batch_size: int = 32):
    """Write FaceScore JSONL: one probability per manifest face."""
    lines = []
    with torch.no_grad():
        for start in range(0, len(records), batch_size):
            chunk = records[start : start + batch_size]
            preds = predict_mri_batch(generator, chunk, cfg)
            feats = torch.stack([mri_features(p) for p in preds])
            probs = head(feats)
            for record, p in zip(chunk, probs):
                lines.append(
                    json.dumps(
                        {
                            "video_id": record.video_id,
                            "frame_idx": record.frame_idx,
                            "face_idx": record.face_idx,
                            "p_fake": float(min(max(p.item(), 0.0), 1.0)),
                        },
                        sort_keys=True,
                    )
                )
    Path(out_path).write_text("\n".join(lines) + "\n")
    return len(lines)
