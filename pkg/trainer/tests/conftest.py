import json
import subprocess
from pathlib import Path

import numpy as np
import pytest

TRAINER_ROOT = Path(__file__).parent.parent


@pytest.fixture
def rng():
    return np.random.default_rng(7171)


def run_forge(args, cwd=None):
    """Invoke the dataset toolkit through its public CLI."""
    proc = subprocess.run(
        ["mri-forge", *map(str, args)], capture_output=True, text=True, cwd=cwd
    )
    if proc.returncode != 0:
        raise AssertionError(f"mri-forge {args} failed:\n{proc.stderr}")
    return proc.stdout


def write_toy_manifest(root: Path, n_fake=6, n_real=6, size=48, rng=None):
    """Hand-built manifest tree exercising the published file formats."""
    rng = rng or np.random.default_rng(11)
    root.mkdir(parents=True, exist_ok=True)
    data_dir = root / "data"
    data_dir.mkdir(exist_ok=True)
    from PIL import Image

    lines = []
    blank = np.zeros((size, size, 3), dtype=np.uint8)
    Image.fromarray(blank, "RGB").save(root / "blank_mri.png")
    for i in range(n_fake + n_real):
        fake = i < n_fake
        vid = f"{'fake' if fake else 'real'}_{i:03d}"
        key = f"dfdc/{vid}/f{(i * 10):06d}/p0"
        face = rng.integers(0, 256, (size, size, 3)).astype(np.uint8)
        face_path = data_dir / f"{vid}_face.png"
        Image.fromarray(face, "RGB").save(face_path)
        if fake:
            mri = rng.uniform(0, 0.8, (size, size, 3)).astype(np.float32)
            mri_png = data_dir / f"{vid}_mri.png"
            Image.fromarray((mri * 255).astype(np.uint8), "RGB").save(mri_png)
            header = b"MRI0" + np.array([size, size, 3], dtype="<u4").tobytes()
            (data_dir / f"{vid}_mri.raw").write_bytes(header + mri.tobytes())
            mri_rel = f"data/{vid}_mri.png"
        else:
            mri_rel = "blank_mri.png"
        lines.append(
            json.dumps(
                {
                    "item_key": key,
                    "face_path": f"data/{vid}_face.png",
                    "mri_path": mri_rel,
                    "label": "fake" if fake else "real",
                    "split": "train" if i % 3 else "test",
                    "origin": "dfdc",
                }
            )
        )
    manifest = root / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest
