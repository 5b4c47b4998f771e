import json

import numpy as np
import pytest

from mri_forge.dataset import (
    BLANK_TARGET_NAME,
    EpochSample,
    ManifestEntry,
    SourceVideoMeta,
    balanced_epoch_sample,
    build_manifest,
    load_boxes,
    load_epoch_sample,
    load_manifest,
    load_sources,
    pair_faces,
    save_epoch_sample,
    select_frames,
    write_manifest,
)
from mri_forge.imgcore import ImageBuf, SeedSpec, load_image, save_image
from mri_forge.perceptual import mri_image, read_mri_sidecar
from mri_forge.policy import (
    AugmentCandidate,
    AugmentPolicy,
    BuildPolicy,
    CorpusRule,
)

SEED = SeedSpec(4242, "dataset-test")


def write_frames(dirpath, arrays):
    dirpath.mkdir(parents=True, exist_ok=True)
    for i, arr in enumerate(arrays):
        save_image(ImageBuf(arr), dirpath / f"{i:06d}.png")


def fake_real_pair(tmp_path, rng, n_frames=2, size=48, tamper=True):
    """A fake/real video pair on disk plus a one-face box table."""
    real_frames = [rng.integers(0, 256, (size, size, 3)).astype(float) for _ in range(n_frames)]
    fake_frames = [f.copy() for f in real_frames]
    if tamper:
        for f in fake_frames:
            f[10:20, 10:20, :] = 255.0 - f[10:20, 10:20, :]
    write_frames(tmp_path / "frames" / "real", real_frames)
    write_frames(tmp_path / "frames" / "fake", fake_frames)
    real = SourceVideoMeta("real", "real", str(tmp_path / "frames" / "real"), "dfdc")
    fake = SourceVideoMeta("fake", "fake", str(tmp_path / "frames" / "fake"), "dfdc", original_id="real")
    boxes = {
        "real": {i: [make_box(4, 4, 40, 40)] for i in range(n_frames)},
        "fake": {i: [make_box(4, 4, 40, 40)] for i in range(n_frames)},
    }
    return fake, real, boxes


def make_box(x, y, w, h):
    from mri_forge.imgcore import BBox

    return BBox(x, y, w, h)


class TestTypes:
    def test_fake_requires_original(self):
        with pytest.raises(ValueError, match="original_id"):
            SourceVideoMeta("v", "fake", "/tmp", "dfdc")

    def test_real_must_not_have_original(self):
        with pytest.raises(ValueError):
            SourceVideoMeta("v", "real", "/tmp", "dfdc", original_id="x")

    def test_unknown_corpus(self):
        with pytest.raises(ValueError):
            SourceVideoMeta("v", "real", "/tmp", "imagenet")


class TestSelectFrames:
    def test_stride_ten(self):
        assert select_frames(25, 10) == [0, 10, 20]

    def test_zero_frames(self):
        assert select_frames(0) == []

    def test_stride_one(self):
        assert select_frames(4, 1) == [0, 1, 2, 3]

    def test_bad_stride(self):
        with pytest.raises(ValueError):
            select_frames(10, 0)


class TestJsonlIo:
    def test_sources_round_trip(self, tmp_path):
        path = tmp_path / "sources.jsonl"
        (tmp_path / "frames" / "a").mkdir(parents=True)
        path.write_text(
            json.dumps({"video_id": "a", "label": "real", "frame_dir": "frames/a", "corpus": "celeb"})
            + "\n"
        )
        sources = load_sources(path)
        assert sources[0].video_id == "a"
        assert sources[0].frame_dir.endswith("frames/a")

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "sources.jsonl"
        rec = json.dumps({"video_id": "a", "label": "real", "frame_dir": ".", "corpus": "celeb"})
        path.write_text(rec + "\n" + rec + "\n")
        with pytest.raises(ValueError, match="duplicate"):
            load_sources(path)

    def test_boxes_ordered_by_face_idx(self, tmp_path):
        path = tmp_path / "boxes.jsonl"
        lines = [
            {"video_id": "v", "frame_idx": 0, "face_idx": 1, "x": 10, "y": 0, "w": 5, "h": 5},
            {"video_id": "v", "frame_idx": 0, "face_idx": 0, "x": 0, "y": 0, "w": 5, "h": 5},
        ]
        path.write_text("\n".join(json.dumps(l) for l in lines) + "\n")
        boxes = load_boxes(path)
        assert [b.x for b in boxes["v"][0]] == [0, 10]

    def test_manifest_round_trip(self, tmp_path):
        entries = [
            ManifestEntry("k/a", "a_face.png", "a_mri.png", "fake", "train", "dfdc"),
            ManifestEntry("k/b", "b_face.png", "blank.png", "real", "test", "celeb"),
        ]
        path = tmp_path / "manifest.jsonl"
        write_manifest(entries, path)
        assert load_manifest(path) == entries


class TestPairFaces:
    def test_identical_videos_give_blank_mri(self, tmp_path, rng):
        fake, real, boxes = fake_real_pair(tmp_path, rng, tamper=False)
        pairs = pair_faces(fake, real, boxes, stride=1)
        assert len(pairs) == 2
        for pair in pairs:
            target = mri_image(pair.fake_face, pair.real_face)
            assert np.max(np.abs(target.values)) < 1e-12

    def test_face_count_mismatch_pairs_prefix(self, tmp_path, rng):
        fake, real, boxes = fake_real_pair(tmp_path, rng, n_frames=1)
        boxes["fake"][0].append(make_box(20, 20, 20, 20))  # second face, fake side only
        pairs = pair_faces(fake, real, boxes, stride=1)
        assert len(pairs) == 1
        assert pairs[0].face_idx == 0

    def test_empty_detections(self, tmp_path, rng):
        fake, real, boxes = fake_real_pair(tmp_path, rng)
        boxes["fake"] = {}
        assert pair_faces(fake, real, boxes, stride=1) == []

    def test_real_resized_to_fake_dims(self, tmp_path, rng):
        fake, real, boxes = fake_real_pair(tmp_path, rng, n_frames=1)
        boxes["real"][0] = [make_box(0, 0, 20, 24)]  # differing detection size
        pairs = pair_faces(fake, real, boxes, stride=1)
        assert pairs[0].real_face.width == pairs[0].fake_face.width
        assert pairs[0].real_face.height == pairs[0].fake_face.height

    def test_wrong_original_rejected(self, tmp_path, rng):
        fake, real, boxes = fake_real_pair(tmp_path, rng)
        other = SourceVideoMeta("other", "real", real.frame_dir, "dfdc")
        with pytest.raises(ValueError, match="original"):
            pair_faces(fake, other, boxes)


def plain_policy(**kwargs):
    defaults = dict(
        frame_stride=1,
        test_fraction=0.0,
        corpora={"dfdc": CorpusRule(include_fraction=1.0)},
    )
    defaults.update(kwargs)
    return BuildPolicy(**defaults)


class TestBuildManifest:
    def test_counts_and_blank_target(self, tmp_path, rng):
        fake, real, boxes = fake_real_pair(tmp_path, rng, n_frames=2)
        out = tmp_path / "out"
        entries = build_manifest([fake, real], plain_policy(), out, SEED, boxes=boxes)
        assert len(entries) == 4  # 2 frames x (1 fake pair + 1 real face)
        reals = [e for e in entries if e.label == "real"]
        assert all(e.mri_path == BLANK_TARGET_NAME for e in reals)
        blank = load_image(out / BLANK_TARGET_NAME)
        assert not blank.pixels.any()

    def test_fake_sidecar_matches_recomputation_exactly(self, tmp_path, rng):
        fake, real, boxes = fake_real_pair(tmp_path, rng, n_frames=2)
        out = tmp_path / "out"
        entries = build_manifest([fake, real], plain_policy(), out, SEED, boxes=boxes)
        for e in entries:
            if e.label != "fake":
                continue
            face = load_image(out / e.face_path)
            ref = load_image(out / e.face_path.replace("_face.png", "_ref.png"))
            sidecar = read_mri_sidecar(out / e.face_path.replace("_face.png", "_mri.raw"))
            recomputed = mri_image(face, ref).values.astype(np.float32)
            assert np.array_equal(recomputed, sidecar.values.astype(np.float32))

    def test_rebuild_is_byte_identical(self, tmp_path, rng):
        fake, real, boxes = fake_real_pair(tmp_path, rng)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        build_manifest([fake, real], plain_policy(), out_a, SEED, boxes=boxes)
        build_manifest([fake, real], plain_policy(), out_b, SEED, boxes=boxes)
        assert (out_a / "manifest.jsonl").read_bytes() == (out_b / "manifest.jsonl").read_bytes()
        for path_a in sorted(out_a.rglob("*.png")):
            path_b = out_b / path_a.relative_to(out_a)
            assert path_a.read_bytes() == path_b.read_bytes()

    def test_unresolvable_original(self, tmp_path, rng):
        fake, real, boxes = fake_real_pair(tmp_path, rng)
        orphan = SourceVideoMeta("orphan", "fake", fake.frame_dir, "dfdc", original_id="ghost")
        with pytest.raises(ValueError, match="ghost"):
            build_manifest([orphan, real], plain_policy(), tmp_path / "o", SEED, boxes=boxes)

    def test_augment_fraction_selects_exact_count(self, tmp_path, rng):
        # ten real dfdc videos, brightness-only augmentation on exactly half
        sources = []
        boxes = {}
        for i in range(10):
            vid = f"vid_{i:02d}"
            frames = [rng.integers(0, 200, (32, 32, 3)).astype(float)]
            write_frames(tmp_path / "frames" / vid, frames)
            sources.append(SourceVideoMeta(vid, "real", str(tmp_path / "frames" / vid), "dfdc"))
            boxes[vid] = {0: [make_box(2, 2, 28, 28)]}
        policy = plain_policy(
            corpora={"dfdc": CorpusRule(include_fraction=1.0, augment_fraction=0.5)},
            augment=AugmentPolicy(
                (AugmentCandidate("brightness", ranges={"offset": (30.0, 30.0)}),), 1, 1
            ),
        )
        out = tmp_path / "out"
        entries = build_manifest(sources, policy, out, SEED, boxes=boxes)
        assert len(entries) == 10
        changed = 0
        for e in entries:
            stored = load_image(out / e.face_path)
            vid = e.item_key.split("/")[1]
            frame = load_image(tmp_path / "frames" / vid / "000000.png")
            plain = frame.pixels[2:30, 2:30, :]
            if not np.array_equal(stored.pixels, np.floor(plain + 0.5)):
                changed += 1
        assert changed == 5

    def test_include_fraction_subsets(self, tmp_path, rng):
        sources = []
        boxes = {}
        for i in range(4):
            vid = f"v{i}"
            write_frames(tmp_path / "frames" / vid, [rng.integers(0, 200, (24, 24, 3)).astype(float)])
            sources.append(SourceVideoMeta(vid, "real", str(tmp_path / "frames" / vid), "celeb"))
            boxes[vid] = {0: [make_box(0, 0, 24, 24)]}
        policy = plain_policy(corpora={"celeb": CorpusRule(include_fraction=0.5)})
        entries = build_manifest(sources, policy, tmp_path / "out", SEED, boxes=boxes)
        assert len({e.item_key.split("/")[1] for e in entries}) == 2


class TestEpochSampling:
    def entries(self, n_fake, n_real):
        out = []
        for i in range(n_fake):
            out.append(ManifestEntry(f"f{i}", "f.png", "m.png", "fake", "train", "dfdc"))
        for i in range(n_real):
            out.append(ManifestEntry(f"r{i}", "f.png", "b.png", "real", "train", "dfdc"))
        return out

    def test_balanced_counts(self):
        entries = self.entries(100, 300)
        sample = balanced_epoch_sample(entries, 0, SEED)
        labels = [entries[i].label for i in sample.indices]
        assert len(sample.indices) == 200
        assert labels.count("fake") == 100 and labels.count("real") == 100
        assert not sample.with_replacement
        reals = [i for i in sample.indices if entries[i].label == "real"]
        assert len(set(reals)) == 100  # without replacement

    def test_with_replacement_when_reals_scarce(self):
        entries = self.entries(100, 60)
        sample = balanced_epoch_sample(entries, 0, SEED)
        assert len(sample.indices) == 200
        assert sample.with_replacement

    def test_fakes_appear_exactly_once(self):
        entries = self.entries(20, 50)
        sample = balanced_epoch_sample(entries, 3, SEED)
        fakes = [i for i in sample.indices if entries[i].label == "fake"]
        assert sorted(fakes) == list(range(20))

    def test_deterministic_and_epoch_dependent(self):
        entries = self.entries(30, 90)
        a = balanced_epoch_sample(entries, 1, SEED)
        b = balanced_epoch_sample(entries, 1, SEED)
        c = balanced_epoch_sample(entries, 2, SEED)
        assert a.indices == b.indices
        assert a.indices != c.indices

    def test_empty_class_rejected(self):
        with pytest.raises(ValueError):
            balanced_epoch_sample(self.entries(5, 0), 0, SEED)

    def test_sample_file_round_trip(self, tmp_path):
        sample = EpochSample(7, (3, 1, 2), True)
        path = tmp_path / "epoch.json"
        save_epoch_sample(sample, path)
        assert load_epoch_sample(path) == sample
