import numpy as np
import pytest

from mri_forge.distract import (
    DistractionSpec,
    FrameSequence,
    gen_random_text,
    overlay_rolling,
    overlay_spontaneous,
    overlay_static,
    random_distraction,
)
from mri_forge.imgcore import ImageBuf, SeedSpec
from mri_forge.policy import DistractPolicy

SEED = SeedSpec(123, "distract-test")


def black_frames(count, h=96, w=128, c=3):
    return FrameSequence(tuple(ImageBuf(np.zeros((h, w, c))) for _ in range(count)))


def diff_mask(before: FrameSequence, after: FrameSequence, i: int) -> np.ndarray:
    return np.any(before.frames[i].pixels != after.frames[i].pixels, axis=2)


class TestRandomText:
    def test_length_and_alphabet(self):
        text = gen_random_text(SEED)
        assert len(text) == 8
        assert text.isalnum()

    def test_deterministic(self):
        assert gen_random_text(SeedSpec(5, "t")) == gen_random_text(SeedSpec(5, "t"))

    def test_collision_rate(self):
        texts = {gen_random_text(SeedSpec(1, f"text/{i}")) for i in range(10_000)}
        assert len(texts) >= 9_990


class TestStatic:
    SPEC = DistractionSpec(obj="text", mode="static", color="white", font_scale=2)

    def test_same_mask_every_frame(self):
        seq = black_frames(5)
        out = overlay_static(seq, self.SPEC, SEED)
        masks = [diff_mask(seq, out, i) for i in range(5)]
        assert masks[0].any()
        for m in masks[1:]:
            assert np.array_equal(m, masks[0])

    def test_single_frame(self):
        seq = black_frames(1)
        out = overlay_static(seq, self.SPEC, SEED)
        assert diff_mask(seq, out, 0).any()

    def test_white_text_on_black(self):
        seq = black_frames(2)
        out = overlay_static(seq, self.SPEC, SEED)
        mask = diff_mask(seq, out, 0)
        assert (out.frames[0].pixels[mask] == 255.0).all()

    def test_untouched_pixels_bit_identical(self):
        seq = black_frames(3)
        out = overlay_static(seq, DistractionSpec(obj="circle", mode="static", color="red"), SEED)
        mask = diff_mask(seq, out, 1)
        assert np.array_equal(
            out.frames[1].pixels[~mask], seq.frames[1].pixels[~mask]
        )

    def test_oversized_object_rejected(self):
        seq = black_frames(2, h=10, w=10)
        spec = DistractionSpec(obj="text", mode="static", font_scale=6)
        with pytest.raises(ValueError, match="larger than frame"):
            overlay_static(seq, spec, SEED)

    def test_mode_mismatch(self):
        with pytest.raises(ValueError):
            overlay_static(black_frames(1), DistractionSpec(mode="rolling"), SEED)


class TestRolling:
    def test_left_to_right_strictly_increases(self):
        seq = black_frames(8)
        spec = DistractionSpec(obj="text", mode="rolling", direction="left_to_right")
        out = overlay_rolling(seq, spec, SEED)
        xs, ys = [], []
        for i in range(8):
            mask = diff_mask(seq, out, i)
            cols = np.where(mask.any(axis=0))[0]
            rows = np.where(mask.any(axis=1))[0]
            xs.append(cols.min())
            ys.append(rows.min())
        assert all(b > a for a, b in zip(xs, xs[1:]))
        assert len(set(ys)) == 1

    def test_reversed_right_to_left_mirrors_left_to_right(self):
        seq = black_frames(6)
        ltr = overlay_rolling(
            seq, DistractionSpec(obj="text", mode="rolling", direction="left_to_right"), SEED
        )
        rtl = overlay_rolling(
            seq, DistractionSpec(obj="text", mode="rolling", direction="right_to_left"), SEED
        )
        for i in range(6):
            assert np.array_equal(
                rtl.frames[len(seq) - 1 - i].pixels, ltr.frames[i].pixels
            )

    def test_two_frames_edge_to_edge(self):
        seq = black_frames(2)
        spec = DistractionSpec(obj="text", mode="rolling", direction="left_to_right")
        out = overlay_rolling(seq, spec, SEED)
        first = np.where(diff_mask(seq, out, 0).any(axis=0))[0]
        second = np.where(diff_mask(seq, out, 1).any(axis=0))[0]
        assert first.min() == 0
        assert second.max() == seq.frames[0].width - 1

    def test_vertical_direction(self):
        seq = black_frames(5)
        spec = DistractionSpec(obj="circle", mode="rolling", direction="up_to_down")
        out = overlay_rolling(seq, spec, SEED)
        tops = []
        for i in range(5):
            rows = np.where(diff_mask(seq, out, i).any(axis=1))[0]
            tops.append(rows.min())
        assert all(b > a for a, b in zip(tops, tops[1:]))

    def test_needs_two_frames(self):
        with pytest.raises(ValueError):
            overlay_rolling(black_frames(1), DistractionSpec(mode="rolling"), SEED)


class TestSpontaneous:
    def test_probability_zero_is_identity(self):
        seq = black_frames(10)
        spec = DistractionSpec(mode="spontaneous", appearance_probability=0.0)
        out = overlay_spontaneous(seq, spec, SEED)
        for i in range(10):
            assert np.array_equal(out.frames[i].pixels, seq.frames[i].pixels)

    def test_probability_one_modifies_every_frame(self):
        seq = black_frames(10)
        spec = DistractionSpec(mode="spontaneous", appearance_probability=1.0)
        out = overlay_spontaneous(seq, spec, SEED)
        for i in range(10):
            assert diff_mask(seq, out, i).any()

    def test_binomial_rate(self):
        seq = black_frames(1000, h=24, w=48)
        spec = DistractionSpec(
            obj="rectangle", mode="spontaneous", appearance_probability=0.3
        )
        out = overlay_spontaneous(seq, spec, SEED)
        hits = sum(diff_mask(seq, out, i).any() for i in range(1000))
        sigma = np.sqrt(1000 * 0.3 * 0.7)
        assert abs(hits - 300) < 3 * sigma


def test_overlays_deterministic_across_runs():
    seq = black_frames(4)
    spec = DistractionSpec(obj="rectangle", mode="spontaneous", appearance_probability=0.8)
    a = overlay_spontaneous(seq, spec, SeedSpec(9, "d"))
    b = overlay_spontaneous(seq, spec, SeedSpec(9, "d"))
    for fa, fb in zip(a.frames, b.frames):
        assert np.array_equal(fa.pixels, fb.pixels)


def test_random_distraction_uses_policy_domains():
    policy = DistractPolicy()
    for i in range(100):
        spec = random_distraction(SeedSpec(3, f"spec/{i}"), policy)
        assert spec.obj in policy.objects
        assert spec.mode in policy.modes
        assert spec.color in policy.colors
        assert spec.font_scale in policy.font_scales
        assert spec.thickness in policy.thicknesses


def test_frame_sequence_validation():
    with pytest.raises(ValueError):
        FrameSequence(())
    with pytest.raises(ValueError):
        FrameSequence((ImageBuf(np.zeros((4, 4, 1))), ImageBuf(np.zeros((5, 4, 1)))))


def test_spec_validation():
    with pytest.raises(ValueError):
        DistractionSpec(font_scale=7)
    with pytest.raises(ValueError):
        DistractionSpec(thickness=0)
    with pytest.raises(ValueError):
        DistractionSpec(color="magenta")
    with pytest.raises(ValueError):
        DistractionSpec(text="short")
