"""Operator-facing command line: reproducible pipeline runs over the
library modules.

Every command is a pure function of its inputs, flags, and seed; no
artifact carries a timestamp. Validation problems exit 2, runtime
failures exit 1. Progress and log lines go to stderr; files and stdout
carry only machine-readable results. The only environment variable
honored is MRI_FORGE_CONFIG (a TOML file of defaults).
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import losses as losses_mod
from .augment import AugmentSpec, apply_augment, compose, random_plan
from .dataset import (
    balanced_epoch_sample,
    build_manifest,
    load_boxes,
    load_manifest,
    load_sources,
    save_epoch_sample,
)
from .detect import (
    VIDEO_SCORE_NOTE,
    AggregationParams,
    PRESET_PARAMS,
    evaluate,
    grid_search,
    group_by_video,
    load_labels,
    load_scores,
)
from .distract import DistractionSpec, FrameSequence, overlay
from .imgcore import ImageBuf, SeedSpec, load_image, save_image
from .perceptual import SsimConfig, export_mri, mri_image, ssim_image, ssim_index
from .policy import DEFAULT_BUILD_POLICY, load_policy

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _pipeline(fn):
    """Map exceptions to the exit-code contract: 2 validation, 1 runtime."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, FileNotFoundError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except click.ClickException:
            raise
        except Exception as exc:  # noqa: BLE001 - CLI boundary
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _load_run_config(path) -> dict:
    if not path:
        return {}
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _resolve_seed(flag, cfg: dict) -> int:
    if flag is not None:
        return flag
    seed = cfg.get("run", {}).get("master_seed")
    if seed is None:
        raise ValueError("a master seed is required (--seed or config run.master_seed)")
    return int(seed)


def _ssim_cfg(cfg: dict, window, k1, k2, dynamic_range) -> SsimConfig:
    section = cfg.get("ssim", {})
    return SsimConfig(
        window=window if window is not None else int(section.get("window", 11)),
        k1=k1 if k1 is not None else float(section.get("k1", 0.01)),
        k2=k2 if k2 is not None else float(section.get("k2", 0.03)),
        dynamic_range=dynamic_range
        if dynamic_range is not None
        else float(section.get("dynamic_range", 255.0)),
    )


def _loss_cfg(cfg: dict, recon_weight, l2_fraction, disc_scale):
    section = cfg.get("loss", {})
    return losses_mod.LossConfig(
        recon_weight=recon_weight
        if recon_weight is not None
        else float(section.get("recon_weight", 100.0)),
        l2_fraction=l2_fraction
        if l2_fraction is not None
        else float(section.get("l2_fraction", 0.3)),
        disc_scale=disc_scale
        if disc_scale is not None
        else float(section.get("disc_scale", 0.5)),
    )


config_option = click.option(
    "--config",
    "config_path",
    envvar="MRI_FORGE_CONFIG",
    type=click.Path(),
    default=None,
    help="TOML file of defaults (MRI_FORGE_CONFIG)",
)


@click.group()
def main():
    """Perceptual image diffing and DeepFake forensics toolkit."""


@main.command("ssim")
@click.argument("img_a", type=click.Path())
@click.argument("img_b", type=click.Path())
@click.option("--map", "map_path", type=click.Path(), default=None, help="write the SSIM map as a PNG")
@click.option("--window", type=int, default=None)
@click.option("--k1", type=float, default=None)
@click.option("--k2", type=float, default=None)
@click.option("--dynamic-range", type=float, default=None)
@config_option
@_pipeline
def cmd_ssim(img_a, img_b, map_path, window, k1, k2, dynamic_range, config_path):
    """Print the SSIM index of two images."""
    cfg = _ssim_cfg(_load_run_config(config_path), window, k1, k2, dynamic_range)
    a = load_image(img_a)
    b = load_image(img_b)
    if map_path:
        values = ssim_image(a, b, cfg).values
        save_image(ImageBuf(np.clip(values, 0.0, 1.0) * 255.0), map_path)
        index = float(np.mean(values))
    else:
        index = ssim_index(a, b, cfg)
    click.echo(f"{index:.6f}")


@main.command("mri")
@click.argument("img_a", type=click.Path())
@click.argument("img_b", type=click.Path())
@click.argument("out", type=click.Path())
@click.option("--raw", is_flag=True, help="also write the raw float sidecar next to OUT")
@click.option("--window", type=int, default=None)
@click.option("--k1", type=float, default=None)
@click.option("--k2", type=float, default=None)
@click.option("--dynamic-range", type=float, default=None)
@config_option
@_pipeline
def cmd_mri(img_a, img_b, out, raw, window, k1, k2, dynamic_range, config_path):
    """Write the MRI (1 - SSIM map) of two images as a PNG."""
    cfg = _ssim_cfg(_load_run_config(config_path), window, k1, k2, dynamic_range)
    target = mri_image(load_image(img_a), load_image(img_b), cfg)
    raw_path = Path(out).with_suffix(".raw") if raw else None
    export_mri(target, out, raw_path=raw_path)
    click.echo(f"wrote {out}", err=True)


def _parse_param(text: str):
    key, _, value = text.partition("=")
    if not value:
        raise ValueError(f"expected key=value, got {text!r}")
    try:
        return key, int(value)
    except ValueError:
        pass
    try:
        return key, float(value)
    except ValueError:
        return key, value


@main.command("augment")
@click.argument("src", type=click.Path())
@click.argument("dst", type=click.Path())
@click.option("--kind", default=None, help="augmentation kind for a single spec")
@click.option("--param", "params", multiple=True, help="kind parameter as key=value")
@click.option("--policy", "policy_path", type=click.Path(), default=None, help="draw a random plan from this policy")
@click.option("--seed", type=int, default=None)
@click.option("--item-key", default="cli/augment")
@config_option
@_pipeline
def cmd_augment(src, dst, kind, params, policy_path, seed, item_key, config_path):
    """Apply one augmentation (--kind) or a seeded random plan (--policy)."""
    cfg = _load_run_config(config_path)
    spec_seed = SeedSpec(_resolve_seed(seed, cfg), item_key)
    img = load_image(src)
    if kind is not None:
        spec = AugmentSpec(kind, dict(_parse_param(p) for p in params))
        out = apply_augment(img, spec, spec_seed)
    elif policy_path is not None:
        plan = random_plan(spec_seed.child("plan"), load_policy(policy_path).augment)
        out = compose(img, plan)
        click.echo(
            "plan: " + ", ".join(s.kind for s in plan.specs), err=True
        )
    else:
        raise ValueError("provide --kind or --policy")
    save_image(out, dst)


@main.command("distract")
@click.argument("frames_dir", type=click.Path())
@click.argument("out_dir", type=click.Path())
@click.option("--object", "obj", type=click.Choice(["text", "circle", "rectangle"]), default="text")
@click.option("--mode", type=click.Choice(["static", "rolling", "spontaneous"]), default="static")
@click.option("--color", default="white")
@click.option("--font-scale", type=int, default=2)
@click.option("--thickness", type=int, default=1)
@click.option("--direction", default="left_to_right")
@click.option("--appearance-prob", type=float, default=0.2)
@click.option("--seed", type=int, default=None)
@click.option("--item-key", default="cli/distract")
@config_option
@_pipeline
def cmd_distract(
    frames_dir, out_dir, obj, mode, color, font_scale, thickness, direction,
    appearance_prob, seed, item_key, config_path,
):
    """Overlay a distraction across a directory of frames."""
    cfg = _load_run_config(config_path)
    spec = DistractionSpec(
        obj=obj,
        mode=mode,
        color=color,
        font_scale=font_scale,
        thickness=thickness,
        direction=direction,
        appearance_probability=appearance_prob,
    )
    frames_dir = Path(frames_dir)
    paths = sorted(frames_dir.glob("*.png"))
    if not paths:
        raise FileNotFoundError(f"no PNG frames in {frames_dir}")
    seq = FrameSequence(tuple(load_image(p) for p in paths))
    done = overlay(seq, spec, SeedSpec(_resolve_seed(seed, cfg), item_key))
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    for path, frame in zip(paths, done.frames):
        save_image(frame, out_root / path.name)
    click.echo(f"wrote {len(paths)} frames to {out_root}", err=True)


@main.command("synth-corpus")
@click.argument("out_dir", type=click.Path())
@click.option("--videos", type=int, default=8, show_default=True)
@click.option("--frames", type=int, default=30, show_default=True)
@click.option("--size", type=int, default=160, show_default=True)
@click.option("--corpus-tag", default="dfdc", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
@config_option
@_pipeline
def cmd_synth_corpus(out_dir, videos, frames, size, corpus_tag, seed, jobs, config_path):
    """Generate a seeded synthetic fake/real video corpus."""
    from .synth import generate_corpus

    cfg = _load_run_config(config_path)
    summary = generate_corpus(
        out_dir,
        videos,
        frames,
        SeedSpec(_resolve_seed(seed, cfg), "synth"),
        frame_size=size,
        corpus_tag=corpus_tag,
        jobs=jobs,
    )
    click.echo(json.dumps(summary, sort_keys=True))


@main.command("make-dataset")
@click.option("--sources", "sources_path", type=click.Path(), default=None)
@click.option("--boxes", "boxes_path", type=click.Path(), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--policy", "policy_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--epoch-samples", type=int, default=0, help="also write N balanced epoch files")
@config_option
@_pipeline
def cmd_make_dataset(sources_path, boxes_path, out_dir, policy_path, seed, jobs, epoch_samples, config_path):
    """Build the paired (face, MRI target) dataset and its manifest."""
    cfg = _load_run_config(config_path)
    section = cfg.get("dataset", {})
    sources_path = sources_path or section.get("sources")
    boxes_path = boxes_path or section.get("boxes")
    out_dir = out_dir or section.get("out")
    for name, value in (("sources", sources_path), ("boxes", boxes_path), ("out", out_dir)):
        if not value:
            raise ValueError(f"--{name} is required (flag or config dataset.{name})")
    policy_path = policy_path or section.get("policy")
    policy = load_policy(policy_path) if policy_path else DEFAULT_BUILD_POLICY
    master = SeedSpec(_resolve_seed(seed, cfg), "dataset")
    entries = build_manifest(
        load_sources(sources_path),
        policy,
        out_dir,
        master,
        boxes=load_boxes(boxes_path),
        jobs=jobs,
    )
    if epoch_samples > 0:
        epoch_dir = Path(out_dir) / "epochs"
        epoch_dir.mkdir(exist_ok=True)
        for epoch in range(epoch_samples):
            sample = balanced_epoch_sample(entries, epoch, master)
            save_epoch_sample(sample, epoch_dir / f"epoch_{epoch:04d}.json")
    click.echo(f"entries={len(entries)}")
    click.echo(f"manifest={Path(out_dir) / 'manifest.jsonl'}")


def _npz_batches(batch_dir: Path):
    files = sorted(batch_dir.glob("*.npz"))
    if not files:
        raise FileNotFoundError(f"no .npz batch dumps in {batch_dir}")
    return files


@main.command("eval-losses")
@click.argument("batch_dir", type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None, help="report path (stdout when omitted)")
@click.option("--manifest", "manifest_path", type=click.Path(), default=None, help="validate dump item keys against this manifest")
@click.option("--recon-weight", type=float, default=None)
@click.option("--l2-fraction", type=float, default=None)
@click.option("--disc-scale", type=float, default=None)
@click.option("--window", type=int, default=None)
@click.option("--mri-range", type=float, default=1.0, show_default=True, help="dynamic range of the dumped MRI tensors")
@config_option
@_pipeline
def cmd_eval_losses(
    batch_dir, out_path, manifest_path, recon_weight, l2_fraction, disc_scale,
    window, mri_range, config_path,
):
    """Recompute generator/discriminator losses from dumped batch tensors.

    Each .npz dump holds gen_mri and true_mri arrays (B, H, W, C), and
    optionally item_keys plus the discriminator grids disc_on_gen,
    disc_fake_target/pred, and disc_real_target/pred.
    """
    cfg = _load_run_config(config_path)
    loss_cfg = _loss_cfg(cfg, recon_weight, l2_fraction, disc_scale)
    ssim_cfg = _ssim_cfg(cfg, window, None, None, mri_range)
    known_keys = None
    if manifest_path:
        known_keys = {e.item_key for e in load_manifest(manifest_path)}
    rows = []
    for index, path in enumerate(_npz_batches(Path(batch_dir))):
        with np.load(path, allow_pickle=False) as dump:
            gen = [np.asarray(a, dtype=np.float64) for a in dump["gen_mri"]]
            truth = [np.asarray(a, dtype=np.float64) for a in dump["true_mri"]]
            if known_keys is not None and "item_keys" in dump:
                unknown = set(map(str, dump["item_keys"])) - known_keys
                if unknown:
                    raise ValueError(
                        f"{path.name} references unknown manifest keys: {sorted(unknown)[:5]}"
                    )
            l2 = losses_mod.l2_term(gen, truth)
            per = losses_mod.perceptual_term(gen, truth, ssim_cfg)
            mean_ssim = losses_mod.mean_ssim_score(gen, truth, ssim_cfg)
            cgan = None
            if "disc_on_gen" in dump:
                cgan = losses_mod.cgan_generator_term(np.asarray(dump["disc_on_gen"], dtype=np.float64))
            total_d = None
            if "disc_fake_target" in dump:
                total_d = losses_mod.discriminator_loss(
                    np.asarray(dump["disc_fake_target"], dtype=np.float64),
                    np.asarray(dump["disc_fake_pred"], dtype=np.float64),
                    np.asarray(dump["disc_real_target"], dtype=np.float64),
                    np.asarray(dump["disc_real_pred"], dtype=np.float64),
                    loss_cfg,
                )
        rows.append(
            {
                "index": index,
                "batch": path.stem,
                "cgan": cgan,
                "l2": l2,
                "per": per,
                "total_G": losses_mod.generator_loss(cgan or 0.0, l2, per, loss_cfg),
                "total_D": total_d,
                "mean_ssim": mean_ssim,
            }
        )
    report = {
        "config": {
            "recon_weight": loss_cfg.recon_weight,
            "l2_fraction": loss_cfg.l2_fraction,
            "disc_scale": loss_cfg.disc_scale,
            "ssim_window": ssim_cfg.window,
            "mri_dynamic_range": ssim_cfg.dynamic_range,
        },
        "batches": rows,
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(text + "\n")
        click.echo(f"wrote {out_path}", err=True)
    else:
        click.echo(text)


def _write_detect_reports(out_dir, params, verdicts, vscores, cm, report, grid_payload):
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    verdict_lines = [
        json.dumps(
            {"video_id": vid, "verdict": verdicts[vid], "video_score": vscores[vid]},
            sort_keys=True,
        )
        for vid in sorted(verdicts)
    ]
    (out_root / "verdicts.jsonl").write_text("\n".join(verdict_lines) + "\n")

    metric_rows = report.as_dict()
    csv_lines = ["metric,value"]
    csv_lines += [f"{name},{value:.6f}" for name, value in metric_rows.items()]
    (out_root / "metrics.csv").write_text("\n".join(csv_lines) + "\n")

    md = [
        "# Detection report",
        "",
        f"_{VIDEO_SCORE_NOTE}_",
        "",
        "## Operating point",
        "",
        f"- fake_frame_threshold: {params.fake_frame_threshold}",
        f"- fake_fraction: {params.fake_fraction}",
        "",
        "## Confusion matrix (fake = positive)",
        "",
        "| | predicted fake | predicted real |",
        "|---|---|---|",
        f"| actual fake | {cm.tp} | {cm.fn} |",
        f"| actual real | {cm.fp} | {cm.tn} |",
        "",
        "## Metrics",
        "",
        "| metric | value |",
        "|---|---|",
    ]
    md += [f"| {name} | {value:.6f} |" for name, value in metric_rows.items()]
    (out_root / "summary.md").write_text("\n".join(md) + "\n")

    if grid_payload is not None:
        (out_root / "grid.json").write_text(
            json.dumps(grid_payload, indent=2, sort_keys=True) + "\n"
        )


def _parse_grid(text):
    if text is None:
        return None
    values = [float(v) for v in text.split(",") if v.strip()]
    if not values:
        raise ValueError(f"empty grid specification {text!r}")
    return values


def _detect_impl(scores_path, labels_path, threshold, fraction, preset, grid,
                 thresholds, fractions, out_dir, config_path=None):
    cfg = _load_run_config(config_path).get("detect", {})
    grouped = group_by_video(load_scores(scores_path))
    labels = load_labels(labels_path)
    grid_payload = None
    if grid:
        threshold_grid = _parse_grid(thresholds) or cfg.get("thresholds")
        fraction_grid = _parse_grid(fractions) or cfg.get("fractions")
        best, table = grid_search(grouped, labels, threshold_grid, fraction_grid)
        params = best
        grid_payload = {
            "note": VIDEO_SCORE_NOTE,
            "objective": "balanced_accuracy",
            "best": {
                "fake_frame_threshold": best.fake_frame_threshold,
                "fake_fraction": best.fake_fraction,
            },
            "cells": table,
        }
    elif preset:
        params = AggregationParams.preset(preset)
    elif threshold is not None and fraction is not None:
        params = AggregationParams(threshold, fraction)
    else:
        raise ValueError(
            "provide --grid, --preset, or both --threshold and --fraction"
        )
    verdicts, cm, report = evaluate(grouped, labels, params)
    vscores = {
        vid: sum(1 for s in grouped[vid] if s.p_fake > params.fake_frame_threshold) / len(grouped[vid])
        for vid in verdicts
    }
    if out_dir:
        _write_detect_reports(out_dir, params, verdicts, vscores, cm, report, grid_payload)
    click.echo(f"fake_frame_threshold={params.fake_frame_threshold}")
    click.echo(f"fake_fraction={params.fake_fraction}")
    for name, value in report.as_dict().items():
        click.echo(f"{name}={value:.6f}")


detect_options = [
    click.option("--scores", "scores_path", type=click.Path(), required=True),
    click.option("--labels", "labels_path", type=click.Path(), required=True),
    click.option("--threshold", type=float, default=None),
    click.option("--fraction", type=float, default=None),
    click.option("--preset", type=click.Choice(sorted(PRESET_PARAMS)), default=None),
    click.option("--thresholds", default=None, help="comma-separated grid values"),
    click.option("--fractions", default=None, help="comma-separated grid values"),
    click.option("--out-dir", type=click.Path(), default=None),
]


def _apply_options(options):
    def deco(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return deco


@main.command("detect")
@_apply_options(detect_options)
@click.option("--grid", is_flag=True, help="grid-search the operating point first")
@config_option
@_pipeline
def cmd_detect(scores_path, labels_path, threshold, fraction, preset, thresholds, fractions, out_dir, grid, config_path):
    """Aggregate face scores to video verdicts and report metrics."""
    _detect_impl(scores_path, labels_path, threshold, fraction, preset, grid, thresholds, fractions, out_dir, config_path)


@main.command("grid-search")
@_apply_options(detect_options)
@config_option
@_pipeline
def cmd_grid_search(scores_path, labels_path, threshold, fraction, preset, thresholds, fractions, out_dir, config_path):
    """Exhaustive operating-point search (detect --grid)."""
    _detect_impl(scores_path, labels_path, threshold, fraction, preset, True, thresholds, fractions, out_dir, config_path)


if __name__ == "__main__":
    main()
