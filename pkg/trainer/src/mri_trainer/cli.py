"""Trainer command line: train, predict, score."""

from __future__ import annotations

import functools
import sys

import click

from .config import load_config
from .data import load_manifest


def _guarded(fn):
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


config_options = [
    click.option("--config", "config_path", type=click.Path(), default=None),
    click.option("--image-size", type=int, default=None),
    click.option("--gen-width", type=int, default=None),
    click.option("--disc-width", type=int, default=None),
    click.option("--batch-size", type=int, default=None),
    click.option("--epochs", type=int, default=None),
    click.option("--lr", type=float, default=None),
    click.option("--dropout", type=float, default=None),
    click.option("--recon-weight", type=float, default=None),
    click.option("--l2-fraction", type=float, default=None),
    click.option("--disc-scale", type=float, default=None),
    click.option("--eval-every", type=int, default=None),
    click.option("--eval-samples", type=int, default=None),
    click.option("--dump-every", type=int, default=None),
    click.option("--seed", type=int, default=None),
]


def _apply_options(options):
    def deco(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return deco


def _config_from(kwargs):
    path = kwargs.pop("config_path", None)
    return load_config(path, **kwargs)


@click.group()
def main():
    """Toy-scale GAN trainer for perceptual-difference targets."""


@main.command("train")
@click.option("--manifest", "manifest_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--epoch-dir", type=click.Path(), default=None, help="reuse pre-built epoch sample files")
@_apply_options(config_options)
@_guarded
def cmd_train(manifest_path, out_dir, epoch_dir, **kwargs):
    """Train on a dataset manifest; writes checkpoints, loss log, dumps."""
    from .train import train

    cfg = _config_from(kwargs)
    records = load_manifest(manifest_path)
    log = train(records, out_dir, cfg, epoch_dir=epoch_dir)
    first = log["batches"][0]["total_G"]
    last = log["batches"][-1]["total_G"]
    click.echo(f"batches={len(log['batches'])}")
    click.echo(f"total_G first={first:.4f} last={last:.4f}")
    click.echo(f"mean_ssim start={log['evals'][0]['mean_ssim']:.4f} end={log['evals'][-1]['mean_ssim']:.4f}")


@main.command("predict")
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--split", type=click.Choice(["train", "test", "all"]), default="all")
@_apply_options(config_options)
@_guarded
def cmd_predict(checkpoint, manifest_path, out_dir, split, **kwargs):
    """Write predicted MRI PNGs + raw sidecars for manifest faces."""
    from .score import export_predictions, load_generator

    cfg = _config_from(kwargs)
    records = load_manifest(manifest_path)
    if split != "all":
        records = [r for r in records if r.split == split]
    if not records:
        raise ValueError(f"no records in split {split!r}")
    generator = load_generator(checkpoint, cfg)
    written = export_predictions(generator, records, cfg, out_dir)
    click.echo(f"predictions={len(written)}")


@main.command("score")
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--split", type=click.Choice(["train", "test", "all"]), default="all")
@click.option("--head-steps", type=int, default=400, show_default=True)
@_apply_options(config_options)
@_guarded
def cmd_score(checkpoint, manifest_path, out_path, split, head_steps, **kwargs):
    """Train the energy head on the train split, then score faces to JSONL."""
    from .score import fit_score_head, load_generator, score_faces

    cfg = _config_from(kwargs)
    records = load_manifest(manifest_path)
    generator = load_generator(checkpoint, cfg)
    head = fit_score_head(generator, records, cfg, steps=head_steps, seed=cfg.seed)
    targets = records if split == "all" else [r for r in records if r.split == split]
    if not targets:
        raise ValueError(f"no records in split {split!r}")
    count = score_faces(generator, head, targets, cfg, out_path)
    click.echo(f"scores={count}")
    click.echo(f"out={out_path}")


if __name__ == "__main__":
    main()
