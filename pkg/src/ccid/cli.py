"""Batch command-line entry point.

Subcommands: denoise, fuse, sweep, gen-dataset, train-denoiser,
train-confidence, serve. The CLI is a thin driver over the library; the
interactive UI talks to the `serve` HTTP facade instead.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import click
import numpy as np

from . import metrics as metrics_mod
from .filters import ReliableFilterSpec
from .fusion import FusionParams, fuse
from .imagecore import NoiseSpec, add_noise, load_image, save_image
from .models import (
    TrainConfig,
    build_dataset,
    train_confidence,
    train_denoiser,
    DenoiserSpec,
)
from .nnet import load_params, save_params
from .pipeline import colorize_confidence, compute_artifacts


def _fusion_options(fn):
    fn = click.option("--method", type=click.Choice(["dct", "dwt", "dwt_corr"]), default="dct")(fn)
    fn = click.option("--weight", "-w", type=float, default=0.5, help="Fusion weight in [0,1].")(fn)
    fn = click.option("--guided/--unguided", default=False)(fn)
    fn = click.option("--threshold", type=float, default=0.8)(fn)
    fn = click.option("--mask-scale", type=float, default=0.1)(fn)
    fn = click.option("--mask-eps", type=float, default=1e-3)(fn)
    fn = click.option("--levels", type=int, default=3)(fn)
    return fn


def _fusion_params(method, weight, guided, threshold, mask_scale, mask_eps, levels) -> FusionParams:
    params = FusionParams(method=method, weight=weight, guided=guided, threshold=threshold,
                          mask_scale=mask_scale, mask_eps=mask_eps, levels=levels)
    params.validate()
    return params


def _reliable_options(fn):
    fn = click.option("--reliable-kind", type=click.Choice(
        ["gaussian", "bilateral", "nlm", "bicubic_upscale"]), default="gaussian")(fn)
    fn = click.option("--reliable-sigma", type=float, default=1.5,
                      help="Gaussian reliable filter sigma.")(fn)
    fn = click.option("--scale", type=int, default=2, help="Upscale factor (SR mode).")(fn)
    return fn


def _reliable_spec(reliable_kind, reliable_sigma, scale) -> ReliableFilterSpec:
    spec = ReliableFilterSpec(kind=reliable_kind, gaussian_sigma=reliable_sigma, scale=scale)
    spec.validate()
    return spec


def _load_model(path, what: str):
    if path is None:
        return None
    path = Path(path)
    if not path.exists():
        raise click.ClickException(f"{what} parameter file not found: {path}")
    return load_params(path)


def _load_corpus(corpus: str) -> list[np.ndarray]:
    paths = sorted(
        p for p in Path(corpus).iterdir() if p.suffix.lower() in (".png", ".pgm")
    )
    if not paths:
        raise click.ClickException(f"no PNG/PGM images found in {corpus}")
    return [load_image(p) for p in paths]


def _write_loss_csv(path: Path, columns: dict[str, list[float]]) -> None:
    names = list(columns)
    rows = zip(*columns.values())
    lines = ["epoch," + ",".join(names)]
    for epoch, values in enumerate(rows):
        lines.append(f"{epoch}," + ",".join(f"{v:.6g}" for v in values))
    path.write_text("\n".join(lines) + "\n")


@click.group()
def main():
    """Controllable confidence-based image denoising workbench."""


@main.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--output-dir", "-o", type=click.Path(), required=True)
@click.option("--denoiser", type=click.Path(), required=True)
@click.option("--confidence", type=click.Path(), default=None)
@click.option("--noise-sigma", type=float, default=None,
              help="Add synthetic Gaussian noise before denoising.")
@click.option("--seed", type=int, default=0)
@_reliable_options
@_fusion_options
def denoise(input_path, output_dir, denoiser, confidence, noise_sigma, seed,
            reliable_kind, reliable_sigma, scale,
            method, weight, guided, threshold, mask_scale, mask_eps, levels):
    """Denoise one image and write all pipeline artifacts."""
    fusion = _fusion_params(method, weight, guided, threshold, mask_scale, mask_eps, levels)
    reliable_spec = _reliable_spec(reliable_kind, reliable_sigma, scale)
    denoiser_params = _load_model(denoiser, "denoiser")
    confidence_params = _load_model(confidence, "confidence")
    img = load_image(input_path)
    if noise_sigma is not None:
        img = add_noise(img, NoiseSpec("gaussian", noise_sigma, seed))
    artifacts = compute_artifacts(img, reliable_spec, denoiser_params, confidence_params)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_image(artifacts["reliable"], out / "reliable.png")
    save_image(artifacts["dnn"], out / "dnn.png")
    save_image(artifacts["residual"] + 0.5, out / "residual.png")
    conf = artifacts.get("confidence")
    if conf is not None:
        from PIL import Image as PILImage

        from .imagecore import quantize

        rgb = quantize(colorize_confidence(conf, fusion.threshold))
        PILImage.fromarray(rgb, mode="RGB").save(out / "confidence.png")
    if fusion.guided and conf is None:
        raise click.ClickException("guided fusion requires --confidence")
    fused = fuse(artifacts["reliable"], artifacts["dnn"], fusion, conf=conf)
    save_image(fused, out / "fused.png")
    click.echo(f"wrote artifacts to {out}")


@main.command("fuse")
@click.argument("reliable_path", type=click.Path(exists=True))
@click.argument("hallucinatory_path", type=click.Path(exists=True))
@click.option("--output", "-o", type=click.Path(), required=True)
@click.option("--confidence-json", type=click.Path(exists=True), default=None,
              help='Confidence grid JSON {"gh","gw","values"} for guided fusion.')
@_fusion_options
def fuse_cmd(reliable_path, hallucinatory_path, output, confidence_json,
             method, weight, guided, threshold, mask_scale, mask_eps, levels):
    """Fuse two given images at a fixed weight."""
    fusion = _fusion_params(method, weight, guided, threshold, mask_scale, mask_eps, levels)
    reliable = load_image(reliable_path)
    halluc = load_image(hallucinatory_path)
    conf = None
    if confidence_json is not None:
        grid = json.loads(Path(confidence_json).read_text())
        conf = np.asarray(grid["values"], dtype=np.float64).reshape(grid["gh"], grid["gw"])
    if fusion.guided and conf is None:
        raise click.ClickException("guided fusion requires --confidence-json")
    save_image(fuse(reliable, halluc, fusion, conf=conf), output)
    click.echo(f"wrote {output}")


@main.command()
@click.option("--noisy", type=click.Path(exists=True), required=True)
@click.option("--clean", type=click.Path(exists=True), required=True,
              help="Ground truth; metrics need it.")
@click.option("--denoiser", type=click.Path(), required=True)
@click.option("--confidence", type=click.Path(), default=None)
@click.option("--output", "-o", type=click.Path(), required=True, help="Sweep CSV path.")
@click.option("--grid", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1",
              help="Comma-separated fusion weights.")
@click.option("--save-images", type=click.Path(), default=None,
              help="Also write the fused image at every grid weight.")
@_reliable_options
@_fusion_options
def sweep(noisy, clean, denoiser, confidence, output, grid, save_images,
          reliable_kind, reliable_sigma, scale,
          method, weight, guided, threshold, mask_scale, mask_eps, levels):
    """Evaluate fusion quality over a grid of weights."""
    fusion = _fusion_params(method, weight, guided, threshold, mask_scale, mask_eps, levels)
    reliable_spec = _reliable_spec(reliable_kind, reliable_sigma, scale)
    denoiser_params = _load_model(denoiser, "denoiser")
    confidence_params = _load_model(confidence, "confidence")
    weights = [float(w) for w in grid.split(",")]
    noisy_img = load_image(noisy)
    clean_img = load_image(clean)
    artifacts = compute_artifacts(noisy_img, reliable_spec, denoiser_params, confidence_params)
    result = metrics_mod.sweep(artifacts["reliable"], artifacts["dnn"], clean_img,
                               fusion, weights, conf=artifacts.get("confidence"))
    Path(output).write_text(metrics_mod.sweep_to_csv(result))
    if save_images is not None:
        out = Path(save_images)
        out.mkdir(parents=True, exist_ok=True)
        from dataclasses import replace

        for w in weights:
            fused = fuse(artifacts["reliable"], artifacts["dnn"],
                         replace(fusion, weight=w), conf=artifacts.get("confidence"))
            save_image(fused, out / f"fused_w{w:.2f}.png")
    click.echo(f"wrote {output} (best psnr at w={result.best_psnr_w:g})")


def _cache_dir(option_value) -> Path:
    if option_value is not None:
        return Path(option_value)
    env = os.environ.get("CCID_CACHE_DIR")
    return Path(env) if env else Path(".ccid-cache")


@main.command("gen-dataset")
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--denoiser", type=click.Path(), required=True)
@click.option("--cache-dir", type=click.Path(), default=None,
              help="Defaults to $CCID_CACHE_DIR or ./.ccid-cache.")
@click.option("--patch", type=int, default=40)
@click.option("--seed", type=int, default=0)
@click.option("--reliable-sigma", type=float, default=1.5)
def gen_dataset(corpus, denoiser, cache_dir, patch, seed, reliable_sigma):
    """Generate the confidence training set (content-addressed cache)."""
    images = _load_corpus(corpus)
    denoiser_params = _load_model(denoiser, "denoiser")
    dataset = build_dataset(
        images, denoiser_params,
        filter_spec=ReliableFilterSpec(gaussian_sigma=reliable_sigma),
        patch=patch, cache_dir=_cache_dir(cache_dir), seed=seed,
    )
    click.echo(f"{len(dataset)} items ({dataset.n_built} built, {dataset.n_cached} cached)")


@main.command("train-denoiser")
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--epochs", type=int, default=30)
@click.option("--batch-size", type=int, default=16)
@click.option("--lr", type=float, default=1e-3)
@click.option("--weight-decay", type=float, default=1e-4)
@click.option("--seed", type=int, default=0)
@click.option("--depth", type=int, default=8)
@click.option("--width", type=int, default=32)
@click.option("--sigma", type=float, default=25.0)
def train_denoiser_cmd(corpus, out, epochs, batch_size, lr, weight_decay, seed,
                       depth, width, sigma):
    """Train the residual denoiser on synthetic Gaussian pairs."""
    images = _load_corpus(corpus)
    config = TrainConfig(learning_rate=lr, weight_decay=weight_decay,
                         batch_size=batch_size, epochs=epochs, seed=seed)
    params, history = train_denoiser(images, config,
                                     spec=DenoiserSpec(depth=depth, width=width), sigma=sigma)
    save_params(params, out)
    _write_loss_csv(Path(out).with_suffix(".loss.csv"), {"train": history})
    click.echo(f"wrote {out}; final train MSE {history[-1]:.6g}")


@main.command("train-confidence")
@click.option("--corpus", type=click.Path(exists=True), default=None,
              help="Regenerate the dataset from this corpus first.")
@click.option("--denoiser", type=click.Path(), default=None)
@click.option("--cache-dir", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), required=True)
@click.option("--epochs", type=int, default=30)
@click.option("--batch-size", type=int, default=16)
@click.option("--lr", type=float, default=1e-3)
@click.option("--weight-decay", type=float, default=1e-4)
@click.option("--p-under", type=float, default=1.0)
@click.option("--p-over", type=float, default=4.0)
@click.option("--seed", type=int, default=0)
@click.option("--patch", type=int, default=40)
def train_confidence_cmd(corpus, denoiser, cache_dir, out, epochs, batch_size, lr,
                         weight_decay, p_under, p_over, seed, patch):
    """Train the confidence predictor on the cached dataset."""
    cache = _cache_dir(cache_dir)
    if corpus is not None:
        if denoiser is None:
            raise click.ClickException("--corpus requires --denoiser to build the dataset")
        dataset = build_dataset(_load_corpus(corpus), _load_model(denoiser, "denoiser"),
                                patch=patch, cache_dir=cache, seed=seed)
    else:
        from .models import ConfidenceDataset

        paths = sorted(cache.glob("*.ccid"))
        if not paths:
            raise click.ClickException(f"no cached dataset items in {cache}")
        dataset = ConfidenceDataset(paths, 0, len(paths))
    config = TrainConfig(learning_rate=lr, weight_decay=weight_decay, batch_size=batch_size,
                         epochs=epochs, seed=seed, p_under=p_under, p_over=p_over)
    params, train_hist, val_hist = train_confidence(dataset, config)
    save_params(params, out)
    _write_loss_csv(Path(out).with_suffix(".loss.csv"), {"train": train_hist, "val": val_hist})
    click.echo(f"wrote {out}; final val loss {val_hist[-1]:.6g}")


@main.command()
@click.option("--port", type=int, default=8080)
@click.option("--host", default="127.0.0.1")
@click.option("--denoiser", type=click.Path(), default=None)
@click.option("--confidence", type=click.Path(), default=None)
@click.option("--reliable-sigma", type=float, default=1.5)
def serve(port, host, denoiser, confidence, reliable_sigma):
    """Run the HTTP service for the interactive UI."""
    import uvicorn

    from .service import create_app

    app = create_app(
        denoiser_path=denoiser,
        confidence_path=confidence,
        reliable_spec=ReliableFilterSpec(gaussian_sigma=reliable_sigma),
    )
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
