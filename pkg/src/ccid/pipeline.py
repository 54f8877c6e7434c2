"""Shared orchestration: one noisy image in, all pipeline artifacts out.

Used by both the CLI and the HTTP service so the two surfaces stay
consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .filters import ReliableFilterSpec, reliable_denoise
from .fusion import FusionParams
from .models import REGION, denoise_dnn, denoiser_spec_from_params, predict_confidence


@dataclass
class PipelineConfig:
    mode: str = "denoise"  # denoise | super_resolution
    reliable: ReliableFilterSpec = field(default_factory=ReliableFilterSpec)
    fusion: FusionParams = field(default_factory=FusionParams)
    denoiser_params_path: str | None = None
    confidence_params_path: str | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.mode not in ("denoise", "super_resolution"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "super_resolution" and self.reliable.kind != "bicubic_upscale":
            raise ValueError("super_resolution mode requires the bicubic_upscale reliable filter")
        self.reliable.validate()
        self.fusion.validate()


def pad_for_confidence(img: np.ndarray) -> np.ndarray:
    pr = (-img.shape[0]) % REGION
    pc = (-img.shape[1]) % REGION
    if pr or pc:
        img = np.pad(img, ((0, pr), (0, pc)), mode="symmetric")
    return img


def compute_artifacts(
    noisy: np.ndarray,
    reliable_spec: ReliableFilterSpec,
    denoiser_params: dict[str, np.ndarray],
    confidence_params: dict[str, np.ndarray] | None = None,
) -> dict[str, np.ndarray]:
    """Reliable image, DNN denoised image, residual and (optionally)
    the predicted confidence map for one noisy input."""
    reliable = reliable_denoise(noisy, reliable_spec)
    denoised, residual = denoise_dnn(noisy, denoiser_params,
                                     denoiser_spec_from_params(denoiser_params))
    out = {"reliable": reliable, "dnn": denoised, "residual": residual}
    # Confidence is defined for the denoising path where all three
    # channels share the noisy image's dimensions.
    if confidence_params is not None and reliable.shape == noisy.shape:
        gh = -(-noisy.shape[0] // REGION)
        gw = -(-noisy.shape[1] // REGION)
        stack = np.stack([
            pad_for_confidence(noisy),
            pad_for_confidence(reliable),
            pad_for_confidence(residual),
        ])
        out["confidence"] = predict_confidence(stack, confidence_params)[:gh, :gw]
    return out


def colorize_confidence(conf: np.ndarray, threshold: float, upscale: int = REGION) -> np.ndarray:
    """Diverging two-hue rendering of a confidence grid.

    Cells above the threshold are green (0, g, 0), cells below purple
    (p, 0, p); intensity scales with the distance to the threshold and
    is exactly zero at the threshold. Returns (H, W, 3) floats in [0,1].
    """
    above = np.clip((conf - threshold) / max(1.0 - threshold, 1e-9), 0.0, 1.0)
    below = np.clip((threshold - conf) / max(threshold, 1e-9), 0.0, 1.0)
    rgb = np.stack([below, above, below], axis=-1)
    if upscale > 1:
        rgb = np.repeat(np.repeat(rgb, upscale, axis=0), upscale, axis=1)
    return rgb
