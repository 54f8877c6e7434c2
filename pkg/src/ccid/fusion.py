"""Frequency-domain fusion of a reliable and a hallucinatory image.

Four strategies: unguided multilevel DWT (plus a cross-correlation
variant), unguided DCT low-pass mask, confidence-guided patch-wise DWT
and confidence-guided pixel-wise DCT. The global weight w steers the
blend from the reliable input (w=0) to the hallucinatory one (w=1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .imagecore import resize_bicubic
from .transforms import dct2, dwt2, idct2, idwt2

GUIDED_PATCH = 8
_DCT_GUIDED_LEVELS = 17  # quantization of per-pixel weights


@dataclass(frozen=True)
class FusionParams:
    method: str = "dct"  # dct | dwt | dwt_corr
    weight: float = 0.5
    guided: bool = False
    threshold: float = 0.8
    mask_scale: float = 0.1
    mask_eps: float = 1e-3
    corr_eps: float = 1e-6
    levels: int = 3
    wavelet: str = "haar"

    def validate(self) -> None:
        if self.method not in ("dct", "dwt", "dwt_corr"):
            raise ValueError(f"unknown fusion method {self.method!r}")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError("fusion weight must be in [0, 1]")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        if self.mask_scale <= 0 or self.mask_eps <= 0:
            raise ValueError("mask_scale and mask_eps must be positive")


def dct_mask(h: int, w_dim: int, weight: float, a: float, eps: float) -> np.ndarray:
    """Low-pass DCT-domain mask, 1 at DC, opening up as weight grows.

    M = exp(-(nu_x^2 + nu_y^2) / (2 s)), s = a (1/(1-w+eps) - 1), with
    frequencies normalized by the image dimensions so ``a`` is
    size-independent.
    """
    s = a * (1.0 / (1.0 - weight + eps) - 1.0)
    nu_r = (np.arange(h) / h) ** 2
    nu_c = (np.arange(w_dim) / w_dim) ** 2
    return np.exp(-(nu_r[:, None] + nu_c[None, :]) / (2.0 * s))


def fuse_dct(reliable: np.ndarray, hallucinatory: np.ndarray, params: FusionParams) -> np.ndarray:
    """Mask-based DCT fusion; low frequencies of the hallucinatory input
    enter first, higher frequencies follow as the weight increases."""
    _check_dims(reliable, hallucinatory)
    w = params.weight
    if w <= 0.0:
        return reliable.copy()
    if w >= 1.0:
        return hallucinatory.copy()
    r = dct2(reliable)
    hc = dct2(hallucinatory)
    m = dct_mask(*reliable.shape, w, params.mask_scale, params.mask_eps)
    return idct2(r + m * (hc - r))


def band_alphas(weight: float, levels: int) -> np.ndarray:
    """Per-band blend factors, coarse first: clamp(w*(L+1) - b, 0, 1)."""
    b = np.arange(levels + 1)
    return np.clip(weight * (levels + 1) - b, 0.0, 1.0)


def fuse_dwt(reliable: np.ndarray, hallucinatory: np.ndarray, params: FusionParams) -> np.ndarray:
    """Multilevel DWT fusion with a coarse-first band schedule."""
    _check_dims(reliable, hallucinatory)
    pr = dwt2(reliable, params.wavelet, params.levels)
    ph = dwt2(hallucinatory, params.wavelet, params.levels)
    alphas = band_alphas(params.weight, params.levels)
    pr.approx = (1.0 - alphas[0]) * pr.approx + alphas[0] * ph.approx
    for i, (br, bh) in enumerate(zip(pr.details, ph.details)):
        a = alphas[i + 1]  # details[0] is the coarsest band group
        pr.details[i] = tuple((1.0 - a) * r + a * h for r, h in zip(br, bh))
    return idwt2(pr)


def fuse_dwt_corr(reliable: np.ndarray, hallucinatory: np.ndarray, params: FusionParams) -> np.ndarray:
    """DWT fusion weighted by per-coefficient cross-correlation.

    Where the two detail coefficients agree (m near 1) the band schedule
    applies unchanged; where they disagree the hallucinatory share is
    attenuated toward the global weight.
    """
    _check_dims(reliable, hallucinatory)
    w = params.weight
    eps = params.corr_eps
    pr = dwt2(reliable, params.wavelet, params.levels)
    ph = dwt2(hallucinatory, params.wavelet, params.levels)
    alphas = band_alphas(w, params.levels)
    pr.approx = (1.0 - alphas[0]) * pr.approx + alphas[0] * ph.approx
    for i, (br, bh) in enumerate(zip(pr.details, ph.details)):
        a = alphas[i + 1]
        fused = []
        for r, h in zip(br, bh):
            m = np.clip((2.0 * r * h + eps) / (r * r + h * h + eps), 0.0, 1.0)
            a_eff = a * (w + (1.0 - w) * m)
            fused.append((1.0 - a_eff) * r + a_eff * h)
        pr.details[i] = tuple(fused)
    return idwt2(pr)


def region_weight(w: float, c: float, t: float):
    """Confidence-updated fusion weight, clamped to [0, 1]."""
    return np.clip(w * (1.0 + c - t), 0.0, 1.0)


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"image dimensions differ: {a.shape} vs {b.shape}")


def _check_conf(img: np.ndarray, conf: np.ndarray) -> None:
    gh = -(-img.shape[0] // GUIDED_PATCH)
    gw = -(-img.shape[1] // GUIDED_PATCH)
    if conf.shape != (gh, gw):
        raise ValueError(f"confidence map {conf.shape} does not match image grid ({gh}, {gw})")


def _pad_to_multiple(img: np.ndarray, m: int) -> np.ndarray:
    pr = (-img.shape[0]) % m
    pc = (-img.shape[1]) % m
    if pr or pc:
        img = np.pad(img, ((0, pr), (0, pc)), mode="symmetric")
    return img


def fuse_dwt_guided(
    reliable: np.ndarray,
    hallucinatory: np.ndarray,
    conf: np.ndarray,
    params: FusionParams,
) -> np.ndarray:
    """Patch-wise DWT fusion: each 8x8 region is fused with its own
    confidence-updated weight (haar, 2 levels) and stitched back."""
    _check_dims(reliable, hallucinatory)
    _check_conf(reliable, conf)
    h, w = reliable.shape
    rp = _pad_to_multiple(reliable, GUIDED_PATCH)
    hp = _pad_to_multiple(hallucinatory, GUIDED_PATCH)
    out = np.empty_like(rp)
    patch_params = replace(params, wavelet="haar", levels=2)
    for gy in range(conf.shape[0]):
        for gx in range(conf.shape[1]):
            sl = (
                slice(gy * GUIDED_PATCH, (gy + 1) * GUIDED_PATCH),
                slice(gx * GUIDED_PATCH, (gx + 1) * GUIDED_PATCH),
            )
            wr = float(region_weight(params.weight, float(conf[gy, gx]), params.threshold))
            out[sl] = fuse_dwt(rp[sl], hp[sl], replace(patch_params, weight=wr))
    return out[:h, :w]


def fuse_dct_guided(
    reliable: np.ndarray,
    hallucinatory: np.ndarray,
    conf: np.ndarray,
    params: FusionParams,
) -> np.ndarray:
    """Pixel-wise DCT fusion.

    The confidence map is bicubically upsampled to full resolution, the
    per-pixel weights are quantized to 17 equispaced levels, the global
    DCT fusion runs once per occupied level and each pixel linearly
    interpolates between its two bracketing level outputs.
    """
    _check_dims(reliable, hallucinatory)
    _check_conf(reliable, conf)
    h, w = reliable.shape
    conf_full = np.clip(resize_bicubic(conf, *_padded_dims(h, w)), 0.0, 1.0)[:h, :w]
    w_pix = region_weight(params.weight, conf_full, params.threshold)
    step = _DCT_GUIDED_LEVELS - 1
    scaled = w_pix * step
    lo = np.floor(scaled).astype(int)
    lo = np.minimum(lo, step - 1)
    frac = scaled - lo
    needed = np.unique(np.concatenate([lo.ravel(), lo.ravel() + 1]))
    fused_at = {}
    for lv in needed:
        fused_at[int(lv)] = fuse_dct(reliable, hallucinatory, replace(params, weight=lv / step))
    flo = np.empty_like(reliable)
    fhi = np.empty_like(reliable)
    for lv, img in fused_at.items():
        flo = np.where(lo == lv, img, flo)
        fhi = np.where(lo + 1 == lv, img, fhi)
    return (1.0 - frac) * flo + frac * fhi


def _padded_dims(h: int, w: int) -> tuple[int, int]:
    return (-(-h // GUIDED_PATCH) * GUIDED_PATCH, -(-w // GUIDED_PATCH) * GUIDED_PATCH)


def fuse(
    reliable: np.ndarray,
    hallucinatory: np.ndarray,
    params: FusionParams,
    conf: np.ndarray | None = None,
) -> np.ndarray:
    """Dispatch on (method, guided)."""
    params.validate()
    if params.guided:
        if conf is None:
            raise ValueError("guided fusion requires a confidence map")
        if params.method == "dct":
            return fuse_dct_guided(reliable, hallucinatory, conf, params)
        return fuse_dwt_guided(reliable, hallucinatory, conf, params)
    if params.method == "dct":
        return fuse_dct(reliable, hallucinatory, params)
    if params.method == "dwt":
        return fuse_dwt(reliable, hallucinatory, params)
    return fuse_dwt_corr(reliable, hallucinatory, params)
