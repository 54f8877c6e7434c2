"""Image quality metrics (MSE, PSNR, SSIM) and weight sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import correlate1d

from .fusion import FusionParams, fuse

# PSNR of identical images; kept finite-representable in CSV as "inf".
PSNR_INF = math.inf

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def mse(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ValueError(f"image dimensions differ: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.mean(diff * diff))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB for a dynamic range of 1.0; identical images give inf."""
    m = mse(a, b)
    if m == 0.0:
        return PSNR_INF
    return 10.0 * math.log10(1.0 / m)


def _ssim_window() -> np.ndarray:
    r = _SSIM_WINDOW // 2
    x = np.arange(-r, r + 1)
    k = np.exp(-(x**2) / (2.0 * _SSIM_SIGMA**2))
    return k / k.sum()


def _local_mean(img: np.ndarray) -> np.ndarray:
    """Gaussian-weighted local mean over full 11x11 windows (valid crop)."""
    k = _ssim_window()
    r = _SSIM_WINDOW // 2
    out = correlate1d(img, k, axis=0, mode="constant")
    out = correlate1d(out, k, axis=1, mode="constant")
    return out[r:-r, r:-r]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM, Gaussian 11x11 window sigma 1.5, L=1."""
    if a.shape != b.shape:
        raise ValueError(f"image dimensions differ: {a.shape} vs {b.shape}")
    if min(a.shape) < _SSIM_WINDOW:
        raise ValueError(f"images must be at least {_SSIM_WINDOW}x{_SSIM_WINDOW}")
    c1 = _SSIM_K1**2
    c2 = _SSIM_K2**2
    mu_a = _local_mean(a)
    mu_b = _local_mean(b)
    var_a = _local_mean(a * a) - mu_a * mu_a
    var_b = _local_mean(b * b) - mu_b * mu_b
    cov = _local_mean(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass
class SweepResult:
    weights: list[float]
    psnr: list[float]
    ssim: list[float]
    mse: list[float]
    best_psnr_w: float
    best_ssim_w: float
    best_mse_w: float
    delta_psnr_vs_w1: float
    delta_ssim_vs_w1: float
    delta_mse_vs_w1: float


def sweep(
    reliable: np.ndarray,
    hallucinatory: np.ndarray,
    gt: np.ndarray,
    params: FusionParams,
    grid: list[float],
    conf: np.ndarray | None = None,
) -> SweepResult:
    """Fuse at every grid weight and score against the ground truth."""
    if any(w < 0.0 or w > 1.0 for w in grid):
        raise ValueError("sweep grid must lie within [0, 1]")
    psnrs, ssims, mses = [], [], []
    for w in grid:
        fused = fuse(reliable, hallucinatory, replace(params, weight=float(w)), conf=conf)
        psnrs.append(psnr(fused, gt))
        ssims.append(ssim(fused, gt))
        mses.append(mse(fused, gt))
    best_psnr_w = grid[int(np.argmax(psnrs))]
    best_ssim_w = grid[int(np.argmax(ssims))]
    best_mse_w = grid[int(np.argmin(mses))]
    # Delta of the per-metric best relative to the w=1 endpoint value.
    p1 = psnrs[-1] if grid[-1] == 1.0 else psnr(hallucinatory, gt)
    s1 = ssims[-1] if grid[-1] == 1.0 else ssim(hallucinatory, gt)
    m1 = mses[-1] if grid[-1] == 1.0 else mse(hallucinatory, gt)
    return SweepResult(
        weights=[float(w) for w in grid],
        psnr=psnrs,
        ssim=ssims,
        mse=mses,
        best_psnr_w=float(best_psnr_w),
        best_ssim_w=float(best_ssim_w),
        best_mse_w=float(best_mse_w),
        delta_psnr_vs_w1=max(psnrs) - p1,
        delta_ssim_vs_w1=max(ssims) - s1,
        delta_mse_vs_w1=min(mses) - m1,
    )


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return f"{x:.6g}"


def sweep_to_csv(result: SweepResult) -> str:
    """CSV with one row per grid point plus best-weight comment rows."""
    lines = ["w,psnr,ssim,mse"]
    for w, p, s, m in zip(result.weights, result.psnr, result.ssim, result.mse):
        lines.append(f"{_fmt(w)},{_fmt(p)},{_fmt(s)},{_fmt(m)}")
    lines.append(f"# best_psnr_w={_fmt(result.best_psnr_w)}")
    lines.append(f"# best_ssim_w={_fmt(result.best_ssim_w)}")
    lines.append(f"# best_mse_w={_fmt(result.best_mse_w)}")
    return "\n".join(lines) + "\n"
