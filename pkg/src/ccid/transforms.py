"""Orthonormal 2-D DCT and multilevel 2-D DWT with exact inverses.

DCT: type-II with orthonormal scaling (a(0)=sqrt(1/N), a(u>=1)=sqrt(2/N)
per axis), so Parseval holds exactly and idct2 is the true inverse.

DWT: separable periodized orthonormal transform (haar or db2). Rows are
transformed first, then columns. Detail naming for a level follows the
2x2 haar reference: on {{a,b},{c,d}}, approx=(a+b+c+d)/2 and
H=((a+c)-(b+d))/2, i.e. H responds to variation along the horizontal
axis (row high-pass, column low-pass), V to vertical variation, D to
diagonal. Odd lengths are reflect-padded to even per level; the padding
is recorded in the pyramid so reconstruction is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dctn, idctn

_SQRT3 = math.sqrt(3.0)
_WAVELET_LOWPASS = {
    "haar": np.array([1.0, 1.0]) / math.sqrt(2.0),
    "db2": np.array([1.0 + _SQRT3, 3.0 + _SQRT3, 3.0 - _SQRT3, 1.0 - _SQRT3])
    / (4.0 * math.sqrt(2.0)),
}


def _filters(wavelet: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        g = _WAVELET_LOWPASS[wavelet]
    except KeyError:
        raise ValueError(f"unknown wavelet {wavelet!r}") from None
    # Quadrature mirror: h[k] = (-1)^k g[L-1-k]
    h = g[::-1] * (-1.0) ** np.arange(len(g))
    return g, h


def dct2(img: np.ndarray) -> np.ndarray:
    """Orthonormal full-image 2-D type-II DCT."""
    return dctn(img, norm="ortho")


def idct2(spec: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`dct2`."""
    return idctn(spec, norm="ortho")


@dataclass
class WaveletPyramid:
    """Multilevel DWT coefficients.

    ``details`` is ordered coarsest (level L) to finest (level 1); each
    entry is an (H, V, D) triple. ``pads`` records per-level (row, col)
    reflect padding, same order as ``details``, so odd sizes invert
    exactly.
    """

    levels: int
    wavelet: str
    approx: np.ndarray
    details: list[tuple[np.ndarray, np.ndarray, np.ndarray]]
    pads: list[tuple[int, int]] = field(default_factory=list)

    def energy(self) -> float:
        total = float(np.sum(self.approx**2))
        for h, v, d in self.details:
            total += float(np.sum(h**2) + np.sum(v**2) + np.sum(d**2))
        return total


def _analyze_axis(x: np.ndarray, g: np.ndarray, h: np.ndarray, axis: int):
    """One periodic analysis step along ``axis`` (length must be even)."""
    x = np.moveaxis(x, axis, -1)
    n = x.shape[-1]
    half = n // 2
    starts = 2 * np.arange(half)
    lo = np.zeros(x.shape[:-1] + (half,))
    hi = np.zeros_like(lo)
    for k in range(len(g)):
        idx = (starts + k) % n
        lo += g[k] * x[..., idx]
        hi += h[k] * x[..., idx]
    return np.moveaxis(lo, -1, axis), np.moveaxis(hi, -1, axis)


def _synthesize_axis(lo: np.ndarray, hi: np.ndarray, g: np.ndarray, h: np.ndarray, axis: int) -> np.ndarray:
    """Inverse of :func:`_analyze_axis`."""
    lo = np.moveaxis(lo, axis, -1)
    hi = np.moveaxis(hi, axis, -1)
    half = lo.shape[-1]
    n = 2 * half
    starts = 2 * np.arange(half)
    out = np.zeros(lo.shape[:-1] + (n,))
    for k in range(len(g)):
        idx = (starts + k) % n  # distinct for fixed k, safe for +=
        out[..., idx] += g[k] * lo + h[k] * hi
    return np.moveaxis(out, -1, axis)


def _dwt2_single(img: np.ndarray, g: np.ndarray, h: np.ndarray):
    """One 2-D analysis level; returns (A, (H, V, D), (pad_r, pad_c))."""
    pad_r = img.shape[0] % 2
    pad_c = img.shape[1] % 2
    if pad_r or pad_c:
        img = np.pad(img, ((0, pad_r), (0, pad_c)), mode="symmetric")
    row_lo, row_hi = _analyze_axis(img, g, h, axis=1)
    a, v = _analyze_axis(row_lo, g, h, axis=0)
    hh, d = _analyze_axis(row_hi, g, h, axis=0)
    return a, (hh, v, d), (pad_r, pad_c)


def _idwt2_single(a, bands, pad, g, h) -> np.ndarray:
    hh, v, d = bands
    row_lo = _synthesize_axis(a, v, g, h, axis=0)
    row_hi = _synthesize_axis(hh, d, g, h, axis=0)
    img = _synthesize_axis(row_lo, row_hi, g, h, axis=1)
    pad_r, pad_c = pad
    if pad_r or pad_c:
        img = img[: img.shape[0] - pad_r, : img.shape[1] - pad_c]
    return img


def dwt2(img: np.ndarray, wavelet: str = "haar", levels: int = 1) -> WaveletPyramid:
    """Multilevel separable 2-D DWT, recursing on the approximation band."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if 2**levels > min(img.shape):
        raise ValueError(f"{levels} levels is too deep for a {img.shape[0]}x{img.shape[1]} image")
    g, h = _filters(wavelet)
    a = np.asarray(img, dtype=np.float64)
    details = []
    pads = []
    for _ in range(levels):
        a, bands, pad = _dwt2_single(a, g, h)
        details.append(bands)
        pads.append(pad)
    details.reverse()  # coarsest first
    pads.reverse()
    return WaveletPyramid(levels=levels, wavelet=wavelet, approx=a, details=details, pads=pads)


def idwt2(pyr: WaveletPyramid) -> np.ndarray:
    """Exact synthesis inverse of :func:`dwt2`."""
    g, h = _filters(pyr.wavelet)
    a = pyr.approx
    for bands, pad in zip(pyr.details, pyr.pads):
        if bands[0].shape != a.shape:
            raise ValueError("inconsistent pyramid band dimensions")
        a = _idwt2_single(a, bands, pad, g, h)
    return a
