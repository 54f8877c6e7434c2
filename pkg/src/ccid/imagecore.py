"""Image I/O, synthetic noise, patches, augmentation and resampling.

Images are plain 2-D ``float64`` numpy arrays with values nominally in
``[0, 1]``. Arithmetic may transiently leave that range; only I/O clamps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

# BT.601 luma weights for RGB -> gray conversion.
_LUMA = np.array([0.299, 0.587, 0.114])


class ImageIOError(Exception):
    """Raised for unreadable, unwritable or unsupported image files."""


@dataclass(frozen=True)
class NoiseSpec:
    """Synthetic noise description. ``sigma`` is on the 8-bit scale (0-100)."""

    kind: str = "gaussian"  # "gaussian" | "poisson"
    sigma: float = 25.0
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in ("gaussian", "poisson"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.sigma <= 100.0:
            raise ValueError(f"sigma must be in [0, 100], got {self.sigma}")


def load_image(path) -> np.ndarray:
    """Load an 8-bit PNG/PGM as a grayscale image in [0, 1].

    Color inputs are reduced with the BT.601 luma weights before scaling.
    """
    try:
        pil = PILImage.open(path)
        pil.load()
    except (OSError, SyntaxError) as e:
        raise ImageIOError(f"cannot read image {path}: {e}") from e
    if pil.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
        raise ImageIOError(f"{path}: unsupported bit depth (mode {pil.mode}); only 8-bit input is handled")
    if pil.mode in ("RGB", "RGBA", "P"):
        rgb = np.asarray(pil.convert("RGB"), dtype=np.float64)
        gray = rgb @ _LUMA
    elif pil.mode in ("L", "LA", "1"):
        gray = np.asarray(pil.convert("L"), dtype=np.float64)
    else:
        raise ImageIOError(f"{path}: unsupported image mode {pil.mode}")
    return gray / 255.0


def quantize(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and quantize round-half-up to 8 bits."""
    clamped = np.clip(img, 0.0, 1.0)
    return np.minimum(np.floor(clamped * 255.0 + 0.5), 255.0).astype(np.uint8)


def save_image(img: np.ndarray, path) -> None:
    """Write a [0, 1] image as 8-bit PNG or binary PGM, chosen by extension."""
    path = Path(path)
    data = quantize(np.asarray(img, dtype=np.float64))
    pil = PILImage.fromarray(data, mode="L")
    try:
        if path.suffix.lower() == ".pgm":
            pil.save(path, format="PPM")
        else:
            pil.save(path, format="PNG")
    except OSError as e:
        raise ImageIOError(f"cannot write image {path}: {e}") from e


def add_noise(img: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Apply synthetic noise.

    gaussian: out = img + N(0, (sigma/255)^2) i.i.d.
    poisson:  out = Poisson(img * Q) / Q with Q calibrated so the
              image-average standard deviation matches sigma/255.

    Deterministic for identical (kind, sigma, seed, image).
    """
    spec.validate()
    if spec.sigma == 0.0:
        return img.copy()
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "gaussian":
        return img + rng.normal(0.0, spec.sigma / 255.0, size=img.shape)
    # Poisson: std of Poisson(p*Q)/Q at pixel p is sqrt(p/Q); averaging
    # sqrt(max(p, tau)) over the image and solving for Q matches sigma/255.
    tau = 1e-3
    root = float(np.mean(np.sqrt(np.maximum(img, tau))))
    q = (root * 255.0 / spec.sigma) ** 2
    counts = rng.poisson(np.maximum(img, 0.0) * q)
    return counts / q


def extract_patches(img: np.ndarray, size: int, stride: int) -> list[np.ndarray]:
    """All size x size windows at offsets multiple of stride, row-major.

    Trailing remainder rows/columns are dropped.
    """
    h, w = img.shape
    if size <= 0 or size > min(h, w):
        raise ValueError(f"patch size {size} invalid for {h}x{w} image")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    patches = []
    for y in range(0, h - size + 1, stride):
        for x in range(0, w - size + 1, stride):
            patches.append(img[y : y + size, x : x + size].copy())
    return patches


def augment_dihedral(img: np.ndarray, index: int) -> np.ndarray:
    """The index-th element of the dihedral-8 group.

    index = rotation (0..3, counterclockwise quarter turns) + 4 * hflip.
    Index 0 is the identity.
    """
    if not 0 <= index <= 7:
        raise ValueError(f"dihedral index must be in [0, 7], got {index}")
    out = np.rot90(img, k=index % 4)
    if index >= 4:
        out = out[:, ::-1]
    return np.ascontiguousarray(out)


def dihedral_inverse(index: int) -> int:
    """Group inverse of ``augment_dihedral``'s index."""
    if not 0 <= index <= 7:
        raise ValueError(f"dihedral index must be in [0, 7], got {index}")
    if index >= 4:
        return index  # flip elements are involutions
    return (4 - index) % 4


def _cubic_weight(t: np.ndarray) -> np.ndarray:
    """Catmull-Rom cubic kernel (a = -0.5)."""
    t = np.abs(t)
    out = np.zeros_like(t)
    near = t <= 1.0
    far = (t > 1.0) & (t < 2.0)
    out[near] = (1.5 * t[near] - 2.5) * t[near] ** 2 + 1.0
    out[far] = ((-0.5 * t[far] + 2.5) * t[far] - 4.0) * t[far] + 2.0
    return out


def _resize_weights(n_in: int, n_out: int) -> np.ndarray:
    """Dense (n_out, n_in) bicubic weight matrix with edge clamping."""
    w = np.zeros((n_out, n_in))
    # Center-aligned coordinate mapping; identity when n_in == n_out.
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src).astype(int)
    frac = src - base
    for tap in range(4):
        idx = np.clip(base - 1 + tap, 0, n_in - 1)
        wt = _cubic_weight(frac - (tap - 1))
        np.add.at(w, (np.arange(n_out), idx), wt)
    return w


def resize_bicubic(img: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    """Catmull-Rom bicubic resampling with edge-clamped sampling."""
    if new_h < 1 or new_w < 1:
        raise ValueError("target dimensions must be >= 1")
    h, w = img.shape
    if (new_h, new_w) == (h, w):
        return img.copy()
    wr = _resize_weights(h, new_h)
    wc = _resize_weights(w, new_w)
    return wr @ img @ wc.T
