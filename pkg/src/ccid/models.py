"""Residual denoiser and confidence predictor.

Architectures, parameter init, dataset generation with a content-
addressed disk cache, ground-truth confidence, training loops and
prediction statistics.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nnet
from .filters import ReliableFilterSpec, reliable_denoise
from .imagecore import NoiseSpec, add_noise, augment_dihedral, extract_patches
from .nnet import TrainConfig

REGION = 8  # confidence granularity in pixels
SIGMA_MAX = 100.0
DATA_MAGIC = b"CCIDDATA"
DATA_VERSION = 1
GENERATOR_VERSION = 1

# Confidence net: three conv+relu+pool blocks then a 1x1 sigmoid head;
# total spatial reduction is exactly 8x per axis.
CONFIDENCE_CHANNELS = (3, 16, 32, 32)


@dataclass(frozen=True)
class DenoiserSpec:
    depth: int = 8
    width: int = 32


def denoiser_param_names(spec: DenoiserSpec) -> list[str]:
    names = []
    for i in range(spec.depth):
        names += [f"conv{i}.weight", f"conv{i}.bias"]
    return names


def init_denoiser(spec: DenoiserSpec, seed: int = 0) -> dict[str, np.ndarray]:
    """He-initialized residual denoiser parameters."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    chans = [1] + [spec.width] * (spec.depth - 1) + [1]
    for i in range(spec.depth):
        cin, cout = chans[i], chans[i + 1]
        std = np.sqrt(2.0 / (cin * 9))
        params[f"conv{i}.weight"] = rng.normal(0.0, std, size=(cout, cin, 3, 3))
        params[f"conv{i}.bias"] = np.zeros(cout)
    return params


def denoiser_spec_from_params(params: dict[str, np.ndarray]) -> DenoiserSpec:
    """Recover depth/width from a parameter dict (used when loading)."""
    depth = sum(1 for k in params if k.endswith(".weight"))
    width = params["conv0.weight"].shape[0]
    return DenoiserSpec(depth=depth, width=width)


def _denoiser_forward(x: np.ndarray, params: dict[str, np.ndarray], depth: int):
    """Returns (residual, cache of layer inputs and pre-activations)."""
    cache = []
    a = x
    for i in range(depth):
        z = nnet.conv2d(a, params[f"conv{i}.weight"], params[f"conv{i}.bias"])
        cache.append((a, z))
        a = nnet.relu(z) if i < depth - 1 else z
    return a, cache


def _denoiser_backward(grad: np.ndarray, cache, params: dict[str, np.ndarray]):
    depth = len(cache)
    grads: dict[str, np.ndarray] = {}
    for i in reversed(range(depth)):
        a_in, z = cache[i]
        if i < depth - 1:
            grad = nnet.relu_backward(grad, z)
        grad, gk, gb = nnet.conv2d_backward(grad, a_in, params[f"conv{i}.weight"])
        grads[f"conv{i}.weight"] = gk
        grads[f"conv{i}.bias"] = gb
    return grads


def denoise_dnn(noisy: np.ndarray, params: dict[str, np.ndarray], spec: DenoiserSpec | None = None):
    """Run the residual denoiser on a 2-D image.

    Returns (denoised, residual) with denoised = noisy - residual.
    """
    if spec is None:
        spec = denoiser_spec_from_params(params)
    residual, _ = _denoiser_forward(noisy[None], params, spec.depth)
    residual = residual[0]
    return noisy - residual, residual


def confidence_param_names() -> list[str]:
    names = []
    for i in range(3):
        names += [f"block{i}.weight", f"block{i}.bias"]
    return names + ["head.weight", "head.bias"]


def init_confidence(seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for i in range(3):
        cin, cout = CONFIDENCE_CHANNELS[i], CONFIDENCE_CHANNELS[i + 1]
        std = np.sqrt(2.0 / (cin * 9))
        params[f"block{i}.weight"] = rng.normal(0.0, std, size=(cout, cin, 3, 3))
        params[f"block{i}.bias"] = np.zeros(cout)
    params["head.weight"] = rng.normal(0.0, np.sqrt(2.0 / CONFIDENCE_CHANNELS[3]),
                                       size=(1, CONFIDENCE_CHANNELS[3], 1, 1))
    params["head.bias"] = np.zeros(1)
    return params


def _confidence_forward(x: np.ndarray, params: dict[str, np.ndarray]):
    """x: (N, 3, H, W) with H, W divisible by 8. Returns (out, cache)."""
    cache = []
    a = x
    for i in range(3):
        z = nnet.conv2d(a, params[f"block{i}.weight"], params[f"block{i}.bias"])
        r = nnet.relu(z)
        cache.append((a, z))
        a = nnet.avgpool2(r)
    zh = nnet.conv2d(a, params["head.weight"], params["head.bias"])
    out = nnet.sigmoid(zh)
    cache.append((a, out))
    return out, cache


def _confidence_backward(grad: np.ndarray, cache, params: dict[str, np.ndarray]):
    grads: dict[str, np.ndarray] = {}
    a_head, out = cache[3]
    grad = nnet.sigmoid_backward(grad, out)
    grad, gk, gb = nnet.conv2d_backward(grad, a_head, params["head.weight"])
    grads["head.weight"] = gk
    grads["head.bias"] = gb
    for i in reversed(range(3)):
        a_in, z = cache[i]
        grad = nnet.avgpool2_backward(grad)
        grad = nnet.relu_backward(grad, z)
        grad, gk, gb = nnet.conv2d_backward(grad, a_in, params[f"block{i}.weight"])
        grads[f"block{i}.weight"] = gk
        grads[f"block{i}.bias"] = gb
    return grads


def predict_confidence(stack: np.ndarray, params: dict[str, np.ndarray]) -> np.ndarray:
    """Confidence map for a (3, H, W) input stack; output (H/8, W/8)."""
    if stack.ndim != 3 or stack.shape[0] != 3:
        raise ValueError(f"expected a (3, H, W) stack, got {stack.shape}")
    if stack.shape[1] % REGION or stack.shape[2] % REGION:
        raise ValueError("input dims must be multiples of 8")
    out, _ = _confidence_forward(stack[None], params)
    return out[0, 0]


def _pad_to_region(img: np.ndarray) -> np.ndarray:
    pr = (-img.shape[0]) % REGION
    pc = (-img.shape[1]) % REGION
    if pr or pc:
        img = np.pad(img, ((0, pr), (0, pc)), mode="symmetric")
    return img


def confidence_ground_truth(clean: np.ndarray, dnn_denoised: np.ndarray,
                            sigma_max: float = SIGMA_MAX) -> np.ndarray:
    """Per 8x8 region: 1 - mean(|clean - dnn| * 255) / sigma_max, clamped.

    The 255 factor moves the [0,1]-domain error onto the 8-bit scale that
    sigma_max is quoted on.
    """
    if clean.shape != dnn_denoised.shape:
        raise ValueError("image dimensions differ")
    err = _pad_to_region(np.abs(clean - dnn_denoised) * 255.0)
    h, w = err.shape
    blocks = err.reshape(h // REGION, REGION, w // REGION, REGION).mean(axis=(1, 3))
    return np.clip(1.0 - blocks / sigma_max, 0.0, 1.0)


class DatasetCacheError(Exception):
    """Raised for unusable dataset caches."""


def _write_item(path: Path, stack: np.ndarray, target: np.ndarray) -> None:
    _, h, w = stack.shape
    with open(path, "wb") as f:
        f.write(DATA_MAGIC)
        f.write(struct.pack("<III", DATA_VERSION, h, w))
        f.write(np.ascontiguousarray(stack, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(target, dtype="<f4").tobytes())


def _read_item(path: Path) -> tuple[np.ndarray, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:8] != DATA_MAGIC:
        raise DatasetCacheError(f"{path}: bad magic")
    version, h, w = struct.unpack_from("<III", data, 8)
    if version != DATA_VERSION:
        raise DatasetCacheError(f"{path}: unsupported version {version}")
    off = 20
    n = 3 * h * w
    stack = np.frombuffer(data[off : off + 4 * n], dtype="<f4").reshape(3, h, w)
    off += 4 * n
    gh, gw = h // REGION, w // REGION
    target = np.frombuffer(data[off : off + 4 * gh * gw], dtype="<f4").reshape(gh, gw)
    return stack.astype(np.float64), target.astype(np.float64)


class ConfidenceDataset:
    """Handle over cached training items."""

    def __init__(self, paths: list[Path], n_built: int, n_cached: int):
        self.paths = paths
        self.n_built = n_built
        self.n_cached = n_cached

    def __len__(self) -> int:
        return len(self.paths)

    def load(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        return _read_item(self.paths[index])

    def load_all(self) -> tuple[np.ndarray, np.ndarray]:
        stacks, targets = zip(*(self.load(i) for i in range(len(self))))
        return np.stack(stacks), np.stack(targets)


def build_dataset(
    images: list[np.ndarray],
    denoiser: dict[str, np.ndarray],
    filter_spec: ReliableFilterSpec | None = None,
    patch: int = 40,
    cache_dir=None,
    seed: int = 0,
) -> ConfidenceDataset:
    """Generate (noisy, reliable, residual) -> confidence training items.

    Per image: non-overlapping patches, all 8 dihedral augmentations,
    one noise level sampled uniformly from [0, 100] per item. Items are
    persisted under a content-addressed name; a rebuild with identical
    inputs reuses every cached file.
    """
    if not images:
        raise ValueError("need at least one image")
    if patch % REGION:
        raise ValueError("patch size must be a multiple of 8")
    if cache_dir is None:
        raise ValueError("cache_dir is required")
    if filter_spec is None:
        filter_spec = ReliableFilterSpec()
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    spec = denoiser_spec_from_params(denoiser)
    paths: list[Path] = []
    n_built = 0
    n_cached = 0
    for img in images:
        image_id = hashlib.sha256(np.ascontiguousarray(img).tobytes()).hexdigest()[:16]
        for p_index, clean in enumerate(extract_patches(img, patch, patch)):
            for aug in range(8):
                # Per-item randomness is derived from the item key so cache
                # hits never shift the stream of later items.
                key = f"{image_id}:{p_index}:{aug}:{seed}:{GENERATOR_VERSION}"
                item_seed = int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")
                sigma = float(np.random.default_rng(item_seed).uniform(0.0, 100.0))
                digest = hashlib.sha256(
                    f"{image_id}:{p_index}:{aug}:{sigma!r}:{GENERATOR_VERSION}".encode()
                ).hexdigest()
                path = cache_dir / f"{digest}.ccid"
                if path.exists():
                    n_cached += 1
                else:
                    patch_img = augment_dihedral(clean, aug)
                    noisy = add_noise(patch_img, NoiseSpec("gaussian", sigma, item_seed ^ 0xA5A5))
                    reliable = reliable_denoise(noisy, filter_spec)
                    denoised, residual = denoise_dnn(noisy, denoiser, spec)
                    target = confidence_ground_truth(patch_img, denoised)
                    _write_item(path, np.stack([noisy, reliable, residual]), target)
                    n_built += 1
                paths.append(path)
    return ConfidenceDataset(paths, n_built, n_cached)


def train_denoiser(
    clean_images: list[np.ndarray],
    config: TrainConfig,
    spec: DenoiserSpec | None = None,
    sigma: float = 25.0,
    patch: int = 40,
):
    """Residual-learning MSE training on synthetic Gaussian pairs.

    Returns (params, per-epoch train loss). Deterministic under the
    config seed.
    """
    if not clean_images:
        raise ValueError("need at least one training image")
    config.validate()
    if spec is None:
        spec = DenoiserSpec()
    patches = []
    for img in clean_images:
        patches.extend(extract_patches(img, patch, patch))
    data = np.stack(patches)[:, None]  # (N, 1, H, W)
    rng = np.random.default_rng(config.seed)
    params = init_denoiser(spec, seed=config.seed)
    state = nnet.adam_init(params)
    history: list[float] = []
    n = len(data)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            batch = data[order[start : start + config.batch_size]]
            noise = rng.normal(0.0, sigma / 255.0, size=batch.shape)
            pred, cache = _denoiser_forward(batch + noise, params, spec.depth)
            diff = pred - noise
            loss = float(np.mean(diff * diff))
            if not np.isfinite(loss):
                raise FloatingPointError("denoiser training diverged (non-finite loss)")
            grads = _denoiser_backward(2.0 * diff / diff.size, cache, params)
            nnet.adam_step(params, grads, state, config)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return params, history


def train_confidence(dataset: ConfidenceDataset, config: TrainConfig):
    """Train the confidence net on asymmetric SSE with a seeded 90/10
    train/validation split. Returns (params, train losses, val losses)."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    config.validate()
    stacks, targets = dataset.load_all()
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(stacks))
    n_val = max(1, len(stacks) // 10)
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise ValueError("dataset too small to split")
    x_tr, y_tr = stacks[train_idx], targets[train_idx][:, None]
    x_val, y_val = stacks[val_idx], targets[val_idx][:, None]
    params = init_confidence(seed=config.seed)
    state = nnet.adam_init(params)
    train_hist: list[float] = []
    val_hist: list[float] = []
    for _ in range(config.epochs):
        perm = rng.permutation(len(x_tr))
        losses = []
        for start in range(0, len(x_tr), config.batch_size):
            idx = perm[start : start + config.batch_size]
            out, cache = _confidence_forward(x_tr[idx], params)
            loss, grad = nnet.asymmetric_sse(out, y_tr[idx], config.p_under, config.p_over)
            if not np.isfinite(loss):
                raise FloatingPointError("confidence training diverged (non-finite loss)")
            grads = _confidence_backward(grad / out.size, cache, params)
            nnet.adam_step(params, grads, state, config)
            losses.append(loss / out.size)
        train_hist.append(float(np.mean(losses)))
        val_hist.append(evaluate_confidence_loss(params, x_val, y_val, config))
    return params, train_hist, val_hist


def evaluate_confidence_loss(params, stacks, targets, config: TrainConfig) -> float:
    """Mean per-element asymmetric SSE of the net on the given items."""
    out, _ = _confidence_forward(stacks, params)
    loss, _ = nnet.asymmetric_sse(out, targets, config.p_under, config.p_over)
    return loss / out.size


def constant_predictor_loss(value: float, targets: np.ndarray, config: TrainConfig) -> float:
    """Baseline: asymmetric SSE of a constant-valued predictor."""
    loss, _ = nnet.asymmetric_sse(np.full_like(targets, value), targets,
                                  config.p_under, config.p_over)
    return loss / targets.size


def confidence_stats(params: dict[str, np.ndarray], dataset: ConfidenceDataset) -> dict:
    """Box-plot style summaries of (target - output) per item.

    Negative signed differences mean the network is over-confident.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    per_item = []
    all_diffs = []
    for i in range(len(dataset)):
        stack, target = dataset.load(i)
        pred = predict_confidence(stack, params)
        diff = (target - pred).ravel()
        all_diffs.append(diff)
        per_item.append({
            "signed": _five_number(diff),
            "absolute": _five_number(np.abs(diff)),
        })
    flat = np.concatenate(all_diffs)
    return {
        "items": per_item,
        "mean_signed": float(flat.mean()),
        "fraction_below_005": float(np.mean(np.abs(flat) < 0.05)),
    }


def _five_number(x: np.ndarray) -> dict:
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    return {
        "min": float(x.min()),
        "q1": float(q1),
        "median": float(med),
        "q3": float(q3),
        "max": float(x.max()),
    }
