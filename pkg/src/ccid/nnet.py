"""Minimal deterministic tensor engine for the two small networks.

Tensors are numpy arrays shaped (C, H, W) for activations (optionally a
leading batch axis) and (out_ch, in_ch, kh, kw) for kernels. Every
backward op is exact for its forward map and checked against finite
differences in the test suite.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

PARAMS_MAGIC = b"CCIDPARM"
PARAMS_VERSION = 1


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 16
    epochs: int = 10
    seed: int = 0
    p_under: float = 1.0
    p_over: float = 4.0

    def validate(self) -> None:
        if not (self.p_over >= self.p_under > 0):
            raise ValueError("require p_over >= p_under > 0")


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ValueError(f"expected a 3- or 4-d activation tensor, got shape {x.shape}")


def conv2d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-padded cross-correlation with a 3x3 or 1x1 kernel."""
    xb, squeeze = _as_batch(x)
    o, c, kh, kw = kernel.shape
    if (kh, kw) not in ((3, 3), (1, 1)):
        raise ValueError(f"only 3x3 and 1x1 kernels are supported, got {kh}x{kw}")
    n, cin, h, w = xb.shape
    if cin != c:
        raise ValueError(f"channel mismatch: input has {cin}, kernel expects {c}")
    pad = kh // 2
    xp = np.pad(xb, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((n, o, h, w), dtype=xb.dtype)
    flat = out.reshape(n, o, h * w)
    for i in range(kh):
        for j in range(kw):
            win = xp[:, :, i : i + h, j : j + w].reshape(n, c, h * w)
            flat += kernel[:, :, i, j] @ win
    out += bias.reshape(1, o, 1, 1)
    return out[0] if squeeze else out


def conv2d_backward(grad_out: np.ndarray, x: np.ndarray, kernel: np.ndarray):
    """Exact gradients of :func:`conv2d` w.r.t. input, kernel and bias."""
    gb, squeeze = _as_batch(grad_out)
    xb, _ = _as_batch(x)
    o, c, kh, kw = kernel.shape
    n, _, h, w = xb.shape
    if gb.shape != (n, o, h, w):
        raise ValueError("grad_out shape does not match the forward output")
    pad = kh // 2
    xp = np.pad(xb, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    gxp = np.zeros_like(xp)
    gk = np.zeros_like(kernel)
    gflat = gb.reshape(n, o, h * w)
    for i in range(kh):
        for j in range(kw):
            win = xp[:, :, i : i + h, j : j + w].reshape(n, c, h * w)
            gk[:, :, i, j] = np.tensordot(gflat, win, axes=([0, 2], [0, 2]))
            gxp[:, :, i : i + h, j : j + w] += (kernel[:, :, i, j].T @ gflat).reshape(n, c, h, w)
    gx = gxp[:, :, pad : pad + h, pad : pad + w] if pad else gxp
    gbias = gb.sum(axis=(0, 2, 3))
    return (gx[0] if squeeze else gx), gk, gbias


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(grad: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad * (x > 0.0)


def avgpool2(x: np.ndarray) -> np.ndarray:
    """2x2 mean pooling, stride 2."""
    xb, squeeze = _as_batch(x)
    n, c, h, w = xb.shape
    if h % 2 or w % 2:
        raise ValueError(f"avgpool2 needs even spatial dims, got {h}x{w}")
    out = xb.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    return out[0] if squeeze else out


def avgpool2_backward(grad: np.ndarray) -> np.ndarray:
    gb, squeeze = _as_batch(grad)
    out = np.repeat(np.repeat(gb, 2, axis=2), 2, axis=3) / 4.0
    return out[0] if squeeze else out


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(grad: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Backward given the forward *output* y = sigmoid(x)."""
    return grad * y * (1.0 - y)


def asymmetric_sse(output: np.ndarray, target: np.ndarray, p_under: float, p_over: float):
    """Sum of squared errors penalizing over-confident outputs harder.

    Returns (loss, grad w.r.t. output).
    """
    if output.shape != target.shape:
        raise ValueError("output/target shape mismatch")
    diff = output - target
    p = np.where(diff < 0.0, p_under, p_over)
    loss = float(np.sum(p * diff * diff))
    return loss, 2.0 * p * diff


def adam_init(params: dict[str, np.ndarray]) -> dict:
    return {
        "step": 0,
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
    }


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: dict,
    config: TrainConfig,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """In-place Adam update with decoupled weight decay."""
    state["step"] += 1
    t = state["step"]
    lr = config.learning_rate
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        if config.weight_decay:
            p *= 1.0 - lr * config.weight_decay
        m = state["m"][name]
        v = state["v"][name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


class ParamsFormatError(Exception):
    """Raised for malformed parameter files."""


def save_params(params: dict[str, np.ndarray], path) -> None:
    """Serialize named tensors: magic, version, count, then per tensor
    name (u16 len + bytes), u8 rank, u32 dims, little-endian f32 data."""
    with open(path, "wb") as f:
        f.write(PARAMS_MAGIC)
        f.write(struct.pack("<II", PARAMS_VERSION, len(params)))
        for name, tensor in params.items():
            raw = name.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<B", tensor.ndim))
            f.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            f.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_params(path, order: list[str] | None = None) -> dict[str, np.ndarray]:
    """Load a parameter file; with ``order`` given, tensors are returned
    in that declared order regardless of their order on disk."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != PARAMS_MAGIC:
        raise ParamsFormatError("bad magic; not a CCID parameter file")
    try:
        version, count = struct.unpack_from("<II", data, 8)
        if version != PARAMS_VERSION:
            raise ParamsFormatError(f"unsupported version {version}")
        offset = 16
        params: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset : offset + nlen].decode("utf-8")
            offset += nlen
            (rank,) = struct.unpack_from("<B", data, offset)
            offset += 1
            shape = struct.unpack_from(f"<{rank}I", data, offset)
            offset += 4 * rank
            n = int(np.prod(shape)) if rank else 1
            end = offset + 4 * n
            if end > len(data):
                raise ParamsFormatError("truncated parameter file")
            tensor = np.frombuffer(data[offset:end], dtype="<f4").reshape(shape)
            params[name] = tensor.astype(np.float64)
            offset = end
    except struct.error as e:
        raise ParamsFormatError(f"truncated parameter file: {e}") from e
    if order is not None:
        try:
            params = {name: params[name] for name in order}
        except KeyError as e:
            raise ParamsFormatError(f"missing tensor {e.args[0]!r}") from e
    return params
