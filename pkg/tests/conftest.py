import time

import numpy as np
import pytest

from ccid.filters import gaussian_filter

# Wall-clock seconds of the shared training fixtures, keyed by stage.
# The acceptance suite checks the desk-training runtime budget from here.
TRAIN_TIMES: dict[str, float] = {}


def synth_corpus(n, size, seed, mask_sigma=6.0):
    """Piecewise-smooth images with oriented texture patches.

    A stand-in for natural grayscale content: smooth background, a
    granular texture region and a striped region, normalized into
    [0.2, 0.8] so additive noise rarely clips.
    """
    rng = np.random.default_rng(seed)
    imgs = []
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(n):
        smooth = gaussian_filter(rng.random((size, size)), 4.0)
        tex = gaussian_filter(rng.random((size, size)), 0.8) - 0.5
        stripes = np.sin(xx / rng.uniform(2.0, 5.0) + rng.uniform(0, 6)) * np.sin(
            yy / rng.uniform(3.0, 8.0)
        )
        mask = gaussian_filter((rng.random((size, size)) > 0.5).astype(float), mask_sigma)
        img = smooth + 0.45 * tex * mask + 0.2 * stripes * (1 - mask) * (mask < 0.3)
        img = (img - img.min()) / (img.max() - img.min()) * 0.6 + 0.2
        imgs.append(img)
    return imgs


@pytest.fixture(scope="session")
def desk_denoiser():
    """A small residual denoiser trained at sigma=25, shared across tests.

    Training is deterministic (seeded), so every test sees the same model.
    """
    from ccid.models import DenoiserSpec, train_denoiser
    from ccid.nnet import TrainConfig

    corpus = synth_corpus(24, 80, seed=1)
    start = time.perf_counter()
    params, history = train_denoiser(
        corpus,
        TrainConfig(epochs=30, batch_size=16, seed=3),
        spec=DenoiserSpec(depth=5, width=16),
    )
    TRAIN_TIMES["denoiser"] = time.perf_counter() - start
    return params, history


@pytest.fixture(scope="session")
def tiny_denoiser():
    """Untrained-but-valid small denoiser parameters for plumbing tests."""
    from ccid.models import DenoiserSpec, init_denoiser

    return init_denoiser(DenoiserSpec(depth=3, width=8), seed=0)
