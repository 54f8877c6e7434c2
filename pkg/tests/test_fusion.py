import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccid.fusion import (
    GUIDED_PATCH,
    FusionParams,
    band_alphas,
    dct_mask,
    fuse,
    fuse_dct,
    fuse_dct_guided,
    fuse_dwt,
    fuse_dwt_corr,
    fuse_dwt_guided,
    region_weight,
)


def make_pair(seed, size=32):
    rng = np.random.default_rng(seed)
    return rng.random((size, size)), rng.random((size, size))


class TestDCTMask:
    def test_dc_is_one(self):
        m = dct_mask(16, 16, 0.5, 0.1, 1e-3)
        assert m[0, 0] == 1.0

    def test_values_in_unit_interval(self):
        m = dct_mask(16, 24, 0.7, 0.1, 1e-3)
        assert np.all(m > 0.0) and np.all(m <= 1.0)

    def test_monotone_in_weight(self):
        lo = dct_mask(16, 16, 0.3, 0.1, 1e-3)
        hi = dct_mask(16, 16, 0.8, 0.1, 1e-3)
        assert np.all(hi >= lo)

    def test_decreasing_in_frequency(self):
        m = dct_mask(16, 16, 0.5, 0.1, 1e-3)
        assert np.all(np.diff(m, axis=0) <= 0)
        assert np.all(np.diff(m, axis=1) <= 0)

    def test_hand_value(self):
        # s = 0.1 * (1/(0.5 + 1e-3) - 1); M[1, 0] = exp(-(1/16)^2 / (2 s)).
        s = 0.1 * (1.0 / (0.5 + 1e-3) - 1.0)
        m = dct_mask(16, 16, 0.5, 0.1, 1e-3)
        assert m[1, 0] == pytest.approx(np.exp(-((1 / 16) ** 2) / (2 * s)), rel=1e-12)


class TestBandAlphas:
    def test_hand_values(self):
        assert np.allclose(band_alphas(0.5, 3), [1.0, 1.0, 0.0, 0.0])
        assert np.allclose(band_alphas(0.25, 3), [1.0, 0.0, 0.0, 0.0])
        assert np.allclose(band_alphas(0.4, 3), [1.0, 0.6, 0.0, 0.0])

    def test_endpoints(self):
        assert np.allclose(band_alphas(0.0, 3), 0.0)
        assert np.allclose(band_alphas(1.0, 3), 1.0)

    @given(st.floats(0.0, 1.0), st.integers(1, 5))
    @settings(max_examples=50, deadline=None)
    def test_monotone_coarse_first(self, w, levels):
        a = band_alphas(w, levels)
        assert np.all(np.diff(a) <= 1e-15)
        assert np.all((a >= 0.0) & (a <= 1.0))


class TestGlobalFusion:
    @pytest.mark.parametrize("method", ["dct", "dwt", "dwt_corr"])
    def test_endpoints(self, method):
        reliable, halluc = make_pair(0)
        p0 = FusionParams(method=method, weight=0.0)
        p1 = FusionParams(method=method, weight=1.0)
        assert np.max(np.abs(fuse(reliable, halluc, p0) - reliable)) < 1e-9
        assert np.max(np.abs(fuse(reliable, halluc, p1) - halluc)) < 1e-9

    def test_dct_endpoints_exact(self):
        reliable, halluc = make_pair(1)
        assert np.array_equal(
            fuse_dct(reliable, halluc, FusionParams(weight=0.0)), reliable
        )
        assert np.array_equal(
            fuse_dct(reliable, halluc, FusionParams(weight=1.0)), halluc
        )

    @pytest.mark.parametrize("method", ["dct", "dwt", "dwt_corr"])
    def test_identical_inputs_fixed_point(self, method):
        img = np.random.default_rng(2).random((32, 32))
        out = fuse(img, img, FusionParams(method=method, weight=0.6))
        assert np.max(np.abs(out - img)) < 1e-9

    def test_dct_spectral_interpolation(self):
        # The fused spectrum must lie between the two input spectra.
        from ccid.transforms import dct2

        reliable, halluc = make_pair(3)
        p = FusionParams(method="dct", weight=0.5)
        sf = dct2(fuse_dct(reliable, halluc, p))
        sr, sh = dct2(reliable), dct2(halluc)
        lo = np.minimum(sr, sh) - 1e-9
        hi = np.maximum(sr, sh) + 1e-9
        assert np.all((sf >= lo) & (sf <= hi))

    def test_dwt_half_weight_blends_coarse_only(self):
        # At w=0.5 with 3 levels, the approximation and coarsest details
        # come from the hallucinatory image, finer bands stay reliable.
        from ccid.transforms import dwt2

        reliable, halluc = make_pair(4)
        fused = fuse_dwt(reliable, halluc, FusionParams(method="dwt", weight=0.5))
        pf = dwt2(fused, "haar", 3)
        ph = dwt2(halluc, "haar", 3)
        pr = dwt2(reliable, "haar", 3)
        assert np.max(np.abs(pf.approx - ph.approx)) < 1e-9
        for bf, bh in zip(pf.details[0], ph.details[0]):
            assert np.max(np.abs(bf - bh)) < 1e-9
        for bf, br in zip(pf.details[2], pr.details[2]):
            assert np.max(np.abs(bf - br)) < 1e-9

    def test_dwt_corr_equals_dwt_on_identical_inputs(self):
        img = np.random.default_rng(5).random((32, 32))
        p = FusionParams(method="dwt", weight=0.4)
        a = fuse_dwt(img, img, p)
        b = fuse_dwt_corr(img, img, p)
        assert np.max(np.abs(a - b)) < 1e-9

    def test_dwt_corr_attenuates_disagreement(self):
        # Anti-correlated details (h = -r) give m = 0, so the effective
        # alpha drops to a*w and the fused image stays nearer reliable.
        rng = np.random.default_rng(6)
        reliable = rng.random((32, 32))
        mean = reliable.mean()
        halluc = 2 * mean - reliable  # mirrored: detail coefficients negate
        p = FusionParams(weight=0.5)
        plain = fuse_dwt(reliable, halluc, p)
        corr = fuse_dwt_corr(reliable, halluc, p)
        assert np.mean(np.abs(corr - reliable)) < np.mean(np.abs(plain - reliable))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fuse_dct(np.zeros((8, 8)), np.zeros((8, 9)), FusionParams())

    def test_invalid_params(self):
        r, h = make_pair(7, 16)
        with pytest.raises(ValueError):
            fuse(r, h, FusionParams(weight=1.5))
        with pytest.raises(ValueError):
            fuse(r, h, FusionParams(method="fft"))


class TestRegionWeight:
    def test_hand_values(self):
        assert region_weight(0.5, 0.8, 0.8) == pytest.approx(0.5)
        assert region_weight(0.5, 1.0, 0.8) == pytest.approx(0.6)
        assert region_weight(0.5, 0.0, 0.8) == pytest.approx(0.1)
        assert region_weight(0.9, 1.0, 0.5) == pytest.approx(1.0)  # clamped
        assert region_weight(0.0, 1.0, 0.0) == pytest.approx(0.0)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    @settings(max_examples=100, deadline=None)
    def test_bounds_and_monotonicity(self, w, c, t):
        out = float(region_weight(w, c, t))
        assert 0.0 <= out <= 1.0
        assert float(region_weight(w, min(c + 0.1, 1.0), t)) >= out - 1e-12

    def test_vectorized(self):
        c = np.array([[0.0, 0.8], [1.0, 0.4]])
        out = region_weight(0.5, c, 0.8)
        want = np.clip(0.5 * (1.0 + c - 0.8), 0.0, 1.0)
        assert np.array_equal(out, want)


class TestGuidedFusion:
    def grid_shape(self, size):
        g = -(-size // GUIDED_PATCH)
        return (g, g)

    def test_dwt_guided_flat_conf_matches_global(self):
        reliable, halluc = make_pair(8, 32)
        conf = np.full(self.grid_shape(32), 0.8)
        p = FusionParams(method="dwt", weight=0.5, threshold=0.8, guided=True)
        got = fuse_dwt_guided(reliable, halluc, conf, p)
        # Flat confidence at the threshold leaves the weight unchanged, so
        # the result is the same patch-wise fusion applied block by block.
        want = np.empty_like(reliable)
        pp = FusionParams(method="dwt", weight=0.5, wavelet="haar", levels=2)
        for gy in range(4):
            for gx in range(4):
                sl = (
                    slice(gy * 8, gy * 8 + 8),
                    slice(gx * 8, gx * 8 + 8),
                )
                want[sl] = fuse_dwt(reliable[sl], halluc[sl], pp)
        assert np.max(np.abs(got - want)) < 1e-12

    def test_dwt_guided_extreme_confidence(self):
        reliable, halluc = make_pair(9, 16)
        p = FusionParams(method="dwt", weight=0.5, threshold=0.5, guided=True)
        # c=1 everywhere pushes regions toward the hallucinatory image
        # relative to c=0 everywhere.
        hi = fuse_dwt_guided(reliable, halluc, np.ones((2, 2)), p)
        lo = fuse_dwt_guided(reliable, halluc, np.zeros((2, 2)), p)
        d_hi = np.mean(np.abs(hi - halluc))
        d_lo = np.mean(np.abs(lo - halluc))
        assert d_hi < d_lo

    def test_dwt_guided_zero_weight_returns_reliable(self):
        reliable, halluc = make_pair(10, 16)
        conf = np.random.default_rng(11).random((2, 2))
        p = FusionParams(method="dwt", weight=0.0, guided=True)
        out = fuse_dwt_guided(reliable, halluc, conf, p)
        assert np.max(np.abs(out - reliable)) < 1e-9

    def test_dwt_guided_odd_size(self):
        rng = np.random.default_rng(12)
        reliable = rng.random((19, 21))
        halluc = rng.random((19, 21))
        conf = rng.random((3, 3))
        p = FusionParams(method="dwt", weight=0.5, guided=True)
        out = fuse_dwt_guided(reliable, halluc, conf, p)
        assert out.shape == (19, 21)

    def test_dct_guided_flat_conf_on_level_matches_global(self):
        # conf == t keeps every pixel at the global weight; picking w on a
        # quantization level makes the interpolation exact.
        reliable, halluc = make_pair(13, 32)
        conf = np.full(self.grid_shape(32), 0.8)
        w = 8 / 16
        p = FusionParams(method="dct", weight=w, threshold=0.8, guided=True)
        got = fuse_dct_guided(reliable, halluc, conf, p)
        want = fuse_dct(reliable, halluc, FusionParams(method="dct", weight=w))
        assert np.max(np.abs(got - want)) < 1e-9

    def test_dct_guided_off_level_interpolates(self):
        reliable, halluc = make_pair(14, 32)
        conf = np.full(self.grid_shape(32), 0.8)
        w = 0.5 * (8 / 16 + 9 / 16)
        p = FusionParams(method="dct", weight=w, threshold=0.8, guided=True)
        got = fuse_dct_guided(reliable, halluc, conf, p)
        a = fuse_dct(reliable, halluc, FusionParams(weight=8 / 16))
        b = fuse_dct(reliable, halluc, FusionParams(weight=9 / 16))
        assert np.max(np.abs(got - 0.5 * (a + b))) < 1e-9

    def test_dct_guided_endpoint_confidence(self):
        reliable, halluc = make_pair(15, 16)
        p = FusionParams(method="dct", weight=1.0, threshold=0.0, guided=True)
        out = fuse_dct_guided(reliable, halluc, np.ones((2, 2)), p)
        assert np.max(np.abs(out - halluc)) < 1e-9

    def test_conf_shape_mismatch(self):
        reliable, halluc = make_pair(16, 32)
        with pytest.raises(ValueError):
            fuse_dwt_guided(reliable, halluc, np.zeros((3, 3)), FusionParams())
        with pytest.raises(ValueError):
            fuse_dct_guided(reliable, halluc, np.zeros((5, 4)), FusionParams())

    def test_guided_requires_conf(self):
        reliable, halluc = make_pair(17, 16)
        with pytest.raises(ValueError):
            fuse(reliable, halluc, FusionParams(guided=True))

    def test_fuse_dispatch_guided(self):
        reliable, halluc = make_pair(18, 16)
        conf = np.full((2, 2), 0.8)
        p = FusionParams(method="dwt", weight=0.5, guided=True)
        a = fuse(reliable, halluc, p, conf=conf)
        b = fuse_dwt_guided(reliable, halluc, conf, p)
        assert np.array_equal(a, b)
