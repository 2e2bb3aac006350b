import numpy as np
import pytest

from helpers import direct_circular_convolve, random_image
from skoopred import (
    BoxBlur,
    GaussianSmooth,
    Identity,
    Image,
    Median,
    UnsharpExpansive,
    denoiser_residual,
    equivariant_wrap,
    make_denoiser,
)
from skoopred.denoisers import Denoiser, _gaussian_denoise_kernel


class TestBuiltins:
    def test_identity(self):
        img = random_image(np.random.default_rng(0), 2, 5, 5)
        assert Identity().denoise(img) is img

    def test_gaussian_preserves_constants(self):
        img = Image(np.full((3, 8, 8), 0.6))
        out = GaussianSmooth(1.5).denoise(img)
        np.testing.assert_allclose(out.data, img.data, atol=1e-13)

    def test_gaussian_kernel_support_radius(self):
        k = _gaussian_denoise_kernel(1.5)
        assert k.taps.shape == (13, 13)  # radius ceil(4 * 1.5) = 6
        assert abs(k.taps.sum() - 1.0) <= 1e-12

    def test_box_preserves_constants(self):
        img = Image(np.full((1, 6, 6), 0.25))
        out = BoxBlur(2).denoise(img)
        np.testing.assert_allclose(out.data, img.data, atol=1e-13)

    def test_median_clamped_edges_vs_enumeration(self):
        # brute-force oracle: median over edge-clamped neighborhoods
        rng = np.random.default_rng(1)
        x = rng.random((1, 5, 6))
        out = Median(1).denoise(Image(x)).data
        h, w = 5, 6
        for i in range(h):
            for j in range(w):
                vals = []
                for di in (-1, 0, 1):
                    for dj in (-1, 0, 1):
                        vals.append(x[0, min(max(i + di, 0), h - 1), min(max(j + dj, 0), w - 1)])
                assert out[0, i, j] == pytest.approx(np.median(vals), abs=1e-15)

    def test_builtins_deterministic_and_shape_preserving(self):
        rng = np.random.default_rng(2)
        img = random_image(rng, 3, 9, 7)
        for d in (Identity(), GaussianSmooth(1.0), BoxBlur(1), Median(1), UnsharpExpansive(0.7, 1.0)):
            a = d.denoise(img)
            b = d.denoise(img)
            assert a.shape == img.shape
            assert a.data.tobytes() == b.data.tobytes()

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            GaussianSmooth(0.0)
        with pytest.raises(ValueError):
            Median(0)
        with pytest.raises(ValueError):
            UnsharpExpansive(0.0)
        with pytest.raises(ValueError):
            BoxBlur(0)


class TestNonexpansiveness:
    def test_gaussian_and_box_nonexpansive(self):
        rng = np.random.default_rng(3)
        for d in (GaussianSmooth(1.2), BoxBlur(2)):
            for _ in range(25):
                x = rng.standard_normal((1, 12, 12))
                y = rng.standard_normal((1, 12, 12))
                dx = d.denoise(Image(x)).data
                dy = d.denoise(Image(y)).data
                assert np.linalg.norm(dx - dy) <= np.linalg.norm(x - y) + 1e-12

    def test_unsharp_expansiveness_witness(self):
        # +-1 checkerboard is a high-frequency eigenvector of the circulant
        # highpass; unsharp strictly amplifies it
        n = 8
        checker = ((-1.0) ** (np.add.outer(np.arange(n), np.arange(n))))[None]
        d = UnsharpExpansive(1.0, 1.0)
        x = Image(np.zeros((1, n, n)))
        v = Image(checker)
        growth = np.linalg.norm(d.denoise(v).data - d.denoise(x).data) / np.linalg.norm(checker)
        assert growth > 1.0
        # amplitude of the checkerboard strictly amplified
        out = d.denoise(v)
        assert np.abs(out.data).max() > 1.0


class TestResidual:
    def test_identity_residual_is_zero(self):
        img = random_image(np.random.default_rng(4), 1, 6, 6)
        res = denoiser_residual(Identity(), img)
        np.testing.assert_array_equal(res.data, 0.0)

    def test_constant_image_mean_preserving(self):
        img = Image(np.full((2, 8, 8), 0.5))
        res = denoiser_residual(GaussianSmooth(2.0), img)
        np.testing.assert_allclose(res.data, 0.0, atol=1e-13)

    def test_unsharp_residual_algebraic_identity(self):
        # residual of x + a*(x - G x) is -a*(x - G x); direct-convolution oracle
        rng = np.random.default_rng(5)
        x = rng.random((1, 10, 10))
        alpha, sigma = 0.8, 1.0
        d = UnsharpExpansive(alpha, sigma)
        res = denoiser_residual(d, Image(x)).data
        taps = _gaussian_denoise_kernel(sigma).taps
        gx = direct_circular_convolve(x, taps)
        np.testing.assert_allclose(res, -alpha * (x - gx), atol=1e-10)


class _Probe(Denoiser):
    """Records every input it sees; identity behavior."""

    def __init__(self):
        self.seen = []

    def denoise(self, x):
        self.seen.append(x.data.copy())
        return x


class TestEquivariantWrap:
    def test_wrapping_identity_is_identity(self):
        rng = np.random.default_rng(6)
        wrapped = equivariant_wrap(Identity(), seed=9)
        for _ in range(16):  # covers every group element with high probability
            img = random_image(rng, 1, 6, 6)
            out = wrapped.denoise(img)
            np.testing.assert_allclose(out.data, img.data, atol=0)

    def test_isotropic_denoiser_commutes(self):
        rng = np.random.default_rng(7)
        base = GaussianSmooth(1.0)
        wrapped = equivariant_wrap(base, seed=11)
        for _ in range(16):
            img = random_image(rng, 1, 8, 8)
            np.testing.assert_allclose(wrapped.denoise(img).data, base.denoise(img).data, atol=1e-12)

    def test_non_square_restricted_group(self):
        rng = np.random.default_rng(8)
        base = GaussianSmooth(1.0)
        wrapped = equivariant_wrap(base, seed=13)
        img = random_image(rng, 1, 6, 10)  # would crash on 90-degree rotations
        for _ in range(12):
            out = wrapped.denoise(img)
            assert out.shape == img.shape
            np.testing.assert_allclose(out.data, base.denoise(img).data, atol=1e-12)

    def test_same_seed_same_transform_sequence(self):
        rng = np.random.default_rng(9)
        imgs = [random_image(rng, 1, 6, 6) for _ in range(10)]
        probe_a, probe_b, probe_c = _Probe(), _Probe(), _Probe()
        for probe, seed in ((probe_a, 5), (probe_b, 5), (probe_c, 6)):
            wrapped = equivariant_wrap(probe, seed=seed)
            for img in imgs:
                wrapped.denoise(img)
        for a, b in zip(probe_a.seen, probe_b.seen):
            assert a.tobytes() == b.tobytes()
        assert any(a.tobytes() != c.tobytes() for a, c in zip(probe_a.seen, probe_c.seen))

    def test_transform_round_trip_exact(self):
        # g^{-1}(g(x)) must be exact for every group element
        from skoopred.denoisers import _RECT_OPS, _square_fwd, _square_inv

        rng = np.random.default_rng(10)
        sq = rng.random((2, 5, 5))
        for g in range(8):
            np.testing.assert_array_equal(_square_inv(_square_fwd(sq, g), g), sq)
        rect = rng.random((1, 4, 7))
        for fwd, inv in _RECT_OPS:
            np.testing.assert_array_equal(inv(fwd(rect)), rect)


class TestMakeDenoiser:
    def test_parses_variants(self):
        assert isinstance(make_denoiser("identity"), Identity)
        g = make_denoiser("gaussian:2.5")
        assert isinstance(g, GaussianSmooth) and g.sigma == 2.5
        assert isinstance(make_denoiser("box:2"), BoxBlur)
        assert isinstance(make_denoiser("median:1"), Median)
        u = make_denoiser("unsharp:0.5:1.5")
        assert isinstance(u, UnsharpExpansive) and u.alpha == 0.5 and u.sigma == 1.5

    def test_strength_maps_to_gaussian_sigma(self):
        g = make_denoiser("gaussian", strength=1.25)
        assert g.sigma == 1.25

    def test_errors(self):
        with pytest.raises(ValueError):
            make_denoiser("gaussian")  # no sigma, no strength
        with pytest.raises(ValueError):
            make_denoiser("nope")
        with pytest.raises(ValueError):
            make_denoiser("median:x")
