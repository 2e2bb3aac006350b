import numpy as np
import pytest

from helpers import (
    MOTION_KERNEL_TEXT,
    direct_circular_convolve,
    kernel_transfer,
    operator_matrix,
    random_image,
)
from skoopred import (
    Deblur,
    Image,
    Kernel,
    ShapeMismatchError,
    Superresolve,
    apply_adjoint,
    apply_forward,
    bicubic_upsample,
    box_kernel,
    convolve_circular,
    data_gradient,
    estimate_gradient_lipschitz,
    gaussian_kernel,
    identity_kernel,
    parse_kernel,
    simulate_measurement,
)
from skoopred.forward import format_kernel, load_kernel


class TestKernel:
    def test_gaussian_sums_to_one(self):
        for size, sigma in ((3, 0.7), (9, 1.0), (25, 1.2)):
            k = gaussian_kernel(size, sigma)
            assert abs(k.taps.sum() - 1.0) <= 1e-12
            assert k.normalized

    def test_normalized_flag_enforced(self):
        with pytest.raises(ValueError):
            Kernel(np.array([[0.5, 0.6]]), normalized=True)
        Kernel(np.array([[0.5, 0.6]]))  # fine without the flag

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Kernel(np.array([[np.nan]]))

    def test_parse_and_format_round_trip(self):
        k = parse_kernel(MOTION_KERNEL_TEXT)
        assert k.taps.shape == (5, 5)
        assert abs(k.taps.sum() - 1.0) <= 1e-12  # normalized on load
        again = parse_kernel(format_kernel(k), normalize=False)
        np.testing.assert_array_equal(again.taps, k.taps)

    def test_parse_without_normalization(self):
        k = parse_kernel("1 2\n0.2 0.2\n", normalize=False)
        assert k.taps.sum() == pytest.approx(0.4)
        assert not k.normalized

    def test_parse_errors(self):
        with pytest.raises(ValueError):
            parse_kernel("")
        with pytest.raises(ValueError):
            parse_kernel("2\n1.0\n")
        with pytest.raises(ValueError):
            parse_kernel("2 2\n1 0\n")  # missing a row
        with pytest.raises(ValueError):
            parse_kernel("1 3\n1 0\n")  # short row
        with pytest.raises(ValueError):
            parse_kernel("1 1\n0.0\n")  # zero sum cannot normalize

    def test_load_kernel_file(self, tmp_path):
        path = tmp_path / "motion.txt"
        path.write_text(MOTION_KERNEL_TEXT, encoding="utf-8")
        k = load_kernel(path)
        assert k.taps.shape == (5, 5)


class TestConvolveCircular:
    def test_identity_kernel(self):
        img = random_image(np.random.default_rng(0), 2, 6, 7)
        out = convolve_circular(img, identity_kernel())
        np.testing.assert_allclose(out.data, img.data, atol=1e-14)

    def test_dc_preservation(self):
        img = Image(np.full((1, 8, 8), 0.37))
        out = convolve_circular(img, gaussian_kernel(5, 1.0))
        np.testing.assert_allclose(out.data, img.data, atol=1e-13)

    def test_impulse_wraps_kernel_at_origin(self):
        # direct-summation oracle on a 4x4 impulse with a 3x3 kernel
        rng = np.random.default_rng(1)
        taps = rng.random((3, 3))
        k = Kernel(taps)
        x = np.zeros((1, 4, 4))
        x[0, 0, 0] = 1.0
        out = convolve_circular(Image(x), k)
        expected = direct_circular_convolve(x, taps)
        np.testing.assert_allclose(out.data, expected, atol=1e-12)
        # the center tap lands on the impulse position
        assert out.data[0, 0, 0] == pytest.approx(taps[1, 1], abs=1e-12)

    @pytest.mark.parametrize("shape,ksize", [((1, 5, 5), (3, 3)), ((2, 6, 9), (3, 5)), ((1, 8, 8), (4, 4)), ((1, 7, 6), (2, 3))])
    def test_matches_direct_summation(self, shape, ksize):
        rng = np.random.default_rng(hash(ksize) % 2**32)
        taps = rng.standard_normal(ksize)
        x = rng.random(shape)
        out = convolve_circular(Image(x), Kernel(taps))
        np.testing.assert_allclose(out.data, direct_circular_convolve(x, taps), atol=1e-10)

    def test_kernel_larger_than_image(self):
        img = Image(np.zeros((1, 3, 3)))
        with pytest.raises(ValueError):
            convolve_circular(img, gaussian_kernel(5, 1.0))


class TestApplyForward:
    def test_deblur_identity(self):
        img = random_image(np.random.default_rng(2), 1, 6, 6)
        out = apply_forward(Deblur(identity_kernel()), img)
        np.testing.assert_allclose(out.data, img.data, atol=1e-14)

    def test_superresolve_identity_decimates_even_indices(self):
        ramp = np.arange(16, dtype=float).reshape(1, 4, 4)
        out = apply_forward(Superresolve(identity_kernel(), 2), Image(ramp))
        np.testing.assert_allclose(out.data, ramp[:, ::2, ::2], atol=1e-14)

    def test_superresolve_dc_preservation(self):
        img = Image(np.full((3, 8, 8), 0.42))
        out = apply_forward(Superresolve(gaussian_kernel(5, 1.0), 2), img)
        assert out.shape == (3, 4, 4)
        np.testing.assert_allclose(out.data, 0.42, atol=1e-13)

    def test_superresolve_divisibility(self):
        model = Superresolve(identity_kernel(), 2)
        with pytest.raises(ShapeMismatchError):
            model.apply(Image(np.zeros((1, 5, 6))))
        with pytest.raises(ValueError):
            Superresolve(identity_kernel(), 1)


def _models_for_adjoint(rng):
    motion = parse_kernel(MOTION_KERNEL_TEXT)
    return [
        ("identity", Deblur(identity_kernel()), (1, 16, 16)),
        ("gauss9", Deblur(gaussian_kernel(9, 1.0)), (1, 24, 20)),
        ("motion", Deblur(motion), (2, 16, 16)),
        ("sr2", Superresolve(gaussian_kernel(5, 1.0), 2), (1, 16, 16)),
    ]


class TestAdjoint:
    def test_identity_deblur_self_adjoint(self):
        img = random_image(np.random.default_rng(3), 1, 5, 5)
        out = apply_adjoint(Deblur(identity_kernel()), img)
        np.testing.assert_allclose(out.data, img.data, atol=1e-14)

    def test_zero_maps_to_zero(self):
        model = Superresolve(gaussian_kernel(3, 0.8), 2)
        out = apply_adjoint(model, Image(np.zeros((1, 4, 4))))
        np.testing.assert_array_equal(out.data, 0.0)

    def test_dot_product_identity(self):
        # <Ax, y> == <x, A^T y> is the oracle for adjoint exactness
        rng = np.random.default_rng(4)
        for name, model, shape in _models_for_adjoint(rng):
            out_shape = model.output_shape(shape)
            for _ in range(25):
                x = rng.standard_normal(shape)
                y = rng.standard_normal(out_shape)
                ax = model.apply(Image(x)).data
                aty = model.adjoint(Image(y)).data
                lhs = float(np.vdot(ax, y))
                rhs = float(np.vdot(x, aty))
                scale = np.linalg.norm(ax) * np.linalg.norm(y) + 1e-30
                assert abs(lhs - rhs) <= 1e-9 * scale, name

    def test_linearity(self):
        rng = np.random.default_rng(5)
        model = Deblur(gaussian_kernel(5, 1.2))
        x = rng.standard_normal((1, 8, 8))
        z = rng.standard_normal((1, 8, 8))
        a, b = 1.7, -0.4
        lhs = model.apply(Image(a * x + b * z)).data
        rhs = a * model.apply(Image(x)).data + b * model.apply(Image(z)).data
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_dense_matrix_transpose(self):
        # brute-force operator matrices: adjoint matrix equals transpose exactly
        model = Superresolve(gaussian_kernel(3, 0.9), 2)
        fwd = operator_matrix(lambda v: model.apply(Image(v)).data, (1, 6, 6), (1, 3, 3))
        adj = operator_matrix(lambda v: model.adjoint(Image(v)).data, (1, 3, 3), (1, 6, 6))
        np.testing.assert_allclose(adj, fwd.T, atol=1e-12)


class TestDataGradient:
    def test_identity_model_is_x_minus_b(self):
        rng = np.random.default_rng(6)
        x = random_image(rng, 1, 5, 5)
        b = random_image(rng, 1, 5, 5)
        g = data_gradient(Deblur(identity_kernel()), x, b)
        np.testing.assert_allclose(g.data, x.data - b.data, atol=1e-13)

    def test_zero_residual_gives_zero_gradient(self):
        rng = np.random.default_rng(7)
        model = Deblur(gaussian_kernel(5, 1.0))
        x = random_image(rng, 1, 8, 8)
        b = model.apply(x)
        g = data_gradient(model, x, b)
        np.testing.assert_allclose(g.data, 0.0, atol=1e-12)

    def test_shape_mismatch(self):
        model = Deblur(identity_kernel())
        with pytest.raises(ShapeMismatchError):
            data_gradient(model, Image(np.zeros((1, 4, 4))), Image(np.zeros((1, 5, 4))))

    @pytest.mark.parametrize("model_fn", [
        lambda: Deblur(gaussian_kernel(3, 0.8)),
        lambda: Superresolve(gaussian_kernel(3, 0.8), 2),
    ])
    def test_matches_central_finite_differences(self, model_fn):
        # directional derivative of f(x) = 0.5||Ax-b||^2 via central differences
        rng = np.random.default_rng(8)
        model = model_fn()
        for _ in range(5):
            x = rng.random((1, 8, 8))
            b = rng.random(model.output_shape((1, 8, 8)))
            v = rng.standard_normal((1, 8, 8))
            v /= np.linalg.norm(v)
            g = data_gradient(model, Image(x), Image(b))
            h = 1e-5

            def f(arr):
                r = model.apply(Image(arr)).data - b
                return 0.5 * float(np.vdot(r, r))

            fd = (f(x + h * v) - f(x - h * v)) / (2 * h)
            an = float(np.vdot(g.data, v))
            assert fd == pytest.approx(an, rel=1e-6, abs=1e-10)


class TestSimulateMeasurement:
    def test_zero_noise_is_exact_forward(self):
        rng = np.random.default_rng(9)
        model = Deblur(gaussian_kernel(5, 1.0))
        x = random_image(rng, 1, 8, 8)
        m = simulate_measurement(model, x, 0.0, seed=5)
        np.testing.assert_array_equal(m.b.data, model.apply(x).data)

    def test_same_seed_bit_identical(self):
        rng = np.random.default_rng(10)
        model = Deblur(gaussian_kernel(5, 1.0))
        x = random_image(rng, 1, 16, 16)
        m1 = simulate_measurement(model, x, 5 / 255, seed=77)
        m2 = simulate_measurement(model, x, 5 / 255, seed=77)
        assert m1.b.data.tobytes() == m2.b.data.tobytes()
        m3 = simulate_measurement(model, x, 5 / 255, seed=78)
        assert m1.b.data.tobytes() != m3.b.data.tobytes()

    def test_noise_variance_within_5pct(self):
        rng = np.random.default_rng(11)
        model = Deblur(identity_kernel())
        x = Image(rng.random((1, 256, 256)))
        sigma = 5 / 255
        m = simulate_measurement(model, x, sigma, seed=3)
        noise = m.b.data - x.data
        assert noise.var() == pytest.approx(sigma**2, rel=0.05)

    def test_negative_sigma_rejected(self):
        model = Deblur(identity_kernel())
        with pytest.raises(ValueError):
            simulate_measurement(model, Image(np.zeros((1, 4, 4))), -0.1, 0)


class TestLipschitzEstimate:
    def test_identity_model(self):
        est = estimate_gradient_lipschitz(Deblur(identity_kernel()), (1, 8, 8), 20, 0)
        assert est == pytest.approx(1.0, abs=1e-10)

    def test_normalized_blur_bounded_by_dft_oracle(self):
        k = gaussian_kernel(9, 1.0)
        exact = float((np.abs(kernel_transfer(k, 32, 32)) ** 2).max())
        est = estimate_gradient_lipschitz(Deblur(k), (1, 32, 32), 50, 0)
        assert est <= exact + 1e-10
        assert est <= 1.0 + 1e-10  # circulant with unit row sums
        assert est >= 0.9 * exact  # power iteration should be close by 50 steps

    def test_pure_decimation(self):
        est = estimate_gradient_lipschitz(Superresolve(identity_kernel(), 2), (1, 8, 8), 10, 1)
        assert est == pytest.approx(1.0, abs=1e-10)

    def test_non_decreasing_in_iterations(self):
        model = Deblur(gaussian_kernel(9, 1.2))
        values = [estimate_gradient_lipschitz(model, (1, 24, 24), n, seed=4) for n in (1, 3, 5, 10, 25, 50)]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_iterations_validated(self):
        with pytest.raises(ValueError):
            estimate_gradient_lipschitz(Deblur(identity_kernel()), (1, 4, 4), 0, 0)


class TestBicubicUpsample:
    def test_constant_reproduction(self):
        img = Image(np.full((2, 5, 7), 0.3))
        out = bicubic_upsample(img, 2)
        assert out.shape == (2, 10, 14)
        np.testing.assert_allclose(out.data, 0.3, atol=1e-12)

    @pytest.mark.parametrize("s", [2, 3])
    def test_knot_pass_through(self, s):
        rng = np.random.default_rng(12)
        img = random_image(rng, 1, 6, 8)
        up = bicubic_upsample(img, s)
        np.testing.assert_allclose(up.data[:, ::s, ::s], img.data, atol=1e-9)

    def test_linear_ramp_interior(self):
        # degree-1 reproduction away from the periodic seam
        n, s = 12, 2
        ramp = np.tile(np.arange(n, dtype=float), (n, 1))
        up = bicubic_upsample(Image(ramp), s).data[0]
        expected = np.arange(n * s) / s
        interior = slice(2 * s, (n - 2) * s)
        np.testing.assert_allclose(up[interior, interior], np.tile(expected[interior], ((n - 4) * s, 1)), atol=1e-12)

    def test_factor_validated(self):
        with pytest.raises(ValueError):
            bicubic_upsample(Image(np.zeros((1, 4, 4))), 1)
