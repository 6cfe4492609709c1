import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from betavae import autodiff as ad
from betavae.autodiff import Tensor
from betavae.autodiff.gradcheck import grad_check, numerical_grad
from betavae.autodiff.init import dense_weight, zeros
from betavae.rng import Rng


def naive_conv2d(x, k, stride, pad):
    n, c, h, w = x.shape
    f, _, kh, kw = k.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((n, f, ho, wo))
    for b in range(n):
        for o in range(f):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ci in range(c):
                        for di in range(kh):
                            for dj in range(kw):
                                acc += xp[b, ci, i * stride + di, j * stride + dj] * k[o, ci, di, dj]
                    out[b, o, i, j] = acc
    return out


def naive_deconv2d(x, k, stride, pad):
    n, c, h, w = x.shape
    _, f, kh, kw = k.shape
    ho = (h - 1) * stride + kh
    wo = (w - 1) * stride + kw
    out = np.zeros((n, f, ho, wo))
    for b in range(n):
        for ci in range(c):
            for i in range(h):
                for j in range(w):
                    for o in range(f):
                        out[b, o, i * stride:i * stride + kh, j * stride:j * stride + kw] += x[b, ci, i, j] * k[ci, o]
    return out[:, :, pad:ho - pad, pad:wo - pad]


@pytest.fixture
def rng():
    return np.random.default_rng(0)


class TestMatmul:
    def test_identity(self):
        out = ad.matmul(Tensor(np.eye(2)), Tensor([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_array_equal(out.data, [[1, 2], [3, 4]])

    def test_hand_product(self):
        out = ad.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
        assert out.data.tolist() == [[11.0]]

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ad.DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
            ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))

    def test_gradients_match_finite_differences(self, rng):
        a0, b0 = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
        assert grad_check(lambda a: ad.sum(ad.matmul(a, Tensor(b0))), a0) < 1e-6
        assert grad_check(lambda b: ad.sum(ad.matmul(Tensor(a0), b)), b0) < 1e-6


class TestConv:
    def test_identity_kernel(self, rng):
        x = rng.normal(size=(1, 1, 3, 3))
        out = ad.conv2d(Tensor(x), Tensor(np.ones((1, 1, 1, 1))), 1, 0)
        np.testing.assert_array_equal(out.data, x)

    def test_constant_sums(self):
        out = ad.conv2d(Tensor(np.ones((1, 1, 4, 4))), Tensor(np.ones((1, 1, 2, 2))), 2, 0)
        np.testing.assert_array_equal(out.data, np.full((1, 1, 2, 2), 4.0))

    @pytest.mark.parametrize("stride,pad", [(1, 0), (2, 1), (1, 2), (2, 0)])
    def test_matches_naive_loops(self, rng, stride, pad):
        x = rng.normal(size=(2, 3, 8, 8))
        k = rng.normal(size=(3, 3, 4, 4) if stride == 2 else (3, 3, 3, 3))
        if (8 + 2 * pad - k.shape[2]) % stride:
            pytest.skip("non-integral configuration")
        out = ad.conv2d(Tensor(x), Tensor(k), stride, pad)
        np.testing.assert_allclose(out.data, naive_conv2d(x, k, stride, pad), atol=1e-10, rtol=0)

    def test_gradients(self, rng):
        x0 = rng.normal(size=(2, 3, 8, 8))
        k0 = rng.normal(size=(2, 3, 4, 4))
        w = rng.normal(size=(2, 2, 4, 4))  # random projection avoids symmetric cancellation
        loss = lambda x, k: ad.sum(ad.mul(ad.conv2d(x, k, 2, 1), Tensor(w)))
        assert grad_check(lambda x: loss(x, Tensor(k0)), x0) < 1e-5
        assert grad_check(lambda k: loss(Tensor(x0), k), k0) < 1e-5

    def test_non_integral_extent(self):
        with pytest.raises(ad.ConfigurationError):
            ad.conv2d(Tensor(np.zeros((1, 1, 5, 5))), Tensor(np.zeros((1, 1, 2, 2))), 2, 0)

    def test_channel_mismatch(self):
        with pytest.raises(ad.DimensionError):
            ad.conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 2, 2))), 1, 0)


class TestDeconv:
    def test_single_site_scatter(self):
        out = ad.deconv2d(Tensor(np.full((1, 1, 1, 1), 3.0)), Tensor(np.ones((1, 1, 2, 2))), 2, 0)
        np.testing.assert_array_equal(out.data, np.full((1, 1, 2, 2), 3.0))

    def test_shape_round_trip(self):
        x = Tensor(np.zeros((1, 1, 64, 64)))
        down = ad.conv2d(x, Tensor(np.zeros((1, 1, 4, 4))), 2, 1)
        assert down.shape[2:] == (32, 32)
        up = ad.deconv2d(down, Tensor(np.zeros((1, 1, 4, 4))), 2, 1)
        assert up.shape[2:] == (64, 64)

    @pytest.mark.parametrize("stride,pad", [(2, 1), (1, 0), (2, 0)])
    def test_matches_naive_scatter(self, rng, stride, pad):
        x = rng.normal(size=(2, 3, 5, 5))
        k = rng.normal(size=(3, 2, 4, 4))
        out = ad.deconv2d(Tensor(x), Tensor(k), stride, pad)
        np.testing.assert_allclose(out.data, naive_deconv2d(x, k, stride, pad), atol=1e-10, rtol=0)

    def test_adjoint_of_conv(self, rng):
        # <conv(x), y> == <x, deconv(y)> for the same kernel
        x = rng.normal(size=(2, 3, 8, 8))
        k = rng.normal(size=(4, 3, 4, 4))
        y = rng.normal(size=(2, 4, 4, 4))
        lhs = np.sum(ad.conv2d(Tensor(x), Tensor(k), 2, 1).data * y)
        rhs = np.sum(x * ad.deconv2d(Tensor(y), Tensor(k), 2, 1).data)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_gradients(self, rng):
        x0 = rng.normal(size=(1, 2, 6, 6))
        k0 = rng.normal(size=(2, 3, 4, 4))
        w = rng.normal(size=(1, 3, 12, 12))
        loss = lambda x, k: ad.sum(ad.mul(ad.deconv2d(x, k, 2, 1), Tensor(w)))
        assert grad_check(lambda x: loss(x, Tensor(k0)), x0) < 1e-5
        assert grad_check(lambda k: loss(Tensor(x0), k), k0) < 1e-5


class TestActivations:
    def test_relu_sign_cases(self):
        assert ad.apply_activation(Tensor([-1.0, 0.0, 2.0]), "relu").data.tolist() == [0, 0, 2]

    def test_symmetry_points(self):
        assert ad.apply_activation(Tensor([0.0]), "sigmoid").item() == 0.5
        assert ad.apply_activation(Tensor([0.0]), "tanh").item() == 0.0

    @pytest.mark.parametrize("kind", ["relu", "tanh", "sigmoid"])
    def test_gradients(self, rng, kind):
        x = rng.normal(size=7)
        if kind == "relu":
            x = np.where(np.abs(x) < 1e-3, 0.5, x)  # keep away from the kink
        assert grad_check(lambda t: ad.sum(ad.apply_activation(t, kind)), x) < 1e-6

    def test_unknown_kind(self):
        with pytest.raises(ad.ContractError):
            ad.apply_activation(Tensor([0.0]), "gelu")


class TestBackward:
    def test_sum_gives_ones(self):
        x = ad.parameter(np.zeros((2, 3, 4)))
        ad.backward(ad.sum(x))
        np.testing.assert_array_equal(x.grad, np.ones((2, 3, 4)))

    def test_quadratic(self):
        x = ad.parameter([1.0, -2.0])
        ad.backward(ad.sum(ad.mul(x, x)))
        assert x.grad.tolist() == [2.0, -4.0]

    def test_accumulates_until_reset(self):
        x = ad.parameter([1.0, 2.0])
        ad.backward(ad.sum(x))
        ad.backward(ad.sum(x))
        assert x.grad.tolist() == [2.0, 2.0]
        ad.zero_grads([x])
        ad.backward(ad.sum(x))
        assert x.grad.tolist() == [1.0, 1.0]

    def test_unreachable_leaf_gets_zero(self):
        x, y = ad.parameter([1.0]), ad.parameter([5.0, 6.0])
        gx, gy = ad.backward(ad.sum(x), [x, y])
        assert gx.tolist() == [1.0] and gy.tolist() == [0.0, 0.0]

    def test_non_scalar_loss(self):
        with pytest.raises(ad.ContractError):
            ad.backward(ad.parameter([1.0, 2.0]))

    def test_shared_subexpression(self):
        # d/dx sum(x*x + x) = 2x + 1 exercises fan-out accumulation
        x = ad.parameter([3.0, -1.0])
        ad.backward(ad.sum(ad.add(ad.mul(x, x), x)))
        assert x.grad.tolist() == [7.0, -1.0]

    def test_composed_mlp(self, rng):
        r = Rng(3)
        params = [dense_weight(r, 5, 4), zeros(4), dense_weight(r, 4, 3), zeros(3)]
        for p in params:
            p.data += 0.1 * rng.normal(size=p.shape)
        x = Tensor(rng.normal(size=(6, 5)))

        def loss():
            h = ad.tanh(ad.linear(x, params[0], params[1]))
            return ad.sum(ad.softplus(ad.linear(h, params[2], params[3])))

        ad.zero_grads(params)
        grads = [g.copy() for g in ad.backward(loss(), params)]
        for p, g in zip(params, grads):
            def f(t, p=p):
                saved = p.data
                p.data = t.data
                try:
                    return loss()
                finally:
                    p.data = saved
            num = numerical_grad(f, p.data.copy())
            rel = np.max(np.abs(g - num) / np.maximum(1e-8, np.abs(g) + np.abs(num)))
            assert rel < 1e-4

    def test_no_grad_builds_no_graph(self):
        x = ad.parameter([1.0])
        with ad.no_grad():
            y = ad.mul(x, x)
        assert not y.requires_grad and y.is_leaf


class TestGradCheck:
    def test_sum_is_exact(self, rng):
        assert grad_check(ad.sum, rng.normal(size=(3, 2))) < 1e-9

    def test_sigmoid(self, rng):
        assert grad_check(lambda t: ad.sum(ad.sigmoid(t)), rng.normal(size=10)) < 1e-6

    def test_detects_corrupted_backward(self, rng):
        def broken_square(t):
            out = ad.tensor._make(t.data ** 2, (t,), lambda g: (3.0 * g * t.data,), "bad")
            return ad.sum(out)
        assert grad_check(broken_square, rng.normal(size=5) + 2.0) > 1e-2


class TestInvariants:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_every_primitive_grad_checks(self, seed):
        g = np.random.default_rng(seed)
        x = g.normal(size=(3, 4))
        w = g.normal(size=(3, 4))
        weighted = lambda f: (lambda t: ad.sum(ad.mul(f(t), Tensor(w))))
        cases = [
            weighted(ad.exp), weighted(ad.tanh), weighted(ad.sigmoid), weighted(ad.softplus),
            weighted(ad.square), weighted(lambda t: ad.scale(t, 2.5)),
            lambda t: ad.sum(ad.log(ad.add_scalar(ad.square(t), 1.0))),
            lambda t: ad.sum(ad.matmul(t, Tensor(w.T))),
            lambda t: ad.sum(ad.mul(ad.add_bias(t, Tensor(w[0])), Tensor(w))),
            lambda t: ad.sum(ad.mul(ad.sum_rows(t), Tensor(w[:, 0]))),
            lambda t: ad.sum(ad.mul(ad.split_cols(t, 1)[1], Tensor(w[:, 1:]))),
        ]
        for f in cases:
            assert grad_check(f, x) < 1e-5

    @settings(max_examples=10, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(3, 8),
           st.integers(1, 3), st.integers(1, 2), st.integers(0, 1), st.integers(0, 1000))
    def test_conv_equals_naive(self, n, c, f, hw, k, stride, pad, seed):
        if (hw + 2 * pad - k) % stride or hw + 2 * pad < k:
            return
        g = np.random.default_rng(seed)
        x, kern = g.normal(size=(n, c, hw, hw)), g.normal(size=(f, c, k, k))
        out = ad.conv2d(Tensor(x), Tensor(kern), stride, pad).data
        np.testing.assert_allclose(out, naive_conv2d(x, kern, stride, pad), atol=1e-10, rtol=0)

    def test_rng_streams_identical(self):
        a, b = Rng(123), Rng(123)
        assert a.normal(100).tobytes() == b.normal(100).tobytes()
        assert dense_weight(Rng(7), 4, 3).data.tobytes() == dense_weight(Rng(7), 4, 3).data.tobytes()

    def test_rng_child_streams_independent_of_history(self):
        a, b = Rng(5), Rng(5)
        a.normal(10)
        assert a.child(3).normal(4).tobytes() == b.child(3).normal(4).tobytes()
        assert a.child(3).normal(4).tobytes() != a.child(4).normal(4).tobytes()
