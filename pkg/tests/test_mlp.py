import numpy as np
import pytest

from pointsource.mlp import MlpArch, MlpParams, backprop_composite, forward_with_derivatives, init_params


def fd_derivatives(params, x, h=1e-4):
    d = x.shape[1]
    v = forward_with_derivatives(params, x, 0).value
    grad = np.zeros((x.shape[0], params.arch.output_dim, d))
    lap = np.zeros((x.shape[0], params.arch.output_dim))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        vp = forward_with_derivatives(params, x + e, 0).value
        vm = forward_with_derivatives(params, x - e, 0).value
        grad[:, :, i] = (vp - vm) / (2 * h)
        lap += (vp - 2 * v + vm) / h**2
    return grad, lap


class TestArchitecture:
    def test_parameter_count(self):
        assert MlpArch.parse("2-20-20-1").n_params == 501
        assert str(MlpArch.parse("3-5-1")) == "3-5-1"

    def test_invalid(self):
        with pytest.raises(ValueError):
            MlpArch((2,))
        with pytest.raises(ValueError):
            MlpArch((2, 0, 1))
        with pytest.raises(ValueError):
            MlpParams(MlpArch((2, 1)), np.zeros(5))

    def test_init_biases_zero(self, rng):
        p = init_params(MlpArch.parse("2-20-20-1"), rng)
        for W, b in p.layers():
            assert np.all(b == 0)
            assert np.max(np.abs(W)) <= np.sqrt(6.0 / sum(W.shape))


class TestForward:
    def test_zero_weights(self, rng):
        p = MlpParams(MlpArch.parse("2-20-20-1"), np.zeros(501))
        ev = forward_with_derivatives(p, rng.uniform(-1, 1, (7, 2)))
        assert np.all(ev.value == 0) and np.all(ev.gradient == 0) and np.all(ev.laplacian == 0)

    def test_affine_network(self, rng):
        W, b = np.array([[1.5, -2.0]]), np.array([0.25])
        p = MlpParams(MlpArch((2, 1)), np.concatenate([W.ravel(), b]))
        x = rng.uniform(-1, 1, (5, 2))
        ev = forward_with_derivatives(p, x)
        np.testing.assert_allclose(ev.value[:, 0], x @ W[0] + b[0], rtol=1e-15)
        np.testing.assert_allclose(ev.gradient[:, 0, :], np.broadcast_to(W[0], (5, 2)))
        assert np.all(ev.laplacian == 0)

    def test_single_tanh_unit(self):
        # v(x) = tanh(a.x): grad = s a, laplacian = -2 t s |a|^2
        a = np.array([0.7, -0.4])
        theta = np.concatenate([a, [0.0], [1.0], [0.0]])
        p = MlpParams(MlpArch((2, 1, 1)), theta)
        x = np.array([[0.3, 0.8]])
        t = np.tanh(x @ a)
        s = 1 - t**2
        ev = forward_with_derivatives(p, x)
        np.testing.assert_allclose(ev.gradient[0, 0], s[0] * a, rtol=1e-14)
        np.testing.assert_allclose(ev.laplacian[0, 0], -2 * t[0] * s[0] * a @ a, rtol=1e-14)

    @pytest.mark.parametrize("arch", ["2-20-20-1", "3-8-8-8-2", "10-6-1"])
    def test_against_finite_differences(self, arch, rng):
        p = init_params(MlpArch.parse(arch), rng)
        x = rng.uniform(-1, 1, (6, p.arch.input_dim))
        ev = forward_with_derivatives(p, x)
        g, lap = fd_derivatives(p, x)
        np.testing.assert_allclose(ev.gradient, g, atol=1e-7)
        np.testing.assert_allclose(ev.laplacian, lap, atol=1e-4)

    def test_orders_agree(self, rng):
        p = init_params(MlpArch.parse("2-10-10-1"), rng)
        x = rng.uniform(-1, 1, (4, 2))
        ev0, ev1, ev2 = (forward_with_derivatives(p, x, o) for o in (0, 1, 2))
        np.testing.assert_array_equal(ev0.value, ev2.value)
        np.testing.assert_allclose(ev1.gradient, ev2.gradient, rtol=1e-15)
        assert ev0.gradient is None and ev1.laplacian is None

    def test_dimension_mismatch(self, rng):
        p = init_params(MlpArch.parse("2-3-1"), rng)
        with pytest.raises(ValueError):
            forward_with_derivatives(p, np.zeros((2, 3)))


class TestBackprop:
    def _fd_theta(self, p, x, fn, h=1e-6):
        out = np.zeros(p.n_params)
        for i in range(p.n_params):
            q = p.copy()
            q.theta[i] += h
            fp = fn(forward_with_derivatives(q, x))
            q.theta[i] -= 2 * h
            fm = fn(forward_with_derivatives(q, x))
            out[i] = (fp - fm) / (2 * h)
        return out

    def test_value_squared(self, rng):
        p = init_params(MlpArch.parse("2-6-6-1"), rng)
        x = rng.uniform(-1, 1, (9, 2))
        ev = forward_with_derivatives(p, x)
        g = backprop_composite(p, ev, d_value=2 * ev.value)
        ref = self._fd_theta(p, x, lambda e: np.sum(e.value**2))
        np.testing.assert_allclose(g, ref, atol=1e-6)

    def test_laplacian_and_gradient(self, rng):
        p = init_params(MlpArch.parse("2-6-6-1"), rng)
        x = rng.uniform(-1, 1, (9, 2))
        w = rng.normal(size=(9, 1, 2))
        ev = forward_with_derivatives(p, x)
        g = backprop_composite(p, ev, d_gradient=w, d_laplacian=2 * ev.laplacian)
        ref = self._fd_theta(p, x, lambda e: np.sum(e.laplacian**2) + np.sum(w * e.gradient))
        np.testing.assert_allclose(g, ref, atol=1e-6)

    def test_two_channels_independent(self, rng):
        p = init_params(MlpArch.parse("2-5-2"), rng)
        x = rng.uniform(-1, 1, (4, 2))
        ev = forward_with_derivatives(p, x)
        dv = np.zeros_like(ev.value)
        dv[:, 0] = 1.0
        g = backprop_composite(p, ev, d_value=dv)
        # the second output row of the last layer does not touch channel 0
        w0, (n_out, n_in), b0 = p.arch.offsets()[-1]
        last_W = g[w0:b0].reshape(n_out, n_in)
        assert np.all(last_W[1] == 0) and g[b0 + 1] == 0

    def test_order_guard(self, rng):
        p = init_params(MlpArch.parse("2-3-1"), rng)
        ev = forward_with_derivatives(p, np.zeros((1, 2)), 0)
        with pytest.raises(ValueError):
            backprop_composite(p, ev, d_laplacian=np.zeros((1, 1)))
