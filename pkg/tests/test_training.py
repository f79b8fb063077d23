import numpy as np
import pytest

from pointsource._random import named_rng
from pointsource.domain import sample_boundary, sample_interior
from pointsource.exceptions import DivergenceError
from pointsource.kernels import KernelKind
from pointsource.metrics import loss_with_regular, regular_part_error
from pointsource.mlp import MlpParams
from pointsource.sources import SourceSet
from pointsource.synthetic import REGULAR_PARTS, GroundTruth, noisy_cauchy, trace_cauchy
from pointsource.training import (Adam, LossWeights, TrainConfig, empirical_loss, initial_state,
                                  loss_and_gradients, reflect_into_box, train)


def zero_nets(kernel, d=2):
    cfg = TrainConfig()
    return [MlpParams(cfg.arch_for(d), np.zeros(cfg.arch_for(d).n_params))
            for _ in range(2 if kernel.is_complex else 1)]


@pytest.fixture(scope="module")
def pure_sources():
    return GroundTruth(KernelKind("laplace", 2), SourceSet([1.0, 2.0], [[0.3, 0.2], [-0.4, -0.5]]),
                       REGULAR_PARTS["zero"])


class TestLossValues:
    def test_zero_at_truth(self, pure_sources):
        dom = pure_sources.domain
        data = trace_cauchy(pure_sources, sample_boundary(dom, 400, "gauss_legendre"))
        inter = sample_interior(dom, 200, np.random.default_rng(0))
        nets = zero_nets(pure_sources.kernel)
        terms, (g_theta, g_c, g_X) = loss_and_gradients(nets, pure_sources.sources, inter, data,
                                                       LossWeights(), pure_sources.kernel, dom.volume)
        assert terms.total <= 1e-24
        assert np.max(np.abs(g_theta[0])) <= 1e-8
        assert np.max(np.abs(g_c)) <= 1e-8 and np.max(np.abs(g_X)) <= 1e-8

    def test_boundary_terms_match_closed_form(self, example1, exact_gauss_data):
        # zero network, exact sources: misfits are the traces of x^2 - y^2
        inter = sample_interior(example1.domain, 100, np.random.default_rng(0))
        terms = empirical_loss(zero_nets(example1.kernel), example1.sources, inter, exact_gauss_data,
                               LossWeights(10, 10), example1.kernel, 4.0)
        assert terms.residual == 0
        assert terms.dirichlet == pytest.approx(10 * 64 / 15, rel=1e-10)
        assert terms.neumann == pytest.approx(10 * 32.0, rel=1e-10)

    def test_weights_scale_linearly(self, example1, exact_gauss_data):
        inter = sample_interior(example1.domain, 100, np.random.default_rng(0))
        args = (zero_nets(example1.kernel), example1.sources, inter, exact_gauss_data)
        a = empirical_loss(*args, LossWeights(1, 1), example1.kernel, 4.0)
        b = empirical_loss(*args, LossWeights(3, 7), example1.kernel, 4.0)
        assert b.dirichlet == pytest.approx(3 * a.dirichlet, rel=1e-13)
        assert b.neumann == pytest.approx(7 * a.neumann, rel=1e-13)

    def test_exact_regular_part_has_zero_loss(self, example1, exact_gauss_data):
        inter = sample_interior(example1.domain, 500, np.random.default_rng(1))
        terms = loss_with_regular(example1.regular_part, example1.sources, inter, exact_gauss_data,
                                  LossWeights(), example1.kernel, 4.0)
        assert terms.total <= 1e-20

    def test_unobserved_nodes_drop_out(self, example1, exact_gauss_data):
        inter = sample_interior(example1.domain, 100, np.random.default_rng(0))
        part = exact_gauss_data.subset(slice(None))
        part.f, part.g = part.f.copy(), part.g.copy()
        part.f[:] = np.nan
        terms = empirical_loss(zero_nets(example1.kernel), example1.sources, inter, part,
                               LossWeights(), example1.kernel, 4.0)
        assert terms.dirichlet == 0 and terms.neumann > 0

    def test_invalid_weights(self):
        with pytest.raises(ValueError):
            LossWeights(0.0, 1.0)


class TestGradients:
    @pytest.mark.parametrize("name", ["example1", "example3"])
    def test_against_finite_differences(self, name, example1, example3):
        gt = {"example1": example1, "example3": example3}[name]
        dom = gt.domain
        data = noisy_cauchy(trace_cauchy(gt, sample_boundary(dom, 300, "monte_carlo", np.random.default_rng(1))),
                            0.02, np.random.default_rng(2))
        data.f[:50] = np.nan
        data.g[50:80] = np.nan
        nets, src = initial_state(TrainConfig(), gt.kernel, dom, gt.sources.M)
        for p in nets:
            p.theta += np.random.default_rng(3).normal(0, 0.3, p.theta.shape)
        inter = sample_interior(dom, 200, np.random.default_rng(4))
        w = LossWeights(10, 10)
        _, (g_theta, g_c, g_X) = loss_and_gradients(nets, src, inter, data, w, gt.kernel, dom.volume)

        def L():
            return empirical_loss(nets, src, inter, data, w, gt.kernel, dom.volume).total

        h = 1e-6
        fd = []
        for arr in (src.intensities, src.locations.reshape(-1), nets[-1].theta[:40]):
            for i in range(arr.size):
                o = arr.flat[i]
                arr.flat[i] = o + h
                a = L()
                arr.flat[i] = o - h
                b = L()
                arr.flat[i] = o
                fd.append((a - b) / (2 * h))
        fd = np.array(fd)
        an = np.concatenate([g_c, g_X.ravel(), g_theta[-1][:40]])
        assert np.max(np.abs(fd - an) / np.maximum(np.abs(fd), 1.0)) <= 1e-6

    def test_no_sources(self, example1, exact_grid_data):
        inter = sample_interior(example1.domain, 50, np.random.default_rng(0))
        nets, src = initial_state(TrainConfig(), example1.kernel, example1.domain, 0)
        _, (_, g_c, g_X) = loss_and_gradients(nets, src, inter, exact_grid_data, LossWeights(),
                                              example1.kernel, 4.0)
        assert g_c.shape == (0,) and g_X.shape == (0, 2)


class TestOptimiser:
    def test_zero_gradient_keeps_parameters(self):
        x = np.array([1.0, -2.0])
        Adam({"a": 0.1}).step({"a": x}, {"a": np.zeros(2)})
        np.testing.assert_array_equal(x, [1.0, -2.0])

    def test_first_step_is_learning_rate(self):
        x = np.zeros(3)
        Adam({"a": 0.1}).step({"a": x}, {"a": np.array([2.0, -5.0, 0.3])})
        np.testing.assert_allclose(x, [-0.1, 0.1, -0.1], rtol=1e-6)

    def test_groups_use_own_rates(self):
        a, b = np.zeros(1), np.zeros(1)
        opt = Adam({"a": 1e-3, "b": 6e-3})
        for _ in range(5):
            opt.step({"a": a, "b": b}, {"a": np.ones(1), "b": np.ones(1)})
        np.testing.assert_allclose(a, [-5e-3], rtol=1e-6)
        np.testing.assert_allclose(b, [-3e-2], rtol=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            Adam({"a": 0.1}).step({"a": np.zeros(2)}, {"a": np.zeros(3)})

    def test_reflection(self):
        X = np.array([[0.95, -1.0], [0.0, 0.85]])
        reflect_into_box(X, np.array([-0.9, -0.9]), np.array([0.9, 0.9]))
        np.testing.assert_allclose(X, [[0.85, -0.8], [0.0, 0.85]])


class TestTrainLoop:
    def small_config(self, **kw):
        base = dict(hidden_layers=(8,), n_interior=200, iterations=20, log_every=5, n_sources=4)
        base.update(kw)
        return TrainConfig(**base)

    def test_report_shapes(self, example1, exact_grid_data):
        rep = train(self.small_config(), exact_grid_data, example1.kernel, gt=example1)
        assert list(rep.iterations) == [0, 5, 10, 15, 20]
        assert rep.losses.shape == (5, 4)
        assert rep.intensities.shape == (5, 4) and rep.locations.shape == (5, 4, 2)
        assert rep.regular_error.shape == (5,)
        np.testing.assert_allclose(rep.losses[:, 0], rep.losses[:, 1:].sum(axis=1))

    def test_locations_stay_in_shrunk_box(self, example1, exact_grid_data):
        rep = train(self.small_config(lr_sources=0.3), exact_grid_data, example1.kernel)
        assert np.all(np.abs(rep.locations) <= 0.9 + 1e-12)

    def test_deterministic(self, example1, exact_grid_data):
        a = train(self.small_config(seed=3), exact_grid_data, example1.kernel)
        b = train(self.small_config(seed=3), exact_grid_data, example1.kernel)
        np.testing.assert_array_equal(a.losses, b.losses)
        np.testing.assert_array_equal(a.locations, b.locations)

    def test_divergence_guard(self, example1, exact_grid_data):
        with pytest.raises(DivergenceError):
            train(self.small_config(divergence_factor=1e-3), exact_grid_data, example1.kernel)

    def test_count_required(self, example1, exact_grid_data):
        with pytest.raises(ValueError):
            train(self.small_config(n_sources=None), exact_grid_data, example1.kernel)

    def test_minibatch(self, example1, exact_grid_data):
        rep = train(self.small_config(batch_size=100), exact_grid_data, example1.kernel)
        assert np.all(np.isfinite(rep.losses))

    @pytest.mark.slow
    def test_recovers_harmonic_part_without_sources(self):
        gt = GroundTruth(KernelKind("laplace", 2), SourceSet([], np.zeros((0, 2))),
                         REGULAR_PARTS["harmonic_quadratic"])
        data = trace_cauchy(gt, sample_boundary(gt.domain, 800, "facet_grid"))
        cfg = TrainConfig(hidden_layers=(20, 20), n_interior=1000, iterations=3000, lr_theta=3e-3,
                          n_sources=0, log_every=500)
        rep = train(cfg, data, gt.kernel, gt=gt)
        err, _ = regular_part_error(rep.nets, gt, 20000, named_rng(0, "monitor"))
        assert err <= 1e-2
