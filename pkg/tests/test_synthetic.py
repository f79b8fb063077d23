import numpy as np
import pytest

from pointsource.domain import BoundarySample
from pointsource.kernels import KernelKind, phi
from pointsource.sources import CauchyData, SourceSet
from pointsource.synthetic import (REGULAR_PARTS, GroundTruth, NoiseSpec, add_noise, ground_truth_registry,
                                   noisy_cauchy, trace_cauchy)


def _single(point, normal):
    p = np.atleast_2d(point)
    return BoundarySample(p, np.atleast_2d(normal), np.ones(1), np.zeros(1, int))


def fd_laplacian(fun, x, h=1e-4):
    out = -2 * len(x) * fun(x[None])[0]
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        out += fun((x + e)[None])[0] + fun((x - e)[None])[0]
    return out / h**2


class TestRegularParts:
    @pytest.mark.parametrize("name, d, k2", [("harmonic_quadratic", 2, 0.0), ("dim10_quadratic", 10, 0.0),
                                             ("plane_wave_sine", 3, 1.0)])
    def test_homogeneous_equation(self, name, d, k2, rng):
        part = REGULAR_PARTS[name]
        x = rng.uniform(-1, 1, size=(50, d))
        np.testing.assert_allclose(part.laplacian(x) + k2 * part.value(x), 0.0, atol=1e-10)

    @pytest.mark.parametrize("name, d", [("harmonic_quadratic", 2), ("dim10_quadratic", 10),
                                         ("plane_wave_sine", 3)])
    def test_closed_forms_match_differences(self, name, d, rng):
        part = REGULAR_PARTS[name]
        x = rng.uniform(-0.9, 0.9, size=d)
        h = 1e-6
        fd = np.array([(part.value((x + h * e)[None])[0] - part.value((x - h * e)[None])[0]) / (2 * h)
                       for e in np.eye(d)])
        np.testing.assert_allclose(part.gradient(x[None])[0], fd, atol=1e-8)
        assert fd_laplacian(part.value, x) == pytest.approx(part.laplacian(x[None])[0], abs=1e-5)


class TestTrace:
    def test_regular_part_only(self):
        gt = GroundTruth(KernelKind("laplace", 2), SourceSet.empty(2), REGULAR_PARTS["harmonic_quadratic"])
        data = trace_cauchy(gt, _single([1.0, 0.5], [1.0, 0.0]))
        assert data.f[0] == pytest.approx(0.75)
        assert data.g[0] == pytest.approx(2.0)

    def test_example1_summation(self, example1):
        y = np.array([1.0, 0.0])
        data = trace_cauchy(example1, _single(y, [1.0, 0.0]))
        kern = example1.kernel
        ref = 1.0 + sum(c * phi(kern, y - x) for c, x in zip(example1.sources.intensities,
                                                             example1.sources.locations))
        assert data.f[0] == pytest.approx(ref, rel=1e-14)

    def test_helmholtz_plane_wave(self):
        gt = GroundTruth(KernelKind("helmholtz", 3, 1.0), SourceSet.empty(3), REGULAR_PARTS["plane_wave_sine"])
        data = trace_cauchy(gt, _single([1.0, 1.0, 1.0], [1.0, 0.0, 0.0]))
        assert data.f[0] == pytest.approx(np.sin(np.sqrt(3)))

    def test_sources_too_close_to_boundary(self):
        with pytest.raises(ValueError):
            GroundTruth(KernelKind("laplace", 2), SourceSet([1.0], [[0.95, 0.0]]),
                        REGULAR_PARTS["zero"], gamma=0.1)


class TestNoise:
    def test_zero_noise_identity(self):
        v = np.array([1.0, -2.0, 3.5])
        np.testing.assert_array_equal(add_noise(v, NoiseSpec(0.0, 1)), v)

    def test_range(self):
        out = add_noise(np.ones(1000), NoiseSpec(0.02, 3))
        assert out.min() >= 0.98 and out.max() <= 1.02

    def test_unbiased(self):
        v = np.linspace(1, 2, 100_000)
        out = add_noise(v, NoiseSpec(0.02, 11))
        assert abs(np.mean(out / v - 1)) < 3e-4

    def test_negative(self):
        with pytest.raises(ValueError):
            add_noise(np.ones(3), -0.1)

    def test_reproducible(self):
        v = np.arange(1.0, 6.0)
        np.testing.assert_array_equal(add_noise(v, NoiseSpec(0.1, 5)), add_noise(v, NoiseSpec(0.1, 5)))

    def test_nan_passes_through(self):
        out = add_noise(np.array([1.0, np.nan]), 0.1, np.random.default_rng(0))
        assert np.isnan(out[1]) and np.isfinite(out[0])

    def test_independent_on_both_traces(self, exact_grid_data):
        noisy = noisy_cauchy(exact_grid_data, 0.05, np.random.default_rng(1))
        rf = noisy.f / exact_grid_data.f - 1
        rg = noisy.g / exact_grid_data.g - 1
        assert np.max(np.abs(rf)) <= 0.05 + 1e-12 and np.max(np.abs(rg)) <= 0.05 + 1e-12
        assert abs(np.corrcoef(rf, rg)[0, 1]) < 0.1


class TestRegistry:
    def test_example1(self):
        gt = ground_truth_registry("example1")
        np.testing.assert_array_equal(gt.sources.intensities, [1, 2, 3, 4])
        np.testing.assert_array_equal(gt.sources.locations, [[0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]])
        assert gt.kernel == KernelKind("laplace", 2)

    def test_example2(self):
        gt = ground_truth_registry("example2")
        assert gt.kernel.d == 10 and gt.sources.M == 2
        np.testing.assert_array_equal(gt.sources.intensities, [100, 100])
        np.testing.assert_array_equal(gt.sources.locations[:, :2], [[-0.5, -0.5], [0.5, 0.5]])
        assert not gt.sources.locations[:, 2:].any()

    def test_example3(self):
        gt = ground_truth_registry("example3")
        assert gt.kernel == KernelKind("helmholtz", 3, 1.0)
        np.testing.assert_array_equal(gt.sources.intensities, [5, 2, -3])
        np.testing.assert_array_equal(gt.sources.locations, [[-0.6, -0.2, 0.3], [-0.7, 0.4, -0.2], [0, 0.1, 0.9]])

    def test_unknown(self):
        with pytest.raises(KeyError):
            ground_truth_registry("example4")

    def test_round_trip(self, example3):
        back = GroundTruth.from_dict(example3.to_dict())
        assert back.kernel == example3.kernel
        np.testing.assert_array_equal(back.sources.locations, example3.sources.locations)
        assert back.regular_part.name == "plane_wave_sine"


class TestContainers:
    def test_sourceset_validation(self):
        with pytest.raises(ValueError):
            SourceSet([1.0, 2.0], [[0.0, 0.0]])

    def test_sourceset_complex_round_trip(self):
        s = SourceSet(np.array([1 + 2j, -0.5j]), [[0.1, 0.2], [0.3, 0.4]])
        back = SourceSet.from_dict(s.to_dict())
        np.testing.assert_array_equal(back.intensities, s.intensities)

    def test_cauchy_rows(self):
        data = CauchyData(np.zeros((3, 2)), np.tile([1.0, 0.0], (3, 1)), np.ones(3),
                          [1.0, np.nan, 2.0], [np.nan, 1.0, 1.0])
        assert data.dirichlet_rows.tolist() == [0, 2]
        assert data.neumann_rows.tolist() == [1, 2]
        assert not data.is_full
        with pytest.raises(ValueError):
            CauchyData(np.zeros((3, 2)), np.zeros((2, 2)), np.ones(3), np.ones(3), np.ones(3))
