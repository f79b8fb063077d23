"""Synthetic ground truths, exact Cauchy traces and multiplicative noise."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .domain import BoundarySample, DomainSpec, distance_to_boundary
from .kernels import KernelKind, enrichment
from .sources import CauchyData, SourceSet


@dataclass(frozen=True)
class RegularPart:
    """Closed-form regular part with value, gradient and Laplacian."""

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    laplacian: Callable[[np.ndarray], np.ndarray]


def _zero_value(x):
    return np.zeros(len(np.atleast_2d(x)))


def _zero_grad(x):
    return np.zeros_like(np.atleast_2d(x), dtype=float)


def _hq_value(x):
    x = np.atleast_2d(x)
    return x[:, 0] ** 2 - x[:, 1] ** 2


def _hq_grad(x):
    x = np.atleast_2d(x)
    g = np.zeros_like(x, dtype=float)
    g[:, 0] = 2 * x[:, 0]
    g[:, 1] = -2 * x[:, 1]
    return g


def _d10_value(x):
    x = np.atleast_2d(x)
    return -9 * x[:, 0] ** 2 + np.sum(x[:, 1:] ** 2, axis=1)


def _d10_grad(x):
    x = np.atleast_2d(x)
    g = 2 * x.astype(float)
    g[:, 0] = -18 * x[:, 0]
    return g


def _d10_lap(x):
    x = np.atleast_2d(x)
    return np.full(len(x), -18.0 + 2.0 * (x.shape[1] - 1))


_S3 = np.sqrt(3.0)


def _pw_value(x):
    x = np.atleast_2d(x)
    return np.sin(x[:, :3].sum(axis=1) / _S3)


def _pw_grad(x):
    x = np.atleast_2d(x)
    g = np.zeros_like(x, dtype=float)
    g[:, :3] = (np.cos(x[:, :3].sum(axis=1) / _S3) / _S3)[:, None]
    return g


def _pw_lap(x):
    return -_pw_value(x)


REGULAR_PARTS = {
    "zero": RegularPart("zero", _zero_value, _zero_grad, _zero_value),
    "harmonic_quadratic": RegularPart("harmonic_quadratic", _hq_value, _hq_grad, _zero_value),
    "dim10_quadratic": RegularPart("dim10_quadratic", _d10_value, _d10_grad, _d10_lap),
    "plane_wave_sine": RegularPart("plane_wave_sine", _pw_value, _pw_grad, _pw_lap),
}


@dataclass
class GroundTruth:
    kernel: KernelKind
    sources: SourceSet
    regular_part: RegularPart
    domain: DomainSpec = field(default=None)
    gamma: float = 0.1
    name: str = "custom"

    def __post_init__(self):
        if self.domain is None:
            self.domain = DomainSpec(self.kernel.d)
        if self.sources.M:
            if self.sources.d != self.kernel.d:
                raise ValueError("source dimension does not match the kernel")
            dist = distance_to_boundary(self.domain, self.sources.locations)
            if np.any(dist < self.gamma - 1e-12):
                raise ValueError(f"sources closer than gamma={self.gamma} to the boundary")

    def regular_value(self, x) -> np.ndarray:
        return self.regular_part.value(x)

    def solution(self, x, nan_at_poles: bool = False) -> np.ndarray:
        from .kernels import evaluate_singular_part
        return self.regular_part.value(x) + evaluate_singular_part(
            self.kernel, self.sources, x, nan_at_poles=nan_at_poles)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "operator": self.kernel.operator,
            "d": self.kernel.d,
            "k": self.kernel.k,
            "regular_part": self.regular_part.name,
            "gamma": self.gamma,
            "sources": self.sources.to_dict(),
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "GroundTruth":
        kernel = KernelKind(rec["operator"], int(rec["d"]), float(rec.get("k", 0.0)))
        return cls(kernel, SourceSet.from_dict({**rec["sources"], "d": kernel.d}),
                   REGULAR_PARTS[rec["regular_part"]], DomainSpec(kernel.d),
                   float(rec.get("gamma", 0.1)), rec.get("name", "custom"))


@dataclass(frozen=True)
class NoiseSpec:
    delta: float = 0.0
    seed: int = 0


def trace_cauchy(gt: GroundTruth, bs: BoundarySample) -> CauchyData:
    """Exact Dirichlet and Neumann traces of ``v + sum_j c_j phi_{x_j}``."""
    v = gt.regular_part.value(bs.points)
    dv = np.einsum("nd,nd->n", gt.regular_part.gradient(bs.points), bs.normals)
    F, dF = enrichment(gt.kernel, gt.sources, bs.points, bs.normals)
    return CauchyData(bs.points.copy(), bs.normals.copy(), bs.weights.copy(), v + F, dv + dF,
                      meta={"operator": gt.kernel.operator, "k": gt.kernel.k})


def add_noise(values, spec: NoiseSpec | float, rng: np.random.Generator | None = None):
    """``values * (1 + delta * xi)`` with ``xi ~ U[-1, 1]`` i.i.d.

    NaN entries (unobserved nodes) pass through unchanged.
    """
    if not isinstance(spec, NoiseSpec):
        spec = NoiseSpec(float(spec))
    if spec.delta < 0:
        raise ValueError("noise level must be nonnegative")
    values = np.asarray(values)
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    xi = rng.uniform(-1.0, 1.0, size=values.shape)
    if spec.delta == 0:
        return values.copy()
    return values * (1.0 + spec.delta * xi)


def noisy_cauchy(data: CauchyData, delta: float, rng: np.random.Generator, seed: int | None = None) -> CauchyData:
    """Independent multiplicative noise on ``f`` and ``g``."""
    spec = NoiseSpec(delta)
    out = CauchyData(data.points, data.normals, data.weights,
                     add_noise(data.f, spec, rng), add_noise(data.g, spec, rng),
                     delta=float(delta), seed=seed, meta=dict(data.meta))
    return out


_X41 = [[0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]]
_X42 = np.zeros((2, 10))
_X42[0, :2] = [-0.5, -0.5]
_X42[1, :2] = [0.5, 0.5]
_X43 = [[-0.6, -0.2, 0.3], [-0.7, 0.4, -0.2], [0.0, 0.1, 0.9]]


def ground_truth_registry(name: str) -> GroundTruth:
    """The three benchmark configurations (2d Poisson, 10d Poisson, 3d Helmholtz)."""
    if name == "example1":
        return GroundTruth(KernelKind("laplace", 2), SourceSet([1.0, 2.0, 3.0, 4.0], _X41),
                           REGULAR_PARTS["harmonic_quadratic"], name=name)
    if name == "example2":
        return GroundTruth(KernelKind("laplace", 10), SourceSet([100.0, 100.0], _X42.copy()),
                           REGULAR_PARTS["dim10_quadratic"], name=name)
    if name == "example3":
        return GroundTruth(KernelKind("helmholtz", 3, 1.0), SourceSet([5.0, 2.0, -3.0], _X43),
                           REGULAR_PARTS["plane_wave_sine"], name=name)
    raise KeyError(f"unknown ground truth {name!r}")
