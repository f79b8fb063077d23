"""Singularity-enriched training: empirical loss, exact gradients, Adam.

The solution is split as ``u = v_theta + sum_j c_j phi(. - x_j)``; the
network ``v_theta`` only has to represent the smooth remainder, and the
loss penalises

* the operator residual of ``v_theta`` at interior collocation points,
* the Dirichlet misfit ``v_theta - f + F(c, X)`` on the boundary,
* the Neumann misfit ``d_nu v_theta - g + d_nu F(c, X)`` on the boundary,

all jointly minimised over ``(theta, c, X)``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ._random import named_rng
from .domain import DomainSpec, sample_interior
from .exceptions import DivergenceError
from .kernels import KernelKind, source_derivative_terms
from .mlp import MlpArch, MlpParams, backprop_composite, forward_with_derivatives, init_params
from .sources import CauchyData, SourceSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossWeights:
    sigma_d: float = 10.0
    sigma_n: float = 10.0

    def __post_init__(self):
        if not (self.sigma_d > 0 and self.sigma_n > 0):
            raise ValueError("loss weights must be positive")


@dataclass
class LossTerms:
    residual: float
    dirichlet: float
    neumann: float

    @property
    def total(self) -> float:
        return self.residual + self.dirichlet + self.neumann

    def as_tuple(self):
        return self.total, self.residual, self.dirichlet, self.neumann


@dataclass
class TrainConfig:
    hidden_layers: tuple[int, ...] = (20, 20)
    n_interior: int = 3000
    n_boundary: int = 2000
    iterations: int = 10000
    lr_theta: float = 1e-3
    lr_sources: float = 6e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    sigma_d: float = 10.0
    sigma_n: float = 10.0
    n_sources: int | None = None
    gamma: float = 0.1
    intensity_init: tuple[float, float] = (0.0, 1.0)
    log_every: int = 50
    batch_size: int | None = None
    divergence_factor: float = 1e6
    monitor_points: int = 2000
    seed: int = 0

    def __post_init__(self):
        self.hidden_layers = tuple(int(h) for h in self.hidden_layers)
        self.intensity_init = tuple(float(v) for v in self.intensity_init)
        if self.n_interior < 1 or self.n_boundary < 1 or self.iterations < 0:
            raise ValueError("sample counts must be >= 1 and iterations >= 0")
        if not (self.lr_theta > 0 and self.lr_sources > 0):
            raise ValueError("learning rates must be positive")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.sigma_d, self.sigma_n)

    def arch_for(self, d: int) -> MlpArch:
        return MlpArch((d, *self.hidden_layers, 1))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden_layers"] = list(self.hidden_layers)
        out["intensity_init"] = list(self.intensity_init)
        return out


@dataclass
class TrainReport:
    iterations: np.ndarray
    losses: np.ndarray                  # (K, 4): total, residual, dirichlet, neumann
    intensities: np.ndarray             # (K, M)
    locations: np.ndarray               # (K, M, d)
    nets: list[MlpParams]
    sources: SourceSet
    regular_error: np.ndarray | None = None
    wall_time: float = 0.0
    seed: int = 0
    config: dict = field(default_factory=dict)

    @property
    def final_loss(self) -> float:
        return float(self.losses[-1, 0])


def _forward_regular(nets, x, order):
    return [forward_with_derivatives(p, x, order) for p in nets]


def _combine(evals, attr):
    parts = [getattr(e, attr)[:, 0] for e in evals]
    return parts[0] if len(parts) == 1 else parts[0] + 1j * parts[1]


def _split(arr, n_channels):
    """Real cotangent per network channel from a (possibly complex) array."""
    if n_channels == 1:
        return [np.real(arr)]
    return [np.real(arr), np.imag(arr)]


def loss_and_gradients(nets: list[MlpParams], sources: SourceSet, interior: np.ndarray,
                       data: CauchyData, weights: LossWeights, kernel: KernelKind,
                       domain_volume: float, need_grad: bool = True):
    """Empirical loss terms and, optionally, gradients ``(g_theta, g_c, g_X)``.

    ``g_theta`` is a list with one flat array per network. Boundary terms
    use the node weights of ``data`` (``|boundary| / N_b`` for Monte Carlo
    nodes); unobserved (NaN) traces drop out of their term.
    """
    k2 = kernel.zeroth_order
    n_ch = len(nets)

    # interior residual
    ev_in = _forward_regular(nets, interior, 2)
    w_in = domain_volume / len(interior)
    rho = [e.laplacian[:, 0] + k2 * e.value[:, 0] for e in ev_in]
    residual = w_in * sum(float(np.dot(r, r)) for r in rho)

    # boundary misfits
    dmask = np.isfinite(data.f)
    nmask = np.isfinite(data.g)
    order = 1 if nmask.any() else 0
    ev_b = _forward_regular(nets, data.points, order)
    v = _combine(ev_b, "value")
    wd = weights.sigma_d * data.weights * dmask
    wn = weights.sigma_n * data.weights * nmask
    f = np.where(dmask, data.f, 0)
    g = np.where(nmask, data.g, 0)
    if sources.M:
        p, dn, grad_k, hess_nu = source_derivative_terms(kernel, sources, data.points, data.normals)
        F = p @ sources.intensities
        dF = dn @ sources.intensities
    else:
        F = dF = 0.0
    r_d = np.where(dmask, v - f + F, 0)
    dirichlet = float(np.sum(wd * np.abs(r_d) ** 2))
    if order:
        dv = np.einsum("nd,nd->n", _combine(ev_b, "gradient"), data.normals)
        r_n = np.where(nmask, dv - g + dF, 0)
    else:
        r_n = np.zeros(len(data))
    neumann = float(np.sum(wn * np.abs(r_n) ** 2))
    terms = LossTerms(residual, dirichlet, neumann)
    if not need_grad:
        return terms, None

    g_theta = []
    cot_d = _split(2 * wd * r_d, n_ch)
    cot_n = _split(2 * wn * r_n, n_ch)
    for ch, params in enumerate(nets):
        gin = backprop_composite(params, ev_in[ch], d_value=(2 * w_in * k2 * rho[ch])[:, None] if k2 else None,
                                 d_laplacian=(2 * w_in * rho[ch])[:, None])
        dgrad = (cot_n[ch][:, None] * data.normals)[:, None, :] if order else None
        gb = backprop_composite(params, ev_b[ch], d_value=cot_d[ch][:, None], d_gradient=dgrad)
        g_theta.append(gin + gb)

    if sources.M:
        cd = np.conj(2 * wd * r_d)
        cn = np.conj(2 * wn * r_n)
        g_c = np.real(cd @ p + cn @ dn)
        # d/dx_j phi(y - x_j) = -grad phi(y - x_j)
        gx = -(np.einsum("n,nmd->md", cd, grad_k) + np.einsum("n,nmd->md", cn, hess_nu))
        g_X = np.real(gx) * np.real(sources.intensities)[:, None]
    else:
        g_c = np.zeros(0)
        g_X = np.zeros((0, data.d))
    return terms, (g_theta, g_c, g_X)


def empirical_loss(nets, sources, interior, data, weights, kernel, domain_volume) -> LossTerms:
    return loss_and_gradients(nets, sources, interior, data, weights, kernel, domain_volume,
                              need_grad=False)[0]


class Adam:
    """Adam with bias correction and one learning rate per parameter group."""

    def __init__(self, lrs: dict[str, float], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lrs = dict(lrs)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Update ``params`` in place."""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, x in params.items():
            g = grads[name]
            if g.shape != x.shape:
                raise ValueError(f"gradient for {name!r} has shape {g.shape}, expected {x.shape}")
            if name not in self.m:
                self.m[name] = np.zeros_like(x)
                self.v[name] = np.zeros_like(x)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            x -= self.lrs[name] * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def reflect_into_box(X: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Mirror coordinates that left ``[lo, hi]`` back inside (in place)."""
    lo_b, hi_b = np.broadcast_to(lo, X.shape), np.broadcast_to(hi, X.shape)
    X[...] = np.where(X > hi_b, 2 * hi_b - X, X)
    X[...] = np.where(X < lo_b, 2 * lo_b - X, X)
    np.clip(X, lo, hi, out=X)
    return X


def initial_state(config: TrainConfig, kernel: KernelKind, domain: DomainSpec, M: int):
    rng = named_rng(config.seed, "init")
    arch = config.arch_for(domain.d)
    nets = [init_params(arch, rng) for _ in range(2 if kernel.is_complex else 1)]
    lo, hi = domain.shrink(config.gamma)
    c = rng.uniform(*config.intensity_init, size=M)
    X = lo + rng.random((M, domain.d)) * (hi - lo)
    return nets, SourceSet(c, X)


def train(config: TrainConfig, data: CauchyData, kernel: KernelKind, domain: DomainSpec | None = None,
          gt=None, M: int | None = None, callback=None) -> TrainReport:
    """Minimise the empirical loss with full-batch Adam.

    Interior collocation points are drawn once from the ``sampling`` stream;
    the boundary nodes are those of ``data``. ``gt`` (a ground truth with
    an analytic regular part) enables the relative L2 error trace.
    """
    t0 = time.perf_counter()
    domain = domain or DomainSpec(kernel.d)
    if data.d != kernel.d:
        raise ValueError("data and kernel dimensions differ")
    M = M if M is not None else config.n_sources
    if M is None:
        raise ValueError("the number of sources must be given (or detected beforehand)")
    interior = sample_interior(domain, config.n_interior, named_rng(config.seed, "sampling"))
    nets, sources = initial_state(config, kernel, domain, int(M))
    weights = config.weights
    lo, hi = domain.shrink(config.gamma)
    theta_key = [f"theta{i}" for i in range(len(nets))]
    adam = Adam({**{k: config.lr_theta for k in theta_key},
                 "intensities": config.lr_sources, "locations": config.lr_sources},
                config.beta1, config.beta2, config.eps)
    params = {**{k: p.theta for k, p in zip(theta_key, nets)},
              "intensities": sources.intensities, "locations": sources.locations}

    monitor = None
    if gt is not None:
        monitor = sample_interior(domain, config.monitor_points, named_rng(config.seed, "monitor"))
        v_star = gt.regular_part.value(monitor)
        v_norm = np.sqrt(np.mean(np.abs(v_star) ** 2)) or 1.0

    batch_rng = named_rng(config.seed, "batch") if config.batch_size else None
    its, losses, cs, xs, errs = [], [], [], [], []
    initial = None

    def record(i, terms):
        its.append(i)
        losses.append(terms.as_tuple())
        cs.append(sources.intensities.copy())
        xs.append(sources.locations.copy())
        if monitor is not None:
            v = _combine(_forward_regular(nets, monitor, 0), "value")
            errs.append(float(np.sqrt(np.mean(np.abs(v - v_star) ** 2)) / v_norm))
        if callback is not None:
            callback(i, terms, sources)

    for i in range(config.iterations):
        pts, dat = interior, data
        if batch_rng is not None:
            pts = interior[batch_rng.choice(len(interior), min(config.batch_size, len(interior)), replace=False)]
            dat = data.subset(np.sort(batch_rng.choice(len(data), min(config.batch_size, len(data)), replace=False)))
        terms, (g_theta, g_c, g_X) = loss_and_gradients(nets, sources, pts, dat, weights, kernel, domain.volume)
        total = terms.total
        if initial is None:
            initial = max(total, 1e-300)
        if not np.isfinite(total) or total > config.divergence_factor * initial:
            raise DivergenceError(f"loss {total:.4g} at iteration {i} exceeds "
                                  f"{config.divergence_factor:g} x initial {initial:.4g}")
        if i % config.log_every == 0:
            record(i, terms)
            log.debug("iter %d loss %.4e", i, total)
        grads = {**{k: g for k, g in zip(theta_key, g_theta)}, "intensities": g_c, "locations": g_X}
        adam.step(params, grads)
        reflect_into_box(sources.locations, lo, hi)

    final = empirical_loss(nets, sources, interior, data, weights, kernel, domain.volume)
    record(config.iterations, final)
    return TrainReport(np.array(its), np.array(losses), np.array(cs), np.array(xs), nets, sources,
                       np.array(errs) if monitor is not None else None,
                       time.perf_counter() - t0, config.seed, config.to_dict())
