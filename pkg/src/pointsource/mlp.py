"""Fully connected tanh networks with exact input derivatives.

The forward pass carries, per layer, the activations ``z``, their input
Jacobian ``J`` and their Laplacian ``lam``:

* affine step: ``z <- W z + b``, ``J <- W J``, ``lam <- W lam``
* tanh step (unit ``i``, pre-activation ``y``):
  ``J_i <- s(y) J_i``, ``lam_i <- s'(y) |J_i|^2 + s(y) lam_i``
  with ``s = 1 - tanh^2`` and ``s' = -2 tanh s``.

``backprop_composite`` is the matching reverse pass, so a loss written in
terms of value, gradient and Laplacian of the network is differentiated
exactly with respect to the flat parameter vector.

Jacobians are stored tangent-major, shape ``(N, d, width)``, so every
affine step is a single matrix product.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MlpArch:
    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError("an architecture needs input and output sizes")
        if min(sizes) < 1:
            raise ValueError("layer widths must be >= 1")
        object.__setattr__(self, "layer_sizes", sizes)

    @classmethod
    def parse(cls, text: str) -> "MlpArch":
        """``"2-20-20-1"`` -> ``MlpArch((2, 20, 20, 1))``."""
        return cls(tuple(int(t) for t in str(text).split("-")))

    def __str__(self) -> str:
        return "-".join(map(str, self.layer_sizes))

    @property
    def depth(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        s = self.layer_sizes
        return sum(s[i + 1] * s[i] + s[i + 1] for i in range(self.depth))

    def offsets(self):
        """(W offset, W shape, b offset) for each layer of the flat vector."""
        out, pos = [], 0
        s = self.layer_sizes
        for i in range(self.depth):
            shape = (s[i + 1], s[i])
            out.append((pos, shape, pos + shape[0] * shape[1]))
            pos += shape[0] * shape[1] + shape[0]
        return out


@dataclass
class MlpParams:
    arch: MlpArch
    theta: np.ndarray
    bound: float | None = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (self.arch.n_params,):
            raise ValueError(f"theta has {self.theta.size} entries, arch needs {self.arch.n_params}")

    @property
    def n_params(self) -> int:
        return self.arch.n_params

    def layers(self):
        """Views ``(W, b)`` into ``theta``."""
        for w0, shape, b0 in self.arch.offsets():
            yield (self.theta[w0:b0].reshape(shape), self.theta[b0:b0 + shape[0]])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.theta))) if self.theta.size else 0.0

    def within_bound(self) -> bool:
        return self.bound is None or self.max_abs() <= self.bound

    def copy(self) -> "MlpParams":
        return MlpParams(self.arch, self.theta.copy(), self.bound)


def init_params(arch: MlpArch, rng: np.random.Generator, scheme: str = "uniform_glorot") -> MlpParams:
    if scheme != "uniform_glorot":
        raise ValueError(f"unknown init scheme {scheme!r}")
    theta = np.zeros(arch.n_params)
    for w0, (n_out, n_in), b0 in arch.offsets():
        a = np.sqrt(6.0 / (n_in + n_out))
        theta[w0:b0] = rng.uniform(-a, a, size=n_out * n_in)
    return MlpParams(arch, theta)


@dataclass
class PointEval:
    """Network outputs at a batch of points, per output channel.

    ``value`` (N, out), ``gradient`` (N, out, d), ``laplacian`` (N, out).
    """

    value: np.ndarray
    gradient: np.ndarray | None = None
    laplacian: np.ndarray | None = None
    order: int = 2
    _cache: list = field(default_factory=list, repr=False)


def forward_with_derivatives(params: MlpParams, x, order: int = 2) -> PointEval:
    """Value (order 0), plus gradient (1), plus Laplacian (2) at points ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    if d != params.arch.input_dim:
        raise ValueError(f"expected inputs of dimension {params.arch.input_dim}, got {d}")
    z, J, lam = x, None, None
    cache = []
    layers = list(params.layers())
    for li, (W, b) in enumerate(layers):
        y = z @ W.T + b
        if order >= 1:
            Jy = W.T[None, :, :] if J is None else J @ W.T
        else:
            Jy = None
        if order >= 2:
            ly = np.zeros_like(y) if lam is None else lam @ W.T
        else:
            ly = None
        entry = {"z": z, "J": J, "lam": lam}
        if li == len(layers) - 1:
            cache.append(entry)
            z, J, lam = y, Jy, ly
            break
        t = np.tanh(y)
        s = 1.0 - t * t
        entry.update(t=t, s=s, Jy=Jy, ly=ly)
        if order >= 1:
            J = Jy * s[:, None, :]
        if order >= 2:
            s2 = -2.0 * t * s
            q = np.sum(Jy * Jy, axis=1)
            if q.shape[0] != n:
                q = np.broadcast_to(q, (n, q.shape[1]))
            lam = s2 * q + s * ly
            entry.update(s2=s2, q=q)
        cache.append(entry)
        z = t
    grad = None if J is None else np.transpose(np.broadcast_to(J, (n,) + J.shape[1:]), (0, 2, 1))
    return PointEval(z, grad, lam, order, cache)


def backprop_composite(params: MlpParams, ev: PointEval, d_value=None, d_gradient=None,
                       d_laplacian=None) -> np.ndarray:
    """Gradient w.r.t. ``theta`` of ``sum(d_value*v + d_gradient*grad v + d_laplacian*lap v)``.

    Cotangent shapes mirror :class:`PointEval`; ``None`` means zero.
    """
    if d_gradient is not None and ev.order < 1:
        raise ValueError("gradient cotangent needs a forward pass with order >= 1")
    if d_laplacian is not None and ev.order < 2:
        raise ValueError("laplacian cotangent needs a forward pass with order >= 2")
    n = ev.value.shape[0]
    gz = np.zeros_like(ev.value) if d_value is None else np.asarray(d_value, dtype=float).reshape(ev.value.shape)
    gJ = None if d_gradient is None else np.transpose(np.asarray(d_gradient, dtype=float), (0, 2, 1))
    gl = None if d_laplacian is None else np.asarray(d_laplacian, dtype=float).reshape(ev.value.shape)
    grad = np.zeros(params.n_params)
    layers = list(params.layers())
    offsets = params.arch.offsets()
    last = len(layers) - 1
    for li in range(last, -1, -1):
        W, _ = layers[li]
        c = ev._cache[li]
        if li == last:
            gy, gJy, gly = gz, gJ, gl
        else:
            s, Jy = c["s"], c["Jy"]
            gy = gz * s
            gJy = None
            if gJ is not None:
                gy = gy + c.get("s2", -2.0 * c["t"] * s) * np.sum(gJ * Jy, axis=1)
                gJy = gJ * s[:, None, :]
            gly = None
            if gl is not None:
                t, s2 = c["t"], c["s2"]
                s3 = -2.0 * s * s + 4.0 * t * t * s
                gy = gy + gl * (s3 * c["q"] + s2 * c["ly"])
                extra = 2.0 * (gl * s2)[:, None, :] * Jy
                gJy = extra if gJy is None else gJy + extra
                gly = gl * s
        n_out, n_in = W.shape
        gW = gy.T @ c["z"]
        if gJy is not None:
            if c["J"] is None:
                gW = gW + np.broadcast_to(gJy, (n,) + gJy.shape[1:]).sum(axis=0).T
            else:
                gW = gW + gJy.reshape(-1, n_out).T @ c["J"].reshape(-1, n_in)
        if gly is not None and c["lam"] is not None:
            gW = gW + gly.T @ c["lam"]
        w0, shape, b0 = offsets[li]
        grad[w0:b0] = gW.ravel()
        grad[b0:b0 + n_out] = gy.sum(axis=0)
        if li > 0:
            gz = gy @ W
            gJ = None if gJy is None else gJy @ W
            gl = None if gly is None else gly @ W
    return grad
