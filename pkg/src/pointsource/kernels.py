"""Fundamental solutions of the Laplace and Helmholtz operators.

All kernels are radial, ``phi(x) = p(r)``, so the gradient is
``p'(r) x / r`` and the Hessian has the form ``a(r) I + b(r) x x^T``.
Functions accept a single point ``(d,)`` or a batch ``(..., d)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import gamma as _gamma, pi

import numpy as np

from .exceptions import SingularityError
from .sources import SourceSet

SINGULAR_RADIUS = 1e-10


@dataclass(frozen=True)
class KernelKind:
    operator: str = "laplace"
    d: int = 2
    k: float = 0.0

    def __post_init__(self):
        if self.operator not in ("laplace", "helmholtz"):
            raise ValueError(f"unknown operator {self.operator!r}")
        if self.d < 2:
            raise ValueError("d must be >= 2")
        if self.operator == "helmholtz":
            if self.d != 3:
                raise ValueError("helmholtz kernel is only available for d=3")
            if not self.k > 0:
                raise ValueError("helmholtz wavenumber must be positive")

    @property
    def is_complex(self) -> bool:
        return self.operator == "helmholtz"

    @property
    def zeroth_order(self) -> float:
        """Coefficient ``k^2`` in ``Delta v + k^2 v``; zero for Laplace."""
        return self.k ** 2 if self.operator == "helmholtz" else 0.0


def laplace_constant(d: int) -> float:
    """``c_d`` such that ``-Delta(c_d |x|^{2-d}) = delta`` (``1/2pi`` for d=2)."""
    if d == 2:
        return 1.0 / (2.0 * pi)
    alpha = pi ** (d / 2) / _gamma(d / 2 + 1)
    return 1.0 / (d * (d - 2) * alpha)


def _radius(x):
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.einsum("...i,...i->...", x, x))
    if np.any(r < SINGULAR_RADIUS):
        raise SingularityError("fundamental solution evaluated at its singularity")
    return x, r


def _radial(kernel: KernelKind, r):
    """``(p, p'/r, b)`` with ``grad = (p'/r) x`` and ``hess = (p'/r) I + b x x^T``."""
    d = kernel.d
    if kernel.operator == "laplace":
        c = laplace_constant(d)
        if d == 2:
            p = -c * np.log(r)
            dp_r = -c / r**2
            b = 2 * c / r**4
        else:
            p = c * r ** (2 - d)
            dp_r = c * (2 - d) * r ** (-d)
            b = -d * c * (2 - d) * r ** (-d - 2)
        return p, dp_r, b
    k = kernel.k
    e = np.exp(1j * k * r) / (4 * pi)
    p = e / r
    dp = e * (1j * k * r - 1) / r**2
    d2p = e * (2 - 2j * k * r - (k * r) ** 2) / r**3
    dp_r = dp / r
    b = (d2p - dp_r) / r**2
    return p, dp_r, b


def phi(kernel: KernelKind, x):
    _, r = _radius(x)
    return _radial(kernel, r)[0]


def grad_phi(kernel: KernelKind, x):
    x, r = _radius(x)
    _, dp_r, _ = _radial(kernel, r)
    return dp_r[..., None] * x


def hess_phi(kernel: KernelKind, x):
    x, r = _radius(x)
    _, a, b = _radial(kernel, r)
    eye = np.eye(x.shape[-1])
    return a[..., None, None] * eye + b[..., None, None] * x[..., :, None] * x[..., None, :]


def hess_phi_dot(kernel: KernelKind, x, v):
    """Hessian-vector product ``hess_phi(x) @ v`` without forming the matrix."""
    x, r = _radius(x)
    _, a, b = _radial(kernel, r)
    xv = np.einsum("...i,...i->...", x, v)
    return a[..., None] * v + (b * xv)[..., None] * x


def kernel_terms(kernel: KernelKind, sources: SourceSet, y, normals):
    """Per-source ``phi`` and normal derivative at nodes ``y``.

    Returns arrays of shape (n, M) plus the displacement ``y - x_j``
    (n, M, d), which callers reuse for location derivatives.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    diff = y[:, None, :] - sources.locations[None, :, :]
    diff_, r = _radius(diff)
    p, dp_r, _ = _radial(kernel, r)
    nu = np.atleast_2d(normals)
    dn = dp_r * np.einsum("nmd,nd->nm", diff, nu)
    return p, dn, diff


def enrichment(kernel: KernelKind, sources: SourceSet, y, normal):
    """Value and normal derivative of ``sum_j c_j phi(y - x_j)``.

    ``y`` and ``normal`` may be single points or (n, d) batches.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    y2 = np.atleast_2d(y)
    nu = np.broadcast_to(np.atleast_2d(np.asarray(normal, dtype=float)), y2.shape)
    dtype = complex if (kernel.is_complex or np.iscomplexobj(sources.intensities)) else float
    if sources.M == 0:
        val = np.zeros(len(y2), dtype=dtype)
        dn = np.zeros(len(y2), dtype=dtype)
    else:
        p, dnp, _ = kernel_terms(kernel, sources, y2, nu)
        val = p @ sources.intensities
        dn = dnp @ sources.intensities
    if single:
        return val[0], dn[0]
    return val, dn


def evaluate_singular_part(kernel: KernelKind, sources: SourceSet, points, nan_at_poles: bool = False):
    """``sum_j c_j phi(x - x_j)`` at arbitrary points (no normal derivative)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dtype = complex if (kernel.is_complex or np.iscomplexobj(sources.intensities)) else float
    out = np.zeros(len(pts), dtype=dtype)
    if sources.M == 0:
        return out
    diff = pts[:, None, :] - sources.locations[None, :, :]
    r = np.sqrt(np.einsum("nmd,nmd->nm", diff, diff))
    bad = np.any(r < SINGULAR_RADIUS, axis=1)
    if bad.any() and not nan_at_poles:
        raise SingularityError("evaluation point coincides with a source")
    r = np.where(r < SINGULAR_RADIUS, 1.0, r)
    out = _radial(kernel, r)[0] @ sources.intensities
    out = out.astype(dtype)
    out[bad] = np.nan
    return out


def source_derivative_terms(kernel: KernelKind, sources: SourceSet, y, normals):
    """Kernel values and their derivatives with respect to source locations.

    Returns ``(p, dn, grad, hess_nu)`` with shapes (n, M), (n, M), (n, M, d)
    and (n, M, d): ``phi(y - x_j)``, its normal derivative, ``grad phi`` and
    ``hess phi @ nu`` evaluated at ``y - x_j``. Derivatives in ``x_j`` are
    the negatives of the last two.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    nu = np.atleast_2d(np.asarray(normals, dtype=float))
    diff, r = _radius(y[:, None, :] - sources.locations[None, :, :])
    p, a, b = _radial(kernel, r)
    xn = np.einsum("nmd,nd->nm", diff, nu)
    grad = a[..., None] * diff
    dn = a * xn
    hess_nu = a[..., None] * nu[:, None, :] + (b * xn)[..., None] * diff
    return p, dn, grad, hess_nu
