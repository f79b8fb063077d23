"""Reciprocity gap functional, harmonic-monomial moments and source counting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sources import CauchyData


@dataclass
class MomentSequence:
    """``mu[m] = R(z^m)`` for ``m = 0..m_max`` with ``z = x_a + i x_b``."""

    mu: np.ndarray
    plane: tuple[int, int] = (0, 1)
    quadrature_mode: str = "facet_grid"

    @property
    def m_max(self) -> int:
        return len(self.mu) - 1


@dataclass
class DetectionTrace:
    M_hat: int
    sigma_history: list[float]
    eps_tol: float
    M_bar: int
    saturated: bool = False

    def to_dict(self) -> dict:
        return {"M_hat": self.M_hat, "sigma_history": list(map(float, self.sigma_history)),
                "eps_tol": self.eps_tol, "M_bar": self.M_bar, "saturated": self.saturated}


def _require_full(data: CauchyData):
    if not data.is_full:
        raise ValueError("the reciprocity gap needs both traces at every boundary node")


def reciprocity_gap(w_values, w_normal_derivs, data: CauchyData) -> complex:
    """Quadrature of ``int_{boundary} (-g w + f dw/dnu)``."""
    w = np.asarray(w_values)
    dw = np.asarray(w_normal_derivs)
    if w.shape != (len(data),) or dw.shape != (len(data),):
        raise ValueError(f"test function arrays must have length {len(data)}")
    _require_full(data)
    return complex(np.sum(data.weights * (-data.g * w + data.f * dw)))


def monomial_moments(data: CauchyData, m_max: int, plane=(0, 1)) -> MomentSequence:
    """Reciprocity gaps of the harmonic polynomials ``z^m``, ``m <= m_max``.

    Powers are formed from ``z / beta`` (``beta`` the largest boundary
    modulus) and rescaled afterwards to keep high orders well scaled.
    """
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    a, b = (int(p) for p in plane)
    if not (0 <= a < data.d and 0 <= b < data.d) or a == b:
        raise ValueError(f"invalid plane {plane} for dimension {data.d}")
    _require_full(data)
    z = data.points[:, a] + 1j * data.points[:, b]
    nu = data.normals[:, a] + 1j * data.normals[:, b]
    beta = float(np.max(np.abs(z))) or 1.0
    zs = z / beta
    mu = np.empty(m_max + 1, dtype=complex)
    power_prev = np.zeros_like(zs)       # (z/beta)^(m-1)
    power = np.ones_like(zs)             # (z/beta)^m
    for m in range(m_max + 1):
        # d/dnu (z/beta)^m = m (z/beta)^(m-1) (nu_a + i nu_b) / beta
        dw = m * power_prev * nu / beta if m else np.zeros_like(zs)
        mu[m] = reciprocity_gap(power, dw, data) * beta**m
        power_prev, power = power, power * zs
    return MomentSequence(mu, (a, b))


def hankel_block(mu, rows: int, cols: int, shift: int = 0) -> np.ndarray:
    """``H[i, j] = mu[i + j + shift]``."""
    mu = np.asarray(mu)
    i, j = np.indices((rows, cols))
    return mu[i + j + shift]


def smallest_singular_value(A) -> float:
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def detect_count(moments: MomentSequence, M_bar: int, eps_tol: float) -> DetectionTrace:
    """Grow the ``M_bar``-row Hankel matrix one column at a time.

    Stops at the first ``A_{k+1}`` whose smallest singular value drops
    below ``eps_tol`` and reports ``M_hat = k``. If no drop occurs up to
    ``M_bar + 1`` columns the trace is marked ``saturated`` and
    ``M_hat = M_bar``.
    """
    if eps_tol <= 0:
        raise ValueError("eps_tol must be positive")
    if M_bar < 1:
        raise ValueError("M_bar must be >= 1")
    if moments.m_max < 2 * M_bar - 1:
        raise ValueError(f"detection with M_bar={M_bar} needs moments up to {2 * M_bar - 1}, "
                         f"got {moments.m_max}")
    history = []
    for k in range(M_bar + 1):
        A = hankel_block(moments.mu, M_bar, k + 1)
        s = smallest_singular_value(A)
        history.append(s)
        if s < eps_tol:
            return DetectionTrace(k, history, eps_tol, M_bar)
    return DetectionTrace(M_bar, history, eps_tol, M_bar, saturated=True)
