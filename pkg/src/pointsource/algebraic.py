"""Direct recovery of planar sources from harmonic moments (matrix pencil).

With ``mu_m = sum_j c_j z_j^m`` the Hankel matrices ``H0 = [mu_{i+j}]``
and ``H1 = [mu_{i+j+1}]`` factor as ``V C V^T`` and ``V C Z V^T``, so the
nodes ``z_j`` are the generalized eigenvalues of ``(H1, H0)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import DegenerateError, IllConditionedError
from .reciprocity import DetectionTrace, MomentSequence, detect_count, hankel_block, monomial_moments
from .sources import CauchyData, SourceSet

MAX_HANKEL_CONDITION = 1e12
MIN_ROOT_SEPARATION = 1e-8
# relative imaginary part of an intensity that marks a real-source fit unreliable
IMAG_TOLERANCE = 0.15


@dataclass
class PencilResult:
    roots: np.ndarray
    intensities: np.ndarray
    residual: float
    holdout_residual: float = 0.0
    warnings: list[str] = field(default_factory=list)

    @property
    def M(self) -> int:
        return len(self.roots)

    @property
    def reliable(self) -> bool:
        return not self.warnings

    def to_sources(self) -> SourceSet:
        return SourceSet(self.intensities, np.column_stack([self.roots.real, self.roots.imag])
                         if self.M else np.zeros((0, 2)))

    def to_dict(self) -> dict:
        return {"roots_real": self.roots.real.tolist(), "roots_imag": self.roots.imag.tolist(),
                "intensities_real": self.intensities.real.tolist(),
                "intensities_imag": self.intensities.imag.tolist(),
                "residual": self.residual, "holdout_residual": self.holdout_residual,
                "reliable": self.reliable, "warnings": list(self.warnings)}


def prony_locations(moments: MomentSequence, M: int) -> np.ndarray:
    """Nodes ``z_j`` from the ``M x M`` pencil of shifted Hankel matrices."""
    mu = np.asarray(moments.mu)
    if M < 1:
        return np.zeros(0, dtype=complex)
    if len(mu) < 2 * M:
        raise ValueError(f"need moments up to index {2 * M - 1}")
    H0 = hankel_block(mu, M, M)
    H1 = hankel_block(mu, M, M, shift=1)
    cond = np.linalg.cond(H0)
    if not np.isfinite(cond) or cond > MAX_HANKEL_CONDITION:
        raise IllConditionedError(f"Hankel matrix condition number {cond:.3g} exceeds "
                                  f"{MAX_HANKEL_CONDITION:g}")
    return scipy.linalg.eigvals(H1, H0)


def vandermonde_intensities(moments: MomentSequence, roots) -> np.ndarray:
    """Least-squares ``c`` in ``sum_j c_j z_j^m = mu_m`` for ``m < 2M``."""
    roots = np.asarray(roots, dtype=complex)
    M = len(roots)
    if M == 0:
        return np.zeros(0, dtype=complex)
    sep = np.abs(roots[:, None] - roots[None, :])
    np.fill_diagonal(sep, np.inf)
    if sep.min() < MIN_ROOT_SEPARATION:
        raise DegenerateError("coincident nodes")
    V = roots[None, :] ** np.arange(2 * M)[:, None]
    return np.linalg.lstsq(V, np.asarray(moments.mu[: 2 * M]), rcond=None)[0]


def _order(roots, intensities):
    idx = sorted(range(len(roots)), key=lambda j: (round(float(np.angle(roots[j])), 12), abs(roots[j])))
    return roots[idx], intensities[idx]


def moment_residual(mu, roots, intensities, upto: int) -> float:
    m = np.arange(upto + 1)[:, None]
    fit = (np.asarray(roots)[None, :] ** m) @ np.asarray(intensities)
    return float(np.max(np.abs(np.asarray(mu)[: upto + 1] - fit)))


def solve_pencil(moments: MomentSequence, M: int, bounds=(-1.0, 1.0), real_sources: bool = True) -> PencilResult:
    """Roots, intensities and diagnostics for a fixed source count."""
    roots = prony_locations(moments, M)
    c = vandermonde_intensities(moments, roots)
    roots, c = _order(roots, c)
    res = moment_residual(moments.mu, roots, c, 2 * M - 1) if M else 0.0
    hold = moment_residual(moments.mu, roots, c, moments.m_max) if M else 0.0
    warnings = []
    lo, hi = bounds
    escaped = (roots.real < lo) | (roots.real > hi) | (roots.imag < lo) | (roots.imag > hi)
    if np.any(escaped):
        warnings.append("root escaped domain")
    if real_sources and M and np.any(np.abs(c.imag) > IMAG_TOLERANCE * np.maximum(np.abs(c), 1e-12)):
        warnings.append("complex intensity for a real source problem")
    return PencilResult(roots, c, res, hold, warnings)


def recover_algebraic(data: CauchyData, M_bar: int = 5, eps_tol: float = 0.1,
                      M: int | None = None, extra_moments: int = 2) -> tuple[DetectionTrace, PencilResult]:
    """Detect the source count, then solve the pencil and Vandermonde systems.

    ``M`` forces the source count (the detection trace is still returned).
    ``extra_moments`` moments beyond those the solve uses are kept to
    measure how well the fit extrapolates (``holdout_residual``).
    """
    if data.d != 2:
        raise NotImplementedError("algebraic recovery is implemented for d=2 only")
    m_needed = 2 * max(M_bar, M or 0) - 1 + extra_moments
    moments = monomial_moments(data, m_needed)
    trace = detect_count(moments, M_bar, eps_tol)
    M_use = trace.M_hat if M is None else int(M)
    if M_use == 0:
        return trace, PencilResult(np.zeros(0, complex), np.zeros(0, complex), 0.0)
    return trace, solve_pencil(moments, M_use, real_sources=not data.is_complex)
