"""scikit-learn style front ends for source counting and recovery.

``fit`` takes a :class:`~pointsource.sources.CauchyData` instance; fitted
attributes end in an underscore, and ``predict`` evaluates the recovered
field at arbitrary interior points.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .algebraic import recover_algebraic
from .domain import DomainSpec
from .kernels import KernelKind, evaluate_singular_part
from .metrics import evaluate_regular
from .reciprocity import detect_count, monomial_moments
from .training import TrainConfig, train
from .validation import check_cauchy_data, check_points


def _kernel_for(data, operator=None, k=None) -> KernelKind:
    op = operator or data.meta.get("operator", "laplace")
    kk = float(k if k is not None else data.meta.get("k", 0.0))
    return KernelKind(op, data.d, kk)


class SourceCountDetector(BaseEstimator):
    """Number of planar sources from the singular values of moment Hankel matrices.

    Parameters
    ----------
    M_bar : int
        Upper bound on the number of sources.
    eps_tol : float
        Threshold on the smallest singular value.
    """

    def __init__(self, M_bar=5, eps_tol=0.1):
        self.M_bar = M_bar
        self.eps_tol = eps_tol

    def fit(self, data, y=None):
        data = check_cauchy_data(data, require_full=True, require_dim=2)
        if self.M_bar < 1 or self.eps_tol <= 0:
            raise ValueError("M_bar must be >= 1 and eps_tol > 0")
        self.moments_ = monomial_moments(data, 2 * self.M_bar + 1)
        self.trace_ = detect_count(self.moments_, self.M_bar, self.eps_tol)
        self.n_sources_ = self.trace_.M_hat
        self.sigma_history_ = np.asarray(self.trace_.sigma_history)
        return self

    def transform(self, data):
        """Singular-value history for new data, padded with NaN to ``M_bar + 1``."""
        check_is_fitted(self, "trace_")
        data = check_cauchy_data(data, require_full=True, require_dim=2)
        trace = detect_count(monomial_moments(data, 2 * self.M_bar + 1), self.M_bar, self.eps_tol)
        out = np.full(self.M_bar + 1, np.nan)
        out[: len(trace.sigma_history)] = trace.sigma_history
        return out[None, :]


class AlgebraicSourceRecovery(BaseEstimator):
    """Planar sources from harmonic moments via a matrix pencil.

    ``n_sources=None`` detects the count first.
    """

    def __init__(self, M_bar=5, eps_tol=0.1, n_sources=None, extra_moments=2):
        self.M_bar = M_bar
        self.eps_tol = eps_tol
        self.n_sources = n_sources
        self.extra_moments = extra_moments

    def fit(self, data, y=None):
        data = check_cauchy_data(data, require_full=True, require_dim=2)
        self.trace_, self.result_ = recover_algebraic(data, self.M_bar, self.eps_tol, self.n_sources,
                                                      self.extra_moments)
        self.sources_ = self.result_.to_sources()
        self.n_sources_ = self.result_.M
        self.kernel_ = _kernel_for(data, "laplace", 0.0)
        return self

    def predict(self, X):
        """Singular part ``sum_j c_j phi(x - x_j)`` (no regular part is estimated)."""
        check_is_fitted(self, "sources_")
        X = check_points(X, 2)
        return evaluate_singular_part(self.kernel_, self.sources_, X, nan_at_poles=True)


class SENNSourceRecovery(BaseEstimator):
    """Singularity-enriched network: sources plus a smooth regular part.

    The count is taken from ``n_sources`` or, for planar full data, detected
    with the moment test. Keyword names mirror :class:`TrainConfig`.
    """

    def __init__(self, hidden_layers=(20, 20), n_interior=3000, iterations=10000, lr_theta=1e-3,
                 lr_sources=6e-3, sigma_d=10.0, sigma_n=10.0, n_sources=None, gamma=0.1,
                 intensity_init=(0.0, 1.0), M_bar=5, eps_tol=0.1, lo=-1.0, hi=1.0, log_every=50,
                 random_state=0):
        self.hidden_layers = hidden_layers
        self.n_interior = n_interior
        self.iterations = iterations
        self.lr_theta = lr_theta
        self.lr_sources = lr_sources
        self.sigma_d = sigma_d
        self.sigma_n = sigma_n
        self.n_sources = n_sources
        self.gamma = gamma
        self.intensity_init = intensity_init
        self.M_bar = M_bar
        self.eps_tol = eps_tol
        self.lo = lo
        self.hi = hi
        self.log_every = log_every
        self.random_state = random_state

    def fit(self, data, y=None, ground_truth=None):
        data = check_cauchy_data(data)
        M = self.n_sources
        if M is None:
            if data.d != 2 or not data.is_full:
                raise ValueError("n_sources is required unless the data are planar and complete")
            M = SourceCountDetector(self.M_bar, self.eps_tol).fit(data).n_sources_
        self.kernel_ = _kernel_for(data)
        self.domain_ = DomainSpec(data.d, self.lo, self.hi)
        cfg = TrainConfig(hidden_layers=tuple(self.hidden_layers), n_interior=self.n_interior,
                          n_boundary=len(data), iterations=self.iterations, lr_theta=self.lr_theta,
                          lr_sources=self.lr_sources, sigma_d=self.sigma_d, sigma_n=self.sigma_n,
                          n_sources=M, gamma=self.gamma, intensity_init=tuple(self.intensity_init),
                          log_every=self.log_every, seed=int(self.random_state or 0))
        self.report_ = train(cfg, data, self.kernel_, self.domain_, gt=ground_truth, M=M)
        self.nets_ = self.report_.nets
        self.sources_ = self.report_.sources
        self.n_sources_ = M
        return self

    def predict_regular(self, X):
        check_is_fitted(self, "nets_")
        X = check_points(X, self.domain_.d)
        return evaluate_regular(self.nets_, X, 0)[0]

    def predict(self, X):
        """Recovered solution ``v + sum_j c_j phi(x - x_j)``; NaN at recovered poles."""
        check_is_fitted(self, "nets_")
        X = check_points(X, self.domain_.d)
        return self.predict_regular(X) + evaluate_singular_part(self.kernel_, self.sources_, X, nan_at_poles=True)
