"""Recovery-quality measures for point-source reconstructions."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching
from scipy.spatial.distance import cdist

from .domain import DomainSpec, sample_boundary, sample_interior
from .exceptions import NumericalError
from .kernels import KernelKind, evaluate_singular_part
from .mlp import MlpParams, forward_with_derivatives
from .sources import CauchyData, SourceSet
from .synthetic import GroundTruth, RegularPart, trace_cauchy
from .training import LossTerms, LossWeights

log = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 8


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[None, :] if X.ndim == 1 else X


def directed_hausdorff(Xa, Xb) -> float:
    """``max_{a in Xa} min_{b in Xb} |a - b|``."""
    Xa, Xb = _as_points(Xa), _as_points(Xb)
    if len(Xa) == 0 or len(Xb) == 0:
        raise ValueError("Hausdorff distance of an empty set is undefined")
    return float(cdist(Xa, Xb).min(axis=1).max())


def hausdorff(Xa, Xb) -> float:
    return max(directed_hausdorff(Xa, Xb), directed_hausdorff(Xb, Xa))


@dataclass
class MatchResult:
    """Assignment of recovered sources to exact ones.

    ``permutation[j]`` is the exact index matched to recovered source ``j``;
    it is ``None`` when the counts differ, in which case only the two
    directed Hausdorff distances are reported.
    """

    permutation: list[int] | None
    max_location_error: float
    distances: np.ndarray | None = None
    max_intensity_error: float | None = None
    directed: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "permutation": self.permutation,
            "max_location_error": self.max_location_error,
            "distances": None if self.distances is None else self.distances.tolist(),
            "max_intensity_error": self.max_intensity_error,
            "directed_hausdorff": None if self.directed is None else list(self.directed),
        }


def _bottleneck_exhaustive(D: np.ndarray) -> tuple[int, ...]:
    M = len(D)
    rows = np.arange(M)
    best, best_val = None, np.inf
    for perm in itertools.permutations(range(M)):
        val = D[rows, perm].max()
        if val < best_val:
            best, best_val = perm, val
    return best


def _bottleneck_threshold(D: np.ndarray) -> tuple[int, ...]:
    """Smallest threshold admitting a perfect matching, by binary search."""
    levels = np.unique(D)
    lo, hi = 0, len(levels) - 1
    match = None
    while lo <= hi:
        mid = (lo + hi) // 2
        m = maximum_bipartite_matching(csr_matrix(D <= levels[mid]), perm_type="column")
        if np.all(m >= 0):
            match, hi = m, mid - 1
        else:
            lo = mid + 1
    return tuple(int(j) for j in match)


def bottleneck_match(X_hat, X_exact, c_hat=None, c_exact=None) -> MatchResult:
    """Permutation minimising the largest distance between matched sources."""
    X_hat, X_exact = _as_points(X_hat), _as_points(X_exact)
    if len(X_hat) != len(X_exact):
        directed = (directed_hausdorff(X_exact, X_hat), directed_hausdorff(X_hat, X_exact))
        return MatchResult(None, max(directed), None, None, directed)
    if len(X_hat) == 0:
        return MatchResult([], 0.0, np.zeros(0), 0.0 if c_hat is not None else None)
    D = cdist(X_hat, X_exact)
    perm = _bottleneck_exhaustive(D) if len(D) <= EXHAUSTIVE_LIMIT else _bottleneck_threshold(D)
    dists = D[np.arange(len(D)), perm]
    int_err = None
    if c_hat is not None and c_exact is not None:
        int_err = float(np.max(np.abs(np.asarray(c_hat) - np.asarray(c_exact)[list(perm)])))
    return MatchResult(list(perm), float(dists.max()), dists, int_err)


def match_sources(recovered: SourceSet, exact: SourceSet) -> MatchResult:
    return bottleneck_match(recovered.locations, exact.locations, recovered.intensities, exact.intensities)


@dataclass
class Separability:
    rho_per_plane: dict[tuple[int, int], float]
    rho: float
    in_omega_gamma: bool

    @property
    def degenerate(self) -> bool:
        return self.rho == 0.0


def separability(X, gamma: float, domain: DomainSpec | None = None) -> Separability:
    """Minimal pairwise distance of the projections onto the planes ``(x_k, x_{k+1})``."""
    X = _as_points(X)
    M, d = X.shape
    domain = domain or DomainSpec(max(d, 2))
    rho_k = {}
    for k in range(d - 1):
        if M < 2:
            rho_k[(k, k + 1)] = np.inf
            continue
        D = cdist(X[:, [k, k + 1]], X[:, [k, k + 1]])
        rho_k[(k, k + 1)] = float(D[np.triu_indices(M, 1)].min())
    rho = min(rho_k.values()) if rho_k else np.inf
    inside = True
    if M:
        dist = np.minimum(X - domain.lo, domain.hi - X).min(axis=1)
        inside = bool(np.all(dist >= gamma - 1e-12))
    return Separability(rho_k, rho, inside)


# regular parts may be networks or closed-form functions

def evaluate_regular(regular, x, order: int):
    """``(value, gradient, laplacian)`` of a network list or a :class:`RegularPart`."""
    if isinstance(regular, RegularPart):
        lap = regular.laplacian(x) if order >= 2 else None
        grad = regular.gradient(x) if order >= 1 else None
        return regular.value(x), grad, lap
    nets = [regular] if isinstance(regular, MlpParams) else list(regular)
    evs = [forward_with_derivatives(p, x, order) for p in nets]

    def comb(attr):
        parts = [getattr(e, attr)[:, 0] for e in evs]
        return parts[0] if len(parts) == 1 else parts[0] + 1j * parts[1]

    return comb("value"), comb("gradient") if order >= 1 else None, comb("laplacian") if order >= 2 else None


def regular_part_error(regular, gt: GroundTruth, n_quad: int = 20000, rng=None) -> tuple[float, float]:
    """Monte Carlo relative L2 error of a regular part against the exact one.

    Returns ``(estimate, standard_error)``. When the exact regular part is
    identically zero the absolute L2 error is returned instead.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    x = sample_interior(gt.domain, n_quad, rng)
    v = evaluate_regular(regular, x, 0)[0]
    a = np.abs(v - gt.regular_part.value(x)) ** 2
    b = np.abs(gt.regular_part.value(x)) ** 2
    vol = gt.domain.volume
    ma = a.mean()
    se_a = a.std(ddof=1) / np.sqrt(n_quad)
    if b.mean() == 0:
        err = np.sqrt(vol * ma)
        se = 0.5 * vol * se_a / err if err > 0 else 0.0
        return float(err), float(se)
    mb = b.mean()
    err = np.sqrt(ma / mb)
    if err == 0:
        return 0.0, 0.0
    # delta method on the ratio of means
    cov = np.cov(a, b)[0, 1] / n_quad
    var_ratio = (se_a**2 / ma**2 + (b.std(ddof=1) ** 2 / n_quad) / mb**2 - 2 * cov / (ma * mb))
    se = 0.5 * err * np.sqrt(max(var_ratio, 0.0))
    return float(err), float(se)


def loss_terms_per_node(regular, sources: SourceSet, interior: np.ndarray, data: CauchyData,
                        weights: LossWeights, kernel: KernelKind, domain_volume: float):
    """Per-node contributions whose sums are the three loss terms."""
    from .kernels import enrichment

    _, _, lap = evaluate_regular(regular, interior, 2)
    val_in = evaluate_regular(regular, interior, 0)[0]
    rho = np.abs(lap + kernel.zeroth_order * val_in) ** 2 * domain_volume / len(interior)
    v, grad, _ = evaluate_regular(regular, data.points, 1)
    dv = np.einsum("nd,nd->n", grad, data.normals)
    F, dF = enrichment(kernel, sources, data.points, data.normals)
    dmask, nmask = np.isfinite(data.f), np.isfinite(data.g)
    rd = np.where(dmask, np.abs(v - np.where(dmask, data.f, 0) + F) ** 2, 0.0)
    rn = np.where(nmask, np.abs(dv - np.where(nmask, data.g, 0) + dF) ** 2, 0.0)
    return rho, weights.sigma_d * data.weights * rd, weights.sigma_n * data.weights * rn


def loss_with_regular(regular, sources, interior, data, weights, kernel, domain_volume) -> LossTerms:
    """Empirical loss for any regular part (networks or a closed-form function)."""
    rho, d, n = loss_terms_per_node(regular, sources, interior, data, weights, kernel, domain_volume)
    return LossTerms(float(rho.sum()), float(d.sum()), float(n.sum()))


def population_loss_estimate(regular, sources: SourceSet, gt: GroundTruth, weights: LossWeights,
                             n_interior: int = 30000, n_boundary: int = 20000,
                             rng=None, facet_mask=None) -> tuple[LossTerms, float]:
    """Loss against exact traces on fresh Monte Carlo nodes, with its standard error.

    Defaults use ten times the training budget of the planar benchmark.
    """
    rng = rng if rng is not None else np.random.default_rng(12345)
    domain = gt.domain if facet_mask is None else gt.domain.with_mask(facet_mask)
    interior = sample_interior(domain, n_interior, rng)
    bs = sample_boundary(domain, n_boundary, "monte_carlo", rng)
    data = trace_cauchy(gt, bs)
    rho, d, n = loss_terms_per_node(regular, sources, interior, data, weights, gt.kernel, domain.volume)
    terms = LossTerms(float(rho.sum()), float(d.sum()), float(n.sum()))
    # each term is N times the mean of its per-node contributions
    se = np.sqrt(sum(len(t) * t.var(ddof=1) for t in (rho, d + n) if len(t) > 1))
    return terms, float(se)


@dataclass
class StabilityRun:
    delta: float
    L_tilde: float
    loc_err: float
    int_err: float
    v_err: float


@dataclass
class StabilityDiagnostic:
    runs: list[StabilityRun]
    exponent: float | None
    reference_exponent: float | None
    monotone: bool
    excluded: list[tuple[float, str]] = field(default_factory=list)

    def level_means(self, attr: str = "loc_err") -> dict[float, float]:
        levels: dict[float, list[float]] = {}
        for r in self.runs:
            levels.setdefault(r.delta, []).append(getattr(r, attr))
        return {k: float(np.mean(v)) for k, v in sorted(levels.items())}

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta", "L_tilde", "loc_err", "int_err", "v_err"])
            for r in self.runs:
                w.writerow([repr(r.delta), repr(r.L_tilde), repr(r.loc_err), repr(r.int_err), repr(r.v_err)])


def is_nondecreasing(values, slack: float = 0.2) -> bool:
    """Each value is at least ``(1 - slack)`` times its predecessor."""
    values = list(values)
    return all(b >= (1.0 - slack) * a for a, b in zip(values, values[1:]))


def stability_sweep(run: Callable[[float, int], StabilityRun], deltas, repetitions: int = 1,
                    M: int | None = None, slack: float = 0.2) -> StabilityDiagnostic:
    """Collect ``(L_tilde, errors)`` over noise levels and fit ``log err`` against ``log L_tilde``.

    ``run(delta, rep)`` trains one model. Runs that fail numerically are
    excluded with a warning. The exponent needs at least two distinct
    positive losses; ``reference_exponent`` is ``1/(2M)`` for comparison.
    """
    runs, excluded = [], []
    for delta in deltas:
        for rep in range(repetitions):
            try:
                runs.append(run(float(delta), rep))
            except NumericalError as exc:
                log.warning("run delta=%g rep=%d excluded: %s", delta, rep, exc)
                excluded.append((float(delta), str(exc)))
    runs.sort(key=lambda r: r.L_tilde)
    exponent = None
    good = [r for r in runs if r.L_tilde > 0 and r.loc_err > 0]
    if len({r.L_tilde for r in good}) >= 2 and len({r.delta for r in good}) >= 2:
        exponent = float(np.polyfit(np.log([r.L_tilde for r in good]), np.log([r.loc_err for r in good]), 1)[0])
    diag = StabilityDiagnostic(runs, exponent, 1.0 / (2 * M) if M else None, True, excluded)
    diag.monotone = is_nondecreasing(diag.level_means("loc_err").values(), slack)
    return diag


def solution_slice(regular, sources: SourceSet, gt: GroundTruth, n: int = 201, axes=(0, 1)):
    """Predicted and exact solution on an ``n x n`` grid in a coordinate plane.

    Remaining coordinates are fixed at 0. Grid nodes that coincide with a
    source give NaN.
    """
    d = gt.kernel.d
    t = np.linspace(gt.domain.lo[axes[0]], gt.domain.hi[axes[0]], n)
    s = np.linspace(gt.domain.lo[axes[1]], gt.domain.hi[axes[1]], n)
    A, B = np.meshgrid(t, s, indexing="ij")
    pts = np.zeros((n * n, d))
    pts[:, axes[0]] = A.ravel()
    pts[:, axes[1]] = B.ravel()
    pred = evaluate_regular(regular, pts, 0)[0] + evaluate_singular_part(gt.kernel, sources, pts, nan_at_poles=True)
    exact = gt.solution(pts, nan_at_poles=True)
    return pts, pred, exact
