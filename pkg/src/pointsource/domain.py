"""Axis-aligned hypercube domains: sampling, normals and boundary quadrature.

Facets are numbered ``2*i`` (face ``x_i = lo_i``, normal ``-e_i``) and
``2*i + 1`` (face ``x_i = hi_i``, normal ``+e_i``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

ON_FACET_TOL = 1e-12


@dataclass(frozen=True)
class DomainSpec:
    """The box ``prod_i (lo_i, hi_i)`` with a per-facet data mask."""

    d: int = 2
    lo: np.ndarray | float = -1.0
    hi: np.ndarray | float = 1.0
    facet_mask: np.ndarray | None = None

    def __post_init__(self):
        if int(self.d) < 2:
            raise ValueError(f"dimension must be >= 2, got {self.d}")
        lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (self.d,)).copy()
        hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (self.d,)).copy()
        if np.any(lo >= hi):
            raise ValueError("lo < hi must hold componentwise")
        if self.facet_mask is None:
            mask = np.ones(2 * self.d, dtype=bool)
        else:
            mask = np.asarray(self.facet_mask, dtype=bool).copy()
            if mask.shape != (2 * self.d,):
                raise ValueError(f"facet_mask needs {2 * self.d} entries")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "facet_mask", mask)

    @property
    def n_facets(self) -> int:
        return 2 * self.d

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def facet_axis(self, facet: int) -> int:
        return facet // 2

    def facet_normal(self, facet: int) -> np.ndarray:
        n = np.zeros(self.d)
        n[facet // 2] = 1.0 if facet % 2 else -1.0
        return n

    def facet_area(self, facet: int) -> float:
        side = self.hi - self.lo
        return float(np.prod(np.delete(side, facet // 2)))

    def facet_areas(self) -> np.ndarray:
        return np.array([self.facet_area(f) for f in range(self.n_facets)])

    def boundary_measure(self, masked: bool = True) -> float:
        areas = self.facet_areas()
        return float(areas[self.facet_mask].sum() if masked else areas.sum())

    def with_mask(self, facet_mask) -> "DomainSpec":
        return DomainSpec(self.d, self.lo, self.hi, facet_mask)

    def contains(self, points, closed: bool = True) -> np.ndarray:
        p = np.atleast_2d(points)
        if closed:
            return np.all((p >= self.lo) & (p <= self.hi), axis=-1)
        return np.all((p > self.lo) & (p < self.hi), axis=-1)

    def shrink(self, gamma: float) -> tuple[np.ndarray, np.ndarray]:
        """Bounds of the sub-box of points at distance >= gamma from the boundary."""
        lo, hi = self.lo + gamma, self.hi - gamma
        if np.any(lo >= hi):
            raise ValueError(f"gamma={gamma} leaves an empty interior box")
        return lo, hi


def facet_mask_excluding(d: int, *facets: int) -> np.ndarray:
    mask = np.ones(2 * d, dtype=bool)
    mask[list(facets)] = False
    return mask


@dataclass
class BoundarySample:
    """Quadrature nodes on the (masked) boundary."""

    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    facet_id: np.ndarray
    mode: str = "facet_grid"

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, rows) -> "BoundarySample":
        return BoundarySample(self.points[rows], self.normals[rows],
                              self.weights[rows], self.facet_id[rows], self.mode)


def sample_interior(domain: DomainSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. uniform points in the open box."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = rng.random((n, domain.d))
    # rng.random is in [0, 1); reflect exact zeros to keep points strictly inside
    u[u == 0.0] = 0.5
    return domain.lo + u * (domain.hi - domain.lo)


def _place_on_facets(domain: DomainSpec, facets: np.ndarray, u: np.ndarray) -> np.ndarray:
    pts = domain.lo + u * (domain.hi - domain.lo)
    rows = np.arange(len(facets))
    axes = facets // 2
    pts[rows, axes] = np.where(facets % 2 == 1, domain.hi[axes], domain.lo[axes])
    return pts


def _normals_for(domain: DomainSpec, facets: np.ndarray) -> np.ndarray:
    normals = np.zeros((len(facets), domain.d))
    normals[np.arange(len(facets)), facets // 2] = np.where(facets % 2 == 1, 1.0, -1.0)
    return normals


def sample_boundary(
    domain: DomainSpec,
    n: int,
    mode: Literal["monte_carlo", "facet_grid", "gauss_legendre"] = "facet_grid",
    rng: np.random.Generator | None = None,
) -> BoundarySample:
    """Boundary nodes with outward normals and quadrature weights.

    ``monte_carlo`` draws from a stream of points uniform over the *full*
    boundary and keeps the first ``n`` that land on unmasked facets, so a
    masked sample extends the masked-out full sample row for row.
    ``facet_grid`` places a tensor midpoint grid on every unmasked facet;
    for ``d > 2`` the per-facet count is rounded down to a perfect power.
    ``gauss_legendre`` uses the same node layout with Gauss-Legendre nodes
    and weights, which is spectrally accurate for integrands that are
    smooth on each facet.
    """
    mask = domain.facet_mask
    if not mask.any():
        raise ValueError("all facets are masked")
    measure = domain.boundary_measure()
    if mode == "monte_carlo":
        if n < 1:
            raise ValueError("n must be >= 1")
        if rng is None:
            raise ValueError("monte_carlo sampling needs an rng")
        cum = np.cumsum(domain.facet_areas())
        cum /= cum[-1]
        kept_pts, kept_fac, have = [], [], 0
        while have < n:
            u = rng.random((n, domain.d + 1))
            facets = np.minimum(np.searchsorted(cum, u[:, 0], side="right"), domain.n_facets - 1)
            keep = mask[facets]
            kept_fac.append(facets[keep])
            kept_pts.append(_place_on_facets(domain, facets[keep], u[keep, 1:]))
            have += int(keep.sum())
        facets = np.concatenate(kept_fac)[:n]
        points = np.concatenate(kept_pts)[:n]
        weights = np.full(n, measure / n)
    elif mode in ("facet_grid", "gauss_legendre"):
        active = np.flatnonzero(mask)
        per = n // len(active)
        if per < 1:
            raise ValueError(f"facet_grid needs at least one node per facet ({len(active)}), got n={n}")
        q = max(1, int(np.floor(per ** (1.0 / (domain.d - 1)) + 1e-9)))
        pts_l, fac_l, w_l = [], [], []
        for f in active:
            axis = f // 2
            free = [i for i in range(domain.d) if i != axis]
            if domain.d == 2:
                counts = [per]
            else:
                counts = [q] * (domain.d - 1)
            axes_nodes, axes_w = [], []
            for i, c in zip(free, counts):
                length = domain.hi[i] - domain.lo[i]
                if mode == "facet_grid":
                    t, w = (np.arange(c) + 0.5) / c, np.full(c, 1.0 / c)
                else:
                    t, w = np.polynomial.legendre.leggauss(c)
                    t, w = (t + 1) / 2, w / 2
                axes_nodes.append(domain.lo[i] + t * length)
                axes_w.append(w * length)
            mesh = np.meshgrid(*axes_nodes, indexing="ij")
            wmesh = np.meshgrid(*axes_w, indexing="ij")
            m = int(np.prod(counts))
            p = np.empty((m, domain.d))
            for i, g in zip(free, mesh):
                p[:, i] = g.ravel()
            p[:, axis] = domain.hi[axis] if f % 2 else domain.lo[axis]
            pts_l.append(p)
            fac_l.append(np.full(m, f))
            w_l.append(np.prod([g.ravel() for g in wmesh], axis=0))
        points = np.concatenate(pts_l)
        facets = np.concatenate(fac_l)
        weights = np.concatenate(w_l)
    else:
        raise ValueError(f"unknown boundary sampling mode {mode!r}")
    return BoundarySample(points, _normals_for(domain, facets), weights, facets.astype(int), mode)


def distance_to_boundary(domain: DomainSpec, point) -> float | np.ndarray:
    """Distance from interior point(s) to the box boundary."""
    p = np.asarray(point, dtype=float)
    if p.shape[-1] != domain.d:
        raise ValueError(f"expected points of dimension {domain.d}")
    if not np.all(domain.contains(p)):
        raise ValueError("point lies outside the domain")
    dist = np.minimum(p - domain.lo, domain.hi - p).min(axis=-1)
    return float(dist) if np.ndim(dist) == 0 else dist
