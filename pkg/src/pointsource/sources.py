"""Containers for point-source configurations and boundary (Cauchy) data."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SourceSet:
    """``M`` point sources: intensities ``c`` (M,) and locations ``X`` (M, d)."""

    intensities: np.ndarray
    locations: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.intensities)
        if not np.iscomplexobj(c):
            c = c.astype(float)
        c = c.reshape(-1)
        X = np.asarray(self.locations, dtype=float)
        if X.ndim == 1:
            X = X.reshape(0, 0) if X.size == 0 else X[None, :]
        if len(c) != len(X):
            raise ValueError(f"{len(c)} intensities but {len(X)} locations")
        self.intensities = c
        self.locations = X

    @property
    def M(self) -> int:
        return len(self.intensities)

    @property
    def d(self) -> int:
        return self.locations.shape[1] if self.locations.ndim == 2 else 0

    @classmethod
    def empty(cls, d: int) -> "SourceSet":
        return cls(np.zeros(0), np.zeros((0, d)))

    def copy(self) -> "SourceSet":
        return SourceSet(self.intensities.copy(), self.locations.copy())

    def to_dict(self) -> dict:
        c = self.intensities
        out = {"locations": self.locations.tolist()}
        if np.iscomplexobj(c):
            out["intensities"] = c.real.tolist()
            out["intensities_imag"] = c.imag.tolist()
        else:
            out["intensities"] = c.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SourceSet":
        c = np.asarray(d["intensities"], dtype=float)
        if "intensities_imag" in d:
            c = c + 1j * np.asarray(d["intensities_imag"], dtype=float)
        X = np.asarray(d["locations"], dtype=float)
        if X.size == 0:
            X = X.reshape(0, int(d.get("d", 0)))
        return cls(c, X)


@dataclass
class CauchyData:
    """Dirichlet/Neumann traces sampled at boundary nodes.

    ``f`` and ``g`` may be real or complex. A NaN entry means the value was
    not observed at that node (partial data); each node carries the weight
    of the term(s) it contributes to.
    """

    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    f: np.ndarray
    g: np.ndarray
    delta: float = 0.0
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        self.f = np.asarray(self.f).reshape(-1)
        self.g = np.asarray(self.g).reshape(-1)
        n = len(self.points)
        for name in ("normals", "weights", "f", "g"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} rows, expected {n}")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.f) or np.iscomplexobj(self.g)

    @property
    def dirichlet_rows(self) -> np.ndarray:
        return np.flatnonzero(np.isfinite(self.f))

    @property
    def neumann_rows(self) -> np.ndarray:
        return np.flatnonzero(np.isfinite(self.g))

    @property
    def is_full(self) -> bool:
        """True when every node carries both traces."""
        return bool(np.all(np.isfinite(self.f)) and np.all(np.isfinite(self.g)))

    def subset(self, rows) -> "CauchyData":
        return CauchyData(self.points[rows], self.normals[rows], self.weights[rows],
                          self.f[rows], self.g[rows], self.delta, self.seed, dict(self.meta))

    @classmethod
    def concatenate(cls, parts: list["CauchyData"]) -> "CauchyData":
        first = parts[0]
        cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
        return cls(cat("points"), cat("normals"), cat("weights"), cat("f"), cat("g"),
                   first.delta, first.seed, dict(first.meta))
