"""Run configuration: INI sections, typed schema, presets for the benchmark experiments.

Precedence, lowest first: schema defaults, preset, config file, command-line
overrides. Unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
import copy
import io
from pathlib import Path
from typing import Any, Callable

from .exceptions import ConfigError


def _opt(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def inner(text):
        text = str(text).strip()
        return None if text.lower() in ("", "none") else parse(text)
    return inner


def _bool(text) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text) -> tuple[float, ...]:
    return tuple(float(t) for t in str(text).replace(",", " ").split())


def _ints(text) -> tuple[int, ...]:
    return tuple(int(t) for t in str(text).replace(",", " ").split())


def _matrix(text) -> tuple[tuple[float, ...], ...]:
    """Rows separated by ``;``, entries by spaces or commas."""
    return tuple(_floats(row) for row in str(text).split(";") if row.strip())


SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "domain": {"d": (int, 2), "lo": (float, -1.0), "hi": (float, 1.0)},
    "kernel": {"operator": (str, "laplace"), "k": (float, 0.0)},
    "sources": {
        "truth": (str, "example1"),
        "intensities": (_opt(_floats), None),
        "locations": (_opt(_matrix), None),
        "regular_part": (_opt(str), None),
    },
    "data": {
        "n_boundary": (int, 2000),
        "mode": (str, "facet_grid"),
        "facets": (_opt(_ints), None),
        "dirichlet_facets": (_opt(_ints), None),
        "neumann_facets": (_opt(_ints), None),
        "n_dirichlet": (_opt(int), None),
        "n_neumann": (_opt(int), None),
    },
    "noise": {"delta": (float, 0.02)},
    "detection": {"m_bar": (int, 5), "eps_tol": (float, 0.1), "extra_moments": (int, 2)},
    "training": {
        "hidden_layers": (_ints, (20, 20)),
        "n_interior": (int, 3000),
        "iterations": (int, 10000),
        "lr_theta": (float, 1e-3),
        "lr_sources": (float, 6e-3),
        "sigma_d": (float, 10.0),
        "sigma_n": (float, 10.0),
        "n_sources": (_opt(int), None),
        "gamma": (float, 0.1),
        "intensity_init": (_floats, (0.0, 1.0)),
        "log_every": (int, 50),
        "batch_size": (_opt(int), None),
        "divergence_factor": (float, 1e6),
        "monitor_points": (int, 2000),
    },
    "metrics": {
        "n_quad": (int, 20000),
        "population_interior": (int, 30000),
        "population_boundary": (int, 20000),
        "slice_n": (int, 201),
    },
    "run": {
        "seed": (int, 0),
        "method": (str, "senn"),
        "forced_counts": (_opt(_ints), None),
        "deterministic": (_bool, False),
    },
}

METHODS = ("algebraic", "senn", "both")
MODES = ("monte_carlo", "facet_grid", "gauss_legendre")


def _plain(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(_plain(r) for r in value)
        return ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def defaults() -> dict[str, dict[str, Any]]:
    return {sec: {k: copy.copy(v[1]) for k, v in keys.items()} for sec, keys in SCHEMA.items()}


PRESETS: dict[str, dict[str, dict[str, str]]] = {
    # planar Poisson problem, four sources, full Cauchy data on a midpoint grid
    "example1": {},
    # Dirichlet trace only on x1 = -1, 1; Neumann trace everywhere; M given
    "example1_partial_ii": {
        "data": {"mode": "monte_carlo", "dirichlet_facets": "0 1", "n_dirichlet": "1000",
                 "neumann_facets": "0 1 2 3", "n_neumann": "2000"},
        "training": {"n_interior": "5000", "n_sources": "4"},
    },
    # both traces on three edges (x2 = -1 missing); M given
    "example1_partial_iii": {
        "data": {"mode": "monte_carlo", "facets": "0 1 3", "n_boundary": "9000"},
        "training": {"n_interior": "10000", "n_sources": "4"},
    },
    # wrongly estimated source counts at 10% noise
    "example1_wrongM": {
        "noise": {"delta": "0.1"},
        "run": {"forced_counts": "5 3"},
    },
    # ten-dimensional Poisson problem, two sources, exact data
    "example2": {
        "domain": {"d": "10"},
        "sources": {"truth": "example2"},
        "data": {"mode": "monte_carlo", "n_boundary": "20000"},
        "noise": {"delta": "0.0"},
        "training": {"hidden_layers": "50 50 50 50 50 50", "n_interior": "10000", "sigma_d": "20",
                     "sigma_n": "20", "lr_sources": "6e-3", "n_sources": "2"},
    },
    # three-dimensional Helmholtz problem, k = 1, three sources
    "example3": {
        "domain": {"d": "3"},
        "kernel": {"operator": "helmholtz", "k": "1.0"},
        "sources": {"truth": "example3"},
        "data": {"mode": "monte_carlo", "n_boundary": "20000"},
        "noise": {"delta": "0.05"},
        "training": {"hidden_layers": "20 20 20", "n_interior": "10000", "sigma_d": "20", "sigma_n": "20",
                     "lr_sources": "2e-3", "n_sources": "3"},
    },
    # as example3 without data on the face x3 = -1
    "example3_partial": {
        "domain": {"d": "3"},
        "kernel": {"operator": "helmholtz", "k": "1.0"},
        "sources": {"truth": "example3"},
        "data": {"mode": "monte_carlo", "n_boundary": "20000", "facets": "0 1 2 3 5"},
        "noise": {"delta": "0.05"},
        "training": {"hidden_layers": "20 20 20", "n_interior": "10000", "sigma_d": "20", "sigma_n": "20",
                     "lr_sources": "2e-3", "n_sources": "3"},
    },
}


class RunConfig:
    """Validated, fully populated configuration (``cfg["training"]["lr_theta"]``)."""

    def __init__(self, values: dict[str, dict[str, Any]], preset: str | None = None):
        self.values = values
        self.preset = preset
        self._validate()

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    @classmethod
    def build(cls, preset: str | None = None, path=None, overrides: dict | None = None) -> "RunConfig":
        vals = defaults()
        layers = []
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
            layers.append(PRESETS[preset])
        if path is not None:
            layers.append(read_ini(path))
        if overrides:
            layers.append(overrides)
        for layer in layers:
            _apply(vals, layer)
        return cls(vals, preset)

    def _validate(self):
        v = self.values
        try:
            if v["domain"]["d"] < 2:
                raise ConfigError("domain.d must be >= 2")
            if not v["domain"]["lo"] < v["domain"]["hi"]:
                raise ConfigError("domain.lo must be < domain.hi")
            if v["kernel"]["operator"] not in ("laplace", "helmholtz"):
                raise ConfigError("kernel.operator must be laplace or helmholtz")
            if v["data"]["mode"] not in MODES:
                raise ConfigError(f"data.mode must be one of {MODES}")
            if v["run"]["method"] not in METHODS:
                raise ConfigError(f"run.method must be one of {METHODS}")
            if v["noise"]["delta"] < 0:
                raise ConfigError("noise.delta must be >= 0")
            if v["detection"]["eps_tol"] <= 0 or v["detection"]["m_bar"] < 1:
                raise ConfigError("detection needs eps_tol > 0 and m_bar >= 1")
            t = v["training"]
            if t["lr_theta"] <= 0 or t["lr_sources"] <= 0:
                raise ConfigError("learning rates must be positive")
            if t["n_interior"] < 1 or v["data"]["n_boundary"] < 1 or t["iterations"] < 0:
                raise ConfigError("sample counts must be >= 1 and iterations >= 0")
            if t["sigma_d"] <= 0 or t["sigma_n"] <= 0:
                raise ConfigError("penalty weights must be positive")
            n_fac = 2 * v["domain"]["d"]
            for key in ("facets", "dirichlet_facets", "neumann_facets"):
                fac = v["data"][key]
                if fac is not None and (not fac or min(fac) < 0 or max(fac) >= n_fac):
                    raise ConfigError(f"data.{key} must list facets in 0..{n_fac - 1}")
        except KeyError as exc:  # pragma: no cover - schema guarantees presence
            raise ConfigError(f"missing configuration entry {exc}") from exc

    def to_dict(self) -> dict[str, dict[str, Any]]:
        out = {}
        for sec, keys in self.values.items():
            out[sec] = {k: list(v) if isinstance(v, tuple) else v for k, v in keys.items()}
            for k, v in out[sec].items():
                if isinstance(v, list) and v and isinstance(v[0], tuple):
                    out[sec][k] = [list(r) for r in v]
        return out

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for sec, keys in self.values.items():
            cp[sec] = {k: _plain(v) for k, v in keys.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def read_ini(path) -> dict[str, dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return {sec: dict(cp[sec]) for sec in cp.sections()}


def _apply(vals: dict, layer: dict):
    for sec, keys in layer.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in keys.items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            parse = SCHEMA[sec][key][0]
            if raw is None or not isinstance(raw, str):
                vals[sec][key] = raw
                continue
            try:
                vals[sec][key] = parse(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value {raw!r} for {sec}.{key}: {exc}") from exc
