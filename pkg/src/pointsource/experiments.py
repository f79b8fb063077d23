"""End-to-end runs: data generation, detection, recovery, metrics and run manifests."""
from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np

from . import io
from ._random import named_rng
from .algebraic import recover_algebraic
from .config import RunConfig
from .domain import DomainSpec, facet_mask_excluding, sample_boundary
from .exceptions import ConfigError
from .kernels import KernelKind
from .metrics import (directed_hausdorff, hausdorff, match_sources, population_loss_estimate,
                      regular_part_error, separability, solution_slice)
from .reciprocity import detect_count, monomial_moments
from .sources import CauchyData, SourceSet
from .synthetic import REGULAR_PARTS, GroundTruth, ground_truth_registry, noisy_cauchy, trace_cauchy
from .training import LossWeights, TrainConfig, TrainReport, train

log = logging.getLogger(__name__)


def package_version() -> str:
    from . import __version__

    return __version__


def ground_truth_from(cfg: RunConfig) -> GroundTruth:
    base = ground_truth_registry(cfg["sources"]["truth"])
    d = cfg["domain"]["d"]
    kernel = KernelKind(cfg["kernel"]["operator"], d, cfg["kernel"]["k"])
    c = cfg["sources"]["intensities"]
    X = cfg["sources"]["locations"]
    sources = base.sources if c is None and X is None else SourceSet(
        c if c is not None else base.sources.intensities, X if X is not None else base.sources.locations)
    reg = cfg["sources"]["regular_part"]
    regular = base.regular_part if reg is None else REGULAR_PARTS[reg]
    domain = DomainSpec(d, cfg["domain"]["lo"], cfg["domain"]["hi"])
    try:
        return GroundTruth(kernel, sources, regular, domain, cfg["training"]["gamma"], base.name)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"inconsistent ground truth: {exc}") from exc


def _mask(d: int, facets) -> np.ndarray | None:
    if facets is None:
        return None
    return ~facet_mask_excluding(d, *facets)


def generate_data(cfg: RunConfig, gt: GroundTruth, seed: int) -> CauchyData:
    """Boundary nodes from the ``sampling`` stream, noise from the ``noise`` stream.

    With separate Dirichlet/Neumann facet lists the two traces live on
    independent node sets, and each row carries only its own trace.
    """
    dc = cfg["data"]
    rng = named_rng(seed, "sampling")
    d = gt.kernel.d
    if dc["dirichlet_facets"] is not None or dc["neumann_facets"] is not None:
        parts = []
        for kind in ("dirichlet", "neumann"):
            facets = dc[f"{kind}_facets"] or tuple(range(2 * d))
            n = dc[f"n_{kind}"] or dc["n_boundary"]
            dom = gt.domain.with_mask(_mask(d, facets))
            part = trace_cauchy(gt, sample_boundary(dom, n, dc["mode"], rng))
            if kind == "dirichlet":
                part.g = np.full(len(part), np.nan, dtype=part.g.dtype)
            else:
                part.f = np.full(len(part), np.nan, dtype=part.f.dtype)
            parts.append(part)
        exact = CauchyData.concatenate(parts)
    else:
        dom = gt.domain if dc["facets"] is None else gt.domain.with_mask(_mask(d, dc["facets"]))
        exact = trace_cauchy(gt, sample_boundary(dom, dc["n_boundary"], dc["mode"], rng))
    data = noisy_cauchy(exact, cfg["noise"]["delta"], named_rng(seed, "noise"), seed=seed)
    data.meta.update({"operator": gt.kernel.operator, "k": gt.kernel.k})
    return data


def kernel_of(data: CauchyData) -> KernelKind:
    return KernelKind(data.meta.get("operator", "laplace"), data.d, float(data.meta.get("k", 0.0)))


def train_config(cfg: RunConfig, seed: int, n_sources: int | None = None) -> TrainConfig:
    t = cfg["training"]
    return TrainConfig(
        hidden_layers=t["hidden_layers"], n_interior=t["n_interior"], n_boundary=cfg["data"]["n_boundary"],
        iterations=t["iterations"], lr_theta=t["lr_theta"], lr_sources=t["lr_sources"],
        sigma_d=t["sigma_d"], sigma_n=t["sigma_n"],
        n_sources=n_sources if n_sources is not None else t["n_sources"], gamma=t["gamma"],
        intensity_init=t["intensity_init"], log_every=t["log_every"], batch_size=t["batch_size"],
        divergence_factor=t["divergence_factor"], monitor_points=t["monitor_points"], seed=seed)


def source_metrics(recovered: SourceSet, gt: GroundTruth) -> dict:
    exact = gt.sources
    out = {"M_recovered": recovered.M, "M_exact": exact.M,
           "intensity_sum": complex(np.sum(recovered.intensities)) if np.iscomplexobj(recovered.intensities)
           else float(np.sum(recovered.intensities)),
           "intensity_sum_exact": float(np.sum(exact.intensities))}
    if recovered.M and exact.M:
        m = match_sources(recovered, exact)
        out["match"] = m.to_dict()
        out["max_location_error"] = m.max_location_error
        out["max_intensity_error"] = m.max_intensity_error
        out["hausdorff"] = hausdorff(recovered.locations, exact.locations)
        out["directed_exact_to_recovered"] = directed_hausdorff(exact.locations, recovered.locations)
        out["directed_recovered_to_exact"] = directed_hausdorff(recovered.locations, exact.locations)
        sep = separability(recovered.locations, gt.gamma, gt.domain)
        out["separability"] = {"rho": sep.rho, "in_omega_gamma": sep.in_omega_gamma}
    return out


def senn_metrics(report: TrainReport, gt: GroundTruth, cfg: RunConfig, seed: int) -> dict:
    out = source_metrics(report.sources, gt)
    mc = cfg["metrics"]
    err, se = regular_part_error(report.nets, gt, mc["n_quad"], named_rng(seed, "monitor"))
    out["regular_part_error"] = {"estimate": err, "stderr": se}
    terms, lse = population_loss_estimate(report.nets, report.sources, gt,
                                          LossWeights(cfg["training"]["sigma_d"], cfg["training"]["sigma_n"]),
                                          mc["population_interior"], mc["population_boundary"],
                                          named_rng(seed, "population"))
    out["population_loss"] = {"total": terms.total, "residual": terms.residual,
                              "dirichlet": terms.dirichlet, "neumann": terms.neumann, "stderr": lse}
    out["final_empirical_loss"] = report.final_loss
    return out


def _sources_record(s: SourceSet) -> dict:
    return s.to_dict()


class Run:
    """One configured experiment writing into ``out``."""

    def __init__(self, cfg: RunConfig, out, seed: int | None = None):
        self.cfg = cfg
        self.seed = cfg["run"]["seed"] if seed is None else int(seed)
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest: dict = {"version": package_version(), "preset": cfg.preset, "seed": self.seed,
                               "config": cfg.to_dict(), "wall_times": {}, "files": []}
        self.manifest["config"]["run"]["seed"] = self.seed
        with open(self.out / "config.ini", "w") as fh:
            fh.write(cfg.to_ini())
        self._file(self.out / "config.ini")

    def _file(self, path) -> Path:
        rel = str(Path(path).relative_to(self.out))
        if rel not in self.manifest["files"]:
            self.manifest["files"].append(rel)
        return Path(path)

    def generate(self, gt: GroundTruth | None = None) -> tuple[CauchyData, GroundTruth]:
        t0 = time.perf_counter()
        gt = gt or ground_truth_from(self.cfg)
        data = generate_data(self.cfg, gt, self.seed)
        path = io.write_cauchy(self.out / "data.txt", data, truth=gt.to_dict())
        self._file(path)
        self._file(io.truth_path(path))
        self.manifest["data_file"] = str(path.name)
        self.manifest["n_rows"] = len(data)
        self.manifest["wall_times"]["generate"] = time.perf_counter() - t0
        return data, gt

    def detect(self, data: CauchyData):
        t0 = time.perf_counter()
        det = self.cfg["detection"]
        if data.d != 2:
            raise ConfigError("source-count detection is implemented for planar data only")
        if not data.is_full:
            raise ConfigError("source-count detection needs both traces at every node")
        mu = monomial_moments(data, 2 * det["m_bar"] + 1)
        trace = detect_count(mu, det["m_bar"], det["eps_tol"])
        self.manifest["detection"] = trace.to_dict()
        self.manifest["wall_times"]["detect"] = time.perf_counter() - t0
        return trace

    def algebraic(self, data: CauchyData, gt: GroundTruth | None, M: int | None = None):
        t0 = time.perf_counter()
        det = self.cfg["detection"]
        if data.d != 2 or not data.is_full:
            raise ConfigError("the algebraic method needs full Cauchy data in two dimensions")
        trace, res = recover_algebraic(data, det["m_bar"], det["eps_tol"], M, det["extra_moments"])
        self.manifest.setdefault("detection", trace.to_dict())
        rec = {"sources": _sources_record(res.to_sources()), "pencil": res.to_dict(), "M": res.M}
        if gt is not None:
            real = SourceSet(res.intensities.real, res.to_sources().locations)
            rec["metrics"] = source_metrics(real, gt)
        self.manifest["algebraic"] = rec
        self.manifest["wall_times"]["algebraic"] = time.perf_counter() - t0
        return res

    def senn(self, data: CauchyData, gt: GroundTruth | None, M: int, label: str = "senn") -> TrainReport:
        tc = train_config(self.cfg, self.seed, M)
        domain = DomainSpec(data.d, self.cfg["domain"]["lo"], self.cfg["domain"]["hi"])
        report = train(tc, data, kernel_of(data), domain, gt=gt, M=M)
        traj = self._file(io.write_trajectories(self.out / f"{label}_trajectories.csv", report))
        ckpt_dir = self.out / f"{label}_checkpoint"
        io.save_checkpoint(ckpt_dir, report.nets, report.sources, self.seed, int(report.iterations[-1]))
        for p in sorted(ckpt_dir.iterdir()):
            self._file(p)
        rec = {"M": M, "sources": _sources_record(report.sources), "final_loss": report.final_loss,
               "trajectories": traj.name, "checkpoint": ckpt_dir.name, "train_config": tc.to_dict()}
        if report.regular_error is not None:
            rec["monitor_regular_error"] = float(report.regular_error[-1])
        if gt is not None:
            rec["metrics"] = senn_metrics(report, gt, self.cfg, self.seed)
        self.manifest[label] = rec
        self.manifest["wall_times"][label] = report.wall_time
        return report

    def save(self) -> Path:
        path = self.out / "manifest.json"
        if "manifest.json" not in self.manifest["files"]:
            self.manifest["files"].append("manifest.json")
        io.write_json(path, self.manifest)
        return path


def comparison_rows(label: str, recovered: SourceSet, gt: GroundTruth) -> list[list]:
    """Exact versus recovered sources, paired by bottleneck matching when counts agree."""
    rows = []
    exact = gt.sources
    if recovered.M == exact.M and exact.M:
        perm = match_sources(recovered, exact).permutation
        pairs = [(j, perm[j]) for j in range(recovered.M)]
    else:
        pairs = []
        for j in range(recovered.M):
            dist = np.linalg.norm(exact.locations - recovered.locations[j], axis=1)
            pairs.append((j, int(np.argmin(dist))))
    for j, i in pairs:
        c_rec = recovered.intensities[j]
        rows.append([label, j + 1, i + 1, float(np.real(exact.intensities[i])), float(np.real(c_rec)),
                     float(np.linalg.norm(recovered.locations[j] - exact.locations[i]))]
                    + list(map(float, exact.locations[i])) + list(map(float, recovered.locations[j])))
    return rows


def reproduce(name: str, out, seed: int | None = None, overrides: dict | None = None,
              method: str | None = None) -> dict:
    """Generate, detect (when possible), recover and score one benchmark preset."""
    cfg = RunConfig.build(preset=name, overrides=overrides)
    run = Run(cfg, out, seed)
    data, gt = run.generate()
    method = method or cfg["run"]["method"]
    summary = [f"preset {name}  seed {run.seed}  delta {cfg['noise']['delta']}"]
    rows: list[list] = []
    M = cfg["training"]["n_sources"]
    if data.d == 2 and data.is_full:
        trace = run.detect(data)
        summary.append(f"detected M_hat = {trace.M_hat}  sigma = {np.round(trace.sigma_history, 3).tolist()}")
        if M is None:
            M = trace.M_hat
    if M is None:
        M = gt.sources.M
    if method in ("algebraic", "both"):
        res = run.algebraic(data, gt)
        rows += comparison_rows("algebraic", res.to_sources(), gt)
        m = run.manifest["algebraic"].get("metrics", {})
        summary.append(f"algebraic: location error {m.get('max_location_error')}, "
                       f"intensity error {m.get('max_intensity_error')}")
    if method in ("senn", "both"):
        counts = cfg["run"]["forced_counts"] or (M,)
        for Mi in counts:
            label = "senn" if len(counts) == 1 else f"senn_M{Mi}"
            report = run.senn(data, gt, int(Mi), label)
            rows += comparison_rows(label, report.sources, gt)
            m = run.manifest[label]["metrics"]
            summary.append(f"{label}: location error {m.get('max_location_error')}, intensity error "
                           f"{m.get('max_intensity_error')}, intensity sum {m['intensity_sum']}, "
                           f"exact->recovered {m.get('directed_exact_to_recovered')}, "
                           f"regular part error {m['regular_part_error']['estimate']:.3g}")
    d = gt.kernel.d
    header = ["method", "recovered", "exact", "c_exact", "c_recovered", "distance"] + \
        [f"x{i + 1}_exact" for i in range(d)] + [f"x{i + 1}_recovered" for i in range(d)]
    run._file(io.write_csv(run.out / "comparison.csv", header, rows))
    with open(run.out / "summary.txt", "w") as fh:
        fh.write("\n".join(summary) + "\n")
    run._file(run.out / "summary.txt")
    run.save()
    return run.manifest


def plotdata(manifest_path, out=None) -> list[Path]:
    """Loss, trajectory and solution-slice CSVs from a finished SENN run."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"manifest {manifest_path} not found")
    root = manifest_path.parent
    out = Path(out) if out else root / "plotdata"
    out.mkdir(parents=True, exist_ok=True)
    man = io.read_json(manifest_path)
    labels = [k for k in man if k == "senn" or k.startswith("senn_M")]
    if not labels:
        raise ConfigError("manifest holds no trained model")
    _, truth = io.read_cauchy(root / man["data_file"])
    gt = GroundTruth.from_dict(truth) if truth else None
    written = []
    for label in labels:
        rec = man[label]
        traj_path = root / rec["trajectories"]
        if not traj_path.exists():
            raise ConfigError(f"trajectory file {traj_path} missing")
        try:
            traj = io.read_trajectories(traj_path)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        written.append(io.write_csv(out / f"{label}_loss.csv", ["iter", "total", "residual", "dirichlet", "neumann"],
                                    zip(*(traj[k] for k in ("iter", "total", "residual", "dirichlet", "neumann")))))
        try:
            nets, sources, _ = io.load_checkpoint(root / rec["checkpoint"])
        except FileNotFoundError as exc:
            raise ConfigError(str(exc)) from exc
        if gt is None:
            continue
        n = man["config"]["metrics"]["slice_n"]
        pts, pred, exact = solution_slice(nets, sources, gt, n)
        err = np.abs(pred - exact)
        cols = ["x1", "x2"]
        if np.iscomplexobj(pred) or np.iscomplexobj(exact):
            for part, fn in (("re", np.real), ("im", np.imag)):
                rows = np.column_stack([pts[:, 0], pts[:, 1], fn(pred), fn(exact), np.abs(fn(pred) - fn(exact))])
                written.append(io.write_csv(out / f"{label}_slice_{part}.csv", cols + ["pred", "exact", "err"], rows))
        else:
            rows = np.column_stack([pts[:, 0], pts[:, 1], pred, exact, err])
            written.append(io.write_csv(out / f"{label}_slice.csv", cols + ["pred", "exact", "err"], rows))
    return written
