"""``pointsource`` command line: generate | detect | recover | reproduce | plotdata.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import PRESETS, RunConfig
from .exceptions import ConfigError, NumericalError
from .experiments import Run, plotdata, reproduce
from .synthetic import GroundTruth

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _overrides(args) -> dict:
    out: dict[str, dict[str, str]] = {}

    def put(sec, key, val):
        if val is not None:
            out.setdefault(sec, {})[key] = str(val)

    put("run", "seed", getattr(args, "seed", None))
    put("noise", "delta", getattr(args, "delta", None))
    put("detection", "eps_tol", getattr(args, "eps_tol", None))
    put("detection", "m_bar", getattr(args, "m_bar", None))
    put("run", "method", getattr(args, "method", None))
    put("training", "iterations", getattr(args, "iterations", None))
    put("training", "n_sources", getattr(args, "n_sources", None))
    if getattr(args, "deterministic", False):
        put("run", "deterministic", "true")
    return out


def _config(args, preset_default: str | None = None) -> RunConfig:
    preset = getattr(args, "preset", None) or (None if getattr(args, "config", None) else preset_default)
    return RunConfig.build(preset=preset, path=getattr(args, "config", None), overrides=_overrides(args))


def _load_data(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"data file {path} not found")
    try:
        return io.read_cauchy(path)
    except ValueError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def cmd_generate(args) -> int:
    cfg = _config(args, "example1")
    run = Run(cfg, args.out)
    data, _ = run.generate()
    run.save()
    print(f"wrote {len(data)} boundary rows to {run.out / 'data.txt'}")
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _config(args)
    data, _ = _load_data(args.data)
    out = args.out or Path(args.data).parent
    run = Run(cfg, out)
    run.manifest["data_file"] = str(Path(args.data).resolve())
    trace = run.detect(data)
    if args.out:
        run.save()
    print(f"M_hat = {trace.M_hat}")
    print("sigma = " + " ".join(f"{s:.6g}" for s in trace.sigma_history))
    if trace.saturated:
        print("warning: no singular value fell below eps_tol up to M_bar")
    return EXIT_OK


def cmd_recover(args) -> int:
    cfg = _config(args, "example1")
    data, truth = _load_data(args.data)
    gt = GroundTruth.from_dict(truth) if truth else None
    run = Run(cfg, args.out)
    run.manifest["data_file"] = str(Path(args.data).resolve())
    method = cfg["run"]["method"]
    M = cfg["training"]["n_sources"]
    if M is None and data.d == 2 and data.is_full:
        M = run.detect(data).M_hat
    if method in ("algebraic", "both"):
        res = run.algebraic(data, gt, cfg["training"]["n_sources"])
        _print_sources("algebraic", res.to_sources())
    if method in ("senn", "both"):
        if M is None:
            raise ConfigError("the source count is required for partial or non-planar data (--n-sources)")
        report = run.senn(data, gt, int(M))
        _print_sources("senn", report.sources)
    run.save()
    print(f"manifest: {run.out / 'manifest.json'}")
    return EXIT_OK


def _print_sources(label, sources):
    print(f"{label}: {sources.M} sources")
    for c, x in zip(sources.intensities, sources.locations):
        cval = f"{c.real:.4f}{c.imag:+.4f}j" if np.iscomplexobj(sources.intensities) else f"{c:.4f}"
        print(f"  c = {cval}  x = ({', '.join(f'{v:.4f}' for v in x)})")


def cmd_reproduce(args) -> int:
    out = args.out or Path("runs") / args.name
    man = reproduce(args.name, out, args.seed, _overrides(args))
    with open(Path(out) / "summary.txt") as fh:
        sys.stdout.write(fh.read())
    print(f"manifest: {Path(out) / 'manifest.json'}  ({len(man['files'])} files)")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    for p in plotdata(args.manifest, args.out):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pointsource", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=False):
        p.add_argument("--config", type=Path, help="INI configuration file")
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, required=out_required)
        p.add_argument("--deterministic", action="store_true", help="single-threaded BLAS")

    p = sub.add_parser("generate", help="synthesise noisy Cauchy data")
    common(p, out_required=True)
    p.add_argument("--delta", type=float)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("detect", help="estimate the number of sources")
    common(p)
    p.add_argument("data", type=Path)
    p.add_argument("--eps-tol", type=float)
    p.add_argument("--m-bar", type=int)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("recover", help="recover sources from a data file")
    common(p, out_required=True)
    p.add_argument("data", type=Path)
    p.add_argument("--method", choices=["algebraic", "senn", "both"])
    p.add_argument("--iterations", type=int)
    p.add_argument("--n-sources", type=int)
    p.add_argument("--eps-tol", type=float)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("reproduce", help="run a benchmark preset end to end")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--delta", type=float)
    p.add_argument("--method", choices=["algebraic", "senn", "both"])
    p.add_argument("--iterations", type=int)
    p.add_argument("--eps-tol", type=float)
    p.add_argument("--deterministic", action="store_true")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("plotdata", help="emit plot-ready CSVs from a run")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    ctx = contextlib.nullcontext()
    if getattr(args, "deterministic", False):
        from threadpoolctl import threadpool_limits

        ctx = threadpool_limits(limits=1)
    try:
        with ctx:
            return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, FileNotFoundError, PermissionError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
