"""Command-line entry point: ``gradcomp <experiment> [flags]``.

Every run writes ``<out>/<experiment>.csv``: a block of ``#`` metadata lines
(version, full config, notes) followed by a header row and data rows. Values
from ``--config`` (YAML or JSON) replace the defaults; flags given on the
command line take precedence over both.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import yaml

from . import __version__
from .experiments import (EXPERIMENTS, ExperimentConfig, run_fig1, run_fig2, run_linreg_iters,
                          run_linreg_ratio, run_qnorm_table, run_sgd)

RUNNERS = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "linreg-ratio": run_linreg_ratio,
    "linreg-iters": run_linreg_iters,
    "qnorm": run_qnorm_table,
}

NOTES = {
    "fig1": ["symmetric ensembles are (B + B^T)/2 of an i.i.d. matrix",
             "wishart is G G^T / m with square G (full rank)",
             "qnorm_mc is the spectral norm of the averaged second moment"],
    "fig2": ["penalty = bound on ||L||_Q divided by the uncompressed value 1/4"],
    "linreg-ratio": ["loss (1/2)||Zx - y||^2, step 1/||L||_Q (compressed) and 1/||L|| (plain)",
                     "ratio uses (1/N) sum_t ||grad f(x_t)||^2; error bars are sample std"],
    "linreg-iters": ["censored runs (threshold not reached within max_steps) are excluded"],
}


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _str_list(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradcomp",
                                     description="Randomized linear gradient compression experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="YAML/JSON file with config keys")
        p.add_argument("--m", type=int, dest="m", help="ambient dimension")
        p.add_argument("--k", type=_int_list, dest="k_list", help="comma-separated k values")
        p.add_argument("--scheme", type=_str_list, dest="schemes",
                       help="comma-separated subset of haar,norm,rand (or none)")
        p.add_argument("--samples", type=int, dest="n_samples", help="Monte-Carlo samples")
        p.add_argument("--seeds", type=int, dest="n_seeds", help="number of random datasets/matrices")
        p.add_argument("--steps", type=int, dest="N", help="iteration budget N")
        p.add_argument("--tau", type=float, help="threshold on ||grad f||^2")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", dest="output_dir", help="output directory")
        p.add_argument("--plot", action="store_true", help="also write a PNG of the table")
        p.add_argument("--rows", type=int, dest="n_data", help="data rows for regression problems")
        p.add_argument("--max-steps", type=int, dest="max_steps")
        p.add_argument("--tasks", type=int, dest="n_tasks")
        p.add_argument("--sigma", type=float, help="injected gradient noise level")
        p.add_argument("--problem", choices=["quadratic", "least-squares", "logreg"])
        p.add_argument("--matrix", help="identity, an ensemble name, or a CSV file")
        p.add_argument("--jobs", type=int, help="worker processes for seed sweeps")
    return parser


def load_config(path) -> dict:
    text = Path(path).read_text()
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping")
    for key in ("k_list", "schemes"):
        if isinstance(data.get(key), (str, int)):
            data[key] = _int_list(data[key]) if key == "k_list" else _str_list(data[key])
    return data


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    given = vars(args).copy()
    experiment = given.pop("experiment")
    merged = {}
    if "config" in given:
        merged.update(load_config(given.pop("config")))
    merged.update(given)
    merged["experiment"] = experiment
    return ExperimentConfig.from_dict(merged)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".17g")
    return str(v)


def write_csv(path: Path, header: list, rows: list[dict], meta: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        for line in meta:
            fh.write(f"# {line}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(col, "")) for col in header) + "\n")


def _meta(cfg: ExperimentConfig, extra=()) -> list[str]:
    lines = [f"gradcomp {__version__}", f"experiment: {cfg.experiment}",
             "config: " + json.dumps(cfg.to_dict(), sort_keys=True)]
    lines += [f"note: {n}" for n in NOTES.get(cfg.experiment, [])]
    lines += list(extra)
    return lines


def execute(cfg: ExperimentConfig) -> Path:
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{cfg.experiment}.csv"
    if cfg.experiment == "sgd":
        trace, info = run_sgd(cfg)
        extra = [f"{k}: {_fmt(v)}" for k, v in info.items()]
        with open(path, "w", newline="") as fh:
            for line in _meta(cfg, extra):
                fh.write(f"# {line}\n")
            trace.to_csv(fh)
        rows = [{"t": t, "f": f, "grad_sq": g, "eps": e}
                for t, (f, g, e) in enumerate(zip(trace.f, trace.grad_sq, trace.eps), start=1)]
    else:
        rows = RUNNERS[cfg.experiment](cfg)
        header = list(rows[0]) if rows else []
        for row in rows:
            header += [c for c in row if c not in header]
        write_csv(path, header, rows, _meta(cfg))
    if cfg.plot:
        from .plots import plot_rows
        plot_rows(cfg.experiment, rows, out_dir / f"{cfg.experiment}.png")
    return path


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        path = execute(cfg)
    except (ValueError, OSError, yaml.YAMLError) as exc:
        print(f"gradcomp: error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
