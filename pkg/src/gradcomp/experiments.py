"""Reproducible experiment drivers behind the command-line interface.

Each ``run_*`` function takes an :class:`ExperimentConfig` and returns a list
of row dictionaries (one CSV row each) in a fixed order. Randomness is
derived from ``(cfg.seed, seed index, tag)`` so results do not depend on the
execution order of seed sweeps.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from . import bounds
from .compressors import CompressorSpec, Scheme, make_rng
from .optimizer import AutoStep, RunConfig, RunTrace, average_grad_sq, run, steps_to_threshold
from .problems import (Ensemble, make_ensemble_matrix, make_least_squares, make_logreg_binary,
                       make_random_quadratic, with_gaussian_noise)
from .qnorm import qnorm_exact, qnorm_mc, omega_of, spectral_norm

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "derive_seed",
    "run_fig1",
    "run_fig2",
    "run_linreg_ratio",
    "run_linreg_iters",
    "run_qnorm_table",
    "run_sgd",
]

EXPERIMENTS = ("fig1", "fig2", "linreg-ratio", "linreg-iters", "qnorm", "sgd")
ALL_SCHEMES = ("haar", "norm", "rand")

_DEFAULT_M = {"fig1": 30, "fig2": 100, "linreg-ratio": 100, "linreg-iters": 100,
              "qnorm": 30, "sgd": 30}
_DEFAULT_K = {"fig1": [1, 2, 5, 10, 15, 20, 25, 30],
              "linreg-ratio": [5, 10, 25, 50, 75, 100],
              "linreg-iters": [5, 10, 25, 50, 75, 100]}


@dataclass
class ExperimentConfig:
    experiment: str = "fig2"
    m: Optional[int] = None
    k_list: Optional[list] = None
    n_samples: int = 20000
    n_seeds: int = 1
    N: int = 40
    tau: float = 1e-3
    schemes: list = field(default_factory=lambda: list(ALL_SCHEMES))
    seed: int = 0
    output_dir: str = "results"
    plot: bool = False
    # least-squares rows, iteration cap for threshold runs, simulated tasks
    n_data: int = 10
    max_steps: int = 10000
    n_tasks: int = 1
    sigma: float = 0.0
    problem: str = "quadratic"
    matrix: str = "identity"
    jobs: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.m is None:
            self.m = _DEFAULT_M[self.experiment]
        if self.k_list is None:
            self.k_list = _DEFAULT_K.get(self.experiment)
            if self.k_list is not None:
                # default grids are clipped to the chosen m; explicit lists are not
                self.k_list = [k for k in self.k_list if k <= self.m] or [self.m]
            else:
                self.k_list = ([max(1, self.m // 2)] if self.experiment in ("qnorm", "sgd")
                               else list(range(1, self.m + 1)))
        self.k_list = [int(k) for k in self.k_list]
        self.schemes = [Scheme.parse(s).value for s in self.schemes if str(s).lower() != "none"]
        if self.m < 1:
            raise ValueError("m must be positive")
        bad = [k for k in self.k_list if not 1 <= k <= self.m]
        if bad:
            raise ValueError(f"k values {bad} outside [1, {self.m}]")
        if self.n_seeds < 1 or self.n_samples < 1 or self.N < 1 or self.max_steps < 1:
            raise ValueError("n_seeds, n_samples, N and max_steps must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def derive_seed(*keys) -> int:
    """Stable 63-bit seed from a tuple of ints/strings."""
    ints = []
    for key in keys:
        if isinstance(key, str):
            ints.extend(key.encode())
        else:
            ints.append(int(key))
    state = np.random.SeedSequence(ints).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _mean_std(values):
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return math.nan, math.nan, math.nan
    std = float(a.std(ddof=1)) if a.size > 1 else 0.0
    return float(a.mean()), std, std / math.sqrt(a.size)


# -- Q-seminorm of random ensembles ---------------------------------------------------

def _fig1_seed(args):
    cfg, kind, i = args
    a = make_ensemble_matrix(kind, cfg.m, derive_seed(cfg.seed, i, kind))
    rows = []
    for scheme in cfg.schemes:
        for k in cfg.k_list:
            spec = CompressorSpec(scheme, cfg.m, k)
            mc = qnorm_mc(spec, a, cfg.n_samples, derive_seed(cfg.seed, i, kind, scheme, k))
            rows.append({"kind": kind, "seed_index": i, "scheme": scheme, "k": k,
                         "qnorm_mc": mc, "qnorm_exact": qnorm_exact(spec, a),
                         "spectral_norm": spectral_norm(a), "n_samples": cfg.n_samples})
    return rows


def run_fig1(cfg: ExperimentConfig) -> list[dict]:
    """Monte-Carlo and exact Q-seminorms of one matrix per ensemble and seed."""
    jobs = [(cfg, kind.value, i) for kind in Ensemble for i in range(cfg.n_seeds)]
    return [row for rows in _map(_fig1_seed, jobs, cfg.jobs) for row in rows]


# -- predicted penalty for logistic regression ----------------------------------------

def run_fig2(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for mode in ("qnorm", "omega"):
        rows.extend(bounds.penalty_curves(cfg.m, cfg.k_list, mode, schemes=cfg.schemes))
    return rows


# -- linear regression experiments ----------------------------------------------------

def _linreg_problem(cfg, i):
    return make_least_squares(cfg.m, cfg.n_data, derive_seed(cfg.seed, i, "data"))


def _ratio_seed(args):
    cfg, i = args
    prob = _linreg_problem(cfg, i)
    norm_L = spectral_norm(prob.smoothness)
    base = run(prob, RunConfig(None, n_steps=cfg.N, seed=derive_seed(cfg.seed, i, "base")))
    out = {}
    for scheme in cfg.schemes:
        for k in cfg.k_list:
            spec = CompressorSpec(scheme, cfg.m, k)
            P = qnorm_exact(spec, prob.smoothness)
            tr = run(prob, RunConfig(spec, n_steps=cfg.N, step_size=AutoStep(P=P),
                                     seed=derive_seed(cfg.seed, i, scheme, k)))
            if tr.diverged or base.diverged:
                out[scheme, k] = None
                continue
            out[scheme, k] = (average_grad_sq(tr, cfg.N) / average_grad_sq(base, cfg.N),
                              tr.grad_sq[-1] / base.grad_sq[-1],
                              P / norm_L)
    return out


def run_linreg_ratio(cfg: ExperimentConfig) -> list[dict]:
    """Compressed vs plain gradient descent after ``N`` steps, over random datasets.

    ``ratio`` compares the averaged squared gradient norm
    ``(1/N) sum_t ||grad f(x_t)||^2`` (the quantity the convergence bound
    controls); ``final_ratio`` compares ``||grad f(x_N)||^2`` alone.
    ``predicted`` is the ratio of the two noise-free bounds, ``||L||_Q / ||L||``.
    """
    per_seed = _map(_ratio_seed, [(cfg, i) for i in range(cfg.n_seeds)], cfg.jobs)
    rows = []
    for scheme in cfg.schemes:
        for k in cfg.k_list:
            vals = [s[scheme, k] for s in per_seed if s[scheme, k] is not None]
            ratio, final, pred = (np.array(v) for v in zip(*vals)) if vals else ([], [], [])
            r_mean, r_std, r_se = _mean_std(ratio)
            f_mean, f_std, _ = _mean_std(final)
            p_mean, p_std, _ = _mean_std(pred)
            rows.append({"scheme": scheme, "k": k, "n": len(vals),
                         "ratio_mean": r_mean, "ratio_std": r_std, "ratio_stderr": r_se,
                         "predicted_mean": p_mean, "predicted_std": p_std,
                         "final_ratio_mean": f_mean, "final_ratio_std": f_std,
                         "final_ratio_median": float(np.median(final)) if vals else math.nan,
                         "diverged": cfg.n_seeds - len(vals)})
    return rows


def _iters_seed(args):
    cfg, i = args
    prob = _linreg_problem(cfg, i)
    base = run(prob, RunConfig(None, n_steps=cfg.max_steps, stop_threshold=cfg.tau,
                               seed=derive_seed(cfg.seed, i, "base")))
    t_base = steps_to_threshold(base, cfg.tau)
    out = {"base": t_base}
    for scheme in cfg.schemes:
        for k in cfg.k_list:
            spec = CompressorSpec(scheme, cfg.m, k)
            tr = run(prob, RunConfig(spec, n_steps=cfg.max_steps, stop_threshold=cfg.tau,
                                     seed=derive_seed(cfg.seed, i, scheme, k)))
            out[scheme, k] = steps_to_threshold(tr, cfg.tau)
    return out


def run_linreg_iters(cfg: ExperimentConfig) -> list[dict]:
    """Ratio of iterations to reach ``||grad f||^2 < tau`` with and without compression.

    Runs that never reach the threshold within ``max_steps`` are censored:
    left out of the means and counted in ``censored``.
    """
    per_seed = _map(_iters_seed, [(cfg, i) for i in range(cfg.n_seeds)], cfg.jobs)
    base = [s["base"] for s in per_seed if s["base"] is not None]
    b_mean, b_std, _ = _mean_std(base)
    rows = []
    for scheme in cfg.schemes:
        for k in cfg.k_list:
            ratios = [s[scheme, k] / s["base"] for s in per_seed
                      if s["base"] is not None and s[scheme, k] is not None]
            mean, std, se = _mean_std(ratios)
            rows.append({"scheme": scheme, "k": k, "n": len(ratios),
                         "ratio_mean": mean, "ratio_std": std, "ratio_stderr": se,
                         "censored": cfg.n_seeds - len(ratios),
                         "baseline_iters_mean": b_mean, "baseline_iters_std": b_std})
    return rows


# -- direct exposure of qnorm and optimizer -------------------------------------------

def _table_matrix(cfg):
    name = cfg.matrix
    if name == "identity":
        return np.eye(cfg.m)
    if name in {e.value for e in Ensemble}:
        return make_ensemble_matrix(name, cfg.m, derive_seed(cfg.seed, "matrix", name))
    a = np.loadtxt(name, delimiter=",", comments="#", ndmin=2)
    if a.shape != (cfg.m, cfg.m):
        raise ValueError(f"matrix in {name} has shape {a.shape}, expected m={cfg.m}")
    return a


def run_qnorm_table(cfg: ExperimentConfig) -> list[dict]:
    """Exact Q-seminorm (and omega bound) of one matrix for each scheme and k.

    A Monte-Carlo column is added when ``n_samples > 1``.
    """
    a = _table_matrix(cfg)
    norm_a = spectral_norm(a)
    rows = []
    for scheme in cfg.schemes:
        for k in cfg.k_list:
            spec = CompressorSpec(scheme, cfg.m, k)
            row = {"matrix": cfg.matrix, "scheme": scheme, "m": cfg.m, "k": k,
                   "qnorm_exact": qnorm_exact(spec, a), "omega": omega_of(spec),
                   "omega_bound": (omega_of(spec) + 1.0) * norm_a}
            if cfg.n_samples > 1:
                row["qnorm_mc"] = qnorm_mc(spec, a, cfg.n_samples,
                                           derive_seed(cfg.seed, "mc", scheme, k))
            rows.append(row)
    return rows


def sgd_problem(cfg: ExperimentConfig):
    rng = derive_seed(cfg.seed, "problem", cfg.problem)
    if cfg.problem == "quadratic":
        prob = make_random_quadratic(cfg.m, rng)
    elif cfg.problem == "least-squares":
        prob = make_least_squares(cfg.m, cfg.n_data, rng)
    elif cfg.problem == "logreg":
        prob = make_logreg_binary(cfg.m, max(cfg.n_data, 1), rng)
    else:
        raise ValueError(f"unknown problem {cfg.problem!r}")
    return with_gaussian_noise(prob, cfg.sigma)


def run_sgd(cfg: ExperimentConfig) -> tuple[RunTrace, dict]:
    """One run of compressed SGD with the first scheme and k of the config.

    An empty scheme list runs without compression.
    """
    prob = sgd_problem(cfg)
    spec = CompressorSpec(cfg.schemes[0], cfg.m, cfg.k_list[0]) if cfg.schemes else None
    rc = RunConfig(spec, n_tasks=cfg.n_tasks, n_steps=cfg.N, seed=cfg.seed,
                   stop_threshold=None)
    trace = run(prob, rc)
    P = qnorm_exact(spec, prob.smoothness) if spec else spectral_norm(prob.smoothness)
    info = {"problem": cfg.problem, "P": P, "sigma": prob.sigma, "diverged": trace.diverged}
    if prob.lower_bound is not None and not trace.diverged:
        D = prob.initial_gap()
        info["D"] = D
        info["bound"] = bounds.sgd_bound(bounds.BoundInputs(D, P, prob.sigma, cfg.N))
        info["avg_grad_sq"] = average_grad_sq(trace, len(trace))
    return trace, info
