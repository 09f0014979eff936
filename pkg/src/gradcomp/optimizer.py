"""Compressed SGD over ``r`` simulated tasks.

Each step every task computes a stochastic gradient, compresses it with the
shared sample ``Q_t`` (``Q_t^T g``), the messages are averaged (the
all-reduce), and the average is decompressed with ``Q_t`` before the update
``x <- x - eps * h``. Tasks run sequentially in one process.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import bounds
from .compressors import (CompressorSpec, apply_projection, compress, decompress, make_rng,
                          sample, spawn)
from .problems import Problem
from .qnorm import qnorm_exact, spectral_norm

__all__ = [
    "AutoStep",
    "RunConfig",
    "RunTrace",
    "resolve_step",
    "run",
    "steps_to_threshold",
    "average_grad_sq",
]

DIVERGENCE_NORM = 1e12


@dataclass(frozen=True)
class AutoStep:
    """Step ``min(1/P, 1/(sigma sqrt(N)))``; unset fields come from the problem.

    ``P`` defaults to ``||L||_Q`` for the configured compressor (``||L||``
    when uncompressed), ``sigma`` to the problem's noise bound.
    """

    P: Optional[float] = None
    sigma: Optional[float] = None


@dataclass(frozen=True)
class RunConfig:
    spec: Optional[CompressorSpec] = None
    n_tasks: int = 1
    n_steps: int = 100
    step_size: Union[float, AutoStep] = field(default_factory=AutoStep)
    seed: int = 0
    stop_threshold: Optional[float] = None
    check_identity: bool = True

    def __post_init__(self):
        if self.n_tasks < 1 or self.n_steps < 1:
            raise ValueError("n_tasks and n_steps must be positive")
        if isinstance(self.step_size, (int, float)) and not self.step_size > 0:
            raise ValueError("step size must be positive")
        if self.stop_threshold is not None and not self.stop_threshold > 0:
            raise ValueError("stop threshold must be positive")


@dataclass
class RunTrace:
    """Per-step record; entry ``t`` (0-based ``t-1``) describes the iterate ``x_t``."""

    f: list = field(default_factory=list)
    grad_sq: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    x_final: Optional[np.ndarray] = None
    diverged: bool = False
    seed: int = 0

    @property
    def steps_taken(self) -> int:
        return len(self.grad_sq)

    def __len__(self):
        return len(self.grad_sq)

    def to_csv(self, fh=None) -> str:
        """Serialize as ``t,f,grad_sq,eps`` rows with 17 significant digits."""
        out = io.StringIO() if fh is None else fh
        out.write("t,f,grad_sq,eps\n")
        for t, (f, g, e) in enumerate(zip(self.f, self.grad_sq, self.eps), start=1):
            out.write(f"{t},{f:.17g},{g:.17g},{e:.17g}\n")
        return out.getvalue() if fh is None else ""


def resolve_step(problem: Problem, config: RunConfig) -> float:
    if not isinstance(config.step_size, AutoStep):
        return float(config.step_size)
    auto = config.step_size
    P = auto.P
    if P is None:
        if config.spec is None:
            P = spectral_norm(problem.smoothness)
        else:
            P = qnorm_exact(config.spec, problem.smoothness)
    sigma = problem.sigma if auto.sigma is None else auto.sigma
    return bounds.step_size(P, sigma, config.n_steps)


def run(problem: Problem, config: RunConfig, rng=None) -> RunTrace:
    """Run compressed (or plain, with ``spec=None``) SGD and record the trace.

    ``rng`` defaults to a stream built from ``config.seed``. It is split into
    one stream for compressor draws and one per task for gradient noise, so
    exact-gradient runs do not depend on the number of tasks.
    """
    spec = config.spec
    if spec is not None and spec.m != problem.dim:
        raise ValueError(f"compressor dimension {spec.m} != problem dimension {problem.dim}")
    eps = resolve_step(problem, config)
    root = make_rng(config.seed if rng is None else rng)
    comp_rng, *task_rngs = spawn(root, 1 + config.n_tasks)
    r = config.n_tasks

    trace = RunTrace(seed=config.seed)
    x = np.array(problem.x1, dtype=float)
    for _ in range(config.n_steps):
        full = problem.gradient(x)
        gsq = float(full @ full)
        trace.f.append(float(problem.objective(x)))
        trace.grad_sq.append(gsq)
        trace.eps.append(eps)
        if config.stop_threshold is not None and gsq < config.stop_threshold:
            break

        if problem.exact:
            grads = [full] * r
        else:
            grads = [problem.stochastic_grad(x, task_rngs[i]) for i in range(r)]

        if spec is None:
            h = np.mean(grads, axis=0)
        else:
            q = sample(spec, comp_rng)
            messages = [compress(q, g) for g in grads]
            h = decompress(q, np.mean(messages, axis=0))
            if config.check_identity:
                ref = apply_projection(q, np.mean(grads, axis=0))
                assert np.allclose(h, ref, rtol=1e-9, atol=1e-12 * (1 + np.abs(ref).max())), \
                    "compress/average/decompress disagrees with Q Q^T g"

        x = x - eps * h
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
            trace.diverged = True
            break
    trace.x_final = x
    return trace


def steps_to_threshold(trace: RunTrace, tau: float) -> Optional[int]:
    """First (1-based) ``t`` with ``||grad f(x_t)||^2 < tau``, or ``None``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    for t, g in enumerate(trace.grad_sq, start=1):
        if g < tau:
            return t
    return None


def average_grad_sq(trace: RunTrace, N: int) -> float:
    if N < 1 or len(trace.grad_sq) < N:
        raise ValueError(f"trace has {len(trace.grad_sq)} entries, need {N}")
    return float(np.mean(trace.grad_sq[:N]))
