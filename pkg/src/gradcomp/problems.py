"""Test objectives and random matrix ensembles.

Every objective carries its smoothness matrix ``L`` (``f`` is ``L``-smooth),
a lower bound ``f*`` when one is known, and a stochastic gradient oracle
whose noise satisfies ``E||g - grad f||^2 <= sigma^2``.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .bounds import logreg_smoothness_matrix, normalize_rows
from .compressors import make_rng
from .qnorm import sym_matrix

__all__ = [
    "Problem",
    "Ensemble",
    "make_least_squares",
    "least_squares_from_data",
    "make_logreg_binary",
    "logreg_from_data",
    "make_quadratic",
    "make_random_quadratic",
    "with_gaussian_noise",
    "make_ensemble_matrix",
    "dump_data",
    "load_problem",
]


@dataclass
class Problem:
    name: str
    dim: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    smoothness: np.ndarray
    x1: np.ndarray
    lower_bound: Optional[float] = None
    sigma: float = 0.0
    noisy_gradient: Optional[Callable] = None
    data: dict = field(default_factory=dict)

    def stochastic_grad(self, x, rng) -> np.ndarray:
        """Unbiased gradient estimate; the exact gradient when ``sigma == 0``."""
        if self.noisy_gradient is None:
            return self.gradient(x)
        return self.noisy_gradient(x, rng)

    @property
    def exact(self) -> bool:
        return self.noisy_gradient is None

    def initial_gap(self) -> float:
        """``f(x_1) - f*``; raises if ``f*`` is unknown."""
        if self.lower_bound is None:
            raise ValueError(f"{self.name}: lower bound unknown")
        return float(self.objective(self.x1) - self.lower_bound)


def least_squares_from_data(z, y, name: str = "least_squares") -> Problem:
    """``f(x) = (1/2) ||Z x - y||^2`` with Hessian ``Z^T Z``."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    n, m = z.shape
    if y.shape != (n,):
        raise ValueError("targets do not match the number of rows")

    def objective(x):
        r = z @ x - y
        return 0.5 * float(r @ r)

    def gradient(x):
        return z.T @ (z @ x - y)

    if n <= m and np.linalg.matrix_rank(z) == n:
        fstar = 0.0
    else:
        sol = np.linalg.lstsq(z, y, rcond=None)[0]
        fstar = objective(sol)
    return Problem(name, m, objective, gradient, sym_matrix(z.T @ z), np.zeros(m),
                   lower_bound=fstar, data={"kind": "least_squares", "Z": z, "y": y})


def make_least_squares(m: int, n: int, rng) -> Problem:
    """Least squares on ``n`` jointly standard Gaussian pairs ``(z_i, y_i)`` in ``R^(m+1)``."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    draws = make_rng(rng).standard_normal((n, m + 1))
    return least_squares_from_data(draws[:, :m], draws[:, m])


def logreg_from_data(z, y, batch: int | None = None, name: str = "logreg") -> Problem:
    """Binary logistic regression ``(1/B) sum_i log(1 + exp(-y_i x^T z_i))``.

    With ``batch`` set, the stochastic oracle averages ``batch`` examples drawn
    with replacement; each per-example gradient has norm at most one, so the
    noise bound is ``sigma = 1/sqrt(batch)``.
    """
    z, _ = normalize_rows(z)
    y = np.asarray(y, dtype=float).reshape(-1)
    B, m = z.shape
    if y.shape != (B,) or not np.all(np.abs(y) == 1):
        raise ValueError("labels must be +-1, one per row")

    def objective(x):
        return float(np.mean(np.logaddexp(0.0, -y * (z @ x))))

    def _grad(x, rows):
        w = y[rows] * (z[rows] @ x)
        return -(expit(-w) * y[rows]) @ z[rows] / len(rows)

    everything = np.arange(B)

    def gradient(x):
        return _grad(x, everything)

    noisy = None
    sigma = 0.0
    if batch is not None:
        sigma = 1.0 / np.sqrt(batch)

        def noisy(x, rng):
            return _grad(x, rng.integers(0, B, size=batch))

    return Problem(name, m, objective, gradient, logreg_smoothness_matrix(z), np.zeros(m),
                   lower_bound=0.0, sigma=sigma, noisy_gradient=noisy,
                   data={"kind": "logreg", "Z": z, "y": y})


def make_logreg_binary(m: int, B: int, rng, batch: int | None = None,
                       flip: float = 0.1) -> Problem:
    """Gaussian features scaled to the unit sphere; labels from a planted
    direction with a fraction ``flip`` of them flipped."""
    if m < 1 or B < 1:
        raise ValueError("m and B must be positive")
    rng = make_rng(rng)
    z = rng.standard_normal((B, m))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    w = rng.standard_normal(m)
    y = np.where(z @ w >= 0, 1.0, -1.0)
    y[rng.random(B) < flip] *= -1
    return logreg_from_data(z, y, batch=batch)


def make_quadratic(hessian, center) -> Problem:
    """``f(x) = (1/2)(x - c)^T H (x - c)`` with ``f* = 0``."""
    h = sym_matrix(hessian)
    c = np.asarray(center, dtype=float)
    m = h.shape[0]

    def objective(x):
        d = x - c
        return 0.5 * float(d @ h @ d)

    def gradient(x):
        return h @ (x - c)

    return Problem("quadratic", m, objective, gradient, h, np.zeros(m), lower_bound=0.0,
                   data={"kind": "quadratic", "H": h, "c": c})


def make_random_quadratic(m: int, rng, rank: int | None = None) -> Problem:
    """Quadratic with a Wishart Hessian ``G G^T / m`` (``G`` is ``m x rank``) and a Gaussian center."""
    rng = make_rng(rng)
    g = rng.standard_normal((m, rank or m))
    return make_quadratic(g @ g.T / m, rng.standard_normal(m))


def with_gaussian_noise(problem: Problem, sigma: float) -> Problem:
    """Copy of ``problem`` whose stochastic gradients carry ``N(0, (sigma^2/m) I)`` noise."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return problem
    scale = sigma / np.sqrt(problem.dim)
    grad = problem.gradient

    def noisy(x, rng):
        return grad(x) + scale * rng.standard_normal(problem.dim)

    return Problem(problem.name, problem.dim, problem.objective, grad, problem.smoothness,
                   problem.x1, problem.lower_bound, float(sigma), noisy, dict(problem.data))


class Ensemble(str, enum.Enum):
    SYM_NORMAL = "sym-normal"
    SYM_UNIF01 = "sym-unif01"
    WISHART = "wishart"
    SYM_UNIF_PM1 = "sym-unif-pm1"


def make_ensemble_matrix(kind, m: int, rng) -> np.ndarray:
    """One random symmetric ``m x m`` matrix from the named ensemble.

    The elementwise ensembles symmetrize an i.i.d. matrix as ``(B + B^T)/2``;
    ``wishart`` returns ``G G^T / m`` for a square Gaussian ``G``.
    """
    kind = Ensemble(kind)
    if m < 1:
        raise ValueError("m must be positive")
    rng = make_rng(rng)
    if kind is Ensemble.WISHART:
        g = rng.standard_normal((m, m))
        b = g @ g.T / m
    elif kind is Ensemble.SYM_NORMAL:
        b = rng.standard_normal((m, m))
    elif kind is Ensemble.SYM_UNIF01:
        b = rng.uniform(0.0, 1.0, (m, m))
    else:
        b = rng.uniform(-1.0, 1.0, (m, m))
    return 0.5 * (b + b.T)


def dump_data(problem: Problem, path) -> None:
    """Write the ``(Z, y)`` data of a least-squares or logistic problem as CSV."""
    kind = problem.data.get("kind")
    if kind not in ("least_squares", "logreg"):
        raise ValueError(f"problem {problem.name!r} has no (Z, y) data")
    z, y = problem.data["Z"], problem.data["y"]
    with open(path, "w", newline="") as fh:
        fh.write(f"# kind={kind}\n")
        w = csv.writer(fh)
        w.writerow([f"z{j + 1}" for j in range(z.shape[1])] + ["y"])
        for row, target in zip(z, y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def load_problem(path) -> Problem:
    text = Path(path).read_text().splitlines()
    kind = "least_squares"
    body = []
    for line in text:
        if line.startswith("#"):
            if line.startswith("# kind="):
                kind = line.split("=", 1)[1].strip()
            continue
        body.append(line)
    rows = list(csv.reader(body))[1:]
    arr = np.array(rows, dtype=float)
    if kind == "logreg":
        return logreg_from_data(arr[:, :-1], arr[:, -1])
    return least_squares_from_data(arr[:, :-1], arr[:, -1])
