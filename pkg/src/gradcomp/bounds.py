"""Step sizes and convergence bounds for compressed SGD.

With ``P >= ||L||_Q``, gradient noise ``sigma`` and initial gap ``D``, the
step ``min(1/P, 1/(sigma sqrt(N)))`` gives

    (1/N) sum_t E||grad f(x_t)||^2 <= 2DP/N + (D + P/2) 2 sigma / sqrt(N).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .compressors import CompressorSpec, Scheme
from .qnorm import haar_beta, qnorm_exact

__all__ = [
    "BoundInputs",
    "LogRegSmoothness",
    "step_size",
    "sgd_bound",
    "qnorm_upper_from_stats",
    "logreg_qnorm_upper",
    "omega_baseline_upper",
    "penalty_curves",
    "normalize_rows",
    "logreg_smoothness_matrix",
    "initial_gap",
]

LOGREG_CURVATURE = 0.25  # sup |h''| for h(w) = log(1 + exp(-w))


@dataclass(frozen=True)
class BoundInputs:
    D: float
    P: float
    sigma: float
    N: int

    def __post_init__(self):
        vals = (self.D, self.P, self.sigma)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("bound inputs must be finite")
        if self.D < 0 or self.sigma < 0:
            raise ValueError("D and sigma must be nonnegative")
        if self.P <= 0:
            raise ValueError("P must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")


@dataclass(frozen=True)
class LogRegSmoothness:
    """Spectral summaries of a logistic-regression smoothness matrix."""

    m: int
    norm_L: float = LOGREG_CURVATURE
    trace_L: float = LOGREG_CURVATURE
    max_diag_L: float = LOGREG_CURVATURE

    def __post_init__(self):
        if not 0 <= self.max_diag_L <= self.norm_L + 1e-15:
            raise ValueError("need 0 <= max_diag_L <= norm_L")
        if self.trace_L <= 0:
            raise ValueError("trace_L must be positive")


def step_size(P: float, sigma: float, N: int) -> float:
    if P <= 0:
        raise ValueError("P must be positive")
    if sigma == 0:
        return 1.0 / P
    return min(1.0 / P, 1.0 / (sigma * math.sqrt(N)))


def sgd_bound(b: BoundInputs) -> float:
    return 2.0 * b.D * b.P / b.N + (b.D + b.P / 2.0) * 2.0 * b.sigma / math.sqrt(b.N)


def qnorm_upper_from_stats(scheme, m: int, k: int, norm_L: float, trace_L: float,
                           max_diag_L: float) -> float:
    """Upper bound on ``||L||_Q`` from ``||L||``, ``tr L`` and ``max_i L_ii``.

    Applies the triangle inequality to each closed-form second moment.
    """
    scheme = Scheme.parse(scheme)
    CompressorSpec(scheme, m, k)
    if scheme is Scheme.HAAR:
        beta = haar_beta(m, k)
        return (m / k) * ((1 - beta) * norm_L + beta * trace_L / m)
    if scheme is Scheme.RAND:
        if m == 1:
            return norm_L
        return (m / k) * ((k - 1) / (m - 1) * norm_L + (m - k) / (m - 1) * max_diag_L)
    return (m / k) * ((k + 1) / m * norm_L + trace_L / m)


def logreg_qnorm_upper(scheme, m: int, k: int) -> float:
    """Closed-form bound on ``||L||_Q`` for binary logistic regression with ``||z_i|| <= 1``.

    haar: (1/4)(m/k)(k+2)/(m+2); rand: (1/4)(m/k); norm: (1/4)(k+2)/k.
    """
    scheme = Scheme.parse(scheme)
    CompressorSpec(scheme, m, k)
    c = LOGREG_CURVATURE
    if scheme is Scheme.HAAR:
        return c * (m / k) * (k + 2) / (m + 2)
    if scheme is Scheme.RAND:
        return c * (m / k)
    return c * (k + 2) / k


def omega_baseline_upper(scheme, m: int, k: int, norm_L: float) -> float:
    """``||I||_Q * ||L||``: the bound that ignores problem structure."""
    return qnorm_exact(CompressorSpec(scheme, m, k), np.eye(m)) * norm_L


def penalty_curves(m: int, k_values, mode: str = "qnorm",
                   schemes=(Scheme.HAAR, Scheme.NORM, Scheme.RAND)) -> list[dict]:
    """Predicted iteration penalty of compression for logistic regression.

    Each bound on ``||L||_Q`` is divided by the uncompressed value ``1/4``;
    ``D`` and ``N`` cancel in the ratio of the two convergence bounds.

    ``mode`` is ``"qnorm"`` (problem-aware bound) or ``"omega"`` (the
    omega-unbiased baseline ``||I||_Q ||L||``).
    """
    mode = mode.lower()
    if mode not in ("qnorm", "omega"):
        raise ValueError(f"unknown mode {mode!r}")
    if m < 2:
        raise ValueError("m must be at least 2")
    rows = []
    for scheme in schemes:
        scheme = Scheme.parse(scheme)
        for k in k_values:
            if mode == "qnorm":
                upper = logreg_qnorm_upper(scheme, m, k)
            else:
                upper = omega_baseline_upper(scheme, m, k, LOGREG_CURVATURE)
            rows.append({"scheme": scheme.value, "k": int(k), "mode": mode,
                         "penalty": upper / LOGREG_CURVATURE})
    return rows


def normalize_rows(z) -> tuple[np.ndarray, bool]:
    """Shrink rows with norm above 1 (beyond round-off) onto the unit sphere; report whether any were."""
    z = np.array(z, dtype=float)
    if z.ndim != 2 or z.shape[0] == 0:
        raise ValueError("need a non-empty 2-D feature matrix")
    norms = np.linalg.norm(z, axis=1)
    over = norms > 1.0 + 1e-12  # tolerate round-off from prior normalization
    if over.any():
        z[over] /= norms[over, None]
    return z, bool(over.any())


def logreg_smoothness_matrix(features) -> np.ndarray:
    """``(1 / (4B)) Z^T Z`` for a ``B x m`` feature matrix ``Z``.

    Rows with norm above one are rescaled first, with a ``UserWarning``.
    """
    z, rescaled = normalize_rows(features)
    if rescaled:
        warnings.warn("feature rows with norm > 1 were rescaled to unit norm", UserWarning,
                      stacklevel=2)
    L = LOGREG_CURVATURE / z.shape[0] * (z.T @ z)
    return 0.5 * (L + L.T)


def initial_gap(f_x1: float, lower_bound: float | None = None,
                observed=None) -> tuple[float, bool]:
    """Return ``(D, is_estimate)``.

    ``D = f(x_1) - f*`` when ``f*`` is known; otherwise the smallest observed
    objective value stands in for ``f*`` and the result is flagged.
    """
    if lower_bound is not None:
        return max(f_x1 - lower_bound, 0.0), False
    if observed is None or len(observed) == 0:
        raise ValueError("need a lower bound or observed objective values")
    return max(f_x1 - float(np.min(observed)), 0.0), True
