"""Q-seminorms of the three compressor families.

``||A||_Q = || E[Q Q^T A Q Q^T] ||`` where the outer norm is the spectral
norm. The expectation has a closed form for each family; a Monte-Carlo
estimate is available for cross-checking.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .compressors import CompressorSpec, Scheme, empirical_second_moment, make_rng

__all__ = [
    "sym_matrix",
    "SecondMoment",
    "haar_beta",
    "exact_second_moment",
    "spectral_norm",
    "qnorm_exact",
    "qnorm_mc",
    "omega_of",
    "check_omega_consistency",
]


def sym_matrix(a, atol: float = 1e-12) -> np.ndarray:
    """Validate a square, finite, symmetric matrix and return it exactly symmetrized.

    Asymmetry beyond ``atol`` relative to the largest entry is an error.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = max(np.abs(a).max(initial=0.0), 1.0)
    if np.abs(a - a.T).max(initial=0.0) > atol * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class SecondMoment:
    matrix: np.ndarray
    spec: CompressorSpec
    source: str = "exact"
    n_samples: int | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def norm(self) -> float:
        return spectral_norm(self.matrix)


def haar_beta(m: int, k: int) -> float:
    """Mixing weight between ``A`` and ``(tr A / m) I`` for ``haar-k``."""
    if m == 1:
        return 0.0
    return m * (m - k) / ((m + 2) * (m - 1))


def exact_second_moment(spec: CompressorSpec, a) -> SecondMoment:
    """Closed-form ``E[Q Q^T A Q Q^T]`` for the scaled compressor ``spec``.

    haar-k:  (m/k) [(1 - beta) A + beta (tr A / m) I]
    rand-k:  (m/k) [((k-1)/(m-1)) A + ((m-k)/(m-1)) diag A]
    norm-k:  (m/k) [((k+1)/m) A + (tr A / m) I]

    At ``m = k = 1`` haar-k and rand-k are the identity map (``Q = +-1``) and
    return ``A``. norm-k stays Gaussian there, and its formula gives ``3A``.
    """
    a = sym_matrix(a)
    m, k = spec.m, spec.k
    if a.shape != (m, m):
        raise ValueError(f"matrix has shape {a.shape}, expected ({m}, {m})")
    ratio = m / k
    eye = np.eye(m)
    tr = np.trace(a)
    if spec.scheme is Scheme.HAAR:
        beta = haar_beta(m, k)
        out = ratio * ((1.0 - beta) * a + beta * (tr / m) * eye)
    elif spec.scheme is Scheme.RAND:
        if m == 1:
            out = a.copy()
        else:
            out = ratio * ((k - 1) / (m - 1) * a + (m - k) / (m - 1) * np.diag(np.diag(a)))
    else:
        out = ratio * ((k + 1) / m * a + (tr / m) * eye)
    return SecondMoment(0.5 * (out + out.T), spec)


def _power_norm(m: np.ndarray, tol: float, maxiter: int, seed: int) -> float:
    v = make_rng(seed).standard_normal(m.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(maxiter):
        w = m @ v
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - est) <= tol * new:
            return new
        est = new
    raise RuntimeError(f"power iteration did not reach tol={tol} in {maxiter} steps")


def spectral_norm(m, tol: float = 1e-10, method: str = "auto", maxiter: int = 100_000) -> float:
    """Largest absolute eigenvalue of a symmetric matrix.

    ``method="eigh"`` uses a dense symmetric eigensolver (accurate to round-off,
    so ``tol`` is met trivially); ``"power"`` runs power iteration until the
    relative change of the estimate falls below ``tol``. ``"auto"`` picks
    ``eigh`` up to 2000 x 2000.
    """
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    if m.size == 0:
        return 0.0
    if method == "auto":
        method = "eigh" if m.shape[0] <= 2000 else "power"
    if method == "eigh":
        return float(np.abs(np.linalg.eigvalsh(m)).max())
    if method == "power":
        return _power_norm(m, tol, maxiter, seed=0)
    raise ValueError(f"unknown method {method!r}")


def qnorm_exact(spec: CompressorSpec, a) -> float:
    return spectral_norm(exact_second_moment(spec, a).matrix)


def qnorm_mc(spec: CompressorSpec, a, n_samples: int, rng) -> float:
    """Monte-Carlo Q-seminorm: spectral norm of the averaged conjugation.

    The norm is taken after averaging, not averaged over samples.
    """
    a = sym_matrix(a)
    return spectral_norm(empirical_second_moment(spec, a, n_samples, rng))


def omega_of(spec: CompressorSpec) -> float:
    """Variance parameter ``omega`` with ``E||g - Q Q^T g||^2 <= omega ||g||^2``."""
    if spec.scheme is Scheme.NORM:
        return (spec.m + 1) / spec.k
    return spec.m / spec.k - 1.0


def check_omega_consistency(spec: CompressorSpec, slack: float = 1e-12) -> bool:
    """``||I||_Q <= omega + 1``, the Q-norm form of omega-unbiasedness."""
    return qnorm_exact(spec, np.eye(spec.m)) <= omega_of(spec) + 1.0 + slack
