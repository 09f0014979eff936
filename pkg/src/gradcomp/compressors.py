"""Random linear compressors ``haar-k``, ``norm-k`` and ``rand-k``.

A compressor is a random ``m x k`` matrix ``Q`` scaled so that
``E[Q Q^T] = I``. Workers send ``Q^T g`` (length ``k``) and the averaged
message is lifted back with ``Q``. ``rand-k`` samples are kept as an index
set and never materialized.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "Scheme",
    "CompressorSpec",
    "CompressorSample",
    "make_rng",
    "spawn",
    "sample",
    "sample_batch",
    "apply_projection",
    "compress",
    "decompress",
    "empirical_second_moment",
]

# Monte-Carlo estimators process samples in blocks of this size. Changing it
# changes the random stream consumption and therefore the estimates.
MC_BLOCK = 4096


class Scheme(str, enum.Enum):
    HAAR = "haar"
    NORM = "norm"
    RAND = "rand"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().removesuffix("-k"))
        except ValueError:
            raise ValueError(f"unknown compression scheme {value!r}") from None


@dataclass(frozen=True)
class CompressorSpec:
    """Identity of a compressor distribution: scheme, ambient ``m``, target ``k``."""

    scheme: Scheme
    m: int
    k: int

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if int(self.m) != self.m or int(self.k) != self.k:
            raise ValueError("m and k must be integers")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "k", int(self.k))
        if not 1 <= self.k <= self.m:
            raise ValueError(f"need 1 <= k <= m, got m={self.m}, k={self.k}")

    @property
    def name(self) -> str:
        return f"{self.scheme.value}-k"


@dataclass(frozen=True)
class CompressorSample:
    """One realized compression map.

    Exactly one of ``matrix`` (dense ``m x k``) or ``indices`` (sorted,
    0-based, length ``k``) is set. For the index form the implied matrix is
    ``scale`` times the selected columns of the identity.
    """

    m: int
    k: int
    matrix: Optional[np.ndarray] = None
    indices: Optional[np.ndarray] = None
    scale: float = 1.0

    @property
    def is_dense(self) -> bool:
        return self.matrix is not None

    def to_dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        q = np.zeros((self.m, self.k))
        q[self.indices, np.arange(self.k)] = self.scale
        return q


def make_rng(seed) -> np.random.Generator:
    """Deterministic PCG64 stream from an integer seed (or pass a Generator through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent child streams from ``rng``."""
    return [np.random.Generator(bg) for bg in rng.bit_generator.spawn(n)]


def _haar_columns(rng, m, k, batch=None):
    shape = (m, k) if batch is None else (batch, m, k)
    g = rng.standard_normal(shape)
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    signs = np.where(d < 0, -1.0, 1.0)
    return q * signs[..., None, :]


def _rand_subset(rng, m, k):
    # partial Fisher-Yates: the first k slots after k swaps are a uniform k-subset
    perm = np.arange(m)
    swaps = rng.integers(np.arange(k), m)
    for i, j in enumerate(swaps):
        perm[i], perm[j] = perm[j], perm[i]
    return np.sort(perm[:k])


def sample(spec: CompressorSpec, rng: np.random.Generator) -> CompressorSample:
    m, k = spec.m, spec.k
    if spec.scheme is Scheme.HAAR:
        q = _haar_columns(rng, m, k)
        if k < m:
            q = q * np.sqrt(m / k)
        return CompressorSample(m, k, matrix=q)
    if spec.scheme is Scheme.NORM:
        return CompressorSample(m, k, matrix=rng.standard_normal((m, k)) / np.sqrt(k))
    return CompressorSample(m, k, indices=_rand_subset(rng, m, k), scale=float(np.sqrt(m / k)))


def sample_batch(spec: CompressorSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` dense samples at once, shape ``(n, m, k)``.

    Used by the Monte-Carlo estimators; ``rand-k`` samples are materialized
    here since the batch is consumed by dense algebra anyway.
    """
    m, k = spec.m, spec.k
    if spec.scheme is Scheme.HAAR:
        q = _haar_columns(rng, m, k, batch=n)
        return q * np.sqrt(m / k) if k < m else q
    if spec.scheme is Scheme.NORM:
        return rng.standard_normal((n, m, k)) / np.sqrt(k)
    # uniform k-subsets via the k smallest of m i.i.d. uniforms per row
    idx = np.sort(np.argpartition(rng.random((n, m)), k - 1, axis=1)[:, :k], axis=1)
    q = np.zeros((n, m, k))
    q[np.arange(n)[:, None], idx, np.arange(k)[None, :]] = np.sqrt(m / k)
    return q


def _check_len(q: CompressorSample, v, n, what):
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"{what} has shape {v.shape}, expected ({n},)")
    return v


def apply_projection(q: CompressorSample, g) -> np.ndarray:
    """Return ``Q Q^T g``."""
    g = _check_len(q, g, q.m, "gradient")
    if q.is_dense:
        return q.matrix @ (q.matrix.T @ g)
    out = np.zeros(q.m)
    out[q.indices] = (q.scale * q.scale) * g[q.indices]
    return out


def compress(q: CompressorSample, g) -> np.ndarray:
    """Return ``Q^T g``."""
    g = _check_len(q, g, q.m, "gradient")
    if q.is_dense:
        return q.matrix.T @ g
    return q.scale * g[q.indices]


def decompress(q: CompressorSample, z) -> np.ndarray:
    """Return ``Q z``."""
    z = _check_len(q, z, q.k, "message")
    if q.is_dense:
        return q.matrix @ z
    out = np.zeros(q.m)
    out[q.indices] = q.scale * z
    return out


def _conjugate_batch(qs: np.ndarray, a: np.ndarray) -> np.ndarray:
    # sum_i Q_i (Q_i^T A Q_i) Q_i^T without forming the m x m projections;
    # the outer sum over samples is one (m, n*k) x (n*k, m) product
    n, m, k = qs.shape
    flat = qs.transpose(1, 0, 2).reshape(m, n * k)
    aq = (a @ flat).reshape(m, n, k).transpose(1, 0, 2)
    c = qs @ (qs.transpose(0, 2, 1) @ aq)
    return c.transpose(1, 0, 2).reshape(m, n * k) @ flat.T


def empirical_second_moment(spec: CompressorSpec, a, n_samples: int, rng) -> np.ndarray:
    """Monte-Carlo estimate of ``E[Q Q^T A Q Q^T]``.

    Parameters
    ----------
    spec : CompressorSpec
    a : (m, m) array
        Symmetric test matrix.
    n_samples : int
        Number of compressor draws, processed in blocks of ``MC_BLOCK``.
    rng : numpy Generator or int seed

    Returns
    -------
    (m, m) array
        The sample mean, symmetrized.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (spec.m, spec.m):
        raise ValueError(f"matrix has shape {a.shape}, expected ({spec.m}, {spec.m})")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rng = make_rng(rng)
    total = np.zeros_like(a)
    done = 0
    while done < n_samples:
        b = min(MC_BLOCK, n_samples - done)
        total += _conjugate_batch(sample_batch(spec, b, rng), a)
        done += b
    mean = total / n_samples
    return 0.5 * (mean + mean.T)
