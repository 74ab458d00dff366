"""Kernel evaluation, Gram matrices and bandwidth heuristics.

Three symmetric positive semi-definite kernel families are supported:

* Gaussian RBF  ``k(a, b) = exp(-||a - b||^2 / (2 sigma^2))``
* Linear        ``k(a, b) = a . b``
* Mahalanobis   ``k(a, b) = exp(-(a-b)^T M+ (a-b) / (2 lambda^2))`` where
  ``M+`` is the Moore-Penrose pseudo-inverse of a PSD metric matrix, so the
  kernel stays well defined when the metric is singular.  For scalar inputs
  this reduces to a Gaussian RBF with bandwidth ``lambda * sqrt(M)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import backend
from .errors import DataError, NumericalError

__all__ = [
    "KernelFamily",
    "KernelSpec",
    "rbf_kernel",
    "linear_kernel",
    "mahalanobis_kernel",
    "eval_kernel",
    "gram_matrix",
    "cross_gram",
    "pair_kernel",
    "kernel_diag",
    "median_heuristic",
    "spread_heuristic",
    "mahalanobis_metric",
]

_METRIC_SYM_TOL = 1e-10


class KernelFamily(str, Enum):
    GAUSSIAN_RBF = "gaussian-rbf"
    LINEAR = "linear"
    MAHALANOBIS = "mahalanobis"


@dataclass(frozen=True)
class KernelSpec:
    """Immutable kernel definition: family plus hyperparameters.

    ``metric`` and ``metric_pinv`` are only used by the Mahalanobis family;
    ``metric_pinv`` defaults to the pseudo-inverse of ``metric``.
    """

    family: KernelFamily
    bandwidth: float | None = None
    metric: np.ndarray | None = None
    metric_pinv: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        family = KernelFamily(self.family)
        object.__setattr__(self, "family", family)
        if family in (KernelFamily.GAUSSIAN_RBF, KernelFamily.MAHALANOBIS):
            if self.bandwidth is None or not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
                raise DataError(f"{family.value} kernel requires a positive bandwidth, got {self.bandwidth}")
        if family is KernelFamily.MAHALANOBIS:
            if self.metric is None:
                raise DataError("mahalanobis kernel requires a metric matrix")
            metric = np.atleast_2d(np.asarray(self.metric, dtype=float))
            _check_psd_metric(metric)
            object.__setattr__(self, "metric", metric)
            if self.metric_pinv is None:
                object.__setattr__(self, "metric_pinv", _psd_pinv(metric))
            else:
                object.__setattr__(self, "metric_pinv", np.atleast_2d(np.asarray(self.metric_pinv, dtype=float)))
        elif self.metric is not None:
            raise DataError(f"metric matrix is only valid for the mahalanobis family, not {family.value}")

    @property
    def dim(self) -> int | None:
        """Input dimension constraint (Mahalanobis only)."""
        return None if self.metric is None else self.metric.shape[0]

    def whitener(self) -> np.ndarray | None:
        """Matrix ``T`` with ``(a-b)^T M+ (a-b) = ||(a-b) T||^2``."""
        if self.family is not KernelFamily.MAHALANOBIS:
            return None
        w, v = np.linalg.eigh(self.metric_pinv)
        w = np.clip(w, 0.0, None)
        return v * np.sqrt(w)


def rbf_kernel(bandwidth: float) -> KernelSpec:
    return KernelSpec(KernelFamily.GAUSSIAN_RBF, bandwidth=float(bandwidth))


def linear_kernel() -> KernelSpec:
    return KernelSpec(KernelFamily.LINEAR)


def mahalanobis_kernel(bandwidth: float, metric: np.ndarray, metric_pinv: np.ndarray | None = None) -> KernelSpec:
    return KernelSpec(KernelFamily.MAHALANOBIS, bandwidth=float(bandwidth), metric=metric, metric_pinv=metric_pinv)


def _check_psd_metric(metric: np.ndarray) -> None:
    if metric.ndim != 2 or metric.shape[0] != metric.shape[1]:
        raise DataError(f"metric must be square, got shape {metric.shape}")
    if not np.all(np.isfinite(metric)):
        raise DataError("metric contains non-finite entries")
    scale = max(1.0, float(np.abs(metric).max()))
    if np.abs(metric - metric.T).max() > _METRIC_SYM_TOL * scale:
        raise DataError("metric is not symmetric")
    eigs = np.linalg.eigvalsh(metric)
    if eigs.min() < -_METRIC_SYM_TOL * scale:
        raise DataError(f"metric is not PSD (min eigenvalue {eigs.min():.3e})")


def _psd_pinv(matrix: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Pseudo-inverse of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues below ``tol`` times the largest one are truncated.
    """
    w, v = np.linalg.eigh(matrix)
    cutoff = tol * max(w.max(), 0.0)
    inv = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    return (v * inv) @ v.T


def _as_matrix(samples, name: str) -> np.ndarray:
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DataError(f"{name} must be a 1-D or 2-D array, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return arr


def _check_dims(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[1] != b.shape[1]:
        raise DataError(f"sample dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if spec.dim is not None and a.shape[1] != spec.dim:
        raise DataError(f"kernel metric is {spec.dim}-dimensional but samples have dimension {a.shape[1]}")


def eval_kernel(spec: KernelSpec, a, b) -> float:
    """Kernel value for a single pair of sample vectors."""
    row_a = np.asarray(a, dtype=float).reshape(1, -1)
    row_b = np.asarray(b, dtype=float).reshape(1, -1)
    return float(cross_gram(spec, row_a, row_b)[0, 0])


def cross_gram(spec: KernelSpec, rows, cols) -> np.ndarray:
    """Kernel values between every row of `rows` and every row of `cols`."""
    a = _as_matrix(rows, "rows")
    b = _as_matrix(cols, "cols")
    _check_dims(spec, a, b)
    if spec.family is KernelFamily.LINEAR:
        return a @ b.T
    if spec.family is KernelFamily.MAHALANOBIS:
        t = spec.whitener()
        a = a @ t
        b = b @ t
    d = backend.sqdist_cross(a, b)
    return np.exp(d / (-2.0 * spec.bandwidth**2))


def gram_matrix(spec: KernelSpec, samples) -> np.ndarray:
    """Square Gram matrix of a sample set; (i, j) entry is k(row i, row j)."""
    s = _as_matrix(samples, "samples")
    if s.shape[0] < 1:
        raise DataError("gram_matrix requires at least one sample")
    return cross_gram(spec, s, s)


def pair_kernel(spec: KernelSpec, a, b) -> np.ndarray:
    """Row-wise kernel values k(a[i], b[i])."""
    av = _as_matrix(a, "a")
    bv = _as_matrix(b, "b")
    if av.shape != bv.shape:
        raise DataError(f"paired samples must share a shape, got {av.shape} vs {bv.shape}")
    _check_dims(spec, av, bv)
    if spec.family is KernelFamily.LINEAR:
        return np.einsum("ij,ij->i", av, bv)
    if spec.family is KernelFamily.MAHALANOBIS:
        t = spec.whitener()
        av = av @ t
        bv = bv @ t
    return np.exp(backend.pair_sqdist(av, bv) / (-2.0 * spec.bandwidth**2))


def kernel_diag(spec: KernelSpec, samples) -> np.ndarray:
    """Self kernel values k(row, row); ones for the exponential families."""
    s = _as_matrix(samples, "samples")
    if spec.family is KernelFamily.LINEAR:
        return np.einsum("ij,ij->i", s, s)
    return np.ones(s.shape[0])


def median_heuristic(samples, max_pairs: int = 1_000_000, seed: int = 0) -> float:
    """Median pairwise Euclidean distance of a sample set.

    All N(N-1)/2 pairs are used when that count is at most `max_pairs`;
    beyond that, pairs are subsampled with a generator seeded by `seed`.
    """
    s = _as_matrix(samples, "samples")
    n = s.shape[0]
    if n < 2:
        raise DataError("median_heuristic requires at least two samples")
    n_pairs = n * (n - 1) // 2
    if n_pairs <= max_pairs:
        d2 = backend.sqdist_cross(s, s)[np.triu_indices(n, 1)]
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=max_pairs)
        j = rng.integers(0, n - 1, size=max_pairs)
        j = np.where(j >= i, j + 1, j)  # distinct pair, uniform over off-diagonal
        d2 = backend.pair_sqdist(s[i], s[j])
    med = float(np.median(np.sqrt(d2)))
    if med <= 0.0:
        raise NumericalError("degenerate sample, zero median distance")
    return med


def spread_heuristic(samples) -> float:
    """Square root of the trace of the sample covariance matrix.

    Reduces to the sample standard deviation for scalar data.
    """
    s = _as_matrix(samples, "samples")
    if s.shape[0] < 2:
        raise DataError("spread_heuristic requires at least two samples")
    total = float(np.sum(np.var(s, axis=0, ddof=1)))
    if total <= 0.0:
        raise NumericalError("degenerate sample, zero spread")
    return float(np.sqrt(total))


def mahalanobis_metric(samples, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Sample covariance of `samples` and its pseudo-inverse.

    The pseudo-inverse truncates eigenvalues below `tol` times the largest
    one, so exactly (or numerically) singular covariances are handled.
    """
    s = _as_matrix(samples, "samples")
    if s.shape[0] < 2:
        raise DataError("mahalanobis_metric requires at least two samples")
    cov = np.atleast_2d(np.cov(s, rowvar=False, ddof=1))
    return cov, _psd_pinv(cov, tol=tol)
