"""Mean-embedding statistics, MMD, CME regression and the beta estimators.

The conditional mean embedding (CME) of the output distribution given an
input subset is estimated by regularized least squares over an RKHS: with
input Gram matrix L and regularizer lam, the regression weights are
``W = (L + lam I)^-1``.  Evaluating the fitted embedding at a query point
x yields two inner statistical functions (ISFs),

* gamma_norm: the normalized squared RKHS norm of the conditional
  embedding, ``(Gamma(x)^T W K W Gamma(x) - c_yy) / (c_y - c_yy)``,
* gamma_dist: the normalized squared RKHS distance between the conditional
  and unconditional embeddings, computed as ``alpha^T K alpha / (c_y - c_yy)``
  with ``alpha = W Gamma(x) - 1/N`` (which keeps the quadratic form
  non-negative up to round-off),

where ``c_y`` is the mean self kernel value and ``c_yy`` the mean
off-diagonal kernel value of the outputs.  Averaging either ISF over the
training inputs gives the sensitivity index estimate beta.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .data import DataSet, canonical_subset
from .errors import DataError, NumericalError
from .kernels import KernelSpec, cross_gram, gram_matrix

__all__ = [
    "NormalizationStats",
    "CmeModel",
    "IndexEstimate",
    "IsfProfile",
    "normalization_stats",
    "mmd2_unbiased",
    "fit_cme",
    "isf_norm",
    "isf_dist",
    "beta_cme",
    "isf_profile",
]

DEGENERATE_DENOMINATOR = 1e-12


@dataclass(frozen=True)
class NormalizationStats:
    """U-statistic approximations of the output kernel moments.

    ``c_y`` estimates E[k(y, y)] and ``c_yy`` estimates E[k(y, y')]; their
    difference is the normalization denominator shared by every estimator.
    """

    c_y: float
    c_yy: float

    def __post_init__(self):
        if self.c_y < self.c_yy - 1e-10:
            raise NumericalError(
                f"invalid normalization: c_y={self.c_y!r} below c_yy={self.c_yy!r} (kernel not PSD?)"
            )

    @property
    def denominator(self) -> float:
        return self.c_y - self.c_yy

    def require_nondegenerate(self) -> float:
        den = self.denominator
        if den <= DEGENERATE_DENOMINATOR:
            raise NumericalError(
                f"degenerate output kernel denominator c_y - c_yy = {den:.3e}; "
                "the outputs carry no kernel spread"
            )
        return den


@dataclass(frozen=True)
class IndexEstimate:
    """A single estimated sensitivity index beta for one input subset."""

    subset: tuple[int, ...]
    value: float
    estimator: str
    n_samples: int
    seed: int | None = None


@dataclass(frozen=True)
class IsfProfile:
    """ISF curves over a query grid, in grid order.

    ``inside_hull`` flags queries inside the per-coordinate range of the
    training inputs; values outside it are extrapolations.
    """

    points: np.ndarray
    gamma_norm: np.ndarray
    gamma_dist: np.ndarray
    inside_hull: np.ndarray


def normalization_stats(gram: np.ndarray) -> NormalizationStats:
    """Mean diagonal and mean strictly-off-diagonal entry of a square Gram."""
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise DataError(f"normalization_stats expects a square matrix, got {gram.shape}")
    n = gram.shape[0]
    if n < 2:
        raise DataError("normalization_stats needs at least two samples")
    trace = float(np.trace(gram))
    c_y = trace / n
    c_yy = (float(gram.sum()) - trace) / (n * (n - 1))
    return NormalizationStats(c_y=c_y, c_yy=c_yy)


def mmd2_unbiased(samples_a, samples_b, kernel: KernelSpec) -> float:
    """Unbiased U-statistic estimate of the squared MMD between two samples.

    Within-sample averages exclude the diagonal; the cross term uses all
    pairs.  Unbiasedness implies the value can be negative for close
    distributions.
    """
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    n, m = a.shape[0], b.shape[0]
    if n < 2 or m < 2:
        raise DataError("mmd2_unbiased needs at least two samples on each side")
    kaa = gram_matrix(kernel, a)
    kbb = gram_matrix(kernel, b)
    kab = cross_gram(kernel, a, b)
    within_a = (kaa.sum() - np.trace(kaa)) / (n * (n - 1))
    within_b = (kbb.sum() - np.trace(kbb)) / (m * (m - 1))
    cross = kab.mean()
    return float(within_a + within_b - 2.0 * cross)


@dataclass
class CmeModel:
    """A fitted conditional mean embedding for one input subset.

    Holds everything needed to evaluate ISFs: the subset-projected training
    inputs, the input Gram ``input_gram`` (L), the output Gram
    ``output_gram`` (K), the Cholesky factor of ``L + lam I`` and the
    normalization statistics.
    """

    subset: tuple[int, ...]
    input_kernel: KernelSpec
    output_kernel: KernelSpec
    lam: float
    train_inputs: np.ndarray
    input_gram: np.ndarray
    output_gram: np.ndarray
    norm: NormalizationStats
    jitter: float = 0.0
    _factor: tuple = field(default=None, repr=False)
    _weights: np.ndarray = field(default=None, repr=False)
    _row_means: np.ndarray = field(default=None, repr=False)

    @property
    def n_samples(self) -> int:
        return self.train_inputs.shape[0]

    def weight_matrix(self) -> np.ndarray:
        """Materialized ``W = (L + lam I)^-1`` (cached)."""
        if self._weights is None:
            self._weights = cho_solve(self._factor, np.eye(self.n_samples))
        return self._weights

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """``(L + lam I)^-1 rhs`` through the cached factorization."""
        return cho_solve(self._factor, rhs)

    def gammas(self, gamma_matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Both ISFs for query feature columns ``gamma_matrix`` (N x Q).

        Column q holds the input kernel values between the training inputs
        and query q.  Returns (gamma_norm, gamma_dist) arrays of length Q.
        """
        den = self.norm.require_nondegenerate()
        n = self.n_samples
        g = self.solve(gamma_matrix)  # W Gamma, one column per query
        kg = self.output_gram @ g
        if self._row_means is None:
            self._row_means = self.output_gram.mean(axis=1)
        num_norm = np.einsum("ij,ij->j", g, kg)
        alpha = g - 1.0 / n
        k_alpha = kg - self._row_means[:, None]
        num_dist = np.einsum("ij,ij->j", alpha, k_alpha)
        gamma_norm = (num_norm - self.norm.c_yy) / den
        gamma_dist = num_dist / den
        return gamma_norm, gamma_dist

    def query_features(self, queries: np.ndarray) -> np.ndarray:
        """Input kernel columns Gamma(x) for query rows (returns N x Q)."""
        q = np.asarray(queries, dtype=float)
        if q.ndim == 1:
            q = q[:, None] if len(self.subset) == 1 else q[None, :]
        if q.shape[1] != len(self.subset):
            raise DataError(
                f"query dimension {q.shape[1]} does not match subset size {len(self.subset)}"
            )
        return cross_gram(self.input_kernel, self.train_inputs, q)


def _spd_factor(matrix: np.ndarray, lam: float) -> tuple[tuple, float]:
    """Cholesky factorization of ``matrix + lam I`` with jitter escalation.

    On failure the diagonal jitter escalates multiplicatively from 1e-10
    to 1e-6; past that the factorization error is raised.
    """
    n = matrix.shape[0]
    jitter = 0.0
    while True:
        try:
            shifted = matrix + (lam + jitter) * np.eye(n)
            return cho_factor(shifted, lower=True), jitter
        except np.linalg.LinAlgError:
            jitter = 1e-10 if jitter == 0.0 else jitter * 10.0
            if jitter > 1e-6:
                raise NumericalError(
                    f"Cholesky factorization failed for lam={lam!r} even with jitter up to 1e-6"
                ) from None


def fit_cme(
    data: DataSet,
    subset,
    input_kernel: KernelSpec,
    output_kernel: KernelSpec,
    lam: float,
) -> CmeModel:
    """Fit the CME regression for one input subset.

    ``lam`` must be positive; the returned model caches the Gram matrices
    and the SPD factorization of ``L + lam I``.
    """
    if not np.isfinite(lam) or lam <= 0:
        raise DataError(f"regularizer lam must be positive, got {lam!r}")
    labels = canonical_subset(subset, data.n_inputs)
    x = data.input_columns(labels)
    l_gram = gram_matrix(input_kernel, x)
    k_gram = gram_matrix(output_kernel, data.outputs)
    norm = normalization_stats(k_gram)
    norm.require_nondegenerate()
    factor, jitter = _spd_factor(l_gram, lam)
    return CmeModel(
        subset=labels,
        input_kernel=input_kernel,
        output_kernel=output_kernel,
        lam=float(lam),
        train_inputs=x,
        input_gram=l_gram,
        output_gram=k_gram,
        norm=norm,
        jitter=jitter,
        _factor=factor,
        _row_means=k_gram.mean(axis=1),
    )


def isf_norm(model: CmeModel, x_r) -> float:
    """Norm-based ISF at a single query point."""
    gamma = model.query_features(np.asarray(x_r, dtype=float).reshape(1, -1))
    return float(model.gammas(gamma)[0][0])


def isf_dist(model: CmeModel, x_r) -> float:
    """Distance-based ISF at a single query point."""
    gamma = model.query_features(np.asarray(x_r, dtype=float).reshape(1, -1))
    return float(model.gammas(gamma)[1][0])


def beta_cme(model: CmeModel, variant: str = "N") -> IndexEstimate:
    """The beta index as the average ISF over the training inputs.

    Reuses the columns of the stored input Gram as the query features, so
    no kernel values are recomputed.  ``variant`` is "N" (norm ISF) or "D"
    (distance ISF).
    """
    variant = variant.upper()
    if variant not in ("N", "D"):
        raise DataError(f"beta_cme variant must be 'N' or 'D', got {variant!r}")
    gamma_norm, gamma_dist = model.gammas(model.input_gram)
    values = gamma_norm if variant == "N" else gamma_dist
    return IndexEstimate(
        subset=model.subset,
        value=float(values.mean()),
        estimator=f"CME-{variant}",
        n_samples=model.n_samples,
    )


def isf_profile(model: CmeModel, grid) -> IsfProfile:
    """Evaluate both ISFs on a grid of query points, in grid order."""
    q = np.asarray(grid, dtype=float)
    if q.ndim == 1:
        q = q[:, None]
    if q.shape[0] == 0:
        raise DataError("isf_profile requires a non-empty grid")
    gamma = model.query_features(q)
    gamma_norm, gamma_dist = model.gammas(gamma)
    lo = model.train_inputs.min(axis=0)
    hi = model.train_inputs.max(axis=0)
    inside = np.all((q >= lo) & (q <= hi), axis=1)
    return IsfProfile(points=q, gamma_norm=gamma_norm, gamma_dist=gamma_dist, inside_hull=inside)
