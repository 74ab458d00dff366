"""Nearest-neighbor beta estimators (the single-data-set baseline).

For each sample, the output is paired with the output of its nearest
*other* input neighbor (rank m=2; the point itself is m=1), and the mean
paired kernel value is normalized by the same statistics used by the CME
estimators.  A sub-sampled variant averages over rows drawn uniformly
with replacement.
"""

from __future__ import annotations

import numpy as np

from . import backend
from .data import DataSet, canonical_subset
from .embedding import IndexEstimate, normalization_stats
from .errors import DataError
from .kernels import KernelSpec, gram_matrix, pair_kernel

__all__ = ["NeighborIndex", "nearest_neighbor", "beta_nn_full", "beta_nn_subsample"]


class NeighborIndex:
    """Neighbor lookups over subset-projected input rows.

    Distances are Euclidean on the selected columns.  Rank m=1 is always
    the query row itself; other rows are ordered by (distance, row index),
    so ties resolve to the smallest index.
    """

    def __init__(self, points: np.ndarray):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if not np.all(np.isfinite(points)):
            raise DataError("neighbor index points contain non-finite entries")
        self.points = points
        self._order = None

    @classmethod
    def from_dataset(cls, data: DataSet, subset) -> "NeighborIndex":
        return cls(data.input_columns(canonical_subset(subset, data.n_inputs)))

    @property
    def n_samples(self) -> int:
        return self.points.shape[0]

    def _full_order(self) -> np.ndarray:
        if self._order is None:
            d = backend.sqdist_cross(self.points, self.points)
            np.fill_diagonal(d, -np.inf)  # self row first at any distance
            # stable sort keeps ascending row index among equal distances
            self._order = np.argsort(d, axis=1, kind="stable")
        return self._order

    def neighbor(self, i: int, m: int) -> int:
        """Row index of the m-th nearest neighbor of row i (1-based rank)."""
        n = self.n_samples
        if not 0 <= i < n:
            raise DataError(f"row index {i} outside 0..{n - 1}")
        if not 1 <= m <= n:
            raise DataError(f"neighbor rank {m} outside 1..{n}")
        if m == 1:
            return int(i)
        return int(self._full_order()[i, m - 1])

    def second_neighbors(self) -> np.ndarray:
        """Rank-2 neighbor of every row at once."""
        return backend.second_neighbors(self.points)


def nearest_neighbor(index: NeighborIndex, i: int, m: int) -> int:
    return index.neighbor(i, m)


def _normalized(c_hat: float, data: DataSet, output_kernel: KernelSpec) -> float:
    stats = normalization_stats(gram_matrix(output_kernel, data.outputs))
    return (c_hat - stats.c_yy) / stats.require_nondegenerate()


def beta_nn_full(data: DataSet, subset, output_kernel: KernelSpec) -> IndexEstimate:
    """Full-sample nearest-neighbor beta estimate."""
    labels = canonical_subset(subset, data.n_inputs)
    index = NeighborIndex(data.input_columns(labels))
    j2 = index.second_neighbors()
    pairs = pair_kernel(output_kernel, data.outputs, data.outputs[j2])
    value = _normalized(float(pairs.mean()), data, output_kernel)
    return IndexEstimate(subset=labels, value=value, estimator="NN-F", n_samples=data.n_samples)


def beta_nn_subsample(
    data: DataSet,
    subset,
    output_kernel: KernelSpec,
    n_a: int,
    seed: int,
) -> IndexEstimate:
    """Sub-sampled nearest-neighbor beta estimate.

    Rows are drawn uniformly with replacement; the result is deterministic
    for a given seed.
    """
    n = data.n_samples
    if not 1 <= n_a <= n:
        raise DataError(f"sub-sample size {n_a} outside 1..{n}")
    labels = canonical_subset(subset, data.n_inputs)
    index = NeighborIndex(data.input_columns(labels))
    j2 = index.second_neighbors()
    rng = np.random.default_rng(seed)
    s = rng.integers(0, n, size=n_a)
    pairs = pair_kernel(output_kernel, data.outputs[s], data.outputs[j2[s]])
    value = _normalized(float(pairs.mean()), data, output_kernel)
    return IndexEstimate(subset=labels, value=value, estimator="NN-S", n_samples=data.n_samples, seed=seed)
