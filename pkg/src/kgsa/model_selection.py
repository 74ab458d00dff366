"""K-fold cross-validation for CME fits and simplex hyperparameter search.

The held-out loss is the pure prediction error of the embedding regression
(the regularization penalty is dropped): for a held-out point (x, y),

    k(y, y) - 2 Gamma(x)^T W k_train(y) + Gamma(x)^T W K_train W Gamma(x)

with Gamma, W and K_train built from the complement folds.  Hyperparameters
(log bandwidth and log lambda) are minimized by a Nelder-Mead simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve

from . import backend
from .data import DataSet, canonical_subset
from .embedding import _spd_factor
from .errors import ConfigError, DataError, NumericalError
from .kernels import (
    KernelFamily,
    KernelSpec,
    kernel_diag,
    gram_matrix,
    mahalanobis_kernel,
    mahalanobis_metric,
    rbf_kernel,
)

__all__ = ["CvConfig", "NelderMeadResult", "TunedCme", "fold_partition", "cv_loss", "nelder_mead", "tune_cme"]


@dataclass(frozen=True)
class CvConfig:
    """Cross-validation and hyperparameter-search settings.

    Bandwidth bounds are multiples of the median-distance heuristic;
    lambda bounds are absolute.  ``fold_indices`` injects an explicit fold
    assignment (overriding the seeded shuffle), which is mainly useful for
    testing permutation invariance.  ``tune_points`` caps the number of
    rows used during tuning (rows are subsampled with the shuffle seed).
    """

    folds: int = 5
    seed: int = 0
    lambda_bounds: tuple = (1e-8, 1e2)
    bandwidth_factor_bounds: tuple = (1e-2, 1e2)
    max_evals: int = 100
    xtol: float = 1e-3
    ftol: float = 1e-10
    lambda_init: float = 1e-3
    tune_lambda_only: bool = False
    tune_points: int | None = None
    fold_indices: tuple | None = None

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError(f"cross-validation needs at least 2 folds, got {self.folds}")
        for lo, hi in (self.lambda_bounds, self.bandwidth_factor_bounds):
            if not (np.isfinite(lo) and np.isfinite(hi) and 0 < lo < hi):
                raise ConfigError(f"bounds must be finite with 0 < lower < upper, got ({lo}, {hi})")


@dataclass(frozen=True)
class NelderMeadResult:
    x: np.ndarray
    fun: float
    n_evals: int
    converged: bool


@dataclass(frozen=True)
class TunedCme:
    input_kernel: KernelSpec
    lam: float
    cv_value: float
    n_evals: int


def fold_partition(n: int, folds: int, seed: int) -> list:
    """Disjoint cover of range(n) into `folds` parts with sizes within 1."""
    if folds > n:
        raise ConfigError(f"cannot split {n} samples into {folds} folds")
    order = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(order, folds)]


class _CvProblem:
    """Precomputed quantities for repeated CV evaluations on one subset.

    The subset's pairwise squared input distances and the output Gram are
    computed once; every (bandwidth, lambda) evaluation then only slices,
    exponentiates and factorizes.
    """

    def __init__(self, data: DataSet, subset, output_kernel: KernelSpec, cfg: CvConfig,
                 input_family: KernelFamily = KernelFamily.GAUSSIAN_RBF):
        self.labels = canonical_subset(subset, data.n_inputs)
        x = data.input_columns(self.labels)
        y = data.outputs
        if cfg.tune_points is not None and cfg.tune_points < x.shape[0]:
            keep = np.sort(np.random.default_rng(cfg.seed).permutation(x.shape[0])[: cfg.tune_points])
            x = x[keep]
            y = y[keep]
        self.n = x.shape[0]
        self.input_family = KernelFamily(input_family)
        if self.input_family is KernelFamily.MAHALANOBIS:
            self.metric, self.metric_pinv = mahalanobis_metric(x)
            w, v = np.linalg.eigh(self.metric_pinv)
            x_eval = x @ (v * np.sqrt(np.clip(w, 0.0, None)))
        elif self.input_family is KernelFamily.GAUSSIAN_RBF:
            self.metric = self.metric_pinv = None
            x_eval = x
        else:
            raise ConfigError(f"unsupported input kernel family for tuning: {input_family}")
        self.sqdist = backend.sqdist_cross(x_eval, x_eval)
        self.k_full = gram_matrix(output_kernel, y)
        self.k_diag = kernel_diag(output_kernel, y)
        if cfg.fold_indices is not None:
            self.folds = [np.asarray(f, dtype=int) for f in cfg.fold_indices]
            covered = np.sort(np.concatenate(self.folds))
            if not np.array_equal(covered, np.arange(self.n)):
                raise ConfigError("fold_indices must form a disjoint cover of the rows")
        else:
            self.folds = fold_partition(self.n, cfg.folds, cfg.seed)
        if min(len(f) for f in self.folds) < 1:
            raise ConfigError("every fold needs at least one point")

    def median_bandwidth(self) -> float:
        n = self.n
        med = float(np.median(np.sqrt(self.sqdist[np.triu_indices(n, 1)])))
        if med <= 0:
            raise NumericalError("degenerate sample, zero median distance")
        return med

    def input_kernel(self, bandwidth: float) -> KernelSpec:
        if self.input_family is KernelFamily.MAHALANOBIS:
            return mahalanobis_kernel(bandwidth, self.metric, self.metric_pinv)
        return rbf_kernel(bandwidth)

    def loss(self, bandwidth: float, lam: float) -> float:
        """Mean held-out prediction error across folds."""
        l_full = np.exp(self.sqdist / (-2.0 * bandwidth**2))
        total = 0.0
        for f, held in enumerate(self.folds):
            train = np.concatenate([self.folds[g] for g in range(len(self.folds)) if g != f])
            l_tr = l_full[np.ix_(train, train)]
            gam = l_full[np.ix_(train, held)]
            k_tr = self.k_full[np.ix_(train, train)]
            k_cross = self.k_full[np.ix_(train, held)]
            factor, _ = _spd_factor(l_tr, lam)
            g = cho_solve(factor, gam)
            fit = np.einsum("ij,ij->j", g, k_tr @ g)
            cross = np.einsum("ij,ij->j", g, k_cross)
            total += float(np.mean(self.k_diag[held] - 2.0 * cross + fit))
        return total / len(self.folds)


def cv_loss(
    data: DataSet,
    subset,
    input_kernel: KernelSpec,
    output_kernel: KernelSpec,
    lam: float,
    cfg: CvConfig | None = None,
) -> float:
    """K-fold held-out loss of a CME fit with the given hyperparameters."""
    cfg = replace(cfg or CvConfig(), tune_points=None)
    if not np.isfinite(lam) or lam <= 0:
        raise DataError(f"regularizer lam must be positive, got {lam!r}")
    family = input_kernel.family
    problem = _CvProblem(data, subset, output_kernel, cfg, input_family=family)
    if family is KernelFamily.MAHALANOBIS:
        # evaluate with the caller's metric, not the data-derived one
        problem.metric = input_kernel.metric
        problem.metric_pinv = input_kernel.metric_pinv
        w, v = np.linalg.eigh(input_kernel.metric_pinv)
        x = data.input_columns(problem.labels) @ (v * np.sqrt(np.clip(w, 0.0, None)))
        problem.sqdist = backend.sqdist_cross(x, x)
    return problem.loss(input_kernel.bandwidth, lam)


def nelder_mead(
    objective,
    init,
    budget: int = 200,
    xtol: float = 1e-6,
    ftol: float = 1e-10,
    initial_step=0.5,
) -> NelderMeadResult:
    """Minimize a scalar function by the Nelder-Mead simplex method.

    Standard reflect/expand/contract/shrink iteration.  Terminates when the
    simplex diameter falls below `xtol`, the value spread falls below
    `ftol`, or `budget` evaluations have been spent.  Deterministic, and
    the result is never worse than the initial point.
    """
    x0 = np.asarray(init, dtype=float).ravel()
    p = x0.size
    if p < 1:
        raise ConfigError("nelder_mead requires at least one parameter")
    f0 = float(objective(x0))
    if not np.isfinite(f0):
        raise NumericalError(f"objective is not finite at the initial point {x0!r}")
    steps = np.broadcast_to(np.asarray(initial_step, dtype=float), (p,))
    simplex = [x0]
    values = [f0]
    n_evals = 1
    for k in range(p):
        x = x0.copy()
        x[k] += steps[k]
        simplex.append(x)
        values.append(float(objective(x)))
        n_evals += 1
    simplex = np.asarray(simplex)
    values = np.asarray(values)
    alpha, gamma, rho, shrink = 1.0, 2.0, 0.5, 0.5
    converged = False

    while n_evals < budget:
        order = np.argsort(values, kind="stable")
        simplex = simplex[order]
        values = values[order]
        diameter = float(np.max(np.abs(simplex[1:] - simplex[0])))
        spread = float(values[-1] - values[0])
        if diameter < xtol or spread < ftol:
            converged = True
            break
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        reflected = centroid + alpha * (centroid - worst)
        f_ref = float(objective(reflected))
        n_evals += 1
        if f_ref < values[0]:
            expanded = centroid + gamma * (reflected - centroid)
            f_exp = float(objective(expanded))
            n_evals += 1
            if f_exp < f_ref:
                simplex[-1], values[-1] = expanded, f_exp
            else:
                simplex[-1], values[-1] = reflected, f_ref
        elif f_ref < values[-2]:
            simplex[-1], values[-1] = reflected, f_ref
        else:
            inside = f_ref >= values[-1]
            contracted = centroid + rho * ((worst if inside else reflected) - centroid)
            f_con = float(objective(contracted))
            n_evals += 1
            if f_con < min(values[-1], f_ref):
                simplex[-1], values[-1] = contracted, f_con
            else:
                for k in range(1, p + 1):
                    simplex[k] = simplex[0] + shrink * (simplex[k] - simplex[0])
                    values[k] = float(objective(simplex[k]))
                    n_evals += 1
                    if n_evals >= budget:
                        break

    best = int(np.argmin(values))
    return NelderMeadResult(x=simplex[best].copy(), fun=float(values[best]), n_evals=n_evals, converged=converged)


_PENALTY = 1e100


def tune_cme(
    data: DataSet,
    subset,
    output_kernel: KernelSpec,
    cfg: CvConfig | None = None,
    input_family: KernelFamily = KernelFamily.GAUSSIAN_RBF,
) -> TunedCme:
    """Cross-validated (bandwidth, lambda) search for one input subset.

    Both hyperparameters are optimized jointly in log scale, starting from
    the median-distance heuristic and ``cfg.lambda_init``.  With
    ``cfg.tune_lambda_only`` the bandwidth stays at the heuristic value.
    For the Mahalanobis family the metric is the subset sample covariance
    and the tuned bandwidth plays the role of its scale parameter.
    """
    cfg = cfg or CvConfig()
    problem = _CvProblem(data, subset, output_kernel, cfg, input_family=input_family)
    med = problem.median_bandwidth()
    log_bw_bounds = (
        math.log(cfg.bandwidth_factor_bounds[0] * med),
        math.log(cfg.bandwidth_factor_bounds[1] * med),
    )
    log_lam_bounds = (math.log(cfg.lambda_bounds[0]), math.log(cfg.lambda_bounds[1]))

    if cfg.tune_lambda_only:
        def objective(params):
            (log_lam,) = params
            if not log_lam_bounds[0] <= log_lam <= log_lam_bounds[1]:
                return _PENALTY
            return problem.loss(med, math.exp(log_lam))

        init = [math.log(cfg.lambda_init)]
        step = [1.0]
    else:
        def objective(params):
            log_bw, log_lam = params
            if not log_bw_bounds[0] <= log_bw <= log_bw_bounds[1]:
                return _PENALTY
            if not log_lam_bounds[0] <= log_lam <= log_lam_bounds[1]:
                return _PENALTY
            return problem.loss(math.exp(log_bw), math.exp(log_lam))

        init = [math.log(med), math.log(cfg.lambda_init)]
        step = [0.5, 1.0]

    result = nelder_mead(objective, init, budget=cfg.max_evals, xtol=cfg.xtol, ftol=cfg.ftol, initial_step=step)
    if cfg.tune_lambda_only:
        bandwidth = med
        lam = math.exp(result.x[0])
    else:
        bandwidth = math.exp(result.x[0])
        lam = math.exp(result.x[1])
    return TunedCme(
        input_kernel=problem.input_kernel(bandwidth),
        lam=lam,
        cv_value=result.fun,
        n_evals=result.n_evals,
    )
