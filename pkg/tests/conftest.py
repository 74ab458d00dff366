"""Session fixtures shared by the acceptance suite.

The two heavy fixtures replicate the paper's Monte Carlo protocols once
per session; several acceptance criteria read different slices of the
same grid.
"""

import itertools
import time

import numpy as np
import pytest

from kgsa.analysis import replicate_seed
from kgsa.benchmarks import (
    ReactorConfig,
    affine_dataset,
    analytic_rbf_beta,
    example1,
    example2,
    reactor_dataset,
)
from kgsa.embedding import beta_cme, fit_cme, isf_profile
from kgsa.kernels import KernelFamily, rbf_kernel, spread_heuristic
from kgsa.knn import beta_nn_full, beta_nn_subsample
from kgsa.model_selection import CvConfig, tune_cme

EX2_SIGMA = 2.7203
EX2_SEEDS = 30
EX2_SIZES = (100, 1000)
REACTOR_SEEDS = 10
ISF_GRID = np.linspace(-3.0, 3.0, 61)


def all_subsets(n):
    labels = tuple(range(1, n + 1))
    out = []
    for r in range(1, n + 1):
        out.extend(itertools.combinations(labels, r))
    return out


def pass_line(num, description, ok):
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance {num}] {status}: {description}")
    assert ok, f"criterion {num} failed: {description}"


@pytest.fixture(scope="session")
def ex2_results():
    """30-seed estimate grid for the four-input affine benchmark.

    For every sample size and every one of the 15 subsets: CME-N, CME-D,
    NN-F and NN-S estimates per seed, plus ISF profiles of input 3 at
    N=1000 and the exact index values from the closed form.
    """
    t_start = time.perf_counter()
    system = example2()
    output_kernel = rbf_kernel(EX2_SIGMA)
    subsets = all_subsets(4)

    tuned = {}
    for n in EX2_SIZES:
        data0 = affine_dataset(system, n, replicate_seed(42, 0))
        cfg = CvConfig(folds=5, max_evals=40, seed=0, tune_points=600 if n > 600 else None)
        for subset in subsets:
            tuned[(n, subset)] = tune_cme(data0, subset, output_kernel, cfg)

    betas = {
        est: {n: {s: np.empty(EX2_SEEDS) for s in subsets} for n in EX2_SIZES}
        for est in ("cme-n", "cme-d", "nn-f", "nn-s")
    }
    profiles_norm = np.empty((EX2_SEEDS, ISF_GRID.size))
    profiles_dist = np.empty((EX2_SEEDS, ISF_GRID.size))

    for r in range(EX2_SEEDS):
        for n in EX2_SIZES:
            data = affine_dataset(system, n, replicate_seed(42, r))
            for subset in subsets:
                params = tuned[(n, subset)]
                model = fit_cme(data, subset, params.input_kernel, output_kernel, params.lam)
                betas["cme-n"][n][subset][r] = beta_cme(model, "N").value
                betas["cme-d"][n][subset][r] = beta_cme(model, "D").value
                betas["nn-f"][n][subset][r] = beta_nn_full(data, subset, output_kernel).value
                betas["nn-s"][n][subset][r] = beta_nn_subsample(
                    data, subset, output_kernel, n_a=n, seed=replicate_seed(777, r)
                ).value
                if n == 1000 and subset == (3,):
                    profile = isf_profile(model, ISF_GRID)
                    profiles_norm[r] = profile.gamma_norm
                    profiles_dist[r] = profile.gamma_dist

    analytic = {s: analytic_rbf_beta(system, s, EX2_SIGMA) for s in subsets}
    return {
        "betas": betas,
        "analytic": analytic,
        "subsets": subsets,
        "grid": ISF_GRID,
        "profiles_norm": profiles_norm,
        "profiles_dist": profiles_dist,
        "elapsed_s": time.perf_counter() - t_start,
    }


@pytest.fixture(scope="session")
def ex1_results():
    """30-seed CME estimates with the linear output kernel on the
    three-input linear benchmark (subsets {1} and {2})."""
    t_start = time.perf_counter()
    from kgsa.kernels import linear_kernel

    system = example1()
    output_kernel = linear_kernel()
    subsets = ((1,), (2,))
    data0 = affine_dataset(system, 1000, replicate_seed(11, 0))
    cfg = CvConfig(folds=5, max_evals=40, seed=0, tune_points=600)
    tuned = {s: tune_cme(data0, s, output_kernel, cfg) for s in subsets}
    values = {s: np.empty(EX2_SEEDS) for s in subsets}
    for r in range(EX2_SEEDS):
        data = affine_dataset(system, 1000, replicate_seed(11, r))
        for s in subsets:
            model = fit_cme(data, s, tuned[s].input_kernel, output_kernel, tuned[s].lam)
            values[s][r] = beta_cme(model, "N").value
    return {"values": values, "elapsed_s": time.perf_counter() - t_start}


def _reactor_case(correlated, subsets, input_family, seeds):
    cfg = ReactorConfig()
    datasets = [reactor_dataset(cfg, 1000, replicate_seed(101 if correlated else 202, r), correlated) for r in range(seeds)]
    output_kernel = rbf_kernel(spread_heuristic(datasets[0].outputs))
    cv = CvConfig(folds=5, max_evals=40, seed=0, tune_points=800)
    tuned = {s: tune_cme(datasets[0], s, output_kernel, cv, input_family=input_family) for s in subsets}
    values = {s: np.empty(seeds) for s in subsets}
    for r in range(seeds):
        for s in subsets:
            model = fit_cme(datasets[r], s, tuned[s].input_kernel, output_kernel, tuned[s].lam)
            values[s][r] = beta_cme(model, "N").value
    return {s: np.median(v) for s, v in values.items()}, values


@pytest.fixture(scope="session")
def reactor_results():
    """Reactor medians: correlated case with Mahalanobis input kernels,
    independent case with RBF input kernels."""
    t_start = time.perf_counter()
    corr_subsets = ((5,), (6,), (7,), (8,), (7, 8))
    corr_medians, corr_values = _reactor_case(True, corr_subsets, KernelFamily.MAHALANOBIS, REACTOR_SEEDS)
    indep_subsets = tuple((i,) for i in range(1, 9))
    indep_medians, indep_values = _reactor_case(False, indep_subsets, KernelFamily.GAUSSIAN_RBF, REACTOR_SEEDS)
    return {
        "corr_medians": corr_medians,
        "corr_values": corr_values,
        "indep_medians": indep_medians,
        "indep_values": indep_values,
        "elapsed_s": time.perf_counter() - t_start,
    }
