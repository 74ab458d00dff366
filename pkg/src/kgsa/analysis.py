"""End-to-end analysis: configuration, estimation loop and report assembly.

`run_analysis` turns one `AnalysisConfig` into a `SensitivityReport`:
resolve the data source (CSV file or built-in benchmark), resolve kernels
and per-subset hyperparameters once, estimate every required subset across
replicates, and assemble the requested decompositions from a single table
of per-subset medians.  Everything is deterministic given the master seed.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import backend
from .benchmarks import (
    BENCHMARK_NAMES,
    analytic_rbf_beta,
    analytic_variance_beta,
    example1,
    example2,
    generate_benchmark,
)
from .data import canonical_subset, load_dataset
from .decomposition import IndexTable, anova_effects, ols_decomposition, shapley_effects
from .embedding import IndexEstimate, beta_cme, fit_cme, isf_profile
from .errors import ConfigError, KgsaError
from .kernels import (
    KernelFamily,
    KernelSpec,
    linear_kernel,
    mahalanobis_kernel,
    mahalanobis_metric,
    median_heuristic,
    rbf_kernel,
    spread_heuristic,
)
from .knn import beta_nn_full, beta_nn_subsample
from .model_selection import CvConfig, tune_cme

__all__ = ["AnalysisConfig", "SensitivityReport", "run_analysis", "replicate_seed"]

ESTIMATORS = ("cme-n", "cme-d", "nn-f", "nn-s", "analytic")
SCHEMA_VERSION = 1


def replicate_seed(master_seed: int, r: int) -> np.random.SeedSequence:
    """Independent, reproducible random stream for replicate r."""
    return np.random.SeedSequence(entropy=(int(master_seed), int(r)))


@dataclass(frozen=True)
class AnalysisConfig:
    """Everything `run_analysis` needs; exactly one data source is set.

    ``bandwidth`` is "median", "spread" or an explicit float and applies
    to the output kernel; input kernel bandwidths come from the median
    heuristic or cross-validated tuning (``tune``).
    """

    data_path: str | None = None
    benchmark: str | None = None
    n_samples: int = 1000
    seed: int = 0
    replicates: int = 1
    estimator: str = "cme-n"
    output_kernel: str = "gaussian-rbf"
    bandwidth: float | str = "spread"
    input_kernel: str = "gaussian-rbf"
    lam: float | None = None
    tune: bool = True
    cv: CvConfig = field(default_factory=CvConfig)
    subsets: tuple = ()
    max_order: int | None = None
    universe: tuple | None = None
    run_ols: bool = False
    run_shapley: bool = False
    run_anova: bool = False
    assume_independent: bool = False
    ols_tie_tol: float = 1e-9
    isf_subsets: tuple = ()
    isf_grid: tuple | None = None  # (lo, hi, count); default spans the data
    nn_subsample: int | None = None
    threads: int = 1
    clamp: bool = False

    def validate(self) -> None:
        if (self.data_path is None) == (self.benchmark is None):
            raise ConfigError("exactly one data source (data_path or benchmark) must be set")
        if self.benchmark is not None and self.benchmark not in BENCHMARK_NAMES:
            raise ConfigError(f"unknown benchmark {self.benchmark!r}; choose from {', '.join(BENCHMARK_NAMES)}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}; choose from {', '.join(ESTIMATORS)}")
        if self.estimator == "analytic" and self.benchmark not in ("example1", "example2"):
            raise ConfigError("the analytic estimator is only available for the affine benchmarks")
        if self.output_kernel not in ("gaussian-rbf", "linear"):
            raise ConfigError(f"unknown output kernel {self.output_kernel!r}")
        if self.input_kernel not in ("gaussian-rbf", "mahalanobis"):
            raise ConfigError(f"unknown input kernel {self.input_kernel!r}")
        if isinstance(self.bandwidth, str) and self.bandwidth not in ("median", "spread"):
            raise ConfigError(f"bandwidth must be 'median', 'spread' or a number, got {self.bandwidth!r}")
        if self.run_anova and not self.assume_independent:
            raise ConfigError("ANOVA effects assume independent inputs; pass assume_independent to attest")
        if (self.run_ols or self.run_shapley or self.run_anova) and not self.universe:
            raise ConfigError("OLS/Shapley/ANOVA need a universe of input labels")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.estimator.startswith("cme") and not self.tune and self.lam is None:
            raise ConfigError("CME estimation needs either an explicit lambda or tuning enabled")
        if self.isf_subsets:
            if not self.estimator.startswith("cme"):
                raise ConfigError("ISF profiles require a CME estimator")
            for s in self.isf_subsets:
                if len(set(s)) != 1:
                    raise ConfigError(f"ISF grids are built for single inputs, got subset {tuple(s)}")


@dataclass
class SensitivityReport:
    """Full, serializable record of one analysis."""

    schema_version: int
    config: dict
    resolved: dict
    indices: list
    ols: dict | None
    shapley: dict | None
    anova: dict | None
    isf: list
    monotonicity_violations: list
    diagnostics: dict
    timing: dict

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "resolved": self.resolved,
            "indices": self.indices,
            "ols": self.ols,
            "shapley": self.shapley,
            "anova": self.anova,
            "isf": self.isf,
            "monotonicity_violations": self.monotonicity_violations,
            "diagnostics": self.diagnostics,
            "timing": self.timing,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SensitivityReport":
        return cls(**payload)

    def index_table(self) -> IndexTable:
        """Rebuild the per-subset median table used by the decompositions."""
        n = self.resolved["n_inputs"]
        table = IndexTable(n_inputs=n, provenance={"estimator": self.config["estimator"]})
        for entry in self.indices:
            table.add(tuple(entry["subset"]), entry["median"])
        return table


def _subset_key(subset) -> str:
    return ",".join(str(i) for i in subset)


class _EstimationContext:
    """Caches data sets, resolved kernels and per-subset estimates."""

    def __init__(self, cfg: AnalysisConfig):
        self.cfg = cfg
        self.datasets = self._materialize_data()
        self.data0 = self.datasets[0]
        self.n_inputs = self.data0.n_inputs
        self.output_kernel, self.output_bandwidth = self._resolve_output_kernel()
        self.system = None
        if cfg.estimator == "analytic":
            self.system = example1() if cfg.benchmark == "example1" else example2()
        self._hyper: dict = {}
        self._estimates: dict = {}

    # -- data ---------------------------------------------------------------
    def _materialize_data(self) -> list:
        cfg = self.cfg
        if cfg.data_path is not None:
            data = load_dataset(cfg.data_path)
            return [data] * cfg.replicates
        return [
            generate_benchmark(cfg.benchmark, cfg.n_samples, replicate_seed(cfg.seed, r))
            for r in range(cfg.replicates)
        ]

    def _resolve_output_kernel(self):
        cfg = self.cfg
        if cfg.output_kernel == "linear":
            return linear_kernel(), None
        if isinstance(cfg.bandwidth, str):
            rule = median_heuristic if cfg.bandwidth == "median" else spread_heuristic
            bandwidth = float(rule(self.data0.outputs))
        else:
            bandwidth = float(cfg.bandwidth)
        return rbf_kernel(bandwidth), bandwidth

    # -- hyperparameters ----------------------------------------------------
    def hyperparameters(self, subset) -> dict:
        """Input kernel and lambda for one subset, resolved once on the
        first replicate's data."""
        key = canonical_subset(subset, self.n_inputs)
        if key in self._hyper:
            return self._hyper[key]
        cfg = self.cfg
        family = KernelFamily(cfg.input_kernel)
        if cfg.estimator.startswith("cme"):
            if cfg.tune:
                tuned = tune_cme(self.data0, key, self.output_kernel, cfg.cv, input_family=family)
                params = {"input_kernel": tuned.input_kernel, "lam": tuned.lam, "cv_loss": tuned.cv_value}
            else:
                x = self.data0.input_columns(key)
                if family is KernelFamily.MAHALANOBIS:
                    metric, pinv = mahalanobis_metric(x)
                    w, v = np.linalg.eigh(pinv)
                    med = median_heuristic(x @ (v * np.sqrt(np.clip(w, 0.0, None))))
                    spec = mahalanobis_kernel(med, metric, pinv)
                else:
                    spec = rbf_kernel(median_heuristic(x))
                params = {"input_kernel": spec, "lam": float(cfg.lam), "cv_loss": None}
        else:
            params = {"input_kernel": None, "lam": None, "cv_loss": None}
        self._hyper[key] = params
        return params

    # -- estimation ---------------------------------------------------------
    def _estimate_one(self, subset, r: int) -> IndexEstimate:
        cfg = self.cfg
        data = self.datasets[r]
        try:
            if cfg.estimator == "analytic":
                if self.output_kernel.family is KernelFamily.LINEAR:
                    value = analytic_variance_beta(self.system, subset)
                else:
                    value = analytic_rbf_beta(self.system, subset, self.output_bandwidth)
                return IndexEstimate(
                    subset=canonical_subset(subset, self.n_inputs),
                    value=value,
                    estimator="analytic",
                    n_samples=0,
                    seed=r,
                )
            if cfg.estimator in ("cme-n", "cme-d"):
                params = self.hyperparameters(subset)
                model = fit_cme(data, subset, params["input_kernel"], self.output_kernel, params["lam"])
                est = beta_cme(model, "N" if cfg.estimator == "cme-n" else "D")
                return replace(est, seed=r)
            if cfg.estimator == "nn-f":
                est = beta_nn_full(data, subset, self.output_kernel)
                return replace(est, seed=r)
            n_a = cfg.nn_subsample or data.n_samples
            seed = replicate_seed(cfg.seed, r).spawn(1)[0]
            est = beta_nn_subsample(data, subset, self.output_kernel, n_a, seed)
            return replace(est, seed=r)
        except KgsaError as exc:
            raise type(exc)(f"subset {_subset_key(subset)} replicate {r}: {exc}") from exc

    def estimates(self, subset) -> list:
        """Per-replicate estimates for one subset (cached)."""
        key = canonical_subset(subset, self.n_inputs)
        if key not in self._estimates:
            cfg = self.cfg
            if cfg.estimator == "analytic":
                self._estimates[key] = [self._estimate_one(key, 0)]
            elif cfg.threads > 1:
                self.hyperparameters(key)  # tune once, outside the pool
                with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                    futures = [pool.submit(self._estimate_one, key, r) for r in range(cfg.replicates)]
                    self._estimates[key] = [f.result() for f in futures]
            else:
                self._estimates[key] = [self._estimate_one(key, r) for r in range(cfg.replicates)]
        return self._estimates[key]

    def prefetch(self, subsets) -> None:
        """Estimate many subsets at once through the worker pool.

        Hyperparameters are resolved serially first (tuning is the cached,
        expensive step), then every (subset, replicate) task runs in the
        pool and results are merged in deterministic subset order.
        """
        cfg = self.cfg
        keys = [canonical_subset(s, self.n_inputs) for s in subsets]
        keys = [k for k in dict.fromkeys(keys) if k not in self._estimates]
        if cfg.threads <= 1 or cfg.estimator == "analytic" or not keys:
            for k in keys:
                self.estimates(k)
            return
        if cfg.estimator.startswith("cme"):
            for k in keys:
                self.hyperparameters(k)
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futures = {(k, r): pool.submit(self._estimate_one, k, r) for k in keys for r in range(cfg.replicates)}
        for k in sorted(keys, key=lambda s: (len(s), s)):
            self._estimates[k] = [futures[(k, r)].result() for r in range(cfg.replicates)]

    def summary_value(self, subset) -> float:
        """Median across replicates (clamped first when configured)."""
        values = np.array([e.value for e in self.estimates(subset)])
        if self.cfg.clamp:
            values = np.clip(values, 0.0, 1.0)
        return float(np.median(values))


def _required_subsets(cfg: AnalysisConfig, n_inputs: int) -> list:
    wanted = set()
    for s in cfg.subsets:
        wanted.add(canonical_subset(s, n_inputs))
    if cfg.max_order is not None:
        labels = range(1, n_inputs + 1)
        for order in range(1, cfg.max_order + 1):
            for s in itertools.combinations(labels, order):
                wanted.add(s)
    if cfg.universe:
        universe = canonical_subset(cfg.universe, n_inputs)
        if cfg.run_shapley or cfg.run_anova:
            for order in range(1, len(universe) + 1):
                for s in itertools.combinations(universe, order):
                    wanted.add(s)
        if cfg.run_ols:
            wanted.update((j,) for j in universe)  # the chain grows lazily
    for s in cfg.isf_subsets:
        wanted.add(canonical_subset(s, n_inputs))
    return sorted(wanted, key=lambda s: (len(s), s))


def _greedy_chain(ctx: _EstimationContext, universe) -> None:
    """Estimate the subsets along the greedy OLS path (lazily, by medians)."""
    prefix: tuple = ()
    remaining = list(universe)
    while remaining:
        best_label, best_value = None, -np.inf
        for j in sorted(remaining):
            candidate = tuple(sorted(prefix + (j,)))
            value = ctx.summary_value(candidate) - (ctx.summary_value(prefix) if prefix else 0.0)
            if value > best_value + 0.0:
                best_label, best_value = j, value
        prefix = tuple(sorted(prefix + (best_label,)))
        remaining.remove(best_label)


def _isf_section(ctx: _EstimationContext) -> list:
    cfg = ctx.cfg
    out = []
    for subset in cfg.isf_subsets:
        key = canonical_subset(subset, ctx.n_inputs)
        params = ctx.hyperparameters(key)
        col = ctx.data0.input_columns(key)[:, 0]
        if cfg.isf_grid is not None:
            lo, hi, count = cfg.isf_grid
        else:
            lo, hi, count = float(col.min()), float(col.max()), 41
        grid = np.linspace(lo, hi, int(count))
        norm_curves, dist_curves = [], []
        inside = None
        for r in range(cfg.replicates):
            model = fit_cme(ctx.datasets[r], key, params["input_kernel"], ctx.output_kernel, params["lam"])
            profile = isf_profile(model, grid)
            norm_curves.append(profile.gamma_norm)
            dist_curves.append(profile.gamma_dist)
            if r == 0:
                inside = profile.inside_hull
        norm_curves = np.asarray(norm_curves)
        dist_curves = np.asarray(dist_curves)
        out.append(
            {
                "subset": list(key),
                "grid": grid.tolist(),
                "gamma_norm_mean": norm_curves.mean(axis=0).tolist(),
                "gamma_norm_min": norm_curves.min(axis=0).tolist(),
                "gamma_norm_max": norm_curves.max(axis=0).tolist(),
                "gamma_dist_mean": dist_curves.mean(axis=0).tolist(),
                "gamma_dist_min": dist_curves.min(axis=0).tolist(),
                "gamma_dist_max": dist_curves.max(axis=0).tolist(),
                "inside_hull": [bool(b) for b in inside],
            }
        )
    return out


def _hyper_echo(params: dict) -> dict:
    spec: KernelSpec | None = params["input_kernel"]
    if spec is None:
        return {"lam": None}
    echo = {"family": spec.family.value, "bandwidth": spec.bandwidth, "lam": params["lam"]}
    if params["cv_loss"] is not None:
        echo["cv_loss"] = params["cv_loss"]
    return echo


def run_analysis(cfg: AnalysisConfig) -> SensitivityReport:
    """Run the configured analysis and assemble the report."""
    t_start = time.perf_counter()
    cfg.validate()
    ctx = _EstimationContext(cfg)
    timing: dict = {}

    requested = _required_subsets(cfg, ctx.n_inputs)
    t0 = time.perf_counter()
    ctx.prefetch(requested)
    universe = canonical_subset(cfg.universe, ctx.n_inputs) if cfg.universe else None
    if cfg.run_ols:
        _greedy_chain(ctx, universe)
    timing["estimation_s"] = time.perf_counter() - t0

    # one table of per-subset medians feeds every decomposition
    table = IndexTable(n_inputs=ctx.n_inputs, provenance={"estimator": cfg.estimator, "seed": cfg.seed})
    for key in sorted(ctx._estimates, key=lambda s: (len(s), s)):
        table.add(key, ctx.summary_value(key))

    ols_payload = None
    if cfg.run_ols:
        result = ols_decomposition(table, universe, tie_tol=cfg.ols_tie_tol)
        ols_payload = {
            "universe": list(universe),
            "order": list(result.order),
            "step_values": list(result.step_values),
            "cumulative": list(result.cumulative),
            "ties": [list(t) for t in result.ties],
            "negative_steps": list(result.negative_steps),
            "tie_tol": result.tie_tol,
        }
    shapley_payload = None
    if cfg.run_shapley:
        sh = shapley_effects(table, universe)
        shapley_payload = {
            "universe": list(universe),
            "values": {str(i): sh.values[i] for i in universe},
            "total": sh.total(),
        }
    anova_payload = None
    if cfg.run_anova:
        an = anova_effects(table, universe)
        anova_payload = {
            "universe": list(universe),
            "effects": {_subset_key(s): v for s, v in sorted(an.effects.items(), key=lambda kv: (len(kv[0]), kv[0]))},
            "total": an.total(),
        }

    t0 = time.perf_counter()
    isf_payload = _isf_section(ctx)
    timing["isf_s"] = time.perf_counter() - t0

    indices_payload = []
    for key in sorted(ctx._estimates, key=lambda s: (len(s), s)):
        ests = ctx._estimates[key]
        raw = np.array([e.value for e in ests])
        values = np.clip(raw, 0.0, 1.0) if cfg.clamp else raw
        indices_payload.append(
            {
                "subset": list(key),
                "estimator": ests[0].estimator,
                "n_samples": ests[0].n_samples,
                "replicates": len(ests),
                "values": values.tolist(),
                "mean": float(values.mean()),
                "median": float(np.median(values)),
                "min": float(values.min()),
                "max": float(values.max()),
                "clamped": bool(cfg.clamp),
                "hyperparameters": _hyper_echo(ctx.hyperparameters(key))
                if cfg.estimator.startswith("cme")
                else {"lam": None},
            }
        )

    violations = [
        {"smaller": list(s), "larger": list(r)} for s, r in table.monotonicity_violations(tol=0.0)
    ]

    timing["total_s"] = time.perf_counter() - t_start
    config_echo = {
        "data_path": cfg.data_path,
        "benchmark": cfg.benchmark,
        "n_samples": cfg.n_samples if cfg.benchmark else ctx.data0.n_samples,
        "seed": cfg.seed,
        "replicates": cfg.replicates,
        "estimator": cfg.estimator,
        "output_kernel": cfg.output_kernel,
        "bandwidth_rule": cfg.bandwidth if isinstance(cfg.bandwidth, str) else float(cfg.bandwidth),
        "input_kernel": cfg.input_kernel,
        "lam": cfg.lam,
        "tune": cfg.tune,
        "subsets": [list(s) for s in cfg.subsets],
        "max_order": cfg.max_order,
        "universe": list(cfg.universe) if cfg.universe else None,
        "run_ols": cfg.run_ols,
        "run_shapley": cfg.run_shapley,
        "run_anova": cfg.run_anova,
        "assume_independent": cfg.assume_independent,
        "isf_subsets": [list(s) for s in cfg.isf_subsets],
        "isf_grid": list(cfg.isf_grid) if cfg.isf_grid else None,
        "nn_subsample": cfg.nn_subsample,
        "threads": cfg.threads,
        "clamp": cfg.clamp,
        "cv": {
            "folds": cfg.cv.folds,
            "seed": cfg.cv.seed,
            "max_evals": cfg.cv.max_evals,
            "lambda_bounds": list(cfg.cv.lambda_bounds),
            "bandwidth_factor_bounds": list(cfg.cv.bandwidth_factor_bounds),
            "tune_points": cfg.cv.tune_points,
        },
    }
    resolved = {
        "n_inputs": ctx.n_inputs,
        "n_outputs": ctx.data0.n_outputs,
        "output_kernel": {
            "family": ctx.output_kernel.family.value,
            "bandwidth": ctx.output_bandwidth,
        },
        "subset_hyperparameters": {
            _subset_key(k): _hyper_echo(v) for k, v in sorted(ctx._hyper.items(), key=lambda kv: (len(kv[0]), kv[0]))
        },
    }
    return SensitivityReport(
        schema_version=SCHEMA_VERSION,
        config=config_echo,
        resolved=resolved,
        indices=indices_payload,
        ols=ols_payload,
        shapley=shapley_payload,
        anova=anova_payload,
        isf=isf_payload,
        monotonicity_violations=violations,
        diagnostics={"backend": backend.backend_name()},
        timing=timing,
    )
