"""Command-line interface.

Subcommands: estimate, ols, shapley, anova, isf, crossval, benchmark.
Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
failure.  Options can also be preloaded from a JSON config file with
``--config``; explicit flags override file values.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .analysis import AnalysisConfig, run_analysis
from .benchmarks import BENCHMARK_NAMES, generate_benchmark
from .data import save_dataset
from .errors import ConfigError, DataError, KgsaError, NumericalError
from .kernels import KernelFamily
from .model_selection import CvConfig, tune_cme
from .reporting import REPORT_FORMATS, emit_report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parse_subsets(text: str):
    """Parse '1,2;3' into ((1, 2), (3,))."""
    groups = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            groups.append(tuple(int(tok) for tok in chunk.split(",") if tok.strip()))
        except ValueError:
            raise ConfigError(f"cannot parse subset spec {chunk!r}; expected comma-separated integers") from None
    if not groups:
        raise ConfigError(f"no subsets in {text!r}")
    return tuple(groups)


def _parse_labels(text: str):
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"cannot parse label list {text!r}") from None


def _parse_bandwidth(text: str):
    if text in ("median", "spread"):
        return text
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"bandwidth must be 'median', 'spread' or a number, got {text!r}") from None


def _parse_grid(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must be lo:hi:count, got {text!r}")
    try:
        return (float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError:
        raise ConfigError(f"grid must be lo:hi:count, got {text!r}") from None


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with AnalysisConfig fields; flags override")
    parser.add_argument("--data", help="CSV data file (x*/y* columns)")
    parser.add_argument("--benchmark", choices=BENCHMARK_NAMES, help="built-in benchmark data source")
    parser.add_argument("--n", type=int, help="benchmark sample size (default 1000)")
    parser.add_argument("--seed", type=int, help="master seed (default 0)")
    parser.add_argument("--replicates", type=int, help="independent replicate analyses (default 1)")
    parser.add_argument(
        "--estimator", choices=["cme-n", "cme-d", "nn-f", "nn-s", "analytic"], help="index estimator (default cme-n)"
    )
    parser.add_argument("--output-kernel", choices=["gaussian-rbf", "linear"], help="output kernel family")
    parser.add_argument("--bandwidth", type=_parse_bandwidth, help="output bandwidth: median | spread | number")
    parser.add_argument("--input-kernel", choices=["gaussian-rbf", "mahalanobis"], help="input kernel family")
    parser.add_argument("--lambda", dest="lam", type=float, help="explicit CME regularizer (disables tuning)")
    parser.add_argument("--tune", action="store_true", default=None, help="cross-validate input hyperparameters")
    parser.add_argument("--cv-folds", type=int, help="cross-validation folds (default 5)")
    parser.add_argument("--cv-budget", type=int, help="simplex evaluation budget (default 100)")
    parser.add_argument("--tune-points", type=int, help="row cap during tuning")
    parser.add_argument("--subsample", type=int, help="nn-s sub-sample size (default N)")
    parser.add_argument("--threads", type=int, help="worker threads for replicates (default 1)")
    parser.add_argument("--clamp", action="store_true", default=None, help="clamp reported indices to [0, 1]")
    parser.add_argument("--out", help="output directory (default: print JSON to stdout)")
    parser.add_argument("--format", choices=REPORT_FORMATS, nargs="+", help="report formats (default json)")


def build_parser() -> _Parser:
    parser = _Parser(prog="kgsa", description="Kernel-based global sensitivity analysis from a single data set")
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="estimate beta indices for chosen subsets", parents=[])
    _add_common(p_est)
    p_est.add_argument("--subsets", type=_parse_subsets, help="explicit subsets, e.g. '1,2;3'")
    p_est.add_argument("--order", type=int, help="estimate every subset up to this order")

    p_ols = sub.add_parser("ols", help="greedy optimal-learning-sequence decomposition")
    _add_common(p_ols)
    p_ols.add_argument("--universe", type=_parse_labels, required=True, help="labels to decompose, e.g. '1,2,3'")
    p_ols.add_argument("--tie-tol", type=float, help="conditional-value tie tolerance (default 1e-9)")

    p_shap = sub.add_parser("shapley", help="exact Shapley effects over a universe")
    _add_common(p_shap)
    p_shap.add_argument("--universe", type=_parse_labels, required=True)

    p_anova = sub.add_parser("anova", help="inclusion-exclusion ANOVA effects (independent inputs)")
    _add_common(p_anova)
    p_anova.add_argument("--universe", type=_parse_labels, required=True)
    p_anova.add_argument(
        "--assume-independent",
        action="store_true",
        default=None,
        help="attest that the inputs are independent (required)",
    )

    p_isf = sub.add_parser("isf", help="inner statistical function profiles for single inputs")
    _add_common(p_isf)
    p_isf.add_argument("--subsets", type=_parse_subsets, required=True, help="single-input subsets, e.g. '3;1'")
    p_isf.add_argument("--grid", type=_parse_grid, help="query grid lo:hi:count (default: data range)")

    p_cv = sub.add_parser("crossval", help="cross-validated hyperparameter search for one subset")
    _add_common(p_cv)
    p_cv.add_argument("--subset", type=_parse_labels, required=True, help="input subset, e.g. '1,3'")

    p_bench = sub.add_parser("benchmark", help="generate a benchmark data set as CSV")
    p_bench.add_argument("--benchmark", choices=BENCHMARK_NAMES, required=True)
    p_bench.add_argument("--n", type=int, default=1000)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", required=True, help="CSV path to write")
    return parser


_CONFIG_FIELD_NAMES = {f.name for f in fields(AnalysisConfig)}


def _config_from_args(args: argparse.Namespace) -> AnalysisConfig:
    base: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise DataError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        unknown = set(loaded) - _CONFIG_FIELD_NAMES - {"cv"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        base.update(loaded)
        for seq_key in ("subsets", "isf_subsets"):
            if seq_key in base and base[seq_key] is not None:
                base[seq_key] = tuple(tuple(s) for s in base[seq_key])
        for tup_key in ("universe", "isf_grid"):
            if tup_key in base and base[tup_key] is not None:
                base[tup_key] = tuple(base[tup_key])

    overrides = {
        "data_path": getattr(args, "data", None),
        "benchmark": getattr(args, "benchmark", None),
        "n_samples": getattr(args, "n", None),
        "seed": getattr(args, "seed", None),
        "replicates": getattr(args, "replicates", None),
        "estimator": getattr(args, "estimator", None),
        "output_kernel": getattr(args, "output_kernel", None),
        "bandwidth": getattr(args, "bandwidth", None),
        "input_kernel": getattr(args, "input_kernel", None),
        "lam": getattr(args, "lam", None),
        "subsets": getattr(args, "subsets", None),
        "max_order": getattr(args, "order", None),
        "universe": getattr(args, "universe", None),
        "assume_independent": getattr(args, "assume_independent", None),
        "ols_tie_tol": getattr(args, "tie_tol", None),
        "isf_grid": getattr(args, "grid", None),
        "nn_subsample": getattr(args, "subsample", None),
        "threads": getattr(args, "threads", None),
        "clamp": getattr(args, "clamp", None),
    }
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    if getattr(args, "tune", None):
        base["tune"] = True
    if base.get("lam") is not None and not getattr(args, "tune", None):
        base["tune"] = False

    cv_kwargs = dict(base.pop("cv", {}))
    if getattr(args, "cv_folds", None) is not None:
        cv_kwargs["folds"] = args.cv_folds
    if getattr(args, "cv_budget", None) is not None:
        cv_kwargs["max_evals"] = args.cv_budget
    if getattr(args, "tune_points", None) is not None:
        cv_kwargs["tune_points"] = args.tune_points
    if "lambda_bounds" in cv_kwargs:
        cv_kwargs["lambda_bounds"] = tuple(cv_kwargs["lambda_bounds"])
    if "bandwidth_factor_bounds" in cv_kwargs:
        cv_kwargs["bandwidth_factor_bounds"] = tuple(cv_kwargs["bandwidth_factor_bounds"])
    base["cv"] = CvConfig(**cv_kwargs)

    command = args.command
    if command == "estimate":
        pass
    elif command == "ols":
        base["run_ols"] = True
    elif command == "shapley":
        base["run_shapley"] = True
    elif command == "anova":
        base["run_anova"] = True
    elif command == "isf":
        base["isf_subsets"] = base.pop("subsets", ())
    try:
        return AnalysisConfig(**base)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _emit(report, args) -> None:
    formats = getattr(args, "format", None) or ("json",)
    if getattr(args, "out", None):
        written = emit_report(report, args.out, formats)
        for path in written:
            print(path)
    else:
        from .reporting import report_to_json

        print(report_to_json(report))


def _run_crossval(args) -> None:
    cfg = _config_from_args(args)
    from .analysis import _EstimationContext  # reuse data/kernel resolution

    probe = AnalysisConfig(
        data_path=cfg.data_path,
        benchmark=cfg.benchmark,
        n_samples=cfg.n_samples,
        seed=cfg.seed,
        output_kernel=cfg.output_kernel,
        bandwidth=cfg.bandwidth,
    )
    probe.validate()
    ctx = _EstimationContext(probe)
    tuned = tune_cme(
        ctx.data0,
        args.subset,
        ctx.output_kernel,
        cfg.cv,
        input_family=KernelFamily(cfg.input_kernel),
    )
    payload = {
        "subset": list(args.subset),
        "input_kernel": {
            "family": tuned.input_kernel.family.value,
            "bandwidth": tuned.input_kernel.bandwidth,
        },
        "lambda": tuned.lam,
        "cv_loss": tuned.cv_value,
        "n_evals": tuned.n_evals,
    }
    text = json.dumps(payload, sort_keys=True, indent=2)
    if getattr(args, "out", None):
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "crossval.json").write_text(text + "\n")
        print(out / "crossval.json")
    else:
        print(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "benchmark":
            data = generate_benchmark(args.benchmark, args.n, args.seed)
            save_dataset(data, args.out)
            print(args.out)
            return 0
        if args.command == "crossval":
            _run_crossval(args)
            return 0
        cfg = _config_from_args(args)
        report = run_analysis(cfg)
        _emit(report, args)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except KgsaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
