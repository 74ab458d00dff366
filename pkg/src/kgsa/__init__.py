"""Kernel-based global sensitivity analysis from a single input-output
data set.

The pipeline: draw or load one joint data set, fit a conditional mean
embedding per input subset (or use the nearest-neighbor baseline), turn
the per-subset indices into an IndexTable, and decompose it (conditional
indices, greedy learning sequence, Shapley effects, ANOVA effects).
"""

from .analysis import AnalysisConfig, SensitivityReport, run_analysis
from .backend import backend_name
from .benchmarks import (
    AffineSystem,
    CopulaSpec,
    ReactorConfig,
    analytic_rbf_beta,
    analytic_variance_beta,
    example1,
    example2,
    generate_benchmark,
    nearest_psd,
    sample_gaussian_copula,
    sample_mvn,
    simulate_reactor,
)
from .data import DataSet, load_dataset, save_dataset
from .decomposition import (
    AnovaTable,
    IndexTable,
    OlsResult,
    ShapleyTable,
    anova_effects,
    conditional_anova_check,
    conditional_index,
    ols_decomposition,
    shapley_effects,
)
from .embedding import (
    CmeModel,
    IndexEstimate,
    NormalizationStats,
    beta_cme,
    fit_cme,
    isf_dist,
    isf_norm,
    isf_profile,
    mmd2_unbiased,
    normalization_stats,
)
from .errors import ConfigError, DataError, KgsaError, MissingSubsetError, NumericalError
from .kernels import (
    KernelFamily,
    KernelSpec,
    cross_gram,
    eval_kernel,
    gram_matrix,
    linear_kernel,
    mahalanobis_kernel,
    mahalanobis_metric,
    median_heuristic,
    rbf_kernel,
    spread_heuristic,
)
from .knn import NeighborIndex, beta_nn_full, beta_nn_subsample, nearest_neighbor
from .model_selection import CvConfig, cv_loss, nelder_mead, tune_cme
from .reporting import emit_report, load_report, report_to_json

__version__ = "0.1.0"
