"""Benchmark systems and their analytic oracles.

Includes the two correlated-Gaussian affine test systems, exact
variance-based and RBF-kernel beta values for such systems, a Gaussian
copula sampler for correlated non-Gaussian inputs and the
continuous-flow reactor model (four second-order reactions integrated
with fixed-step RK4).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import backend
from .data import DataSet, canonical_subset
from .errors import DataError, NumericalError

__all__ = [
    "AffineSystem",
    "NormalMarginal",
    "UniformMarginal",
    "CopulaSpec",
    "ReactorConfig",
    "example1",
    "example2",
    "sample_mvn",
    "sample_gaussian_copula",
    "eval_affine",
    "analytic_variance_beta",
    "analytic_rbf_beta",
    "affine_dataset",
    "arrhenius_rate",
    "simulate_reactor",
    "simulate_reactor_batch",
    "reactor_copula_spec",
    "reactor_dataset",
    "nearest_psd",
    "REACTOR_CORRELATIONS",
    "generate_benchmark",
    "BENCHMARK_NAMES",
]


# ---------------------------------------------------------------------------
# affine systems with jointly Gaussian inputs


@dataclass(frozen=True)
class AffineSystem:
    """Scalar output y = coeffs . x with x ~ N(mean, cov)."""

    coeffs: np.ndarray
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        d = coeffs.size
        if mean.size != d or cov.shape != (d, d):
            raise DataError("coefficient, mean and covariance dimensions disagree")
        _check_symmetric_psd(cov, tol=1e-10, name="input covariance")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_inputs(self) -> int:
        return self.coeffs.size

    @property
    def output_variance(self) -> float:
        return float(self.coeffs @ self.cov @ self.coeffs)


def example1() -> AffineSystem:
    """Three-input linear system with a 0.8 correlation between x2 and x3."""
    cov = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.8], [0.0, 0.8, 1.0]])
    return AffineSystem(coeffs=np.array([3.0, 2.1, 1.9]), mean=np.zeros(3), cov=cov)


def example2() -> AffineSystem:
    """Four-input affine system; x4 is absent from the map but correlated."""
    cov = np.array(
        [
            [1.0, 0.1, 0.0, 0.0],
            [0.1, 1.0, 0.3, 0.0],
            [0.0, 0.3, 1.0, 0.9],
            [0.0, 0.0, 0.9, 1.0],
        ]
    )
    return AffineSystem(coeffs=np.array([1.0, 1.0, 2.0, 0.0]), mean=np.zeros(4), cov=cov)


def _check_symmetric_psd(matrix: np.ndarray, tol: float, name: str) -> None:
    if not np.all(np.isfinite(matrix)):
        raise DataError(f"{name} contains non-finite entries")
    scale = max(1.0, float(np.abs(matrix).max()))
    if np.abs(matrix - matrix.T).max() > 1e-8 * scale:
        raise DataError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(matrix).min() < -tol * scale:
        raise DataError(f"{name} is not PSD")


def sample_mvn(mean, cov, n: int, seed) -> np.ndarray:
    """Multivariate normal draws through an eigendecomposition.

    Negative eigenvalues are clipped at zero, so exactly singular
    covariances (deterministically related coordinates) are supported.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    d = mean.size
    if cov.shape != (d, d):
        raise DataError(f"covariance shape {cov.shape} does not match mean dimension {d}")
    _check_symmetric_psd(cov, tol=1e-8, name="covariance")
    w, v = np.linalg.eigh(cov)
    w = np.clip(w, 0.0, None)
    transform = v * np.sqrt(w)
    z = np.random.default_rng(seed).standard_normal((n, d))
    return mean + z @ transform.T


def eval_affine(system: AffineSystem, x) -> np.ndarray | float:
    """Output of the affine map for one point or a batch of rows."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != system.n_inputs:
        raise DataError(f"point dimension {x.shape[-1]} does not match system dimension {system.n_inputs}")
    return x @ system.coeffs


def _explained_variance(system: AffineSystem, labels) -> float:
    """Var[E[Y | X_R]] by Gaussian conditioning (pseudo-inverse if needed)."""
    idx = [l - 1 for l in labels]
    cross = system.cov[:, idx].T @ system.coeffs
    block = system.cov[np.ix_(idx, idx)]
    return float(cross @ np.linalg.pinv(block, hermitian=True) @ cross)


def analytic_variance_beta(system: AffineSystem, subset) -> float:
    """Exact variance-based index Var[E[Y|X_R]] / Var[Y] (linear kernel)."""
    labels = canonical_subset(subset, system.n_inputs)
    var_y = system.output_variance
    if var_y <= 0:
        raise NumericalError("output variance is zero")
    return _explained_variance(system, labels) / var_y


def analytic_rbf_beta(system: AffineSystem, subset, sigma: float) -> float:
    """Exact RBF-kernel index for a scalar-output affine Gaussian system.

    For jointly Gaussian data the conditional output is normal with a
    constant residual variance s_R^2, and the expected kernel value
    between two independent N(m, s^2) draws is sigma / sqrt(sigma^2 +
    2 s^2), which gives the index in closed form.
    """
    if sigma <= 0:
        raise DataError(f"bandwidth must be positive, got {sigma!r}")
    labels = canonical_subset(subset, system.n_inputs)
    var_y = system.output_variance
    resid = max(var_y - _explained_variance(system, labels), 0.0)

    def expected_kernel(s2: float) -> float:
        return sigma / np.sqrt(sigma**2 + 2.0 * s2)

    den = 1.0 - expected_kernel(var_y)
    if den <= 0:
        raise NumericalError("output variance is zero")
    return (expected_kernel(resid) - expected_kernel(var_y)) / den


def affine_dataset(system: AffineSystem, n: int, seed) -> DataSet:
    """Draw a joint input-output data set from an affine system."""
    x = sample_mvn(system.mean, system.cov, n, seed)
    return DataSet(inputs=x, outputs=eval_affine(system, x))


# ---------------------------------------------------------------------------
# Gaussian copula sampling


@dataclass(frozen=True)
class NormalMarginal:
    mean: float
    std: float

    def __post_init__(self):
        if self.std <= 0:
            raise DataError(f"normal marginal needs std > 0, got {self.std!r}")

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return self.mean + self.std * ndtri(u)


@dataclass(frozen=True)
class UniformMarginal:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DataError(f"uniform marginal needs lo < hi, got ({self.lo!r}, {self.hi!r})")

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * u


@dataclass(frozen=True)
class CopulaSpec:
    """Arbitrary marginals coupled by a latent Gaussian correlation."""

    marginals: tuple
    correlation: np.ndarray

    def __post_init__(self):
        corr = np.asarray(self.correlation, dtype=float)
        d = len(self.marginals)
        if corr.shape != (d, d):
            raise DataError(f"correlation shape {corr.shape} does not match {d} marginals")
        if np.abs(np.diag(corr) - 1.0).max() > 1e-8:
            raise DataError("correlation matrix must have a unit diagonal")
        # published matrices carry print-rounding: tolerate small asymmetry
        # and small negative eigenvalues, both removed by nearest_psd
        if np.abs(corr - corr.T).max() > 1e-2:
            raise DataError("correlation matrix is badly asymmetric")
        if np.linalg.eigvalsh((corr + corr.T) / 2.0).min() < -1e-2:
            raise DataError("correlation matrix is not PSD (beyond repair tolerance)")
        for m in self.marginals:
            if not hasattr(m, "ppf"):
                raise DataError(f"marginal {m!r} has no ppf")
        object.__setattr__(self, "marginals", tuple(self.marginals))
        object.__setattr__(self, "correlation", corr)


def nearest_psd(matrix, tol: float = 0.0) -> np.ndarray:
    """Nearest correlation-style PSD repair.

    Symmetrizes, clips negative eigenvalues at `tol`, and rescales to
    restore the unit diagonal.  Already-PSD matrices pass through
    essentially unchanged.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"nearest_psd expects a square matrix, got {a.shape}")
    a = (a + a.T) / 2.0
    w, v = np.linalg.eigh(a)
    w = np.clip(w, tol, None)
    repaired = (v * w) @ v.T
    d = np.sqrt(np.clip(np.diag(repaired), 1e-300, None))
    repaired = repaired / np.outer(d, d)
    repaired = (repaired + repaired.T) / 2.0
    np.fill_diagonal(repaired, 1.0)
    return repaired


def sample_gaussian_copula(spec: CopulaSpec, n: int, seed) -> np.ndarray:
    """Draw from the copula: latent MVN -> normal CDF -> marginal quantiles.

    The latent correlation matrix is repaired with `nearest_psd` first, so
    exactly singular (unit-correlation) blocks are supported.
    """
    corr = nearest_psd(spec.correlation)
    d = len(spec.marginals)
    z = sample_mvn(np.zeros(d), corr, n, seed)
    u = np.clip(ndtr(z), 1e-16, 1.0 - 1e-16)
    cols = [np.asarray(spec.marginals[k].ppf(u[:, k]), dtype=float) for k in range(d)]
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# continuous flow reactor


#: Latent correlation between the eight kinetic inputs, as estimated from
#: the original flow-chemistry data (entered as published; the (2,5)/(5,2)
#: sign inconsistency is resolved by symmetrization in nearest_psd).
REACTOR_CORRELATIONS = np.array(
    [
        [1.000, 0.997, 0.976, 0.968, -0.002, -0.003, 0.000, 0.000],
        [0.997, 1.000, 0.976, 0.973, -0.003, -0.003, 0.000, 0.000],
        [0.976, 0.976, 1.000, 0.997, -0.006, -0.006, 0.000, 0.000],
        [0.968, 0.973, 0.997, 1.000, -0.007, -0.007, 0.000, 0.000],
        [-0.002, 0.003, -0.006, -0.007, 1.000, 1.000, -0.008, -0.008],
        [-0.003, 0.003, -0.006, -0.007, 1.000, 1.000, -0.008, -0.008],
        [0.000, 0.000, 0.000, 0.000, -0.008, -0.008, 1.000, 1.000],
        [0.000, 0.000, 0.000, 0.000, -0.008, -0.008, 1.000, 1.000],
    ]
)

#: (mean, std) of the eight uncertain kinetic inputs: log10 pre-exponential
#: factor and activation energy (kJ/mol) for each of the four reactions.
REACTOR_INPUT_MEANS = np.array([3.4, 27.0, 3.5, 32.1, 4.9, 60.0, 3.0, 45.0])
REACTOR_INPUT_STDS = np.array([0.1, 0.6, 0.1, 0.6, 0.2, 1.6, 0.2, 1.7])


@dataclass(frozen=True)
class ReactorConfig:
    """Operating point of the isothermal plug-flow reactor.

    Concentrations in mol/L, temperature in K, residence time in s, gas
    constant in kJ mol^-1 K^-1.  `n_steps` is the RK4 step count over the
    residence time.
    """

    a0: float = 0.150
    b0: float = 0.375
    c0: float = 0.0
    d0: float = 0.0
    e0: float = 0.0
    temperature: float = 373.15
    residence_time: float = 1200.0
    gas_constant: float = 0.008314
    n_steps: int = 2400
    input_means: np.ndarray = field(default_factory=lambda: REACTOR_INPUT_MEANS.copy())
    input_stds: np.ndarray = field(default_factory=lambda: REACTOR_INPUT_STDS.copy())

    def __post_init__(self):
        if min(self.a0, self.b0, self.c0, self.d0, self.e0) < 0:
            raise DataError("initial concentrations must be non-negative")
        if self.temperature <= 0 or self.residence_time <= 0:
            raise DataError("temperature and residence time must be positive")
        if self.n_steps < 1:
            raise DataError("n_steps must be at least 1")

    @property
    def initial_state(self) -> np.ndarray:
        return np.array([self.a0, self.b0, self.c0, self.d0, self.e0])


def arrhenius_rate(log10_a: float, e_a: float, temperature: float, gas_constant: float) -> float:
    """Rate constant 10^log10_a * exp(-e_a / (R T))."""
    if temperature <= 0:
        raise DataError(f"temperature must be positive, got {temperature!r}")
    return float(10.0**log10_a * np.exp(-e_a / (gas_constant * temperature)))


def _rate_constants(cfg: ReactorConfig, params: np.ndarray) -> np.ndarray:
    log_a = params[:, 0::2]
    e_a = params[:, 1::2]
    return 10.0**log_a * np.exp(-e_a / (cfg.gas_constant * cfg.temperature))


#: maximum allowed change of the product concentration when the step count
#: doubles (the self-convergence gate).
CONVERGENCE_GATE = 1e-8


def simulate_reactor_batch(cfg: ReactorConfig, rate_params, check: bool = True) -> np.ndarray:
    """Integrate the reactor for a batch of kinetic parameter rows.

    `rate_params` is (n, 8): log10 pre-exponential factor and activation
    energy interleaved for the four reactions.  Returns (n, 5) final
    concentrations (A, B, C, D, E).  Raises if doubling the step count
    moves any final product concentration by more than the 1e-8 M gate
    (pass ``check=False`` only for convergence diagnostics).
    """
    params = np.atleast_2d(np.asarray(rate_params, dtype=float))
    if params.shape[1] != 8:
        raise DataError(f"rate parameters must have 8 columns, got {params.shape[1]}")
    if not np.all(np.isfinite(params)):
        raise DataError("rate parameters contain non-finite entries")
    rates = _rate_constants(cfg, params)
    y0 = cfg.initial_state
    final = backend.reactor_rk4(y0, rates, cfg.residence_time, cfg.n_steps)
    if not check:
        return final
    doubled = backend.reactor_rk4(y0, rates, cfg.residence_time, 2 * cfg.n_steps)
    drift = np.abs(final[:, 3] - doubled[:, 3]).max()
    if not np.isfinite(final).all() or not (drift <= CONVERGENCE_GATE):
        raise NumericalError(
            f"step count {cfg.n_steps} too small: doubling steps moves [D] by {float(drift):.3e} M"
        )
    return final


def simulate_reactor(cfg: ReactorConfig, rate_params, check: bool = True) -> np.ndarray:
    """Final concentrations (A, B, C, D, E) for one kinetic parameter row."""
    return simulate_reactor_batch(cfg, np.asarray(rate_params, dtype=float)[None, :], check=check)[0]


def reactor_copula_spec(cfg: ReactorConfig, correlated: bool = True) -> CopulaSpec:
    """Input distribution of the reactor: normal marginals, optionally
    coupled by the published correlation matrix."""
    marginals = tuple(
        NormalMarginal(mean=float(m), std=float(s))
        for m, s in zip(cfg.input_means, cfg.input_stds)
    )
    corr = REACTOR_CORRELATIONS if correlated else np.eye(8)
    return CopulaSpec(marginals=marginals, correlation=corr)


def reactor_dataset(cfg: ReactorConfig, n: int, seed, correlated: bool = True) -> DataSet:
    """Sample reactor inputs, integrate, and package the [D] output."""
    spec = reactor_copula_spec(cfg, correlated=correlated)
    x = sample_gaussian_copula(spec, n, seed)
    final = simulate_reactor_batch(cfg, x)
    return DataSet(inputs=x, outputs=final[:, 3])


# ---------------------------------------------------------------------------
# benchmark registry used by the CLI

BENCHMARK_NAMES = ("example1", "example2", "reactor-indep", "reactor-corr")


def generate_benchmark(name: str, n: int, seed) -> DataSet:
    """Generate one of the built-in benchmark data sets by name."""
    if name == "example1":
        return affine_dataset(example1(), n, seed)
    if name == "example2":
        return affine_dataset(example2(), n, seed)
    if name in ("reactor-indep", "reactor-corr"):
        return reactor_dataset(ReactorConfig(), n, seed, correlated=name == "reactor-corr")
    raise DataError(f"unknown benchmark {name!r}; choose from {', '.join(BENCHMARK_NAMES)}")
