"""Decompositions of the total output uncertainty over an index table.

All operations are pure arithmetic over a map from input subsets to beta
values; estimation is decoupled, so analytic, CME and nearest-neighbor
tables all flow through the same code.  The empty subset always carries
beta = 0.

* conditional_index: the increment beta_{S u R} - beta_S.
* ols_decomposition: greedy ordering that maximizes the conditional value
  at each step; telescopes to the beta of the universe.
* anova_effects: inclusion-exclusion components (valid for independent
  inputs; the caller attests independence).
* shapley_effects: exact Shapley attribution over all subsets of the
  universe (cost 2^n, intended for n up to ~20).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

from .errors import DataError, MissingSubsetError

__all__ = [
    "IndexTable",
    "OlsResult",
    "ShapleyTable",
    "AnovaTable",
    "conditional_index",
    "ols_decomposition",
    "anova_effects",
    "shapley_effects",
    "conditional_anova_check",
]


def _canon(subset) -> tuple[int, ...]:
    labels = tuple(sorted({int(i) for i in subset}))
    if any(l < 1 for l in labels):
        raise DataError(f"input labels must be >= 1, got {labels}")
    return labels


@dataclass
class IndexTable:
    """Map from input subsets (1-based label tuples) to beta values."""

    n_inputs: int
    values: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = {_canon(k): float(v) for k, v in self.values.items()}

    def add(self, subset, value: float) -> None:
        self.values[_canon(subset)] = float(value)

    def __contains__(self, subset) -> bool:
        return _canon(subset) in self.values or len(_canon(subset)) == 0

    def beta(self, subset) -> float:
        key = _canon(subset)
        if not key:
            return 0.0
        try:
            return self.values[key]
        except KeyError:
            raise MissingSubsetError(f"index table has no entry for subset {key}") from None

    def subsets(self) -> list:
        return sorted(self.values, key=lambda s: (len(s), s))

    def monotonicity_violations(self, tol: float = 0.0) -> list:
        """Pairs (S, R) with S subset of R but beta_S > beta_R + tol.

        Analytically impossible, but estimated tables are noisy; callers
        report violations rather than rejecting the table.
        """
        out = []
        keys = self.subsets()
        for s, r in itertools.combinations(keys, 2):
            if set(s) < set(r) and self.values[s] > self.values[r] + tol:
                out.append((s, r))
        return out


@dataclass(frozen=True)
class OlsResult:
    """Greedy learning sequence with per-step conditional values.

    ``cumulative[l]`` is the table beta of the first l+1 labels (exact by
    construction).  ``ties[l]`` lists every label whose conditional value
    came within the tie tolerance of the chosen one; ``negative_steps``
    flags steps whose conditional value was negative (possible only for
    noisy estimated tables).
    """

    order: tuple
    step_values: tuple
    cumulative: tuple
    ties: tuple
    negative_steps: tuple
    tie_tol: float


@dataclass(frozen=True)
class ShapleyTable:
    universe: tuple
    values: dict

    def total(self) -> float:
        return sum(self.values.values())


@dataclass(frozen=True)
class AnovaTable:
    universe: tuple
    effects: dict

    def total(self) -> float:
        return sum(self.effects.values())


def conditional_index(table: IndexTable, r, s) -> float:
    """The conditional index beta_{R|S} = beta_{S u R} - beta_S.

    Exact table arithmetic; nothing is re-estimated.  R and S must be
    disjoint, and S may be empty (beta_{R|empty} = beta_R).
    """
    r_key = _canon(r)
    s_key = _canon(s) if s is not None else ()
    if not r_key:
        raise DataError("conditional_index requires a non-empty target subset")
    if set(r_key) & set(s_key):
        raise DataError(f"subsets overlap: {r_key} and {s_key}")
    return table.beta(r_key + s_key) - table.beta(s_key)


def ols_decomposition(table: IndexTable, universe, tie_tol: float = 1e-9) -> OlsResult:
    """Greedy maximal-conditional-value ordering over a label universe.

    At each step the label with the largest conditional index given the
    already-chosen prefix is selected (smallest label on exact ties);
    labels within ``tie_tol`` of the maximum are reported as ties.
    """
    labels = _canon(universe)
    if not labels:
        raise DataError("ols_decomposition requires a non-empty universe")
    order: list = []
    steps: list = []
    cumulative: list = []
    ties: list = []
    negatives: list = []
    prefix: tuple = ()
    remaining = list(labels)
    while remaining:
        values = {j: conditional_index(table, (j,), prefix) for j in remaining}
        best = max(values.values())
        # the chosen label always attains the maximum (smallest label on an
        # exact tie); tie_tol only widens what gets *reported* as tied
        choice = min(j for j, v in values.items() if v == best)
        tied = tuple(j for j, v in sorted(values.items()) if v >= best - tie_tol)
        order.append(choice)
        steps.append(values[choice])
        negatives.append(values[choice] < 0.0)
        ties.append(tied if len(tied) > 1 else ())
        prefix = _canon(prefix + (choice,))
        cumulative.append(table.beta(prefix))
        remaining.remove(choice)
    return OlsResult(
        order=tuple(order),
        step_values=tuple(steps),
        cumulative=tuple(cumulative),
        ties=tuple(ties),
        negative_steps=tuple(negatives),
        tie_tol=tie_tol,
    )


def _powerset(labels):
    for r in range(len(labels) + 1):
        yield from itertools.combinations(labels, r)


def anova_effects(table: IndexTable, universe) -> AnovaTable:
    """Inclusion-exclusion effects S_R over every non-empty subset of the
    universe.

    Valid when the inputs are independent; effects of every order sum to
    the beta of the full universe.
    """
    labels = _canon(universe)
    if not labels:
        raise DataError("anova_effects requires a non-empty universe")
    effects = {}
    for r_set in _powerset(labels):
        if not r_set:
            continue
        total = 0.0
        for u_set in _powerset(r_set):
            total += (-1) ** (len(r_set) - len(u_set)) * table.beta(u_set)
        effects[r_set] = total
    return AnovaTable(universe=labels, effects=effects)


def shapley_effects(table: IndexTable, universe) -> ShapleyTable:
    """Exact Shapley attribution of the universe beta to each label.

    Sh_i = (1/n) sum over A in universe \\ {i} of C(n-1, |A|)^-1
    (beta_{A u i} - beta_A), with beta_empty = 0.
    """
    labels = _canon(universe)
    if not labels:
        raise DataError("shapley_effects requires a non-empty universe")
    n = len(labels)
    values = {}
    for i in labels:
        others = tuple(j for j in labels if j != i)
        total = 0.0
        for a_set in _powerset(others):
            weight = 1.0 / comb(n - 1, len(a_set))
            total += weight * (table.beta(a_set + (i,)) - table.beta(a_set))
        values[i] = total / n
    return ShapleyTable(universe=labels, values=values)


def conditional_anova_check(table: IndexTable, anova: AnovaTable, i: int, a) -> float:
    """Residual of the conditional/ANOVA identity.

    Returns ``beta_{i|A} - sum over U in A of S_{U u {i}}``; near zero for
    independent-input tables.
    """
    i = int(i)
    a_key = _canon(a) if a is not None else ()
    if i in a_key:
        raise DataError(f"label {i} may not occur in the conditioning set {a_key}")
    lhs = conditional_index(table, (i,), a_key)
    rhs = 0.0
    for u_set in _powerset(a_key):
        key = _canon(u_set + (i,))
        if key not in anova.effects:
            raise MissingSubsetError(f"anova table has no effect for subset {key}")
        rhs += anova.effects[key]
    return lhs - rhs
