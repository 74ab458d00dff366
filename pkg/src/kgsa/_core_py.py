"""Pure-numpy implementations of the hot numerical loops.

`kgsa.backend` re-exports either these functions or their compiled
counterparts from `kgsa._core`.  Both backends accumulate in the same
order so results agree to the last bit wherever that matters (Gram
symmetry, exact diagonal zeros, deterministic neighbor ties).
"""

from __future__ import annotations

import numpy as np


def sqdist_cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of `a` and `b`.

    Accumulates one coordinate at a time, so identical rows produce an
    exact zero and symmetry is exact.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    out = np.zeros((a.shape[0], b.shape[0]))
    for k in range(a.shape[1]):
        d = a[:, k, None] - b[None, :, k]
        out += d * d
    return out


def pair_sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise squared Euclidean distances (a[i] vs b[i])."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    out = np.zeros(a.shape[0])
    for k in range(a.shape[1]):
        d = a[:, k] - b[:, k]
        out += d * d
    return out


def second_neighbors(points: np.ndarray) -> np.ndarray:
    """Index of the nearest *other* row for every row.

    Ties are broken by the smallest row index.  The self-row is excluded,
    so this is the m=2 neighbor when the query point itself counts as m=1.
    """
    d = sqdist_cross(points, points)
    np.fill_diagonal(d, np.inf)
    # argmin returns the first occurrence, i.e. the smallest index on ties
    return np.argmin(d, axis=1).astype(np.intp)


def reactor_rk4(y0: np.ndarray, rates: np.ndarray, t_end: float, n_steps: int) -> np.ndarray:
    """Fixed-step RK4 integration of the five-species reactor network.

    Parameters
    ----------
    y0 : (5,) initial concentrations (A, B, C, D, E).
    rates : (n, 4) second-order rate constants, one row per Monte Carlo draw.
    t_end : final time.
    n_steps : number of RK4 steps.

    Returns
    -------
    (n, 5) concentrations at `t_end`.
    """
    rates = np.ascontiguousarray(rates, dtype=np.float64)
    n = rates.shape[0]
    y = np.tile(np.asarray(y0, dtype=np.float64), (n, 1))
    k1, k2, k3, k4 = rates[:, 0], rates[:, 1], rates[:, 2], rates[:, 3]
    h = t_end / n_steps

    def rhs(state):
        a, b, c, d, e = state[:, 0], state[:, 1], state[:, 2], state[:, 3], state[:, 4]
        r1 = k1 * a * b
        r2 = k2 * a * b
        r3 = k3 * b * c
        r4 = k4 * b * d
        out = np.empty_like(state)
        out[:, 0] = -r1 - r2
        out[:, 1] = -r1 - r2 - r3 - r4
        out[:, 2] = r1 - r3
        out[:, 3] = r2 - r4
        out[:, 4] = r3 + r4
        return out

    for _ in range(n_steps):
        f1 = rhs(y)
        f2 = rhs(y + (0.5 * h) * f1)
        f3 = rhs(y + (0.5 * h) * f2)
        f4 = rhs(y + h * f3)
        y = y + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
    return y
