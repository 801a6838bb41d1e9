"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Both implementations follow the same arithmetic so that results agree to
rounding; the compiled one is selected at import time by ``nefro._backend``.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularSystem

COND_LIMIT = 1e12


def ridge_solve(phi: np.ndarray, y: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    """Ridge weights with an unpenalized bias.

    Columns are centred and scaled to unit deviation before forming the normal
    equations; the penalty is rescaled so the solution is the one for the
    original columns.
    """
    mu = phi.mean(axis=0)
    xc = phi - mu
    sd = np.sqrt(np.mean(xc * xc, axis=0))
    scale = np.where(sd > 0.0, sd, 1.0)
    xs = xc / scale
    ym = y.mean()
    a = xs.T @ xs + np.diag(alpha / (scale * scale))
    rhs = xs.T @ (y - ym)
    eig = np.linalg.eigvalsh(a)
    if eig[0] <= 0.0 or eig[-1] / eig[0] > COND_LIMIT:
        raise SingularSystem("normal equations are numerically singular")
    chol = np.linalg.cholesky(a)
    ws = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    w = ws / scale
    return w, float(ym - mu @ w)


def poly_features(x: np.ndarray, degree: int) -> np.ndarray:
    return np.column_stack([x**p for p in range(1, degree + 1)])


def poly_cv_scores(
    x: np.ndarray,
    y: np.ndarray,
    degree: int,
    alpha: float,
    orders: np.ndarray,
    k: int,
) -> np.ndarray:
    """Held-out R-squared of every fold of every run.

    ``orders`` holds one permutation of the sample indices per run; each is
    split into ``k`` contiguous folds as ``numpy.array_split`` would.
    """
    runs, n = orders.shape
    out = np.empty(runs * k)
    bounds = fold_bounds(n, k)
    phi_all = poly_features(x, degree)
    for r in range(runs):
        order = orders[r]
        for f in range(k):
            lo, hi = bounds[f], bounds[f + 1]
            test = order[lo:hi]
            train = np.concatenate([order[:lo], order[hi:]])
            w, b = ridge_solve(phi_all[train], y[train], alpha)
            resid = y[test] - (phi_all[test] @ w + b)
            ref = y[test] - y[train].mean()
            den = ref @ ref
            out[r * k + f] = 1.0 - (resid @ resid) / den if den > 0.0 else np.nan
    return out


def fold_bounds(n: int, k: int) -> np.ndarray:
    """Fold edges matching ``numpy.array_split``: the first ``n % k`` folds get one extra."""
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    return np.concatenate([[0], np.cumsum(sizes)])
