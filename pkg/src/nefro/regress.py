"""OLS, ridge and kernel ridge regression with R-squared/RSD diagnostics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import _kernels_py
from ._backend import kernels
from .errors import (
    DegreeOutOfRange,
    InsufficientDof,
    SingularSystem,
    TooFewPoints,
    ZeroVariance,
)


class ModelKind(str, Enum):
    OLS = "OLS"
    RIDGE = "RIDGE"
    KERNEL_RBF = "KERNEL_RBF"
    KERNEL_POLY = "KERNEL_POLY"


LINEAR_KINDS = (ModelKind.OLS, ModelKind.RIDGE)


@dataclass(frozen=True)
class ModelMetrics:
    """Training fit quality plus cross-validated R-squared statistics."""

    rmv: float
    rsd: float
    rmv_cv_mean: float | None = None
    rmv_cv_sd: float | None = None

    def to_dict(self) -> dict:
        return {
            "rmv": self.rmv,
            "rsd": self.rsd,
            "rmv_cv_mean": self.rmv_cv_mean,
            "rmv_cv_sd": self.rmv_cv_sd,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelMetrics":
        return cls(d["rmv"], d["rsd"], d.get("rmv_cv_mean"), d.get("rmv_cv_sd"))


def _as_2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def expand_poly(x, degree: int) -> np.ndarray:
    """Elementwise powers ``[x, x**2, ..., x**degree]``.

    A scalar gives a 1-D vector; ``(N,)`` or ``(N, D)`` input gives one row per
    sample with ``D * degree`` columns, grouped by power.
    """
    if degree not in (1, 2, 3):
        raise DegreeOutOfRange(f"degree must be 1, 2 or 3, got {degree}")
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return np.array([float(arr) ** p for p in range(1, degree + 1)])
    arr = _as_2d(arr)
    return np.concatenate([arr**p for p in range(1, degree + 1)], axis=1)


def poly_kernel(a: np.ndarray, b: np.ndarray, degree: int) -> np.ndarray:
    """Inner product of the ``expand_poly`` feature maps of ``a`` and ``b``."""
    prod = _as_2d(a)[:, None, :] * _as_2d(b)[None, :, :]
    return sum((prod**p).sum(axis=2) for p in range(1, degree + 1))


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    diff = _as_2d(a)[:, None, :] - _as_2d(b)[None, :, :]
    return np.exp(-gamma * (diff * diff).sum(axis=2))


@dataclass(frozen=True, eq=False)
class FittedModel:
    """A fitted regression model.

    For the linear kinds ``weights`` multiply ``expand_poly(x, degree)``; for
    kernel kinds they are dual coefficients over ``training_refs``.
    """

    kind: ModelKind
    degree: int
    weights: np.ndarray
    bias: float
    alpha: float = 0.0
    kernel_params: dict = field(default_factory=dict)
    training_refs: np.ndarray | None = None
    metrics: ModelMetrics | None = None
    n_params: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.degree not in (1, 2, 3):
            raise DegreeOutOfRange(f"degree must be 1, 2 or 3, got {self.degree}")
        if (self.alpha == 0) != (self.kind is ModelKind.OLS):
            raise ValueError("alpha must be zero exactly for OLS models")
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    def predict(self, x) -> np.ndarray:
        scalar = np.ndim(x) == 0
        X = _as_2d(np.atleast_1d(np.asarray(x, dtype=float)))
        if self.kind in LINEAR_KINDS:
            out = expand_poly(X, self.degree) @ self.weights + self.bias
        else:
            out = self._kernel(X, self.training_refs) @ self.weights + self.bias
        return float(out[0]) if scalar else out

    def _kernel(self, a, b):
        if self.kind is ModelKind.KERNEL_POLY:
            return poly_kernel(a, b, self.degree)
        return rbf_kernel(a, b, self.kernel_params["gamma"])

    def with_metrics(self, metrics: ModelMetrics) -> "FittedModel":
        return replace(self, metrics=metrics)

    def poly_coeffs(self) -> np.ndarray:
        """Coefficients ``(c0, c1, ..., c_degree)`` of a univariate linear-kind model."""
        if self.kind not in LINEAR_KINDS or len(self.weights) != self.degree:
            raise ValueError("polynomial coefficients exist only for univariate linear models")
        return np.concatenate([[self.bias], self.weights])

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind.value,
            "degree": self.degree,
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "alpha": float(self.alpha),
            "kernel_params": dict(self.kernel_params),
            "metrics": None if self.metrics is None else self.metrics.to_dict(),
            "n_params": self.n_params,
        }
        if self.training_refs is not None:
            d["training_refs"] = np.asarray(self.training_refs).tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        refs = d.get("training_refs")
        metrics = d.get("metrics")
        return cls(
            kind=d["kind"],
            degree=d["degree"],
            weights=np.array(d["weights"], dtype=float),
            bias=d["bias"],
            alpha=d["alpha"],
            kernel_params=dict(d.get("kernel_params") or {}),
            training_refs=None if refs is None else np.array(refs, dtype=float),
            metrics=None if metrics is None else ModelMetrics.from_dict(metrics),
            n_params=d.get("n_params"),
        )

    @classmethod
    def from_json(cls, text: str) -> "FittedModel":
        return cls.from_dict(json.loads(text))


def r_squared(y_true, y_pred) -> float:
    yt = np.asarray(y_true, dtype=float)
    yp = np.asarray(y_pred, dtype=float)
    if yt.shape != yp.shape or yt.size < 2:
        raise ValueError("y_true and y_pred must have equal length >= 2")
    ss_tot = float(np.sum((yt - yt.mean()) ** 2))
    if ss_tot <= 0.0:
        raise ZeroVariance("y_true has zero variance")
    return 1.0 - float(np.sum((yt - yp) ** 2)) / ss_tot


def residual_sd(y_true, y_pred, n_params: float) -> float:
    """sqrt(SS_res / (N - n_params))."""
    yt = np.asarray(y_true, dtype=float)
    yp = np.asarray(y_pred, dtype=float)
    n = yt.size
    if n <= n_params:
        raise InsufficientDof(f"need more than {n_params} points, got {n}")
    return math.sqrt(float(np.sum((yt - yp) ** 2)) / (n - n_params))


def _training_metrics(model: FittedModel, X, y) -> FittedModel:
    pred = model.predict(X if np.ndim(X) > 1 else np.asarray(X))
    y = np.asarray(y, dtype=float)
    rmv = r_squared(y, pred)
    rsd = residual_sd(y, pred, model.n_params) if y.size > model.n_params else float("nan")
    return model.with_metrics(ModelMetrics(rmv, rsd))


def fit_linear(X, y, alpha: float = 0.0, degree: int = 1) -> FittedModel:
    """Closed-form ridge (OLS when ``alpha == 0``) on ``expand_poly(X, degree)``."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    phi = expand_poly(_as_2d(X), degree)
    y = np.asarray(y, dtype=float)
    n, d = phi.shape
    if n < d + 1:
        raise TooFewPoints(f"need at least {d + 1} points for {d} features, got {n}")
    w, b = _kernels_py.ridge_solve(phi, y, alpha)
    kind = ModelKind.OLS if alpha == 0 else ModelKind.RIDGE
    model = FittedModel(kind, degree, w, b, float(alpha), n_params=d + 1)
    return _training_metrics(model, X, y)


def fit_poly(x, y, degree: int, alpha: float = 0.0) -> FittedModel:
    return fit_linear(x, y, alpha, degree)


def default_gamma(X) -> float:
    X = _as_2d(X)
    var = float(np.mean(np.var(X, axis=0)))
    if var <= 0:
        raise ZeroVariance("predictor has zero variance")
    return 1.0 / (2.0 * var)


def fit_kernel_ridge(
    X,
    y,
    kernel: str = "poly",
    alpha: float = 1.0,
    degree: int = 2,
    gamma: float | None = None,
) -> FittedModel:
    """Kernel ridge with an unpenalized bias, solved in the centred dual.

    ``kernel`` is ``"poly"`` (feature map of ``expand_poly``) or ``"rbf"``.
    """
    if alpha <= 0:
        raise ValueError("kernel ridge needs alpha > 0")
    X = _as_2d(X)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 2:
        raise TooFewPoints("kernel ridge needs at least 2 points")
    if kernel == "poly":
        kind, params = ModelKind.KERNEL_POLY, {}
        K = poly_kernel(X, X, degree)
    elif kernel == "rbf":
        g = default_gamma(X) if gamma is None else float(gamma)
        kind, params = ModelKind.KERNEL_RBF, {"gamma": g}
        K = rbf_kernel(X, X, g)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    row_mean = K.mean(axis=1)
    Kc = K - row_mean[:, None] - row_mean[None, :] + K.mean()
    A = Kc + alpha * np.eye(n)
    try:
        chol = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("kernel system is not positive definite") from exc
    ym = y.mean()
    c = np.linalg.solve(chol.T, np.linalg.solve(chol, y - ym))
    b = ym - float(c @ row_mean)
    # Effective dof: trace of the smoother matrix, bias included.
    smoother = Kc @ np.linalg.solve(chol.T, np.linalg.solve(chol, np.eye(n)))
    model = FittedModel(kind, degree, c, b, float(alpha), params, X.copy(),
                        n_params=float(np.trace(smoother)) + 1.0)
    return _training_metrics(model, X, y)


@dataclass(frozen=True)
class ModelSpec:
    """What to fit inside cross-validation."""

    kind: ModelKind = ModelKind.OLS
    degree: int = 1
    alpha: float = 0.0
    gamma: float | None = None

    def fit(self, X, y) -> FittedModel:
        kind = ModelKind(self.kind)
        if kind in LINEAR_KINDS:
            return fit_linear(X, y, self.alpha, self.degree)
        kernel = "poly" if kind is ModelKind.KERNEL_POLY else "rbf"
        return fit_kernel_ridge(X, y, kernel, self.alpha, self.degree, self.gamma)


def cv_orders(n: int, runs: int, seed: int) -> np.ndarray:
    """One shuffled index order per CV run, each from its own derived stream."""
    return np.stack([
        np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(run,))).permutation(n)
        for run in range(runs)
    ])


def cv_fold_scores(x, y, spec: ModelSpec, k: int = 5, runs: int = 30, seed: int = 0) -> np.ndarray:
    """Held-out R-squared of all ``k * runs`` folds, in run-major order.

    A fold is scored against the training-fold mean, which keeps single-point
    (leave-one-out) folds well defined.
    """
    X = _as_2d(x)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if k < 2 or n < k or (n < 2 * k and k != n):
        raise TooFewPoints(f"{n} points cannot form {k} folds")
    orders = cv_orders(n, runs, seed)
    kind = ModelKind(spec.kind)
    if kind in LINEAR_KINDS and X.shape[1] == 1:
        scores = kernels.poly_cv_scores(
            np.ascontiguousarray(X[:, 0]), y, int(spec.degree), float(spec.alpha),
            np.ascontiguousarray(orders, dtype=np.int64), int(k),
        )
        scores = np.asarray(scores)
    else:
        bounds = _kernels_py.fold_bounds(n, k)
        scores = np.empty(runs * k)
        for r, order in enumerate(orders):
            for f in range(k):
                test = order[bounds[f]:bounds[f + 1]]
                train = np.concatenate([order[:bounds[f]], order[bounds[f + 1]:]])
                model = spec.fit(X[train], y[train])
                resid = y[test] - model.predict(X[test])
                ref = y[test] - y[train].mean()
                den = ref @ ref
                scores[r * k + f] = 1.0 - (resid @ resid) / den if den > 0 else np.nan
    if np.any(np.isnan(scores)):
        raise ZeroVariance("a held-out fold equals its training mean exactly")
    return scores


def kfold_cv(x, y, spec: ModelSpec, k: int = 5, runs: int = 30, seed: int = 0) -> tuple[float, float]:
    """Mean and SD (ddof=1) of the held-out R-squared over all folds and runs."""
    scores = cv_fold_scores(x, y, spec, k, runs, seed)
    sd = float(np.std(scores, ddof=1)) if scores.size > 1 else 0.0
    return float(np.mean(scores)), sd


def ridge_alpha_search(
    x,
    y,
    alpha_grid,
    degree: int = 1,
    k: int = 5,
    runs: int = 30,
    seed: int = 0,
) -> float:
    """Grid alpha with the best CV R-squared; ties go to the larger alpha."""
    grid = [float(a) for a in alpha_grid]
    if not grid:
        raise ValueError("alpha grid is empty")
    best_alpha, best_score = None, -math.inf
    for a in grid:
        score, _ = kfold_cv(x, y, ModelSpec(ModelKind.RIDGE, degree, a), k, runs, seed)
        if score > best_score or (score == best_score and a > best_alpha):
            best_alpha, best_score = a, score
    return best_alpha
