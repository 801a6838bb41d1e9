"""Regression model selection policy and cross-scenario comparison analytics.

The policy fits polynomial CIR models of degree 1-3 on the raw data and on a
LOF-cleaned copy, scores each by repeated k-fold R-squared, admits the cubic
only when its coefficient is significant, and prefers the simpler model
(lower degree, then uncleaned data) whenever candidates are within a small
R-squared band of the best.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations

import numpy as np
from scipy import stats

from .coexsim import BANDWIDTHS_MHZ, Dataset, LteVariant, Predictor, ScenarioConfig, WifiVariant
from .errors import (
    DegenerateData,
    DuplicateCollapse,
    IncompleteMatrix,
    InsufficientDof,
    TooFewPoints,
    ZeroVariance,
)
from .regress import FittedModel, ModelKind, ModelMetrics, ModelSpec, fit_poly, kfold_cv

TIE_BAND = 0.005


class Variant(str, Enum):
    BASELINE = "BASELINE"
    OUTLIER_REMOVED = "OUTLIER_REMOVED"


@dataclass(frozen=True)
class LofParams:
    k_neighbors: int = 20
    threshold: float = 1.5

    def __post_init__(self):
        if self.k_neighbors < 2:
            raise ValueError("k_neighbors must be >= 2")
        if self.threshold <= 1:
            raise ValueError("LOF threshold must exceed 1")

    def k_for(self, n: int) -> int:
        return min(self.k_neighbors, n - 1)


# ----------------------------------------------------------------------------
# Local Outlier Factor
# ----------------------------------------------------------------------------


def zscore_columns(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    sd = p.std(axis=0)
    return (p - p.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def lof_scores(points, k: int) -> np.ndarray:
    """Classical LOF (Breunig et al.) on z-scored coordinates.

    The k-neighbourhood of a point keeps every point tied at its k-distance.
    """
    z = zscore_columns(points)
    if z.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = len(z)
    if k < 1 or n < k + 1:
        raise TooFewPoints(f"LOF with k={k} needs at least {k + 1} points, got {n}")
    diff = z[:, None, :] - z[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    off = dist.copy()
    np.fill_diagonal(off, np.inf)
    kdist = np.partition(off, k - 1, axis=1)[:, k - 1]
    neigh = off <= kdist[:, None]
    reach = np.maximum(kdist[None, :], dist)
    reach_sum = np.where(neigh, reach, 0.0).sum(axis=1)
    if np.any(reach_sum <= 0.0):
        raise DuplicateCollapse("too many identical points: local density is undefined")
    count = neigh.sum(axis=1)
    lrd = count / reach_sum
    return np.where(neigh, lrd[None, :], 0.0).sum(axis=1) / count / lrd


def remove_outliers(data, params: LofParams = LofParams()):
    """Drop points whose LOF exceeds the threshold.

    ``data`` is a ``Dataset`` (scored on SINR/capacity) or an ``(x, y)`` pair.
    Returns the cleaned data of the same type and the removed percentage.
    """
    if isinstance(data, Dataset):
        pts = np.column_stack([data.sinr_db, data.capacity_mbps])
    else:
        pts = np.column_stack(data)
    n = len(pts)
    scores = lof_scores(pts, params.k_for(n))
    keep = scores <= params.threshold
    pct = 100.0 * float(np.sum(~keep)) / n
    if isinstance(data, Dataset):
        return data.subset(keep), pct
    return (data[0][keep], data[1][keep]), pct


# ----------------------------------------------------------------------------
# Degree policy
# ----------------------------------------------------------------------------


def _xy(data, predictor=None) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, Dataset):
        return data.xy(predictor)
    x, y = data
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def cubic_pvalue(x, y) -> float:
    """Two-sided p-value of the cubic coefficient in a degree-3 OLS fit."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n < 10:
        raise InsufficientDof(f"cubic significance test needs >= 10 points, got {n}")
    sd = x.std()
    if sd <= 0:
        raise ZeroVariance("predictor has zero variance")
    # The leading coefficient's t statistic is invariant to affine rescaling of x.
    u = (x - x.mean()) / sd
    A = np.column_stack([np.ones(n), u, u**2, u**3])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = n - 4
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(A.T @ A)
    se = math.sqrt(cov[3, 3])
    if se == 0.0:
        return 0.0 if coef[3] != 0 else 1.0
    t = coef[3] / se
    return float(2.0 * stats.t.sf(abs(t), dof))


def cubic_term_significant(data, y=None, level: float = 0.05, predictor=None) -> bool:
    x, yy = _xy(data, predictor) if y is None else (np.asarray(data, float), np.asarray(y, float))
    return cubic_pvalue(x, yy) < level


@dataclass(frozen=True)
class Candidate:
    degree: int
    variant: Variant
    rmv_cv_mean: float
    rmv_cv_sd: float
    eligible: bool

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "variant": self.variant.value,
            "rmv_cv_mean": self.rmv_cv_mean,
            "rmv_cv_sd": self.rmv_cv_sd,
            "eligible": self.eligible,
        }


@dataclass(frozen=True, eq=False)
class SelectionReport:
    scenario_id: int | None
    chosen_degree: int
    chosen_variant: Variant
    model: FittedModel
    metrics_baseline: ModelMetrics
    metrics_clean: ModelMetrics
    gain_pct: float
    outlier_pct: float
    cubic_significant: bool
    predictor: Predictor | None = None
    rsd_normalized: float | None = None
    candidates: tuple[Candidate, ...] = ()
    config: ScenarioConfig | None = None

    @property
    def chosen_metrics(self) -> ModelMetrics:
        if self.chosen_variant is Variant.BASELINE:
            return self.metrics_baseline
        return self.metrics_clean

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "predictor": None if self.predictor is None else self.predictor.value,
            "config": None if self.config is None else self.config.to_dict(),
            "chosen_degree": self.chosen_degree,
            "chosen_variant": self.chosen_variant.value,
            "model": self.model.to_dict(),
            "metrics_baseline": self.metrics_baseline.to_dict(),
            "metrics_clean": self.metrics_clean.to_dict(),
            "gain_pct": self.gain_pct,
            "outlier_pct": self.outlier_pct,
            "cubic_significant": self.cubic_significant,
            "rsd_normalized": self.rsd_normalized,
            "candidates": [c.to_dict() for c in self.candidates],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionReport":
        return cls(
            scenario_id=d["scenario_id"],
            chosen_degree=d["chosen_degree"],
            chosen_variant=Variant(d["chosen_variant"]),
            model=FittedModel.from_dict(d["model"]),
            metrics_baseline=ModelMetrics.from_dict(d["metrics_baseline"]),
            metrics_clean=ModelMetrics.from_dict(d["metrics_clean"]),
            gain_pct=d["gain_pct"],
            outlier_pct=d["outlier_pct"],
            cubic_significant=d["cubic_significant"],
            predictor=None if d.get("predictor") is None else Predictor(d["predictor"]),
            rsd_normalized=d.get("rsd_normalized"),
            candidates=tuple(
                Candidate(c["degree"], Variant(c["variant"]), c["rmv_cv_mean"], c["rmv_cv_sd"], c["eligible"])
                for c in d.get("candidates", [])
            ),
            config=None if d.get("config") is None else ScenarioConfig.from_dict(d["config"]),
        )


def normalize_z(data, y=None):
    """Z-score both coordinates.

    Returns ``(x', y', mu_x, sigma_x, mu_y, sigma_y)``; ``data`` may be a
    ``Dataset`` (predictor/response per its config) or an x array with ``y``.
    """
    x, yy = _xy(data) if y is None else (np.asarray(data, float), np.asarray(y, float))
    mx, sx = float(x.mean()), float(x.std())
    my, sy = float(yy.mean()), float(yy.std())
    if sx <= 0 or sy <= 0:
        raise ZeroVariance("cannot z-score a constant coordinate")
    return (x - mx) / sx, (yy - my) / sy, mx, sx, my, sy


def select_model(
    data,
    lof_params: LofParams = LofParams(),
    seed: int = 0,
    predictor=None,
    k: int = 5,
    runs: int = 30,
    tie_band: float = TIE_BAND,
    level: float = 0.05,
) -> SelectionReport:
    """Apply the degree/outlier selection policy to one scenario's data."""
    x, y = _xy(data, predictor)
    n = len(x)
    if n < 20:
        raise TooFewPoints(f"model selection needs >= 20 points, got {n}")
    (xc, yc), outlier_pct = remove_outliers((x, y), lof_params)
    variants = {Variant.BASELINE: (x, y), Variant.OUTLIER_REMOVED: (xc, yc)}

    cv: dict[tuple[int, Variant], tuple[float, float]] = {}
    cubic_ok: dict[Variant, bool] = {}
    for v, (xv, yv) in variants.items():
        cubic_ok[v] = cubic_term_significant(xv, yv, level=level)
        for deg in (1, 2, 3):
            cv[deg, v] = kfold_cv(xv, yv, ModelSpec(ModelKind.OLS, deg), k, runs, seed)

    allowed = [(d, v) for (d, v) in cv if d < 3 or cubic_ok[v]]
    best = max(cv[c][0] for c in allowed)
    if best < 0:
        raise DegenerateData("all candidate models have negative CV R-squared")
    eligible = [c for c in allowed if cv[c][0] >= best - tie_band]
    order = list(Variant)
    deg, var = min(eligible, key=lambda c: (c[0], order.index(c[1])))

    def metrics_for(v: Variant) -> tuple[ModelMetrics, FittedModel]:
        xv, yv = variants[v]
        fitted = fit_poly(xv, yv, deg)
        m = ModelMetrics(fitted.metrics.rmv, fitted.metrics.rsd, *cv[deg, v])
        return m, fitted.with_metrics(m)

    m_base, model_base = metrics_for(Variant.BASELINE)
    m_clean, model_clean = metrics_for(Variant.OUTLIER_REMOVED)
    model = model_base if var is Variant.BASELINE else model_clean
    base_rmv = m_base.rmv_cv_mean
    gain = 100.0 * (m_clean.rmv_cv_mean - base_rmv) / abs(base_rmv) if base_rmv != 0 else math.nan

    xv, yv = variants[var]
    xz, yz, *_ = normalize_z(xv, yv)
    rsd_norm = fit_poly(xz, yz, deg).metrics.rsd

    config = data.config if isinstance(data, Dataset) else None
    pred = None
    if config is not None:
        pred = Predictor(predictor) if predictor is not None else config.predictor
        if pred is not config.predictor:
            config = config.twin()
    candidates = tuple(
        Candidate(d, v, cv[d, v][0], cv[d, v][1], (d, v) in eligible)
        for (d, v) in sorted(cv, key=lambda c: (c[0], order.index(c[1])))
    )
    return SelectionReport(
        scenario_id=None if config is None else config.scenario_id,
        chosen_degree=deg,
        chosen_variant=var,
        model=model,
        metrics_baseline=m_base,
        metrics_clean=m_clean,
        gain_pct=gain,
        outlier_pct=outlier_pct,
        cubic_significant=cubic_ok[var],
        predictor=pred,
        rsd_normalized=rsd_norm,
        candidates=candidates,
        config=config,
    )


def reports_to_json(reports: list[SelectionReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=1)


def reports_from_json(text: str) -> list[SelectionReport]:
    return [SelectionReport.from_dict(d) for d in json.loads(text)]


# ----------------------------------------------------------------------------
# Scenario/component comparisons
# ----------------------------------------------------------------------------

METRICS = ("rmv", "rsd", "rsd_normalized", "gain_pct", "rmv_cv_sd", "outlier_pct")

DIMENSIONS = {
    "lte_variant": [v.value for v in LteVariant],
    "wifi_variant": [v.value for v in WifiVariant],
    "predictor": [v.value for v in Predictor],
    "bandwidth_mhz": list(BANDWIDTHS_MHZ),
}


def report_metrics(r: SelectionReport) -> dict[str, float]:
    m = r.chosen_metrics
    return {
        "rmv": m.rmv_cv_mean,
        "rsd": m.rsd,
        "rsd_normalized": r.rsd_normalized,
        "gain_pct": r.gain_pct,
        "rmv_cv_sd": m.rmv_cv_sd,
        "outlier_pct": r.outlier_pct,
    }


def _dim_value(cfg: ScenarioConfig, dim: str):
    v = getattr(cfg, dim)
    return v.value if isinstance(v, Enum) else v


@dataclass(frozen=True)
class ComparisonRow:
    group: str
    metric: str
    value_a: float
    value_b: float
    delta_pct: float


def _delta(a: float, b: float) -> float:
    return 100.0 * (a - b) / abs(b) if b != 0 else math.nan


def _pairs(dim: str, values: list):
    if dim == "bandwidth_mhz":
        return list(zip(values[:-1], values[1:]))
    return list(combinations(values, 2))


@dataclass
class ComponentComparison:
    """Group means per dimension value plus pairwise component/scenario deltas."""

    means: dict[tuple[str, object], dict[str, float]]
    rows: list[ComparisonRow] = field(default_factory=list)

    def component_rows(self) -> list[ComparisonRow]:
        return [r for r in self.rows if r.group.startswith("component:")]

    def delta(self, dim: str, a, b, metric: str) -> float:
        return _delta(self.means[dim, a][metric], self.means[dim, b][metric])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "metric", "value_a", "value_b", "delta_pct"])
        for r in self.rows:
            w.writerow([r.group, r.metric, f"{r.value_a:.9g}", f"{r.value_b:.9g}", f"{r.delta_pct:.9g}"])
        return buf.getvalue()


def compare_components(reports: list[SelectionReport]) -> ComponentComparison:
    """Aggregate the 32 scenario reports by LTE, Wi-Fi, predictor and bandwidth."""
    by_id = {r.scenario_id: r for r in reports if r.config is not None}
    if len(reports) != 32 or sorted(by_id) != list(range(1, 33)):
        raise IncompleteMatrix("need exactly one selection report per scenario 1..32")
    values = {sid: report_metrics(r) for sid, r in by_id.items()}

    means = {}
    for dim, levels in DIMENSIONS.items():
        for lvl in levels:
            members = [sid for sid, r in by_id.items() if _dim_value(r.config, dim) == lvl]
            means[dim, lvl] = {m: float(np.mean([values[s][m] for s in members])) for m in METRICS}

    rows = []
    for dim, levels in DIMENSIONS.items():
        for a, b in _pairs(dim, levels):
            for m in METRICS:
                va, vb = means[dim, a][m], means[dim, b][m]
                rows.append(ComparisonRow(f"component:{dim}:{a} vs {b}", m, va, vb, _delta(va, vb)))
    # Scenario-specific pairs differ in exactly one dimension.
    for dim, levels in DIMENSIONS.items():
        for a, b in _pairs(dim, levels):
            for sid, r in sorted(by_id.items()):
                if _dim_value(r.config, dim) != a:
                    continue
                cfg_b = _replace_dim(r.config, dim, b)
                other = by_id[cfg_b.scenario_id]
                for m in METRICS:
                    va, vb = values[sid][m], values[other.scenario_id][m]
                    rows.append(ComparisonRow(
                        f"scenario:{dim}:TS{sid} vs TS{other.scenario_id}", m, va, vb, _delta(va, vb)))
    return ComponentComparison(means, rows)


def _replace_dim(cfg: ScenarioConfig, dim: str, value) -> ScenarioConfig:
    from dataclasses import replace

    return replace(cfg, **{dim: value})
