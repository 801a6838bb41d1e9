"""Paired baseline/learned solves and their convergence-time and accuracy figures."""

from __future__ import annotations

import csv
import io
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .. import coexsim as cs
from ..errors import MissingInput, NotConverged
from .problem import (
    Cir,
    ConstraintKind,
    Objective,
    Relation,
    build_problem,
    constraint_select,
    link_budget,
)
from .solver import SolveResult, SolverConfig, solve

DEFAULT_REPEATS = 11

# Published group figures, kept only for side-by-side display.
REFERENCE_CTF_PCT = (76.02, 94.17)
REFERENCE_ACCURACY_PCT = (92.28, 97.16)
REFERENCE_LAA_CTF_PCT = (76.02, 79.89)
REFERENCE_LAA_ACCURACY_PCT = (92.28, 95.04)
REFERENCE_MAX_REDUCTION_PCT = 24.0
REFERENCE_MAX_ACCURACY_PCT = 97.16

STYLE = {Objective.MAX_CAPACITY: "COM-style", Objective.MAX_SINR: "SOM-style"}
RESULT_COLUMNS = ("scenario_id", "objective", "constraint_kind", "optimal_value",
                  "iterations", "wall_time_ms", "converged")


@dataclass(frozen=True)
class NefroEval:
    ctf_pct: float
    accuracy_pct: float
    ctf_iter_pct: float
    scenario_id: int | None = None
    objective: Objective | None = None
    lte_variant: cs.LteVariant | None = None
    # False when the selector kept the theoretical relation (nothing to compare).
    substituted: bool = True
    # The learned program found a larger optimum than the baseline.
    over_estimate: bool = False
    base_value: float = float("nan")
    nefro_value: float = float("nan")
    base_iterations: int = 0
    nefro_iterations: int = 0
    base_wall_ms: float = float("nan")
    nefro_wall_ms: float = float("nan")

    @property
    def group(self) -> tuple[str, str] | None:
        if self.lte_variant is None or self.objective is None:
            return None
        return self.lte_variant.value, STYLE[self.objective]

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["objective"] = None if self.objective is None else self.objective.value
        d["lte_variant"] = None if self.lte_variant is None else self.lte_variant.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NefroEval":
        d = dict(d)
        if d.get("objective") is not None:
            d["objective"] = Objective(d["objective"])
        if d.get("lte_variant") is not None:
            d["lte_variant"] = cs.LteVariant(d["lte_variant"])
        return cls(**d)


def evaluate_pair(base: SolveResult, nefro: SolveResult, **labels) -> NefroEval:
    """CTF and accuracy of a learned-relation solve against its baseline."""
    if not (base.converged and nefro.converged):
        raise NotConverged("both solves must converge before they can be compared")
    vb, vn = base.optimal_value, nefro.optimal_value
    return NefroEval(
        ctf_pct=100.0 * nefro.wall_time_ms / base.wall_time_ms,
        accuracy_pct=100.0 * (1.0 - abs(vb - vn) / abs(vb)),
        ctf_iter_pct=100.0 * nefro.iterations / base.iterations,
        over_estimate=bool(vn > vb),
        base_value=vb,
        nefro_value=vn,
        base_iterations=base.iterations,
        nefro_iterations=nefro.iterations,
        base_wall_ms=base.wall_time_ms,
        nefro_wall_ms=nefro.wall_time_ms,
        **labels,
    )


def timed_solve(problem, cfg: SolverConfig = SolverConfig(), repeats: int = DEFAULT_REPEATS) -> SolveResult:
    """Solve ``repeats`` times in sequence; wall time is the median."""
    first = solve(problem, cfg)
    times = [first.wall_time_ms] + [solve(problem, cfg).wall_time_ms for _ in range(repeats - 1)]
    return replace(first, wall_time_ms=float(statistics.median(times)))


def learned_relation(config: cs.ScenarioConfig, objective: Objective, reports: dict):
    """Which report feeds the learned constraint, and in which direction.

    A SINR-predictor scenario already has capacity as a function of SINR. A
    capacity-predictor scenario supplies SINR as a function of capacity, which
    covers the demand constraint of the SINR objective; the capacity objective
    needs capacity of SINR, which comes from the twin scenario.
    """
    if config.predictor is cs.Predictor.SINR:
        sid, rel = config.scenario_id, Relation.CAPACITY_OF_SINR
    elif objective is Objective.MAX_SINR:
        sid, rel = config.scenario_id, Relation.SINR_OF_CAPACITY
    else:
        sid, rel = config.twin().scenario_id, Relation.CAPACITY_OF_SINR
    if sid not in reports:
        raise MissingInput(f"no selection report for scenario {sid}")
    return reports[sid], rel


def cir_from_report(report, relation: Relation) -> Cir:
    c = list(report.model.poly_coeffs()) + [0.0, 0.0, 0.0]
    return Cir(tuple(float(v) for v in c[:3]), relation)


@dataclass
class ScenarioOutcome:
    evals: list[NefroEval] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)


def _row(sid, objective, kind, r: SolveResult) -> dict:
    return {
        "scenario_id": sid,
        "objective": objective.value,
        "constraint_kind": kind.value,
        "optimal_value": r.optimal_value,
        "iterations": r.iterations,
        "wall_time_ms": r.wall_time_ms,
        "converged": r.converged,
    }


def run_scenario(
    config: cs.ScenarioConfig,
    reports: dict,
    repeats: int = DEFAULT_REPEATS,
    cfg: SolverConfig = SolverConfig(),
    mac: cs.MacParams = cs.MacParams(),
    radio: cs.RadioParams = cs.RadioParams(),
) -> ScenarioOutcome:
    """Both objectives for one scenario. Non-converged pairs are listed, not raised."""
    out = ScenarioOutcome()
    budget = link_budget(config, mac, radio)
    sid = config.scenario_id
    for obj in Objective:
        report, rel = learned_relation(config, obj, reports)
        kind = constraint_select(report)
        base = timed_solve(build_problem(budget, obj, ConstraintKind.THEORETICAL), cfg, repeats)
        out.rows.append(_row(sid, obj, ConstraintKind.THEORETICAL, base))
        if kind is ConstraintKind.LEARNED_CIR:
            prob = build_problem(budget, obj, kind, cir_from_report(report, rel))
            nefro = timed_solve(prob, cfg, repeats)
            out.rows.append(_row(sid, obj, kind, nefro))
        else:
            nefro = base
        labels = dict(scenario_id=sid, objective=obj, lte_variant=config.lte_variant,
                      substituted=kind is ConstraintKind.LEARNED_CIR)
        try:
            out.evals.append(evaluate_pair(base, nefro, **labels))
        except NotConverged:
            out.failures.append(f"scenario {sid} {obj.value}: solve did not converge")
    return out


def _run_one(args):
    return run_scenario(*args)


@dataclass
class MatrixResult:
    evals: list[NefroEval]
    rows: list[dict]
    failures: list[str]

    def group_means(self) -> dict[tuple[str, str], dict[str, float]]:
        """Mean CTF / iteration CTF / accuracy per (LTE variant, objective style)."""
        groups: dict[tuple[str, str], list[NefroEval]] = {}
        for e in self.evals:
            groups.setdefault(e.group, []).append(e)
        return {
            g: {
                "ctf_pct": float(np.mean([e.ctf_pct for e in es])),
                "ctf_iter_pct": float(np.mean([e.ctf_iter_pct for e in es])),
                "accuracy_pct": float(np.mean([e.accuracy_pct for e in es])),
                "n": len(es),
            }
            for g, es in sorted(groups.items())
        }

    def claim_check(self) -> dict:
        """Largest observed time reduction and accuracy, next to the published ones."""
        sub = [e for e in self.evals if e.substituted] or self.evals
        return {
            "max_reduction_pct": max((100.0 - e.ctf_pct for e in sub), default=float("nan")),
            "max_iter_reduction_pct": max((100.0 - e.ctf_iter_pct for e in sub), default=float("nan")),
            "max_accuracy_pct": max((e.accuracy_pct for e in sub), default=float("nan")),
            "reference_max_reduction_pct": REFERENCE_MAX_REDUCTION_PCT,
            "reference_max_accuracy_pct": REFERENCE_MAX_ACCURACY_PCT,
        }

    def summary_rows(self) -> list[list]:
        """Table with rows {CTF, iteration CTF, Accuracy} and one column per group."""
        means = self.group_means()
        cols = [(v.value, s) for v in cs.LteVariant for s in STYLE.values()]
        header = ["metric"] + [f"{v} {s}" for v, s in cols] + ["reference_low", "reference_high"]
        out = [header]
        for label, key, ref in (("CTF", "ctf_pct", REFERENCE_CTF_PCT),
                                ("Accuracy", "accuracy_pct", REFERENCE_ACCURACY_PCT),
                                ("Iteration CTF", "ctf_iter_pct", (None, None))):
            out.append([label] + [means.get(c, {}).get(key, float("nan")) for c in cols] + list(ref))
        claim = self.claim_check()
        out.append(["Max reduction", claim["max_reduction_pct"]] + [""] * (len(cols) - 1)
                   + ["", REFERENCE_MAX_REDUCTION_PCT])
        out.append(["Max accuracy", claim["max_accuracy_pct"]] + [""] * (len(cols) - 1)
                   + ["", REFERENCE_MAX_ACCURACY_PCT])
        return out

    def summary_csv(self) -> str:
        return _csv(self.summary_rows())

    def results_csv(self) -> str:
        return _csv([list(RESULT_COLUMNS)] + [[r[c] for c in RESULT_COLUMNS] for r in self.rows], 9)

    def to_json(self) -> str:
        return json.dumps({
            "evals": [e.to_dict() for e in self.evals],
            "group_means": [{"lte_variant": g[0], "style": g[1], **m} for g, m in self.group_means().items()],
            "claim_check": self.claim_check(),
            "reference": {
                "ctf_pct": REFERENCE_CTF_PCT,
                "accuracy_pct": REFERENCE_ACCURACY_PCT,
                "laa_ctf_pct": REFERENCE_LAA_CTF_PCT,
                "laa_accuracy_pct": REFERENCE_LAA_ACCURACY_PCT,
            },
            "failures": self.failures,
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "MatrixResult":
        d = json.loads(text)
        return cls([NefroEval.from_dict(e) for e in d["evals"]], [], list(d.get("failures", [])))


def _csv(rows, digits: int = 6) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([f"{v:.{digits}g}" if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def run_matrix(
    configs: list[cs.ScenarioConfig],
    reports: dict,
    repeats: int = DEFAULT_REPEATS,
    cfg: SolverConfig = SolverConfig(),
    jobs: int = 1,
    mac: cs.MacParams = cs.MacParams(),
    radio: cs.RadioParams = cs.RadioParams(),
) -> MatrixResult:
    """Evaluate every scenario in ``configs``; ``reports`` maps scenario id to report."""
    tasks = [(c, reports, repeats, cfg, mac, radio) for c in configs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outcomes = list(ex.map(_run_one, tasks))
    else:
        outcomes = [_run_one(t) for t in tasks]
    result = MatrixResult([], [], [])
    for o in outcomes:
        result.evals += o.evals
        result.rows += o.rows
        result.failures += o.failures
    return result
