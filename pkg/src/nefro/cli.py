"""Command-line pipeline: simulate -> select -> optimize -> evaluate -> report.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import coexsim as cs
from . import modelsel as ms
from . import report
from .errors import MissingInput, NefroError
from .nefropt import evaluate as ev
from .nefropt.solver import SolverConfig

log = logging.getLogger("nefro")

STAGES = ("simulate", "select", "optimize", "evaluate", "report")
CONFIG_KEYS = {"seed", "n_samples", "repeats", "scenario", "scenarios", "mac", "radio", "lof", "solver", "cv"}
N_SCENARIOS = 32


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunManifest:
    config_path: str | None
    output_dir: str
    seed: int
    stages: tuple[str, ...]
    scenario_filter: tuple[int, ...] | None = None
    jobs: int = 1
    config: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.stages:
            raise UsageError("at least one stage is required")
        bad = [s for s in self.stages if s not in STAGES]
        if bad:
            raise UsageError(f"unknown stage(s): {bad}")
        if self.scenario_filter is not None:
            if not self.scenario_filter:
                raise UsageError("scenario filter is empty")
            if any(not 1 <= i <= N_SCENARIOS for i in self.scenario_filter):
                raise UsageError(f"scenario ids must be in 1..{N_SCENARIOS}")
        if not 0 <= self.seed < 2**64:
            raise UsageError("seed must be an unsigned 64-bit integer")
        if self.jobs < 1:
            raise UsageError("--jobs must be >= 1")

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @property
    def scenario_ids(self) -> list[int]:
        return list(self.scenario_filter) if self.scenario_filter else list(range(1, N_SCENARIOS + 1))

    # Typed views of the config file sections.
    @property
    def mac(self) -> cs.MacParams:
        return cs.MacParams.from_dict(self.config.get("mac", {}))

    @property
    def radio(self) -> cs.RadioParams:
        return cs.RadioParams.from_dict(self.config.get("radio", {}))

    @property
    def lof(self) -> ms.LofParams:
        return ms.LofParams(**self.config.get("lof", {}))

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(**self.config.get("solver", {}))

    @property
    def scenario_overrides(self) -> dict:
        return dict(self.config.get("scenario", {}))

    def configs(self) -> list[cs.ScenarioConfig]:
        return [cs.scenario_by_id(i, self.seed, **self.scenario_overrides) for i in self.scenario_ids]

    def to_dict(self) -> dict:
        return {
            "config_path": self.config_path,
            "output_dir": self.output_dir,
            "seed": self.seed,
            "stages": list(self.stages),
            "scenario_filter": None if self.scenario_filter is None else list(self.scenario_filter),
            "config": self.config,
        }


def parse_scenarios(text: str) -> tuple[int, ...]:
    """``"1,3,5-8"`` -> (1, 3, 5, 6, 7, 8)."""
    ids: list[int] = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        try:
            if "-" in part:
                a, b = (int(v) for v in part.split("-", 1))
                ids.extend(range(a, b + 1))
            else:
                ids.append(int(part))
        except ValueError:
            raise UsageError(f"bad scenario list entry {part!r}") from None
    return tuple(sorted(set(ids)))


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return doc


def build_manifest(args, stages: tuple[str, ...]) -> RunManifest:
    config = load_config(args.config)
    seed = config.get("seed", 0)
    if args.seed is not None:
        seed = args.seed
    env = os.environ.get("NEFRO_SEED")
    if env not in (None, ""):
        try:
            seed = int(env)
        except ValueError:
            raise UsageError("NEFRO_SEED must be an integer") from None
    filt = parse_scenarios(args.scenarios) if args.scenarios is not None else None
    if filt is None and "scenarios" in config:
        filt = tuple(config["scenarios"])
    m = RunManifest(args.config, args.out, int(seed), stages, filt, args.jobs, config)
    try:  # surface bad config sections as usage errors, before any stage runs
        m.mac, m.radio, m.lof, m.solver, m.configs()
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from None
    return m


def _map(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _write(path: Path, text: str) -> None:
    path.write_bytes(text.encode("utf-8"))


# -- stages -------------------------------------------------------------------

def _simulate_one(args):
    cfg, n, mac, radio, out = args
    cs.simulate_scenario(cfg, n, mac, radio).write_csv(out / f"ts_{cfg.scenario_id}.csv")


def cmd_simulate(m: RunManifest) -> int:
    m.out.mkdir(parents=True, exist_ok=True)
    n = int(m.config.get("n_samples", 200))
    _map(_simulate_one, [(c, n, m.mac, m.radio, m.out) for c in m.configs()], m.jobs)
    _write(m.out / "manifest.json", json.dumps(m.to_dict(), indent=1, sort_keys=True))
    log.info("simulated %d scenarios", len(m.scenario_ids))
    return 0


def _load_dataset(m: RunManifest, sid: int) -> cs.Dataset:
    path = m.out / f"ts_{sid}.csv"
    if not path.exists():
        raise MissingInput(f"{path} not found (run the simulate stage first)")
    return cs.Dataset.read_csv(path, m.seed, **m.scenario_overrides)


def _select_one(args):
    ds, lof, seed, cv, predictor = args
    return ms.select_model(ds, lof, seed, predictor=predictor, **cv)


def cmd_select(m: RunManifest) -> int:
    datasets = [_load_dataset(m, sid) for sid in m.scenario_ids]
    cv = m.config.get("cv", {})
    reports = _map(_select_one, [(d, m.lof, m.seed, cv, None) for d in datasets], m.jobs)
    _write(m.out / "selection.json", ms.reports_to_json(reports))
    if len(reports) == N_SCENARIOS:
        cmp = ms.compare_components(reports)
        _write(m.out / "comparison.csv", cmp.to_csv())
        report.write_charts(m.out, report.selection_charts(cmp))
    else:
        log.info("partial scenario set: comparison tables need all %d scenarios", N_SCENARIOS)
    return 0


def _load_reports(m: RunManifest) -> dict[int, ms.SelectionReport]:
    path = m.out / "selection.json"
    if not path.exists():
        raise MissingInput(f"{path} not found (run the select stage first)")
    return {r.scenario_id: r for r in ms.reports_from_json(path.read_text(encoding="utf-8"))}


def cmd_optimize(m: RunManifest) -> int:
    reports = _load_reports(m)
    configs = m.configs()
    missing = [c.scenario_id for c in configs if c.scenario_id not in reports]
    if missing:
        raise MissingInput(f"no selection report for scenarios {missing}")
    # A filtered run may lack a twin's report; twins share samples, so it is
    # the same dataset fitted with the other predictor.
    cv = m.config.get("cv", {})
    for c in configs:
        tw = c.twin()
        if c.predictor is cs.Predictor.CAPACITY and tw.scenario_id not in reports:
            ds = _load_dataset(m, c.scenario_id)
            reports[tw.scenario_id] = _select_one((ds, m.lof, m.seed, cv, tw.predictor))
    repeats = int(m.config.get("repeats", ev.DEFAULT_REPEATS))
    matrix = ev.run_matrix(configs, reports, repeats, m.solver, m.jobs, m.mac, m.radio)
    _write(m.out / "results.csv", matrix.results_csv())
    _write(m.out / "nefro_eval.json", matrix.to_json())
    for f in matrix.failures:
        log.error(f)
    return 1 if matrix.failures else 0


def _load_matrix(m: RunManifest) -> ev.MatrixResult:
    path = m.out / "nefro_eval.json"
    if not path.exists():
        raise MissingInput(f"{path} not found (run the optimize stage first)")
    return ev.MatrixResult.from_json(path.read_text(encoding="utf-8"))


def _write_evaluation(m: RunManifest, matrix: ev.MatrixResult) -> None:
    _write(m.out / "summary_table.csv", matrix.summary_csv())
    report.write_charts(m.out, report.evaluation_charts(matrix))


def cmd_evaluate(m: RunManifest) -> int:
    matrix = _load_matrix(m)
    _write_evaluation(m, matrix)
    for g, v in matrix.group_means().items():
        log.info("%s %s: CTF %.1f%%  iteration CTF %.1f%%  accuracy %.2f%%",
                 g[0], g[1], v["ctf_pct"], v["ctf_iter_pct"], v["accuracy_pct"])
    return 1 if matrix.failures else 0


def cmd_report(m: RunManifest) -> int:
    """Rebuild every chart and the summary from whatever artifacts exist."""
    found = False
    sel = m.out / "selection.json"
    if sel.exists():
        reports = ms.reports_from_json(sel.read_text(encoding="utf-8"))
        if len(reports) == N_SCENARIOS:
            report.write_charts(m.out, report.selection_charts(ms.compare_components(reports)))
        found = True
    if (m.out / "nefro_eval.json").exists():
        _write_evaluation(m, _load_matrix(m))
        found = True
    if not found:
        raise MissingInput(f"nothing to report in {m.out}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "select": cmd_select,
    "optimize": cmd_optimize,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def run(m: RunManifest) -> int:
    """Run the manifest's stages in order; a failing stage stops the pipeline."""
    m.out.mkdir(parents=True, exist_ok=True)
    status = 0
    for stage in m.stages:
        status = COMMANDS[stage](m)
        if status:
            break
    return status


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", default="nefro_out", help="output directory (default: nefro_out)")
    common.add_argument("--seed", type=int, help="master seed (NEFRO_SEED overrides)")
    common.add_argument("--scenarios", help="scenario ids, e.g. 1,2,9-16")
    common.add_argument("--jobs", type=int, default=1, help="worker processes per stage")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="nefro", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in STAGES + ("all",):
        sub.add_parser(name, parents=[common])
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    stages = STAGES if args.command == "all" else (args.command,)
    try:
        manifest = build_manifest(args, stages)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nefro: error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(manifest)
    except (NefroError, OSError, ValueError) as exc:
        print(f"nefro: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
