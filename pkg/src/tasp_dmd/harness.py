"""Batch experiments: operator filtering, benchmark comparison, dock strategies, parameter sweeps.

Every experiment is a set of independent (instance, config) cells. Cells may
run in a process pool; results are merged in submission order, so output is
identical for any worker count.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import statistics
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .instance import Instance, load_instance
from .metrics import (
    MetricWarning,
    dominance_matrix,
    hcc,
    minmax_normalize,
    hypervolume,
    mean_utilization,
    nondominance_ratio,
    nondominated,
    relative_improvement,
    rpd,
)
from .oracle import OracleLimits, StateSpaceTooLarge, enumerate_pareto
from .operators import ACTIONS
from .schedule import DockMode, dock_utilization, gantt_export
from .solver import ConfigError, RunReport, SolverConfig, solve


def load_suite(path: str | Path) -> list[Instance]:
    """Instances from a single JSON file or every ``*.json`` in a directory (sorted by name)."""
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.json"))
        if not files:
            raise FileNotFoundError(f"no instance files in {path}")
        return [load_instance(f) for f in files]
    return [load_instance(path)]


def _run_cell(cell: tuple[Instance, SolverConfig]) -> RunReport:
    instance, config = cell
    return solve(instance, config)


def run_cells(cells: Sequence[tuple[Instance, SolverConfig]], workers: int = 1) -> list[RunReport]:
    if workers <= 1 or len(cells) <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, cells))


def parse_variant(spec: str, base: SolverConfig) -> SolverConfig:
    spec = spec.strip()
    if spec.startswith("FixedAction(") and spec.endswith(")"):
        return base.replace(variant="FixedAction", fixed_action=int(spec[len("FixedAction(") : -1]))
    if spec.startswith("ALNS_"):
        return base.replace(variant="FixedAction", fixed_action=int(spec[len("ALNS_") :]))
    return base.replace(variant=spec, fixed_action=None)


# -- tabular output ------------------------------------------------------------


def rows_to_csv(rows: Sequence[Mapping], columns: Sequence[str] | None = None) -> str:
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in columns})
    return buf.getvalue()


def _fmt(value):
    if isinstance(value, float):
        return repr(round(value, 6))
    return value


def read_csv_rows(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_table(rows: Sequence[Mapping], path: Path, fmt: str = "csv", columns: Sequence[str] | None = None) -> Path:
    path = path.with_suffix("." + fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(json.dumps(list(rows), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    else:
        path.write_text(rows_to_csv(rows, columns), encoding="utf-8")
    return path


def metric_rows(instance: str, algorithm: str, metrics: Mapping[str, float]) -> list[dict]:
    return [{"instance": instance, "algorithm": algorithm, "metric": k, "value": v} for k, v in metrics.items()]


# -- benchmark -----------------------------------------------------------------


def rpd_table(summary: Sequence[Mapping]) -> list[dict]:
    """AvS / BS / T per (instance, variant) from summary rows, plus an ``Average`` row per variant.

    AvS is the mean RPD of tardiness over runs, BS the RPD of the best run and
    T the mean seconds to reach the final best. The reference tardiness is the
    best over every run on that instance.
    """
    by_instance: dict[str, list[Mapping]] = {}
    for row in summary:
        by_instance.setdefault(str(row["instance"]), []).append(row)
    variants = list(dict.fromkeys(str(r["variant"]) for r in summary))
    table = []
    for inst, rows in by_instance.items():
        best = min(float(r["f1"]) for r in rows)
        for var in variants:
            mine = [r for r in rows if str(r["variant"]) == var]
            if not mine:
                continue
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", MetricWarning)
                devs = rpd([float(r["f1"]) for r in mine], best)
            table.append(
                {
                    "instance": inst,
                    "variant": var,
                    "AvS": statistics.fmean(devs),
                    "BS": min(devs),
                    "T": statistics.fmean(float(r["seconds_to_best"]) for r in mine),
                    "runs": len(mine),
                }
            )
    for var in variants:
        mine = [r for r in table if r["variant"] == var]
        table.append(
            {
                "instance": "Average",
                "variant": var,
                "AvS": statistics.fmean(r["AvS"] for r in mine),
                "BS": statistics.fmean(r["BS"] for r in mine),
                "T": statistics.fmean(r["T"] for r in mine),
                "runs": sum(r["runs"] for r in mine),
            }
        )
    return table


def merged_front(reports: Iterable[RunReport]) -> list[tuple[float, ...]]:
    return sorted(nondominated([tuple(o) for r in reports for _, o in r.archive]))


def front_metrics(fronts: Mapping[str, Sequence[Sequence[float]]]) -> dict[str, dict[str, float]]:
    """NR against the union of the others, normalized HV (reference 1.1) and HCC per front."""
    labels = list(fronts)
    scaled = dict(zip(labels, minmax_normalize([fronts[k] for k in labels])))
    out = {}
    for label in labels:
        others = [p for k in labels if k != label for p in fronts[k]]
        nr = nondominance_ratio(fronts[label], others)[0] if others else 1.0
        out[label] = {
            "NR": nr,
            "HV": hypervolume(scaled[label], (1.1, 1.1, 1.1)),
            "HCC": hcc(scaled[label]),
            "size": float(len(fronts[label])),
        }
    return out


@dataclass
class BenchResult:
    reports: list[RunReport]
    summary: list[dict]
    table: list[dict]
    fronts: list[dict] = field(default_factory=list)


def benchmark(
    instances: Sequence[Instance],
    variants: Sequence[str],
    base: SolverConfig,
    repeats: int = 10,
    seed: int = 0,
    workers: int = 1,
    oracle_limits: OracleLimits = OracleLimits(),
    include_timing: bool = True,
) -> BenchResult:
    configs = [parse_variant(v, base) for v in variants]
    cells = [
        (inst, cfg.replace(seed=seed + r)) for inst in instances for cfg in configs for r in range(repeats)
    ]
    reports = run_cells(cells, workers)
    summary = [rep.summary_row(include_timing) for rep in reports]
    table = rpd_table(summary)

    fronts_rows = []
    for inst in instances:
        fronts = {
            cfg.label: merged_front(r for r in reports if r.instance == inst.name and r.label == cfg.label)
            for cfg in configs
        }
        try:
            exact = [tuple(o) for _, o in enumerate_pareto(inst, oracle_limits)]
        except StateSpaceTooLarge:
            exact = None
        if exact is not None:
            fronts["Oracle"] = exact
        for label, vals in front_metrics(fronts).items():
            fronts_rows.extend(metric_rows(inst.name, label, vals))
    return BenchResult(reports, summary, table, fronts_rows)


# -- operator filtering ----------------------------------------------------------


@dataclass
class FilterResult:
    action_matrix: object
    filtered_actions: list[int]
    perturbation_matrix: object | None
    summary: list[dict]


def _paired_samples(reports: Sequence[RunReport], key) -> dict[str, list[list[float]]]:
    samples: dict[str, list[list[float]]] = {}
    for rep in reports:
        samples.setdefault(key(rep), []).append(list(rep.best_objectives))
    return samples


def filter_operators(
    instances: Sequence[Instance],
    base: SolverConfig,
    repeats: int = 10,
    seed: int = 0,
    threshold: float = 0.4,
    alpha: float = 0.05,
    workers: int = 1,
    actions: Sequence[int] = tuple(ACTIONS),
    include_timing: bool = True,
) -> FilterResult:
    """Dominance-ratio screening of single actions, then of perturbation policies on the survivors."""
    cells = [
        (inst, base.replace(variant="FixedAction", fixed_action=a, seed=seed + r))
        for a in actions
        for inst in instances
        for r in range(repeats)
    ]
    reports = run_cells(cells, workers)
    samples = _paired_samples(reports, lambda rep: f"op{rep.config.fixed_action}")
    matrix = dominance_matrix(samples, alpha)
    kept = [int(name[2:]) for name in matrix.filtered(threshold)]
    summary = [rep.summary_row(include_timing) for rep in reports]

    pmatrix = None
    if kept:
        pcells = [
            (inst, base.replace(variant="QALNS", action_set=tuple(kept), perturbation=p, seed=seed + r,
                                strategy="Adaptive"))
            for p in ("P1", "P2", "P3")
            for inst in instances
            for r in range(repeats)
        ]
        preports = run_cells(pcells, workers)
        pmatrix = dominance_matrix(_paired_samples(preports, lambda rep: rep.config.perturbation), alpha)
        summary += [dict(rep.summary_row(include_timing), variant=f"QALNS[{rep.config.perturbation}]")
                    for rep in preports]
    return FilterResult(matrix, kept, pmatrix, summary)


def matrix_rows(matrix) -> list[dict]:
    rows = []
    for i, name in enumerate(matrix.names):
        row = {"operator": name}
        row.update({other: int(matrix.zeta[i, j]) for j, other in enumerate(matrix.names)})
        row["wins"] = matrix.wins[i]
        row["ratio"] = matrix.ratios[i]
        rows.append(row)
    return rows


# -- dock strategies ---------------------------------------------------------------


@dataclass
class StrategyResult:
    reports: list[RunReport]
    rows: list[dict]
    boxplot: list[dict]
    gantt: dict[str, list[dict]]


def mixed_share(report: RunReport) -> float:
    modes = report.best.modes
    return sum(m is DockMode.MIXED for m in modes) / len(modes)


def strategy_comparison(
    instances: Sequence[Instance],
    base: SolverConfig,
    repeats: int = 1,
    seed: int = 0,
    workers: int = 1,
    strategies: Sequence[str] = ("Adaptive", "Fix", "Mix"),
    include_timing: bool = True,
) -> StrategyResult:
    cells = [
        (inst, base.replace(strategy=s, seed=seed + r)) for inst in instances for s in strategies for r in range(repeats)
    ]
    reports = run_cells(cells, workers)
    by_name = {inst.name: inst for inst in instances}
    rows = []
    gantt = {}
    for rep in reports:
        inst = by_name[rep.instance]
        util = dock_utilization(inst, rep.best)
        f1, f2, f3 = rep.best_objectives
        rows.append(
            {
                "instance": rep.instance,
                "strategy": rep.config.strategy,
                "seed": rep.seed,
                "f1": f1,
                "f2": f2,
                "f3": f3,
                "utilization": mean_utilization(util),
                "mixed_share": mixed_share(rep),
                "seconds": rep.wall_clock if include_timing else 0.0,
            }
        )
        gantt[f"{rep.instance}__{rep.config.strategy}__s{rep.seed}"] = gantt_export(inst, rep.best)

    boxplot = []
    for inst in instances:
        mine = [r for r in rows if r["instance"] == inst.name]
        scaled = minmax_normalize([[(r["f1"], r["f2"], r["f3"]) for r in mine]])[0]
        for r, s in zip(mine, scaled):
            boxplot.append({"instance": r["instance"], "strategy": r["strategy"], "seed": r["seed"],
                            "tardiness": s[0], "makespan": s[1], "distance": s[2]})
    return StrategyResult(reports, rows, boxplot, gantt)


# -- sweep ---------------------------------------------------------------------------


def sweep_configs(grid: Mapping[str, Sequence], base: SolverConfig, mode: str = "oat") -> list[tuple[dict, SolverConfig]]:
    """Expand a parameter grid one-at-a-time (others at ``base``) or full-factorially."""
    known = set(base.to_dict())
    for name in grid:
        if name not in known:
            raise ConfigError(f"unknown parameter {name!r} in sweep grid")
    out = []
    if mode == "factorial":
        names = list(grid)
        for combo in itertools.product(*(grid[n] for n in names)):
            changes = dict(zip(names, combo))
            out.append((changes, SolverConfig.from_mapping({**base.to_dict(), **changes})))
    elif mode == "oat":
        for name, values in grid.items():
            for value in values:
                changes = {name: value}
                out.append((changes, SolverConfig.from_mapping({**base.to_dict(), **changes})))
    else:
        raise ConfigError(f"unknown sweep mode {mode!r}")
    return out


def sweep(
    instance: Instance,
    grid: Mapping[str, Sequence],
    base: SolverConfig,
    mode: str = "oat",
    repeats: int = 1,
    seed: int = 0,
    workers: int = 1,
    include_timing: bool = True,
) -> list[dict]:
    expanded = sweep_configs(grid, base, mode)
    cells = [(instance, cfg.replace(seed=seed + r)) for _, cfg in expanded for r in range(repeats)]
    reports = run_cells(cells, workers)
    rows = []
    for idx, (changes, _) in enumerate(expanded):
        runs = reports[idx * repeats : (idx + 1) * repeats]
        row = {"instance": instance.name}
        row.update({k: json.dumps(v) if isinstance(v, (list, tuple)) else v for k, v in changes.items()})
        row["mean_f1"] = statistics.fmean(r.best_objectives[0] for r in runs)
        row["mean_f2"] = statistics.fmean(r.best_objectives[1] for r in runs)
        row["mean_f3"] = statistics.fmean(r.best_objectives[2] for r in runs)
        row["mean_seconds"] = statistics.fmean(r.wall_clock for r in runs) if include_timing else 0.0
        rows.append(row)
    return rows


def relative_improvement_rows(reports: Sequence[RunReport]) -> list[dict]:
    rows = []
    for rep in reports:
        gi = {a: s["global_improvement"] for a, s in rep.action_stats.items()}
        sc = {a: s["successes"] for a, s in rep.action_stats.items()}
        if not any(sc.values()):
            continue
        for a, v in relative_improvement(gi, sc).items():
            rows.append({"instance": rep.instance, "variant": rep.label, "seed": rep.seed, "action": a, "RI": v})
    return rows

