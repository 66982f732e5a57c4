"""Command-line entry point: ``tasp-dmd <command> ...``.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import harness
from .instance import (
    GeneratorConfig,
    InstanceError,
    generate_instance,
    load_instance,
    save_instance,
    suite_configs,
)
from .metrics import dominance_matrix
from .schedule import gantt_to_json
from .solver import SUMMARY_COLUMNS, ConfigError, SolverConfig, solve

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("tasp_dmd")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".toml":
        return tomllib.loads(text)
    return json.loads(text)


def solver_config(args: argparse.Namespace, **overrides: Any) -> SolverConfig:
    data = read_config(args.config)
    data = data.get("solver", data)
    if args.seed is not None:
        data["seed"] = args.seed
    data.update({k: v for k, v in overrides.items() if v is not None})
    return SolverConfig.from_mapping(data)


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands --------------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    data = read_config(args.config)
    data = data.get("generator", data)
    seed = args.seed if args.seed is not None else int(data.pop("seed", 0))
    data.pop("seed", None)
    for key in ("types_per_truck", "pallets_per_type", "slack"):
        if key in data:
            data[key] = tuple(data[key])
    if args.suite:
        for key in ("dock_count", "truck_count", "name"):
            data.pop(key, None)
        configs = suite_configs(seed=seed, **data)
    else:
        configs = [GeneratorConfig(seed=seed, **data)]
    for cfg in configs:
        inst = generate_instance(cfg)
        path = out / f"{inst.name}.json"
        save_instance(inst, path)
        log.info("wrote %s", path)
        print(path)
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    instance = load_instance(args.instance)
    config = solver_config(args)
    report = solve(instance, config)
    stem = f"{instance.name or Path(args.instance).stem}__{config.label}__s{config.seed}"
    (out / f"{stem}.json").write_text(report.to_json(), encoding="utf-8")
    harness.write_table([report.summary_row(not args.no_timing)], out / f"{stem}.summary", "csv", SUMMARY_COLUMNS)
    if not args.no_timing:
        (out / f"{stem}.timing.json").write_text(
            json.dumps({"wall_clock": report.wall_clock, "seconds_to_best": report.seconds_to_best}) + "\n",
            encoding="utf-8",
        )
    f1, f2, f3 = report.best_objectives
    print(f"{stem}: tardiness={f1} makespan={f2} distance={f3:.4f} archive={len(report.archive)}")
    return EXIT_OK


def _write_reports(out: Path, reports) -> None:
    runs = out / "runs"
    runs.mkdir(parents=True, exist_ok=True)
    for rep in reports:
        (runs / f"{rep.instance}__{rep.label}__{rep.config.strategy}__s{rep.seed}.json").write_text(
            rep.to_json(), encoding="utf-8"
        )


def cmd_filter_ops(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    instances = harness.load_suite(args.suite)
    base = solver_config(args)
    result = harness.filter_operators(
        instances, base, repeats=args.repeats, seed=base.seed, threshold=args.threshold,
        workers=args.workers, include_timing=not args.no_timing,
    )
    harness.write_table(harness.matrix_rows(result.action_matrix), out / "action_dominance", args.format)
    (out / "action_dominance_matrix.json").write_text(
        json.dumps(result.action_matrix.to_dict(), sort_keys=True) + "\n", encoding="utf-8")
    if result.perturbation_matrix is not None:
        harness.write_table(harness.matrix_rows(result.perturbation_matrix), out / "perturbation_dominance", args.format)
        (out / "perturbation_dominance_matrix.json").write_text(
            json.dumps(result.perturbation_matrix.to_dict(), sort_keys=True) + "\n", encoding="utf-8")
    harness.write_table(result.summary, out / "runs", args.format, SUMMARY_COLUMNS)
    (out / "filtered_actions.json").write_text(json.dumps({"threshold": args.threshold,
                                                           "actions": result.filtered_actions}) + "\n",
                                               encoding="utf-8")
    print("filtered actions:", ", ".join(f"op{a}" for a in result.filtered_actions) or "(none)")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    instances = harness.load_suite(args.suite)
    base = solver_config(args)
    variants = [v for v in args.variants.split(",") if v.strip()]
    result = harness.benchmark(instances, variants, base, repeats=args.repeats, seed=base.seed,
                               workers=args.workers, include_timing=not args.no_timing)
    harness.write_table(result.summary, out / "runs", args.format, SUMMARY_COLUMNS)
    harness.write_table(result.table, out / "rpd_table", args.format)
    harness.write_table(result.fronts, out / "front_metrics", args.format, ("instance", "algorithm", "metric", "value"))
    harness.write_table(harness.relative_improvement_rows(result.reports), out / "relative_improvement", args.format,
                        ("instance", "variant", "seed", "action", "RI"))
    _write_reports(out, result.reports)
    for row in result.table:
        if row["instance"] == "Average":
            print(f"{row['variant']}: AvS={row['AvS']:.2f} BS={row['BS']:.2f} T={row['T']:.3f}")
    return EXIT_OK


def cmd_strategy(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    instances = harness.load_suite(args.suite)
    base = solver_config(args)
    result = harness.strategy_comparison(instances, base, repeats=args.repeats, seed=base.seed,
                                         workers=args.workers, include_timing=not args.no_timing)
    harness.write_table(result.rows, out / "strategy_runs", args.format)
    harness.write_table(result.boxplot, out / "strategy_boxplot", args.format)
    gantt_dir = out / "gantt"
    gantt_dir.mkdir(exist_ok=True)
    for key, records in result.gantt.items():
        (gantt_dir / f"{key}.json").write_text(gantt_to_json(records), encoding="utf-8")
    for strategy in dict.fromkeys(r["strategy"] for r in result.rows):
        mine = [r for r in result.rows if r["strategy"] == strategy]
        n = len(mine)
        print(f"{strategy}: tardiness={sum(r['f1'] for r in mine) / n:.2f} "
              f"utilization={sum(r['utilization'] for r in mine) / n:.3f} "
              f"mixed_share={sum(r['mixed_share'] for r in mine) / n:.3f}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    instance = load_instance(args.instance)
    grid = read_config(args.grid)
    base = solver_config(args)
    rows = harness.sweep(instance, grid, base, mode=args.mode, repeats=args.repeats, seed=base.seed,
                         workers=args.workers, include_timing=not args.no_timing)
    path = harness.write_table(rows, out / "sweep", args.format)
    print(f"{len(rows)} rows -> {path}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    """Rebuild the AvS/BS/T table (and an optional dominance matrix) from a runs CSV."""
    out = _out_dir(args)
    rows = harness.read_csv_rows(args.runs)
    if not rows:
        raise UsageError(f"{args.runs} holds no runs")
    table = harness.rpd_table(rows)
    path = harness.write_table(table, out / "report_rpd_table", args.format)
    variants = list(dict.fromkeys(r["variant"] for r in rows))
    if len(variants) >= 2:
        samples = {}
        for var in variants:
            mine = sorted((r for r in rows if r["variant"] == var), key=lambda r: (r["instance"], int(r["seed"])))
            samples[var] = [[float(r["f1"]), float(r["f2"]), float(r["f3"])] for r in mine]
        if len({len(s) for s in samples.values()}) == 1:
            matrix = dominance_matrix(samples, args.alpha)
            harness.write_table(harness.matrix_rows(matrix), out / "report_dominance", args.format)
    print(f"report -> {path}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # Sub-parsers repeat the flags with suppressed defaults so they may follow the command.
    flags = argparse.ArgumentParser(add_help=False)
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    flags.add_argument("--seed", type=int, default=default(None), help="base random seed")
    flags.add_argument("--workers", type=int, default=default(1), help="parallel worker processes")
    flags.add_argument("--out-dir", default=default("out"), help="directory for all outputs")
    flags.add_argument("--format", choices=("csv", "json"), default=default("csv"), help="table output format")
    flags.add_argument("--no-timing", action="store_true", default=default(False),
                       help="zero wall-clock columns for byte-stable output")
    flags.add_argument("-v", "--verbose", action="store_true", default=default(False))
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tasp-dmd", description=__doc__.splitlines()[0], parents=[_global_flags(False)])
    common = [_global_flags(True)]
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", parents=common, help="generate an instance or the ten-scale suite")
    p.add_argument("--config", help="generator config (TOML or JSON)")
    p.add_argument("--suite", action="store_true", help="write the ten benchmark scales")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", parents=common, help="solve one instance")
    p.add_argument("instance")
    p.add_argument("--config", help="solver config (TOML or JSON)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("filter-ops", parents=common, help="screen the 16 actions and the perturbation operators")
    p.add_argument("suite")
    p.add_argument("--config")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.4)
    p.set_defaults(func=cmd_filter_ops)

    p = sub.add_parser("bench", parents=common, help="compare search variants on a suite")
    p.add_argument("suite")
    p.add_argument("--variants", default="QALNS,RLNS,SALNS")
    p.add_argument("--config")
    p.add_argument("--repeats", type=int, default=10)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("strategy", parents=common, help="compare Adaptive, Fix and Mix dock strategies")
    p.add_argument("suite")
    p.add_argument("--config")
    p.add_argument("--repeats", type=int, default=1)
    p.set_defaults(func=cmd_strategy)

    p = sub.add_parser("sweep", parents=common, help="parameter sensitivity sweep")
    p.add_argument("instance")
    p.add_argument("--grid", required=True, help="JSON/TOML mapping of parameter -> list of values")
    p.add_argument("--mode", choices=("oat", "factorial"), default="oat")
    p.add_argument("--config")
    p.add_argument("--repeats", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", parents=common, help="summarize a runs CSV into RPD tables")
    p.add_argument("runs")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceError, ConfigError, json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
