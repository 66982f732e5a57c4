import csv
import statistics

import numpy as np
import pytest

from tasp_dmd import harness
from tasp_dmd.instance import GeneratorConfig, generate_instance
from tasp_dmd.metrics import rpd, wilcoxon_signed_rank
from tasp_dmd.solver import ConfigError, SolverConfig

FAST = SolverConfig(outer_iterations=20, learning_loop=5, non_improve_limit=4)


@pytest.fixture(scope="module")
def tiny_suite():
    return [generate_instance(GeneratorConfig(dock_count=2, truck_count=4, seed=s, name=f"tiny{s}")) for s in (1, 2)]


@pytest.fixture(scope="module")
def bench(tiny_suite):
    return harness.benchmark(tiny_suite, ["QALNS", "RLNS"], FAST, repeats=3, include_timing=False)


def test_table_has_one_row_per_instance_plus_average(bench):
    rows = [(r["instance"], r["variant"]) for r in bench.table]
    assert rows == [("tiny1", "QALNS"), ("tiny1", "RLNS"), ("tiny2", "QALNS"), ("tiny2", "RLNS"),
                    ("Average", "QALNS"), ("Average", "RLNS")]


def test_average_deviation_recomputes_from_raw_rows(bench, tmp_path):
    path = harness.write_table(bench.summary, tmp_path / "runs", "csv")
    raw = list(csv.DictReader(path.open()))
    for row in bench.table[:-2]:
        mine = [float(r["f1"]) for r in raw if r["instance"] == row["instance"] and r["variant"] == row["variant"]]
        best = min(float(r["f1"]) for r in raw if r["instance"] == row["instance"])
        ref = max(best, 0.01)
        assert row["AvS"] == pytest.approx(statistics.fmean((v - ref) / ref * 100 for v in mine))
        assert row["BS"] == pytest.approx(min((v - ref) / ref * 100 for v in mine))


def test_single_variant_has_zero_best_deviation():
    rows = [{"instance": "x", "variant": "A", "f1": v, "seconds_to_best": 0.0} for v in (4.0, 4.0)]
    table = harness.rpd_table(rows)
    assert table[0]["AvS"] == 0.0 and table[0]["BS"] == 0.0


def test_tiny_instances_carry_an_oracle_front(bench):
    algorithms = {(r["instance"], r["algorithm"]) for r in bench.fronts}
    assert ("tiny1", "Oracle") in algorithms and ("tiny2", "Oracle") in algorithms
    nr = [r["value"] for r in bench.fronts if r["algorithm"] == "Oracle" and r["metric"] == "NR"]
    assert all(v == 1.0 for v in nr)  # nothing beats the exact front


def test_parallel_cells_match_serial(tiny_suite):
    cells = [(tiny_suite[0], FAST.replace(seed=s)) for s in range(3)]
    serial = [r.to_json() for r in harness.run_cells(cells, 1)]
    pooled = [r.to_json() for r in harness.run_cells(cells, 2)]
    assert serial == pooled


def test_parse_variant():
    assert harness.parse_variant("FixedAction(4)", FAST).fixed_action == 4
    assert harness.parse_variant("ALNS_12", FAST).label == "ALNS_12"
    with pytest.raises(ConfigError):
        harness.parse_variant("GA", FAST)


def test_filter_keeps_everything_at_zero_threshold(tiny_suite):
    res = harness.filter_operators(tiny_suite[:1], FAST.replace(outer_iterations=5, learning_loop=1), repeats=6,
                                   threshold=0.0, include_timing=False)
    assert res.filtered_actions == list(range(1, 17))
    assert res.action_matrix.zeta.shape == (16, 16)
    rows = harness.matrix_rows(res.action_matrix)
    assert len(rows) == 16 and all(len(r) == 16 + 3 for r in rows)
    assert res.perturbation_matrix.names == ("P1", "P2", "P3")


def test_injected_dominant_operator_survives_the_filter():
    from tasp_dmd.metrics import dominance_matrix

    rng = np.random.default_rng(0)
    base = rng.normal(20, 2, size=10)
    samples = {f"op{i}": [[v + rng.normal(0, 0.1), 1, 1] for v in base] for i in range(1, 6)}
    samples["op3"] = [[v - 5, 1, 1] for v in base]
    assert "op3" in dominance_matrix(samples).filtered(0.4)


def test_strategy_comparison_shares(tiny_suite):
    res = harness.strategy_comparison(tiny_suite, FAST, include_timing=False)
    share = {(r["instance"], r["strategy"]): r["mixed_share"] for r in res.rows}
    assert all(share[(i.name, "Mix")] == 1.0 for i in tiny_suite)
    assert all(share[(i.name, "Fix")] == 0.0 for i in tiny_suite)
    assert len(res.gantt) == 6 and all(len(g) == 4 for g in res.gantt.values())
    assert all(0.0 <= b["tardiness"] <= 1.0 for b in res.boxplot)


def test_sweep_row_counts(tiny_suite):
    inst = tiny_suite[0]
    assert len(harness.sweep(inst, {"epsilon": [0.85]}, FAST)) == 1
    rows = harness.sweep(inst, {"epsilon": [0.7, 0.85, 1.0]}, FAST)
    assert [r["epsilon"] for r in rows] == [0.7, 0.85, 1.0]
    configs = harness.sweep_configs({"epsilon": [0.7, 1.0], "discount": [0.5, 0.7, 0.9]}, FAST, "factorial")
    assert len(configs) == 6
    oat = harness.sweep_configs({"epsilon": [0.7, 0.85, 1.0]}, SolverConfig())
    assert all(c.learning_rate == 0.5 and c.discount == 0.7 for _, c in oat)
    with pytest.raises(ConfigError):
        harness.sweep_configs({"nope": [1]}, FAST)


def test_relative_improvement_rows_are_not_degenerate():
    inst = generate_instance(GeneratorConfig(dock_count=3, truck_count=20, seed=2))
    reports = harness.run_cells([(inst, SolverConfig(outer_iterations=60, learning_loop=10, seed=s))
                                 for s in range(3)])
    rows = harness.relative_improvement_rows(reports)
    assert rows
    for rep in reports:
        mine = [r["RI"] for r in rows if r["seed"] == rep.seed]
        if mine:
            assert sum(mine) == pytest.approx(100.0)


def test_emitted_csv_loads_into_metrics(bench, tmp_path):
    path = harness.write_table(bench.summary, tmp_path / "runs", "csv")
    rows = harness.read_csv_rows(path)
    q = [float(r["f1"]) for r in rows if r["variant"] == "QALNS"]
    r = [float(r["f1"]) for r in rows if r["variant"] == "RLNS"]
    wilcoxon_signed_rank(q, r)
    rpd(q, max(min(q), 0.01))
