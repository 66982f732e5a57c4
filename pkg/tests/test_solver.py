import math
import random
from collections import Counter

import pytest

from tasp_dmd.instance import GeneratorConfig, generate_instance
from tasp_dmd.oracle import enumerate_pareto
from tasp_dmd.schedule import DockMode, ObjectiveVector, Solution, check_feasibility, dominates
from tasp_dmd.solver import (
    ConfigError,
    Decision,
    EpisodeStats,
    ParetoArchive,
    QTable,
    SolverConfig,
    accept,
    calculate_reward,
    initial_modes,
    initial_solution,
    initial_temperature,
    q_step,
    solve,
)
from tests.conftest import build_instance

U, L, M = DockMode.UNLOAD, DockMode.LOAD, DockMode.MIXED
SMALL = SolverConfig(outer_iterations=30, learning_loop=10, non_improve_limit=5)


@pytest.fixture(scope="module")
def instance():
    return generate_instance(GeneratorConfig(dock_count=3, truck_count=12, seed=21))


# -- construction --------------------------------------------------------------


def test_mix_strategy_is_all_mixed(instance):
    assert initial_modes(instance, "Mix") == [M, M, M]


def test_fix_strategy_rounds_the_inbound_share():
    trucks = [("I", 0, 50, {0: 1})] * 8 + [("O", 0, 50, {0: 1})] * 12
    inst = build_instance(trucks, docks=[(k * 5.0, 0) for k in range(6)])
    modes = initial_modes(inst, "Fix")
    assert modes.count(U) == math.floor(6 * 8 / 20 + 0.5) == 2
    assert M not in modes and modes[0] is U and modes[2] is U


def test_adaptive_keeps_both_directions_served():
    trucks = [("I", 0, 50, {0: 1})] * 5 + [("O", 0, 50, {0: 1})] * 5
    modes = initial_modes(build_instance(trucks, docks=[(k, 0) for k in range(3)]), "Adaptive")
    assert any(m.serves(True) for m in modes) and any(m.serves(False) for m in modes)


def test_fix_strategy_rejects_degenerate_rounding():
    trucks = [("I", 0, 50, {0: 1})] + [("O", 0, 50, {0: 1})] * 9
    with pytest.raises(ConfigError):
        initial_modes(build_instance(trucks, docks=[(0, 0), (1, 0)]), "Fix")


@pytest.mark.parametrize("seed", range(100))
def test_initial_solutions_are_feasible(seed):
    rnd = random.Random(seed)
    inst = generate_instance(GeneratorConfig(dock_count=rnd.randint(1, 6), truck_count=rnd.randint(1, 30), seed=seed,
                                             horizon=10_000))
    for strategy in ("Adaptive", "Mix"):
        assert check_feasibility(inst, initial_solution(inst, strategy)) == []


# -- temperature and acceptance ------------------------------------------------------


def test_initial_temperature_examples():
    o = ObjectiveVector(10.0, 100.0, 1000.0)
    assert initial_temperature(o, 0.2) == pytest.approx(0.25 / math.log(2))
    assert initial_temperature(o, 0.2) == pytest.approx(0.3607, abs=1e-4)
    assert initial_temperature(o, 0.4) == pytest.approx(2 * initial_temperature(o, 0.2))
    assert initial_temperature(o, math.log(2), weights=(0.8, 0.1, 0.1)) == pytest.approx(1.0)


def test_accept_branches():
    archive = ParetoArchive()
    cur = ObjectiveVector(5, 50, 500)
    archive.offer(None, cur)
    rng = random.Random(0)
    assert accept(ObjectiveVector(4, 50, 500), cur, cur, archive, 1.0, rng, cur) is Decision.NEW_GLOBAL_BEST
    best = ObjectiveVector(1, 10, 100)
    assert accept(ObjectiveVector(4, 50, 500), cur, best, archive, 1.0, rng, cur) is Decision.NEW_LOCAL_BEST
    assert accept(ObjectiveVector(0, 60, 600), cur, best, archive, 1.0, rng, cur) is Decision.ARCHIVE_ADD
    for _ in range(50):
        assert accept(cur, cur, cur, archive, 1e-9, rng, cur) is Decision.METROPOLIS_ACCEPT


def test_metropolis_rate_falls_with_temperature():
    archive = ParetoArchive()
    cur = ObjectiveVector(5, 50, 500)
    best = ObjectiveVector(1, 10, 100)
    worse = ObjectiveVector(6, 55, 510)
    archive.offer(None, best)

    def rate(temp):
        rng = random.Random(7)
        hits = sum(accept(worse, cur, best, archive, temp, rng, cur) is Decision.METROPOLIS_ACCEPT
                   for _ in range(10_000))
        return hits / 10_000

    hot, cold = rate(1.0), rate(0.1)
    assert cold < hot
    delta = (6 / 5 + 0.2 * 55 / 50 + 0.05 * 510 / 500) - 1.25
    assert hot == pytest.approx(math.exp(-delta / 1.0), abs=0.02)


def test_archive_keeps_a_mutually_non_dominating_set():
    archive = ParetoArchive()
    rnd = random.Random(3)
    for _ in range(300):
        archive.offer(None, ObjectiveVector(*(rnd.randint(0, 9) for _ in range(3))))
        objs = archive.objectives()
        assert len(set(objs)) == len(objs)
        assert not any(dominates(a, b) for a in objs for b in objs)


# -- reward and Q-learning ---------------------------------------------------------


CFG = SolverConfig(global_weight=0.8, outer_iterations=400)


def test_reward_worked_example():
    stats = EpisodeStats(r_prev=50, r_best_prev=100, r=50, r_best=90, action=1)
    assert calculate_reward(stats, 10, CFG) == pytest.approx(0.002, abs=1e-15)


def test_reward_without_improvement_or_history_is_zero():
    assert calculate_reward(EpisodeStats(50, 100, 50, 100, 1), 10, CFG) == 0.0


def test_reward_opportunity_cost_branch():
    stats = EpisodeStats(50, 100, 50, 100, action=1, history={1: 0.9, 2: 0.05})
    assert calculate_reward(stats, 20, CFG) == pytest.approx(-0.0025, abs=1e-15)


def test_reward_zero_one_and_literal_modes():
    stats = EpisodeStats(50, 100, 50, 90, 1)
    assert calculate_reward(stats, 10, CFG.replace(reward_mode="zero_one")) == 1.0
    assert calculate_reward(stats, 10, CFG.replace(reward_sign="literal")) == 0.0


def test_reward_zero_denominator_guard():
    assert calculate_reward(EpisodeStats(0, 0, 0, 0, 1), 5, CFG) == 0.0


def test_q_update_worked_example():
    q = QTable((2, 9, 11))
    q.action = 9
    q.update(0.4, 1, 0.5, 0.7)
    assert q.q(0, 9) == pytest.approx(0.2)
    assert q.state == 1


def test_pure_exploration_and_exploitation():
    q = QTable((1, 2, 3), epsilon=1.0)
    rng = random.Random(0)
    counts = Counter(q.choose(rng, 1.0) for _ in range(3000))
    assert all(900 < c < 1100 for c in counts.values())
    g = QTable((1, 2, 3), epsilon=0.0)
    g.values[0] = [0.1, 0.5, 0.3]
    assert {g.choose(rng, 0.99) for _ in range(100)} == {2}
    g.values[0] = [0.5, 0.5, 0.3]
    assert g.greedy(0) == 1


def test_q_step_sets_state_and_decays_epsilon():
    q = QTable((1, 2), epsilon=1.0)
    rng = random.Random(1)
    for k in range(1, 51):
        q_step(q, 0.1, improved=k % 2 == 0, rng=rng, config=SolverConfig(epsilon_decay=0.97))
        assert q.state == (1 if k % 2 == 0 else 0)
        assert q.epsilon == pytest.approx(0.97**k, abs=1e-12)


# -- search --------------------------------------------------------------------------


def test_single_truck_search_returns_the_optimum():
    inst = build_instance([("I", 0, 10, {0: 4})], areas=[(0, 1)], unit_handle_time=2.0)
    rep = solve(inst, SolverConfig(outer_iterations=1, learning_loop=1, non_improve_limit=1))
    assert rep.best == Solution.from_sequences([U], [[0]])
    assert tuple(rep.best_objectives) == (2.0, 12.0, 4.0)


def test_search_is_deterministic(instance):
    a, b = solve(instance, SMALL.replace(seed=4)), solve(instance, SMALL.replace(seed=4))
    assert a.to_json() == b.to_json()
    assert a.to_json() != solve(instance, SMALL.replace(seed=5)).to_json()


@pytest.mark.parametrize("variant", ["QALNS", "RLNS", "SALNS"])
def test_report_invariants(instance, variant):
    rep = solve(instance, SMALL.replace(variant=variant, action_set=tuple(range(1, 17)), perturbation="random"))
    assert len(rep.trace) == SMALL.outer_iterations
    trace = rep.best_scalar_trace()
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    objs = [o for _, o in rep.archive]
    assert not any(dominates(a, b) for a in objs for b in objs)
    for sol, obj in rep.archive:
        assert [v for v in check_feasibility(instance, sol) if v.severity == "error"] == []
    assert all(abs(row["reward"]) <= 2 for row in rep.trace)
    assert all(math.isfinite(v) for row in (rep.q_values or []) for v in row)


def test_epsilon_decays_once_per_learning_call(instance):
    cfg = SMALL.replace(epsilon_decay=0.9)
    rep = solve(instance, cfg)
    calls = sum(row["policy"] == "q" for row in rep.trace)
    assert calls == cfg.outer_iterations - cfg.learning_loop + 1
    assert [row["policy"] for row in rep.trace[: cfg.learning_loop - 1]] == ["random"] * (cfg.learning_loop - 1)


def test_random_selection_is_uniform(instance):
    cfg = SolverConfig(variant="RLNS", outer_iterations=300, learning_loop=10, non_improve_limit=1)
    counts = Counter(row["action"] for row in solve(instance, cfg).trace)
    sigma = math.sqrt(300 * (1 / 3) * (2 / 3))
    assert set(counts) == {2, 9, 11}
    assert all(abs(c - 100) <= 3 * sigma for c in counts.values())


def test_fixed_action_never_consults_the_q_table(instance):
    rep = solve(instance, SMALL.replace(variant="FixedAction", fixed_action=2))
    assert {row["action"] for row in rep.trace} == {2}
    assert {row["policy"] for row in rep.trace} == {"fixed"}
    assert rep.q_values is None and rep.label == "ALNS_2"


def test_roulette_weights_stay_a_distribution(instance):
    rep = solve(instance, SMALL.replace(variant="SALNS", action_set=(1, 2, 3, 10)))
    assert all(w > 0 for w in rep.salns_weights.values())
    assert sum(rep.salns_weights.values()) == pytest.approx(1.0)


def test_fix_and_mix_keep_their_modes(instance):
    for strategy in ("Fix", "Mix"):
        rep = solve(instance, SMALL.replace(strategy=strategy, action_set=tuple(range(1, 17))))
        assert list(rep.best.modes) == initial_modes(instance, strategy)


def test_archive_matches_oracle_on_tiny_instances():
    hits = 0
    for seed in range(5):
        inst = generate_instance(GeneratorConfig(dock_count=2, truck_count=4, seed=seed))
        front = sorted(tuple(o) for _, o in enumerate_pareto(inst))
        rep = solve(inst, SolverConfig(outer_iterations=200, seed=seed, perturbation="random",
                                       perturb_from="archive"))
        found = sorted(tuple(o) for _, o in rep.archive)
        hits += len(found) == len(front) and all(
            all(abs(x - y) <= 0.01 + 1e-9 for x, y in zip(a, b)) for a, b in zip(found, front))
    assert hits >= 4


@pytest.mark.parametrize("changes, fragment", [
    ({"epsilon": 1.5}, "epsilon"),
    ({"learning_loop": 500}, "learning_loop"),
    ({"action_set": (0,)}, "action_set"),
    ({"perturbation": "P0"}, "perturbation"),
    ({"variant": "FixedAction"}, "fixed_action"),
    ({"reward_norm": 0}, "reward_norm"),
])
def test_config_validation(changes, fragment):
    with pytest.raises(ConfigError, match=fragment):
        SolverConfig(**changes)


def test_config_from_mapping():
    cfg = SolverConfig.from_mapping({"variant": "FixedAction(7)", "action_set": "all", "seed": 3})
    assert (cfg.variant, cfg.fixed_action, cfg.action_set, cfg.seed) == ("FixedAction", 7, tuple(range(1, 17)), 3)
    assert cfg.norm == cfg.outer_iterations
    with pytest.raises(ConfigError, match="unknown"):
        SolverConfig.from_mapping({"epsilonn": 1})
    assert SolverConfig.from_mapping(SMALL.to_dict()) == SMALL
