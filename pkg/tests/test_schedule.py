import heapq
import random

import pytest
from hypothesis import given, strategies as st

from tasp_dmd.instance import GeneratorConfig, generate_instance
from tasp_dmd.oracle import oracle_evaluate
from tasp_dmd.schedule import (
    DockMode,
    ScheduleError,
    Solution,
    check_feasibility,
    decode,
    dock_utilization,
    dominates,
    evaluate,
    gantt_export,
    gantt_to_csv,
    scalarize,
)
from tasp_dmd.solver import initial_solution
from tests.conftest import build_instance

U, L, M = DockMode.UNLOAD, DockMode.LOAD, DockMode.MIXED


def single_truck(tau=1.0):
    # A=4 pallets, t_e=2, one meter to the area at unit AGV speed: AGV term 4
    return build_instance([("I", 0, 10, {0: 4})], areas=[(0, 1)], unit_handle_time=2.0, agv_speed=1.0,
                          mixed_reaction_time=tau)


def test_single_truck_hand_decode():
    inst = single_truck()
    sched = decode(inst, Solution.from_sequences([U], [[0]]))
    assert (sched.start[0], sched.duration[0], sched.end[0], sched.delay[0]) == (0, 1200, 1200, 200)
    assert tuple(evaluate(inst, Solution.from_sequences([U], [[0]]))) == (2.0, 12.0, 4.0)


def test_mixed_dock_adds_reaction_time():
    inst = single_truck(tau=1.0)
    sched = decode(inst, Solution.from_sequences([M], [[0]]))
    assert sched.duration[0] == 1300 and sched.delay[0] == 300


def test_divide_handling_term():
    inst = build_instance([("I", 0, 10, {0: 4})], areas=[(0, 1)], unit_handle_time=2.0, handling_term="divide")
    assert decode(inst, Solution.from_sequences([U], [[0]])).duration[0] == 600


def simulate_queue(inst, sol):
    """Event-driven replay of each dock queue; returns start and end minutes per truck id."""
    durations = {}
    for k, seq in enumerate(sol.sequences):
        for tid in seq:
            t = inst.truck(tid)
            travel = sum(n * ((inst.docks[k].position[0] - dict(inst.storage.areas)[inst.storage.placement[p]][0]) ** 2
                              + (inst.docks[k].position[1] - dict(inst.storage.areas)[inst.storage.placement[p]][1]) ** 2)
                         ** 0.5 for p, n in t.cargo.items()) / inst.agv_speed
            ticks = round((t.total_pallets * inst.unit_handle_time + travel) * 100)
            if sol.modes[k] is M:
                ticks += round(inst.mixed_reaction_time * 100)
            durations[tid] = ticks
    events = []
    for k, seq in enumerate(sol.sequences):
        if seq:
            heapq.heappush(events, (round(inst.truck(seq[0]).arrival * 100), 0, k, 0))
    start, end = {}, {}
    busy_until = [0] * inst.n_docks
    while events:
        time, kind, k, pos = heapq.heappop(events)
        tid = sol.sequences[k][pos]
        if kind == 0:  # head of queue is present and the dock is free
            begin = max(time, busy_until[k])
            start[tid] = begin
            heapq.heappush(events, (begin + durations[tid], 1, k, pos))
        else:
            end[tid] = time
            busy_until[k] = time
            if pos + 1 < len(sol.sequences[k]):
                nxt = sol.sequences[k][pos + 1]
                heapq.heappush(events, (max(time, round(inst.truck(nxt).arrival * 100)), 0, k, pos + 1))
    return start, end


def test_second_truck_waits_for_the_first():
    inst = build_instance([("I", 0, 50, {0: 4}), ("I", 1, 50, {0: 2})], areas=[(0, 1)], unit_handle_time=2.0)
    sol = Solution.from_sequences([U], [[0, 1]])
    sched = decode(inst, sol)
    start, end = simulate_queue(inst, sol)
    assert sched.start[1] == sched.end[0] == start[1] == end[0]


@pytest.mark.parametrize("seed", range(8))
def test_decode_matches_event_simulation(seed):
    inst = generate_instance(GeneratorConfig(dock_count=3, truck_count=15, seed=seed))
    rng = random.Random(seed)
    sol = initial_solution(inst, "Mix", rng)
    seqs = [list(s) for s in sol.sequences]
    for s in seqs:
        rng.shuffle(s)
    sol = Solution.from_sequences(sol.modes, seqs)
    sched = decode(inst, sol)
    start, end = simulate_queue(inst, sol)
    for i, t in enumerate(inst.trucks):
        assert (sched.start[i], sched.end[i]) == (start[t.id], end[t.id])


def test_all_on_time_gives_zero_tardiness():
    inst = build_instance([("I", 0, 100, {0: 1}), ("O", 0, 100, {0: 1})], docks=[(0, 0), (5, 0)])
    assert evaluate(inst, Solution.from_sequences([U, L], [[0], [1]])).tardiness == 0


@pytest.mark.parametrize("seed", range(10))
def test_matches_oracle_evaluator_on_small_instances(seed):
    inst = generate_instance(GeneratorConfig(dock_count=2, truck_count=4, seed=seed))
    rng = random.Random(seed)
    sol = initial_solution(inst, "Mix", rng)
    a, b = evaluate(inst, sol), oracle_evaluate(inst, sol)
    assert a.tardiness == pytest.approx(b.tardiness, abs=0.01)
    assert a.makespan == pytest.approx(b.makespan, abs=0.01)
    assert a.distance == pytest.approx(b.distance, rel=1e-12)


def test_feasibility_flags_capability_and_duplicates():
    inst = build_instance([("I", 0, 100, {0: 1}), ("O", 0, 100, {0: 1})], docks=[(0, 0), (5, 0)])
    bad_mode = Solution.from_sequences([L, L], [[0], [1]])
    kinds = {v.kind for v in check_feasibility(inst, bad_mode)}
    assert kinds == {"capability-inbound"}
    twice = Solution((U, L), ((0, 1), (1,)), {0: 0, 1: 1})
    assert {"assignment", "capability-outbound"} <= {v.kind for v in check_feasibility(inst, twice)}
    with pytest.raises(ScheduleError):
        decode(inst, twice)


def test_missing_truck_is_reported():
    inst = build_instance([("I", 0, 100, {0: 1}), ("I", 0, 100, {0: 1})])
    problems = check_feasibility(inst, Solution.from_sequences([U], [[0]]))
    assert [(v.kind, v.ids) for v in problems] == [("assignment", (1,))]


def test_horizon_is_a_warning_unless_hard():
    inst = build_instance([("I", 0, 10, {0: 4})], areas=[(0, 1)], unit_handle_time=2.0, horizon=11)
    sol = Solution.from_sequences([U], [[0]])
    (soft,) = check_feasibility(inst, sol)
    assert (soft.kind, soft.severity) == ("horizon", "warning")
    (hard,) = check_feasibility(inst, sol, horizon_hard=True)
    assert hard.severity == "error"


@pytest.mark.parametrize("a, b, expected", [
    ((1, 2, 3), (1, 2, 3), False),
    ((0, 2, 3), (1, 2, 3), True),
    ((0, 5, 3), (1, 2, 3), False),
    ((1, 2, 3), (0, 5, 3), False),
])
def test_dominates(a, b, expected):
    assert dominates(a, b) is expected


def test_scalarize_examples():
    base = (10.0, 100.0, 1000.0)
    assert scalarize(base, base) == pytest.approx(1.25)
    assert scalarize((0, 0, 0), base) == 0
    assert scalarize((5.0, 100.0, 1000.0), base) < scalarize(base, base)


@given(st.tuples(*[st.floats(0, 1e4)] * 3), st.integers(0, 2), st.floats(0.01, 100))
def test_scalarize_is_strictly_monotone(o, k, bump):
    base = (50.0, 500.0, 5000.0)
    worse = list(o)
    worse[k] += bump
    assert scalarize(worse, base) > scalarize(o, base)


def test_back_to_back_dock_is_fully_used():
    # two trucks of 5 minutes each, second arrives at 5
    inst = build_instance([("I", 0, 100, {0: 10}), ("I", 5, 100, {0: 10})], areas=[(0, 0)],
                          docks=[(0, 0), (9, 9)])
    util = dock_utilization(inst, Solution.from_sequences([U, U], [[0, 1], []]))
    assert util == [1.0, 0.0]


def test_gantt_records():
    inst = single_truck()
    (rec,) = gantt_export(inst, Solution.from_sequences([U], [[0]]))
    assert rec == {"dock": 0, "truck": 0, "direction": "Inbound", "start": 0.0, "end": 12.0, "mode": "UnloadOnly"}
    big = generate_instance(GeneratorConfig(dock_count=3, truck_count=20, seed=2))
    records = gantt_export(big, initial_solution(big))
    assert len(records) == 20
    for a, b in zip(records, records[1:]):
        if a["dock"] == b["dock"]:
            assert a["end"] <= b["start"]
    assert gantt_to_csv(records).count("\n") == 21


def test_decode_is_deterministic():
    inst = generate_instance(GeneratorConfig(seed=9))
    sol = initial_solution(inst)
    assert decode(inst, sol) == decode(inst, sol)


def test_solution_encoding_round_trip():
    sol = Solution.from_sequences([U, M], [[2, 0], [1]])
    assert Solution.decode_dict(sol.encode()) == sol
    assert sol.position(0) == (0, 1)
