"""Exhaustive Pareto front for tiny instances.

The evaluator here is a deliberate second implementation of the timing and
objective model, written from the raw instance fields, so that agreement with
:mod:`tasp_dmd.schedule` is a meaningful differential check.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from math import comb
from typing import Iterator

from .instance import Instance
from .schedule import DockMode, ObjectiveVector, Solution

MODE_ORDER = (DockMode.UNLOAD, DockMode.LOAD, DockMode.MIXED)


class StateSpaceTooLarge(RuntimeError):
    def __init__(self, states: int, limit: int):
        super().__init__(f"state space of {states} exceeds limit {limit}")
        self.states = states
        self.limit = limit


@dataclass(frozen=True)
class OracleLimits:
    max_states: int = 200_000


def _rising(m: int, n: int) -> int:
    """m (m+1) ... (m+n-1): ways to spread n labeled items over m ordered lists."""
    if n == 0:
        return 1
    if m == 0:
        return 0
    out = 1
    for j in range(n):
        out *= m + j
    return out


def _count_for_mode_counts(n_in: int, n_out: int, u: int, lo: int, mx: int) -> int:
    total = 0
    for a in range(n_in + 1):
        left_in = comb(n_in, a) * _rising(u, a)
        if not left_in:
            continue
        for b in range(n_out + 1):
            left_out = comb(n_out, b) * _rising(lo, b)
            if not left_out:
                continue
            total += left_in * left_out * _rising(mx, n_in - a + n_out - b)
    return total


def count_states(instance: Instance) -> int:
    """Number of (mode vector, assignment, per-dock order) states with compatible assignments."""
    n_in = sum(1 for t in instance.trucks if t.inbound)
    n_out = instance.n_trucks - n_in
    nd = instance.n_docks
    total = 0
    for u in range(nd + 1):
        for lo in range(nd - u + 1):
            mx = nd - u - lo
            vectors = math.factorial(nd) // (math.factorial(u) * math.factorial(lo) * math.factorial(mx))
            total += vectors * _count_for_mode_counts(n_in, n_out, u, lo, mx)
    return total


# -- independent evaluator -----------------------------------------------------


def _service_ticks(instance: Instance, truck, dock_pos: tuple[float, float], mixed: bool) -> int:
    areas = dict(instance.storage.areas)
    weighted = 0.0
    for ptype in sorted(truck.cargo):
        ax, ay = areas[instance.storage.placement[ptype]]
        dx = dock_pos[0] - ax
        dy = dock_pos[1] - ay
        weighted += truck.cargo[ptype] * math.sqrt(dx * dx + dy * dy)
    pallets = sum(truck.cargo.values())
    if instance.handling_term == "divide":
        handle = pallets / instance.unit_handle_time
    else:
        handle = pallets * instance.unit_handle_time
    ticks = int(round((handle + weighted / instance.agv_speed) * 100))
    if mixed:
        ticks += int(round(instance.mixed_reaction_time * 100))
    return ticks


def _weighted_distance(instance: Instance, truck, dock_pos: tuple[float, float]) -> float:
    areas = dict(instance.storage.areas)
    acc = 0.0
    for ptype in sorted(truck.cargo):
        ax, ay = areas[instance.storage.placement[ptype]]
        dx, dy = dock_pos[0] - ax, dock_pos[1] - ay
        acc += truck.cargo[ptype] * math.sqrt(dx * dx + dy * dy)
    return acc


def oracle_evaluate(instance: Instance, solution: Solution) -> ObjectiveVector:
    trucks = {t.id: t for t in instance.trucks}
    tardy = 0
    last = 0
    dist_terms = []
    for k, seq in enumerate(solution.sequences):
        pos = instance.docks[k].position
        mixed = solution.modes[k] == DockMode.MIXED
        clock = 0
        for tid in seq:
            truck = trucks[tid]
            begin = max(int(round(truck.arrival * 100)), clock)
            clock = begin + _service_ticks(instance, truck, pos, mixed)
            tardy += max(0, clock - int(round(truck.due * 100)))
            last = max(last, clock)
            dist_terms.append(_weighted_distance(instance, truck, pos))
    return ObjectiveVector(tardy / 100, last / 100, math.fsum(dist_terms))


# -- enumeration ---------------------------------------------------------------


def _orders(items: list[int]) -> Iterator[tuple[int, ...]]:
    return itertools.permutations(items)


def iter_solutions(instance: Instance) -> Iterator[Solution]:
    ids = [t.id for t in instance.trucks]
    inbound = [t.inbound for t in instance.trucks]
    nd = instance.n_docks
    for modes in itertools.product(MODE_ORDER, repeat=nd):
        options = [[k for k in range(nd) if modes[k].serves(inbound[i])] for i in range(len(ids))]
        if any(not o for o in options):
            continue
        for assign in itertools.product(*options):
            groups = [[ids[i] for i in range(len(ids)) if assign[i] == k] for k in range(nd)]
            for seqs in itertools.product(*(list(_orders(g)) for g in groups)):
                yield Solution.from_sequences(modes, seqs)


def _weakly_dominated(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    return all(y <= x for x, y in zip(a, b))


def enumerate_pareto(instance: Instance, limits: OracleLimits = OracleLimits()) -> list[tuple[Solution, ObjectiveVector]]:
    """Exact non-dominated set, one representative per objective vector, sorted by objectives."""
    states = count_states(instance)
    if states > limits.max_states:
        raise StateSpaceTooLarge(states, limits.max_states)
    best: dict[ObjectiveVector, Solution] = {}
    for sol in iter_solutions(instance):
        obj = oracle_evaluate(instance, sol)
        kept = best.get(obj)
        if kept is None or sol.sort_key() < kept.sort_key():
            best[obj] = sol
    points = list(best)
    front = [
        p for p in points if not any(q != p and _weakly_dominated(p, q) for q in points)
    ]
    front.sort()
    return [(best[p], p) for p in front]


def front_to_json(front: list[tuple[Solution, ObjectiveVector]]) -> str:
    rows = [{"objectives": list(obj), "solution": sol.encode()} for sol, obj in front]
    return json.dumps(rows, sort_keys=True) + "\n"
