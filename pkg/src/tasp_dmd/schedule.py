"""Decoding solutions into timed schedules and evaluating them."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Sequence

from .instance import TICKS_PER_MINUTE, Instance


class DockMode(str, Enum):
    UNLOAD = "UnloadOnly"
    LOAD = "LoadOnly"
    MIXED = "Mixed"

    def serves(self, inbound: bool) -> bool:
        if self is DockMode.MIXED:
            return True
        return (self is DockMode.UNLOAD) == inbound


class ScheduleError(ValueError):
    """A solution is structurally invalid for its instance."""


@dataclass(frozen=True)
class Solution:
    """Dock modes plus per-dock truck sequences.

    ``sequences[k]`` lists truck ids served at the k-th dock of the instance in
    processing order; ``assignment`` maps truck id to that dock index.
    """

    modes: tuple[DockMode, ...]
    sequences: tuple[tuple[int, ...], ...]
    assignment: Mapping[int, int]

    @classmethod
    def from_sequences(cls, modes: Iterable[DockMode], sequences: Iterable[Iterable[int]]) -> Solution:
        seqs = tuple(tuple(s) for s in sequences)
        assignment = {t: k for k, seq in enumerate(seqs) for t in seq}
        return cls(tuple(DockMode(m) for m in modes), seqs, assignment)

    def with_changes(self, modes=None, sequences=None) -> Solution:
        return Solution.from_sequences(
            self.modes if modes is None else modes,
            self.sequences if sequences is None else sequences,
        )

    def position(self, truck_id: int) -> tuple[int, int]:
        k = self.assignment[truck_id]
        return k, self.sequences[k].index(truck_id)

    def truck_ids(self) -> list[int]:
        return [t for seq in self.sequences for t in seq]

    def encode(self) -> dict:
        return {"modes": [m.value for m in self.modes], "sequences": [list(s) for s in self.sequences]}

    @classmethod
    def decode_dict(cls, data: Mapping) -> Solution:
        return cls.from_sequences((DockMode(m) for m in data["modes"]), data["sequences"])

    def sort_key(self) -> tuple:
        order = {DockMode.UNLOAD: 0, DockMode.LOAD: 1, DockMode.MIXED: 2}
        return (tuple(order[m] for m in self.modes), self.sequences)

    def __hash__(self) -> int:
        return hash((self.modes, self.sequences))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Solution):
            return NotImplemented
        return self.modes == other.modes and self.sequences == other.sequences and dict(
            self.assignment
        ) == dict(other.assignment)


class ObjectiveVector(NamedTuple):
    tardiness: float
    makespan: float
    distance: float


@dataclass(frozen=True)
class DecodedSchedule:
    """Per-truck timing in ticks, indexed like ``instance.trucks``."""

    start: tuple[int, ...]
    end: tuple[int, ...]
    delay: tuple[int, ...]
    duration: tuple[int, ...]
    dock: tuple[int, ...]

    def minutes(self, field_name: str, idx: int) -> float:
        return getattr(self, field_name)[idx] / TICKS_PER_MINUTE


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    ids: tuple[int, ...] = ()
    severity: str = "error"


def structural_violations(instance: Instance, solution: Solution) -> list[Violation]:
    out: list[Violation] = []
    n_docks = instance.n_docks
    if len(solution.modes) != n_docks:
        out.append(Violation("mode", f"expected {n_docks} dock modes, got {len(solution.modes)}"))
    if len(solution.sequences) != n_docks:
        out.append(Violation("sequence", f"expected {n_docks} dock sequences, got {len(solution.sequences)}"))
        return out

    seen: dict[int, int] = {}
    for k, seq in enumerate(solution.sequences):
        for t in seq:
            if t not in instance.truck_index:
                out.append(Violation("assignment", f"unknown truck {t} at dock index {k}", (t,)))
                continue
            if t in seen:
                if seen[t] == k:
                    out.append(Violation("sequence", f"truck {t} repeated in sequence of dock index {k}", (t,)))
                else:
                    out.append(
                        Violation("assignment", f"truck {t} appears at dock indices {seen[t]} and {k}", (t,))
                    )
                continue
            seen[t] = k
            if solution.assignment.get(t) != k:
                out.append(
                    Violation("assignment", f"truck {t} sequenced at dock index {k} but assigned to "
                              f"{solution.assignment.get(t)}", (t,))
                )
            if k < len(solution.modes):
                inbound = instance.truck(t).inbound
                if not solution.modes[k].serves(inbound):
                    kind = "capability-inbound" if inbound else "capability-outbound"
                    out.append(
                        Violation(kind, f"{'inbound' if inbound else 'outbound'} truck {t} on "
                                  f"{solution.modes[k].value} dock index {k}", (t, k))
                    )
    for t in instance.truck_index:
        if t not in seen:
            out.append(Violation("assignment", f"truck {t} is not sequenced at any dock", (t,)))
    for t in solution.assignment:
        if t not in instance.truck_index:
            out.append(Violation("assignment", f"assignment names unknown truck {t}", (t,)))
    return out


def decode(instance: Instance, solution: Solution, check: bool = True) -> DecodedSchedule:
    """Compute start/end/delay ticks by processing each dock's queue in order."""
    if check:
        problems = structural_violations(instance, solution)
        if problems:
            raise ScheduleError("; ".join(f"[{v.kind}] {v.message}" for v in problems))
    n = instance.n_trucks
    start = [0] * n
    end = [0] * n
    delay = [0] * n
    duration = [0] * n
    dock = [0] * n
    index = instance.truck_index
    arrival = instance.arrival_ticks
    due = instance.due_ticks
    base = instance.base_duration_ticks
    reaction = instance.reaction_ticks
    for k, seq in enumerate(solution.sequences):
        extra = reaction if solution.modes[k] is DockMode.MIXED else 0
        free = 0
        for t in seq:
            i = index[t]
            a = arrival[i] if arrival[i] > free else free
            h = int(base[i, k]) + extra
            e = a + h
            start[i], end[i], duration[i], dock[i] = a, e, h, k
            delay[i] = e - due[i] if e > due[i] else 0
            free = e
    return DecodedSchedule(tuple(start), tuple(end), tuple(delay), tuple(duration), tuple(dock))


def objectives_from_schedule(instance: Instance, schedule: DecodedSchedule) -> ObjectiveVector:
    hd = instance.handling_distance
    f3 = math.fsum(float(hd[i, k]) for i, k in enumerate(schedule.dock))
    return ObjectiveVector(
        sum(schedule.delay) / TICKS_PER_MINUTE,
        max(schedule.end) / TICKS_PER_MINUTE,
        f3,
    )


def evaluate(instance: Instance, solution: Solution, check: bool = True) -> ObjectiveVector:
    return objectives_from_schedule(instance, decode(instance, solution, check=check))


def check_feasibility(instance: Instance, solution: Solution, horizon_hard: bool = False) -> list[Violation]:
    """List every violated model constraint; empty iff the solution is fully feasible.

    Exceeding the planning horizon is reported with ``severity="warning"``
    unless ``horizon_hard`` is set.
    """
    out = structural_violations(instance, solution)
    if out:
        return out
    sched = decode(instance, solution, check=False)
    limit = round(instance.horizon * TICKS_PER_MINUTE)
    for i, truck in enumerate(instance.trucks):
        if sched.start[i] < instance.arrival_ticks[i]:
            out.append(Violation("release", f"truck {truck.id} starts before its arrival", (truck.id,)))
        if sched.end[i] > limit:
            out.append(
                Violation(
                    "horizon",
                    f"truck {truck.id} ends at {sched.end[i] / TICKS_PER_MINUTE} beyond horizon {instance.horizon}",
                    (truck.id,),
                    "error" if horizon_hard else "warning",
                )
            )
    for seq in solution.sequences:
        for prev, nxt in zip(seq, seq[1:]):
            i, j = instance.truck_index[prev], instance.truck_index[nxt]
            if sched.end[i] > sched.start[j]:
                out.append(Violation("overlap", f"trucks {prev} and {nxt} overlap", (prev, nxt)))
    return out


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """Pareto dominance for minimization."""
    strict = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strict = True
    return strict


DEFAULT_WEIGHTS = (1.0, 0.2, 0.05)


def scalarize(o: Sequence[float], baseline: Sequence[float], weights: Sequence[float] = DEFAULT_WEIGHTS) -> float:
    return sum(w * x / max(b, 1.0) for w, x, b in zip(weights, o, baseline))


def dock_utilization(instance: Instance, solution: Solution) -> list[float]:
    sched = decode(instance, solution)
    t_max = max(sched.end)
    busy = [0] * instance.n_docks
    for i, k in enumerate(sched.dock):
        busy[k] += sched.end[i] - sched.start[i]
    if t_max <= 0:
        return [0.0] * instance.n_docks
    return [b / t_max for b in busy]


def gantt_export(instance: Instance, solution: Solution) -> list[dict]:
    sched = decode(instance, solution)
    records = []
    for i, truck in enumerate(instance.trucks):
        k = sched.dock[i]
        records.append(
            {
                "dock": instance.docks[k].id,
                "truck": truck.id,
                "direction": truck.direction.value,
                "start": sched.start[i] / TICKS_PER_MINUTE,
                "end": sched.end[i] / TICKS_PER_MINUTE,
                "mode": solution.modes[k].value,
            }
        )
    records.sort(key=lambda r: (r["dock"], r["start"], r["truck"]))
    return records


GANTT_COLUMNS = ("dock", "truck", "direction", "start", "end", "mode")


def gantt_to_json(records: list[dict]) -> str:
    return json.dumps(records, sort_keys=True) + "\n"


def gantt_to_csv(records: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=GANTT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(records)
    return buf.getvalue()
