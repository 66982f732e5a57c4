"""Destroy, repair, comprehensive and perturbation operators.

Every operator is a seeded transformation ``Solution -> Solution`` that keeps
the multiset of truck ids intact and never produces a mode-incompatible
assignment. Randomness comes from a caller-owned :class:`random.Random`.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .instance import Instance
from .schedule import DockMode, ObjectiveVector, Solution, decode, evaluate, scalarize

DESTROY_PRIMITIVES = ("rRd", "rMxTar", "rMxM")
REPAIR_PRIMITIVES = ("iBck", "iFwd", "iSwap", "iUp", "iDown", "iDockInsert", "iBtwInsert")
COMPREHENSIVE_PRIMITIVES = ("riInD2D", "riOuD2D", "riFlxD2D")


class NoCompatibleDock(RuntimeError):
    """A repair found no dock able to take the removed truck; the move should be rejected."""


@dataclass(frozen=True)
class LocalSearchAction:
    id: int
    destroy: str | None
    repair: str | None
    target: str
    comprehensive: str | None = None

    @property
    def name(self) -> str:
        if self.comprehensive:
            return self.comprehensive
        return f"{self.destroy}&{self.repair}"


@dataclass(frozen=True)
class PerturbationOp:
    id: str
    name: str
    target: DockMode


_SEQ = "Sequence Adjustment"
_DOCK = "Dock Adjustment"
_SEQ_DOCK = "Sequence & Dock Adjustment"
_DIST_DOCK = "Distance & Dock Adjustment"

ACTIONS: dict[int, LocalSearchAction] = {
    1: LocalSearchAction(1, "rRd", "iBck", _SEQ),
    2: LocalSearchAction(2, "rRd", "iFwd", _SEQ),
    3: LocalSearchAction(3, "rRd", "iSwap", _SEQ_DOCK),
    4: LocalSearchAction(4, "rRd", "iUp", _DOCK),
    5: LocalSearchAction(5, "rRd", "iDown", _DOCK),
    6: LocalSearchAction(6, "rMxTar", "iBck", _SEQ),
    7: LocalSearchAction(7, "rMxTar", "iSwap", _DIST_DOCK),
    8: LocalSearchAction(8, "rMxM", "iSwap", _DIST_DOCK),
    9: LocalSearchAction(9, "rMxM", "iUp", _SEQ_DOCK),
    10: LocalSearchAction(10, "rRd", "iDockInsert", _SEQ_DOCK),
    11: LocalSearchAction(11, "rRd", "iBtwInsert", _SEQ_DOCK),
    12: LocalSearchAction(12, "rMxTar", "iDockInsert", _SEQ_DOCK),
    13: LocalSearchAction(13, "rMxTar", "iBtwInsert", _SEQ_DOCK),
    14: LocalSearchAction(14, None, None, _DOCK, "riInD2D"),
    15: LocalSearchAction(15, None, None, _DOCK, "riOuD2D"),
    16: LocalSearchAction(16, None, None, _DOCK, "riFlxD2D"),
}

PERTURBATIONS: dict[str, PerturbationOp] = {
    "P1": PerturbationOp("P1", "Chn2I", DockMode.UNLOAD),
    "P2": PerturbationOp("P2", "Chn2F", DockMode.MIXED),
    "P3": PerturbationOp("P3", "Chn2O", DockMode.LOAD),
}


@dataclass(frozen=True)
class PartialSolution:
    """A solution with one truck taken out, remembering where it came from."""

    original: Solution
    sequences: tuple[tuple[int, ...], ...]
    truck: int
    dock: int
    position: int

    @property
    def modes(self) -> tuple[DockMode, ...]:
        return self.original.modes

    def insert(self, dock: int, position: int) -> Solution:
        seqs = list(self.sequences)
        seq = list(seqs[dock])
        seq.insert(position, self.truck)
        seqs[dock] = tuple(seq)
        return Solution.from_sequences(self.modes, seqs)

    def restore(self) -> Solution:
        return self.original


def truck_weighted_distance(instance: Instance, truck_id: int, dock: int) -> float:
    """Pallet-weighted handling distance of a truck served at dock index ``dock``."""
    return float(instance.handling_distance[instance.truck_index[truck_id], dock])


def compatible_docks(instance: Instance, modes: Sequence[DockMode], truck_id: int) -> list[int]:
    inbound = instance.truck(truck_id).inbound
    return [k for k, m in enumerate(modes) if m.serves(inbound)]


# -- destroy -------------------------------------------------------------------


def destroy(instance: Instance, solution: Solution, primitive: str, rng: random.Random) -> PartialSolution:
    ids = [t.id for t in instance.trucks]
    if not solution.assignment:
        raise ValueError("cannot destroy an empty solution")
    if primitive == "rRd":
        truck = ids[rng.randrange(len(ids))]
    elif primitive == "rMxTar":
        sched = decode(instance, solution, check=False)
        truck = max(ids, key=lambda t: (sched.delay[instance.truck_index[t]], -t))
    elif primitive == "rMxM":
        truck = max(ids, key=lambda t: (truck_weighted_distance(instance, t, solution.assignment[t]), -t))
    else:
        raise ValueError(f"unknown destroy primitive {primitive!r}")
    dock, pos = solution.position(truck)
    seqs = list(solution.sequences)
    seqs[dock] = seqs[dock][:pos] + seqs[dock][pos + 1 :]
    return PartialSolution(solution, tuple(seqs), truck, dock, pos)


# -- repair --------------------------------------------------------------------


def _rank(instance: Instance, modes: Sequence[DockMode], truck: int) -> list[int]:
    docks = compatible_docks(instance, modes, truck)
    return sorted(docks, key=lambda k: (truck_weighted_distance(instance, truck, k), k))


def repair(
    instance: Instance,
    partial: PartialSolution,
    primitive: str,
    rng: random.Random,
    baseline: ObjectiveVector | None = None,
) -> Solution:
    """Reinsert ``partial.truck`` according to ``primitive``.

    ``baseline`` normalizes the scalarized comparison used by iDockInsert; it
    defaults to the objectives of the pre-destroy solution.
    """
    truck, dock, pos = partial.truck, partial.dock, partial.position
    seq_len = len(partial.sequences[dock])  # without the removed truck

    if primitive == "iBck":
        return partial.insert(dock, max(pos - 1, 0))
    if primitive == "iFwd":
        return partial.insert(dock, pos + 1 if pos < seq_len else pos)
    if primitive == "iSwap":
        inbound = instance.truck(truck).inbound
        others = [t.id for t in instance.trucks if t.inbound == inbound and t.id != truck]
        if not others:
            return partial.restore()
        other = others[rng.randrange(len(others))]
        seqs = [list(s) for s in partial.original.sequences]
        k1, p1 = partial.original.position(truck)
        k2, p2 = partial.original.position(other)
        seqs[k1][p1], seqs[k2][p2] = other, truck
        return Solution.from_sequences(partial.modes, seqs)
    if primitive in ("iUp", "iDown"):
        ranked = _rank(instance, partial.modes, truck)
        r = ranked.index(dock)
        target = r - 1 if primitive == "iUp" else r + 1
        if not 0 <= target < len(ranked):
            return partial.restore()
        new_dock = ranked[target]
        return partial.insert(new_dock, len(partial.sequences[new_dock]))
    if primitive == "iDockInsert":
        if baseline is None:
            baseline = evaluate(instance, partial.original, check=False)
        best = scalarize(evaluate(instance, partial.original, check=False), baseline)
        best_sol = partial.original
        for p in range(seq_len + 1):
            if p == pos:
                continue
            cand = partial.insert(dock, p)
            val = scalarize(evaluate(instance, cand, check=False), baseline)
            if val < best:
                best, best_sol = val, cand
        return best_sol
    if primitive == "iBtwInsert":
        docks = [k for k in compatible_docks(instance, partial.modes, truck) if k != dock]
        if not docks:
            raise NoCompatibleDock(f"no other dock can serve truck {truck}")
        k = docks[rng.randrange(len(docks))]
        return partial.insert(k, rng.randrange(len(partial.sequences[k]) + 1))
    raise ValueError(f"unknown repair primitive {primitive!r}")


# -- comprehensive -------------------------------------------------------------

_COMPREHENSIVE_MODE = {"riInD2D": DockMode.UNLOAD, "riOuD2D": DockMode.LOAD, "riFlxD2D": DockMode.MIXED}


def comprehensive(instance: Instance, solution: Solution, primitive: str, rng: random.Random) -> tuple[Solution, bool]:
    """Exchange the whole truck sequences of two docks of one mode class.

    Returns ``(solution, applied)``; with fewer than two qualifying docks the
    input is returned unchanged and ``applied`` is False.
    """
    try:
        mode = _COMPREHENSIVE_MODE[primitive]
    except KeyError:
        raise ValueError(f"unknown comprehensive primitive {primitive!r}") from None
    docks = [k for k, m in enumerate(solution.modes) if m is mode]
    if len(docks) < 2:
        return solution, False
    k1, k2 = rng.sample(docks, 2)
    seqs = list(solution.sequences)
    seqs[k1], seqs[k2] = seqs[k2], seqs[k1]
    return Solution.from_sequences(solution.modes, seqs), True


# -- composition ---------------------------------------------------------------


def apply_action(
    instance: Instance,
    solution: Solution,
    action: LocalSearchAction | int,
    rng: random.Random,
    baseline: ObjectiveVector | None = None,
) -> tuple[Solution, bool]:
    """Run one local-search action; returns ``(candidate, moved)``."""
    if isinstance(action, int):
        action = ACTIONS[action]
    if action.comprehensive:
        result, applied = comprehensive(instance, solution, action.comprehensive, rng)
        return result, applied and result.sequences != solution.sequences
    partial = destroy(instance, solution, action.destroy, rng)
    try:
        result = repair(instance, partial, action.repair, rng, baseline=baseline)
    except NoCompatibleDock:
        return solution, False
    return result, result.sequences != solution.sequences


def perturb(
    instance: Instance, solution: Solution, op: PerturbationOp | str, rng: random.Random
) -> tuple[Solution, bool]:
    """Switch one random dock to ``op.target`` and rehome stranded trucks.

    Docks are tried in random order until one can change without leaving a
    truck direction without any capable dock; otherwise the input comes back
    with ``moved=False``.
    """
    if isinstance(op, str):
        op = PERTURBATIONS[op]
    has_in = any(instance.inbound_mask)
    has_out = not all(instance.inbound_mask)
    order = list(range(instance.n_docks))
    rng.shuffle(order)
    for k in order:
        modes = list(solution.modes)
        modes[k] = op.target
        if has_in and not any(m.serves(True) for m in modes):
            continue
        if has_out and not any(m.serves(False) for m in modes):
            continue
        if modes == list(solution.modes):
            return solution, False
        seqs = [list(s) for s in solution.sequences]
        stranded = [t for t in seqs[k] if not op.target.serves(instance.truck(t).inbound)]
        seqs[k] = [t for t in seqs[k] if t not in stranded]
        for t in stranded:
            inbound = instance.truck(t).inbound
            options = [j for j, m in enumerate(modes) if m.serves(inbound)]
            seqs[options[rng.randrange(len(options))]].append(t)
        return Solution.from_sequences(modes, seqs), True
    return solution, False
