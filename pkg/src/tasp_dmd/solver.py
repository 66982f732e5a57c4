"""Q-learning guided adaptive large neighborhood search and its benchmark variants.

The search runs an outer loop of episodes. Each episode applies one
local-search action repeatedly (inner loop) until ``non_improve_limit``
non-improving moves accumulate, then the action's credit is updated and the
global best is perturbed to seed the next episode.
"""

from __future__ import annotations

import dataclasses
import json
import math
import random
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Sequence

from .instance import Instance, round_half_up
from .operators import ACTIONS, PERTURBATIONS, apply_action, perturb
from .schedule import (
    DEFAULT_WEIGHTS,
    DockMode,
    ObjectiveVector,
    Solution,
    dominates,
    evaluate,
    scalarize,
)

VARIANTS = ("QALNS", "RLNS", "SALNS", "FixedAction")
STRATEGIES = ("Adaptive", "Fix", "Mix")
DEFAULT_ACTION_SET = (2, 9, 11)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Search parameters. Defaults follow the tuned values; ``reward_norm=None`` means ``outer_iterations``."""

    temp_scale: float = 0.2
    epsilon: float = 1.0
    epsilon_decay: float = 0.99
    learning_rate: float = 0.5
    discount: float = 0.7
    non_improve_limit: int = 20
    global_weight: float = 0.8
    learning_loop: int = 200
    outer_iterations: int = 400
    reward_norm: float | None = None
    action_set: tuple[int, ...] = DEFAULT_ACTION_SET
    perturbation: str = "P1"
    perturb_from: str = "best"
    reward_mode: str = "value_based"
    reward_sign: str = "improvement"
    variant: str = "QALNS"
    fixed_action: int | None = None
    strategy: str = "Adaptive"
    cooling_rate: float = 0.99
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS
    salns_scores: tuple[float, float, float] = (5.0, 2.0, 1.0)
    salns_reaction: float = 0.8
    max_inner_iterations: int = 100_000
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "action_set", tuple(int(a) for a in self.action_set))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "salns_scores", tuple(float(w) for w in self.salns_scores))
        checks = [
            (0.0 <= self.epsilon <= 1.0, "epsilon must lie in [0, 1]"),
            (0.0 < self.epsilon_decay <= 1.0, "epsilon_decay must lie in (0, 1]"),
            (0.0 < self.learning_rate <= 1.0, "learning_rate must lie in (0, 1]"),
            (0.0 <= self.discount <= 1.0, "discount must lie in [0, 1]"),
            (self.non_improve_limit >= 1, "non_improve_limit must be >= 1"),
            (0.0 <= self.global_weight <= 1.0, "global_weight must lie in [0, 1]"),
            (self.outer_iterations >= 1, "outer_iterations must be >= 1"),
            (1 <= self.learning_loop <= self.outer_iterations, "learning_loop must lie in [1, outer_iterations]"),
            (self.reward_norm is None or self.reward_norm > 0, "reward_norm must be > 0"),
            (self.temp_scale > 0, "temp_scale must be > 0"),
            (0.0 < self.cooling_rate <= 1.0, "cooling_rate must lie in (0, 1]"),
            (len(self.action_set) >= 1, "action_set must not be empty"),
            (all(a in ACTIONS for a in self.action_set), "action_set ids must lie in 1..16"),
            (len(set(self.action_set)) == len(self.action_set), "action_set must not repeat ids"),
            (self.perturbation in (*PERTURBATIONS, "random"), "perturbation must be P1, P2, P3 or random"),
            (self.perturb_from in ("best", "archive"), "perturb_from must be best or archive"),
            (self.reward_mode in ("value_based", "zero_one"), "reward_mode must be value_based or zero_one"),
            (self.reward_sign in ("improvement", "literal"), "reward_sign must be improvement or literal"),
            (self.variant in VARIANTS, f"variant must be one of {VARIANTS}"),
            (self.strategy in STRATEGIES, f"strategy must be one of {STRATEGIES}"),
            (len(self.weights) == 3 and all(w > 0 for w in self.weights), "weights must be three positive numbers"),
            (0.0 < self.salns_reaction <= 1.0, "salns_reaction must lie in (0, 1]"),
            (self.max_inner_iterations >= 1, "max_inner_iterations must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        if self.variant == "FixedAction" and self.fixed_action not in ACTIONS:
            raise ConfigError("FixedAction variant needs fixed_action in 1..16")

    @property
    def norm(self) -> float:
        return float(self.reward_norm) if self.reward_norm is not None else float(self.outer_iterations)

    @property
    def label(self) -> str:
        if self.variant == "FixedAction":
            return f"ALNS_{self.fixed_action}"
        return self.variant

    def replace(self, **changes: Any) -> SolverConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for key in ("action_set", "weights", "salns_scores"):
            out[key] = list(out[key])
        return out

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> SolverConfig:
        data = dict(data)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown solver config keys: {sorted(unknown)}")
        if data.get("action_set") == "all":
            data["action_set"] = tuple(ACTIONS)
        variant = data.get("variant")
        if isinstance(variant, str) and variant.startswith("FixedAction(") and variant.endswith(")"):
            data["variant"] = "FixedAction"
            data["fixed_action"] = int(variant[len("FixedAction(") : -1])
        for key in ("action_set", "weights", "salns_scores"):
            if key in data:
                data[key] = tuple(data[key])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


# -- archive ---------------------------------------------------------------------


class ParetoArchive:
    """Mutually non-dominating (solution, objectives) pairs without duplicate vectors."""

    def __init__(self) -> None:
        self.entries: list[tuple[Solution, ObjectiveVector]] = []

    def __len__(self) -> int:
        return len(self.entries)

    def would_accept(self, obj: ObjectiveVector) -> bool:
        return not any(o == obj or dominates(o, obj) for _, o in self.entries)

    def offer(self, solution: Solution, obj: ObjectiveVector) -> bool:
        if not self.would_accept(obj):
            return False
        self.entries = [(s, o) for s, o in self.entries if not dominates(obj, o)]
        self.entries.append((solution, obj))
        return True

    def objectives(self) -> list[ObjectiveVector]:
        return sorted(o for _, o in self.entries)

    def snapshot(self) -> list[tuple[Solution, ObjectiveVector]]:
        return sorted(self.entries, key=lambda e: (e[1], e[0].sort_key()))


# -- Q-table -----------------------------------------------------------------------


class QTable:
    """Two-state action-value table with epsilon-greedy selection."""

    def __init__(self, actions: Sequence[int], epsilon: float = 1.0):
        self.actions = tuple(actions)
        self.values = [[0.0] * len(self.actions), [0.0] * len(self.actions)]
        self.state = 0
        self.epsilon = epsilon
        self.action = self.actions[0]
        self.calls = 0

    def q(self, state: int, action: int) -> float:
        return self.values[state][self.actions.index(action)]

    def update(self, reward: float, next_state: int, learning_rate: float, discount: float) -> None:
        col = self.actions.index(self.action)
        old = self.values[self.state][col]
        target = reward + discount * max(self.values[next_state])
        self.values[self.state][col] = old + learning_rate * (target - old)
        self.state = next_state

    def greedy(self, state: int) -> int:
        row = self.values[state]
        best = max(row)
        return min(a for a, v in zip(self.actions, row) if v == best)

    def choose(self, rng: random.Random, decay: float) -> int:
        self.epsilon *= decay
        self.calls += 1
        if rng.random() >= self.epsilon:
            self.action = self.greedy(self.state)
        else:
            self.action = self.actions[rng.randrange(len(self.actions))]
        return self.action


def q_step(qtable: QTable, reward: float, improved: bool, rng: random.Random, config: SolverConfig) -> int:
    """Credit the last action, move to the next state, decay epsilon and pick the next action."""
    qtable.update(reward, 1 if improved else 0, config.learning_rate, config.discount)
    return qtable.choose(rng, config.epsilon_decay)


# -- reward ----------------------------------------------------------------------


@dataclass
class EpisodeStats:
    """Scalarized objective snapshots around one episode plus per-action history.

    ``r_prev``/``r_best_prev`` are the current and global-best values before the
    episode, ``r``/``r_best`` the best values reached during it.
    """

    r_prev: float
    r_best_prev: float
    r: float
    r_best: float
    action: int
    history: dict[int, float] = field(default_factory=dict)
    global_improvement: dict[int, float] = field(default_factory=dict)
    successes: dict[int, int] = field(default_factory=dict)


def _ratio(num: float, den: float) -> float:
    return num / den if den != 0 else 0.0


def improvement_terms(stats: EpisodeStats, config: SolverConfig) -> tuple[float, float, float]:
    if config.reward_sign == "literal":
        d_global = max(_ratio(stats.r_best - stats.r_best_prev, stats.r_best_prev), 0.0)
        d_local = max(_ratio(stats.r - stats.r_prev, stats.r_prev), 0.0)
    else:
        d_global = max(_ratio(stats.r_best_prev - stats.r_best, stats.r_best_prev), 0.0)
        d_local = max(_ratio(stats.r_prev - stats.r, stats.r_prev), 0.0)
    eta = config.global_weight
    return d_global, d_local, eta * d_global + (1.0 - eta) * d_local


def opportunity_cost(stats: EpisodeStats) -> float:
    others = [v for a, v in stats.history.items() if a != stats.action]
    return max(others) if others else 0.0


def calculate_reward(stats: EpisodeStats, e: int, config: SolverConfig) -> float:
    d_global, d_local, d_improve = improvement_terms(stats, config)
    improved = d_global > 0 or d_local > 0
    if config.reward_mode == "zero_one":
        return 1.0 if improved else 0.0
    if improved:
        return d_improve * e / config.norm
    return (d_improve - opportunity_cost(stats)) * e / config.norm


# -- construction and acceptance ---------------------------------------------------


def _alternating(n: int) -> list[int]:
    return list(range(0, n, 2)) + list(range(1, n, 2))


def initial_modes(instance: Instance, strategy: str) -> list[DockMode]:
    n = instance.n_docks
    n_in = sum(instance.inbound_mask)
    n_out = instance.n_trucks - n_in
    if strategy == "Mix":
        return [DockMode.MIXED] * n
    if strategy == "Fix":
        k_in = round_half_up(n * n_in / instance.n_trucks)
        if (n_in and k_in == 0) or (n_out and k_in == n):
            raise ConfigError(
                f"Fix strategy leaves no dock for a truck direction ({n} docks, {n_in} inbound, {n_out} outbound)"
            )
        modes = [DockMode.LOAD] * n
        for k in _alternating(n)[:k_in]:
            modes[k] = DockMode.UNLOAD
        return modes
    if strategy != "Adaptive":
        raise ConfigError(f"unknown strategy {strategy!r}")
    if n_out == 0:
        return [DockMode.UNLOAD] * n
    if n_in == 0:
        return [DockMode.LOAD] * n
    if n == 1:
        return [DockMode.MIXED]
    share = n_in / instance.n_trucks
    u = max(1, math.floor(n * share))
    lo = max(1, math.floor(n * (1 - share)))
    while u + lo > n:
        if u >= lo:
            u -= 1
        else:
            lo -= 1
    order = _alternating(n)
    modes = [DockMode.MIXED] * n
    for k in order[:u]:
        modes[k] = DockMode.UNLOAD
    for k in order[len(order) - lo :]:
        modes[k] = DockMode.LOAD
    return modes


def initial_solution(instance: Instance, strategy: str = "Adaptive", rng: random.Random | None = None) -> Solution:
    """Strategy-dependent dock modes plus earliest-free-dock greedy assignment by arrival.

    The construction is deterministic; ``rng`` is accepted for interface symmetry.
    """
    modes = initial_modes(instance, strategy)
    free = [0] * instance.n_docks
    seqs: list[list[int]] = [[] for _ in modes]
    order = sorted(range(instance.n_trucks), key=lambda i: (instance.arrival_ticks[i], instance.trucks[i].id))
    for i in order:
        inbound = instance.inbound_mask[i]
        options = [k for k, m in enumerate(modes) if m.serves(inbound)]
        k = min(options, key=lambda j: (free[j], j))
        extra = instance.reaction_ticks if modes[k] is DockMode.MIXED else 0
        free[k] = max(free[k], instance.arrival_ticks[i]) + int(instance.base_duration_ticks[i, k]) + extra
        seqs[k].append(instance.trucks[i].id)
    return Solution.from_sequences(modes, seqs)


def initial_temperature(initial: ObjectiveVector, temp_scale: float, baseline: ObjectiveVector | None = None,
                        weights: Sequence[float] = DEFAULT_WEIGHTS) -> float:
    """``temp_scale * scalarized / ln 2``; the baseline defaults to ``initial`` itself."""
    value = scalarize(initial, initial if baseline is None else baseline, weights)
    return temp_scale * value / math.log(2.0)


class Decision(str, Enum):
    NEW_GLOBAL_BEST = "NewGlobalBest"
    NEW_LOCAL_BEST = "NewLocalBest"
    ARCHIVE_ADD = "ArchiveAdd"
    METROPOLIS_ACCEPT = "MetropolisAccept"
    REJECT = "Reject"


def accept(
    candidate: ObjectiveVector,
    current: ObjectiveVector,
    best: ObjectiveVector,
    archive: ParetoArchive,
    temperature: float,
    rng: random.Random,
    baseline: ObjectiveVector,
    weights: Sequence[float] = DEFAULT_WEIGHTS,
) -> Decision:
    """Classify a candidate; the caller applies the state changes.

    ArchiveAdd requires the candidate to be new to the archive, so re-offering
    an archived vector falls through to the Metropolis test.
    """
    if dominates(candidate, best):
        return Decision.NEW_GLOBAL_BEST
    if dominates(candidate, current):
        return Decision.NEW_LOCAL_BEST
    if not dominates(best, candidate) and archive.would_accept(candidate):
        return Decision.ARCHIVE_ADD
    delta = scalarize(candidate, baseline, weights) - scalarize(current, baseline, weights)
    u = rng.random()
    if delta <= 0:
        return Decision.METROPOLIS_ACCEPT
    if temperature <= 0:
        return Decision.REJECT
    return Decision.METROPOLIS_ACCEPT if u < math.exp(-delta / temperature) else Decision.REJECT


# -- run report ------------------------------------------------------------------


@dataclass
class RunReport:
    instance: str
    config: SolverConfig
    seed: int
    best: Solution
    best_objectives: ObjectiveVector
    archive: list[tuple[Solution, ObjectiveVector]]
    trace: list[dict]
    iterations_to_best: int
    evaluations: int
    q_values: list[list[float]] | None
    action_stats: dict[int, dict[str, float]]
    salns_weights: dict[int, float] | None = None
    wall_clock: float = 0.0
    seconds_to_best: float = 0.0

    @property
    def label(self) -> str:
        return self.config.label

    def best_scalar_trace(self) -> list[float]:
        return [row["best_scalarized"] for row in self.trace]

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "instance": self.instance,
            "variant": self.config.label,
            "strategy": self.config.strategy,
            "seed": self.seed,
            "config": self.config.to_dict(),
            "best": {"objectives": list(self.best_objectives), "solution": self.best.encode()},
            "archive": [{"objectives": list(o), "solution": s.encode()} for s, o in self.archive],
            "trace": self.trace,
            "iterations_to_best": self.iterations_to_best,
            "evaluations": self.evaluations,
            "q_values": self.q_values,
            "action_stats": {str(a): v for a, v in sorted(self.action_stats.items())},
            "salns_weights": None
            if self.salns_weights is None
            else {str(a): w for a, w in sorted(self.salns_weights.items())},
        }
        if include_timing:
            out["timing"] = {"wall_clock": self.wall_clock, "seconds_to_best": self.seconds_to_best}
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=1) + "\n"

    def summary_row(self, include_timing: bool = True) -> dict:
        f1, f2, f3 = self.best_objectives
        return {
            "instance": self.instance,
            "variant": self.config.label,
            "strategy": self.config.strategy,
            "seed": self.seed,
            "f1": f1,
            "f2": f2,
            "f3": round(f3, 6),
            "seconds": round(self.wall_clock, 4) if include_timing else 0.0,
            "seconds_to_best": round(self.seconds_to_best, 4) if include_timing else 0.0,
            "iterations_to_best": self.iterations_to_best,
        }


SUMMARY_COLUMNS = (
    "instance", "variant", "strategy", "seed", "f1", "f2", "f3", "seconds", "seconds_to_best", "iterations_to_best",
)


# -- search ------------------------------------------------------------------------


class _Roulette:
    """Score-based adaptive weights over the action set."""

    def __init__(self, actions: Sequence[int], reaction: float):
        self.actions = tuple(actions)
        self.weights = {a: 1.0 / len(self.actions) for a in self.actions}
        self.scores = {a: 0.0 for a in self.actions}
        self.uses = {a: 0 for a in self.actions}
        self.reaction = reaction

    def pick(self, rng: random.Random) -> int:
        x = rng.random() * sum(self.weights.values())
        acc = 0.0
        for a in self.actions:
            acc += self.weights[a]
            if x < acc:
                return a
        return self.actions[-1]

    def record(self, action: int, score: float) -> None:
        self.scores[action] += score
        self.uses[action] += 1

    def end_segment(self) -> None:
        for a in self.actions:
            if self.uses[a]:
                avg = self.scores[a] / self.uses[a]
                self.weights[a] = (1.0 - self.reaction) * self.weights[a] + self.reaction * avg
            self.scores[a] = 0.0
            self.uses[a] = 0
        total = sum(self.weights.values())
        self.weights = {a: w / total for a, w in self.weights.items()}


def _episode_score(decisions: set[Decision], scores: Sequence[float]) -> float:
    if Decision.NEW_GLOBAL_BEST in decisions:
        return scores[0]
    if Decision.NEW_LOCAL_BEST in decisions:
        return scores[1]
    if Decision.METROPOLIS_ACCEPT in decisions or Decision.ARCHIVE_ADD in decisions:
        return scores[2]
    return 0.0


def solve(instance: Instance, config: SolverConfig = SolverConfig()) -> RunReport:
    """Run the configured search variant and return its full report."""
    t0 = time.perf_counter()
    rng = random.Random(config.seed)
    weights = config.weights

    if config.variant == "FixedAction":
        actions: tuple[int, ...] = (int(config.fixed_action),)
    else:
        actions = config.action_set

    current = initial_solution(instance, config.strategy, rng)
    cur_obj = evaluate(instance, current)
    baseline = cur_obj
    best, best_obj = current, cur_obj
    evaluations = 1
    archive = ParetoArchive()
    archive.offer(current, cur_obj)

    def scal(o: ObjectiveVector) -> float:
        return scalarize(o, baseline, weights)

    qtable = QTable(actions, config.epsilon) if config.variant == "QALNS" else None
    roulette = _Roulette(actions, config.salns_reaction) if config.variant == "SALNS" else None
    history: dict[int, float] = {}
    gi = {a: 0.0 for a in actions}
    successes = {a: 0 for a in actions}
    trace: list[dict] = []
    iterations_to_best = 0
    seconds_to_best = 0.0
    perturbing = config.strategy == "Adaptive"

    for e in range(1, config.outer_iterations + 1):
        r_prev = scal(cur_obj)
        r_best_prev = scal(best_obj)
        r_cur, r_best = r_prev, r_best_prev

        if config.variant == "FixedAction":
            action, policy = actions[0], "fixed"
        elif config.variant == "SALNS":
            action, policy = roulette.pick(rng), "roulette"
        elif config.variant == "QALNS" and e >= config.learning_loop:
            action, policy = qtable.choose(rng, config.epsilon_decay), "q"
        else:
            action, policy = actions[rng.randrange(len(actions))], "random"
        if qtable is not None:
            qtable.action = action

        non_improve = 0
        inner = 0
        temperature = config.temp_scale * scal(cur_obj) / math.log(2.0)
        start_temperature = temperature
        decisions: set[Decision] = set()
        while non_improve < config.non_improve_limit and inner < config.max_inner_iterations:
            inner += 1
            cand, moved = apply_action(instance, current, action, rng, baseline)
            if moved:
                cand_obj = evaluate(instance, cand, check=False)
                evaluations += 1
            else:
                cand_obj = cur_obj
            decision = accept(cand_obj, cur_obj, best_obj, archive, temperature, rng, baseline, weights)
            if moved:
                archive.offer(cand, cand_obj)
            decisions.add(decision)
            if decision is Decision.NEW_GLOBAL_BEST:
                best, best_obj = cand, cand_obj
                current, cur_obj = cand, cand_obj
                r_best = scal(best_obj)
                r_cur = min(r_cur, scal(cur_obj))
            elif decision is Decision.NEW_LOCAL_BEST:
                current, cur_obj = cand, cand_obj
                r_cur = min(r_cur, scal(cur_obj))
            elif decision is Decision.ARCHIVE_ADD:
                pass
            elif decision is Decision.METROPOLIS_ACCEPT:
                current, cur_obj = cand, cand_obj
                non_improve += 1
            else:
                non_improve += 1
            temperature *= config.cooling_rate

        stats = EpisodeStats(r_prev, r_best_prev, r_cur, r_best, action, dict(history))
        d_global, _, d_improve = improvement_terms(stats, config)
        reward = calculate_reward(stats, e, config)
        history[action] = max(history.get(action, 0.0), d_improve)
        if d_global > 0:
            gi[action] += d_global
            successes[action] += 1
        improved = r_best < r_best_prev
        if improved:
            iterations_to_best = e
            seconds_to_best = time.perf_counter() - t0
        if qtable is not None:
            qtable.update(reward, 1 if improved else 0, config.learning_rate, config.discount)
        if roulette is not None:
            roulette.record(action, _episode_score(decisions, config.salns_scores))
            if e % config.learning_loop == 0:
                roulette.end_segment()

        trace.append(
            {
                "iteration": e,
                "action": action,
                "policy": policy,
                "reward": reward,
                "state": qtable.state if qtable is not None else int(improved),
                "inner_iterations": inner,
                "temperature": start_temperature,
                "best": list(best_obj),
                "best_scalarized": r_best,
            }
        )

        if perturbing:
            op = config.perturbation
            if op == "random":
                op = ("P1", "P2", "P3")[rng.randrange(3)]
            if config.perturb_from == "archive":
                base, base_obj = archive.entries[rng.randrange(len(archive))]
            else:
                base, base_obj = best, best_obj
            current, moved = perturb(instance, base, op, rng)
            if moved:
                cur_obj = evaluate(instance, current, check=False)
                evaluations += 1
                archive.offer(current, cur_obj)
            else:
                cur_obj = base_obj
        else:
            current, cur_obj = best, best_obj

    return RunReport(
        instance=instance.name,
        config=config,
        seed=config.seed,
        best=best,
        best_objectives=best_obj,
        archive=archive.snapshot(),
        trace=trace,
        iterations_to_best=iterations_to_best,
        evaluations=evaluations,
        q_values=[list(row) for row in qtable.values] if qtable is not None else None,
        action_stats={a: {"global_improvement": gi[a], "successes": successes[a]} for a in actions},
        salns_weights=dict(roulette.weights) if roulette is not None else None,
        wall_clock=time.perf_counter() - t0,
        seconds_to_best=seconds_to_best,
    )


def solve_variant(instance: Instance, config: SolverConfig) -> RunReport:
    """Benchmark entry point; the variant is taken from ``config.variant``."""
    return solve(instance, config)
