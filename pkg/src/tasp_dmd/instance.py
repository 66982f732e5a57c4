"""Problem instances: data model, validation, JSON I/O and a seeded generator.

Times are minutes with at most two fractional digits. Internally the decoder
works on integer ticks of 0.01 min, see :data:`TICKS_PER_MINUTE`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

TICKS_PER_MINUTE = 100

# Instance scales of the ten-instance benchmark suite: (docks, trucks).
SUITE_SCALES: tuple[tuple[int, int], ...] = (
    (3, 20),
    (4, 30),
    (5, 50),
    (6, 60),
    (7, 70),
    (8, 100),
    (8, 130),
    (9, 160),
    (9, 180),
    (10, 200),
)


class InstanceError(ValueError):
    """Raised when an instance violates one of its invariants."""


class Direction(str, Enum):
    INBOUND = "Inbound"
    OUTBOUND = "Outbound"


def to_ticks(minutes: float) -> int:
    return int(round(minutes * TICKS_PER_MINUTE))


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class TruckSpec:
    id: int
    direction: Direction
    arrival: float
    due: float
    cargo: Mapping[int, int]

    @property
    def total_pallets(self) -> int:
        return sum(self.cargo.values())

    @property
    def inbound(self) -> bool:
        return self.direction is Direction.INBOUND


@dataclass(frozen=True)
class DockSpec:
    id: int
    position: tuple[float, float]


@dataclass(frozen=True)
class StorageMap:
    areas: Sequence[tuple[int, tuple[float, float]]]
    placement: Mapping[int, int]

    def area_index(self, area_id: int) -> int:
        for idx, (aid, _) in enumerate(self.areas):
            if aid == area_id:
                return idx
        raise KeyError(area_id)


@dataclass(frozen=True)
class Instance:
    """Immutable TASP-DMD problem data.

    ``handling_term`` selects how the per-pallet handling time enters a
    truck's service duration: ``"multiply"`` gives ``A_i * t_e`` (minutes per
    pallet times pallets), ``"divide"`` reproduces the literal ``A_i / t_e``.
    """

    docks: Sequence[DockSpec]
    trucks: Sequence[TruckSpec]
    storage: StorageMap
    unit_handle_time: float
    agv_speed: float
    mixed_reaction_time: float
    horizon: float
    name: str = ""
    handling_term: str = "multiply"

    def __post_init__(self) -> None:
        object.__setattr__(self, "docks", tuple(self.docks))
        object.__setattr__(self, "trucks", tuple(self.trucks))
        validate_instance(self)

    @property
    def n_docks(self) -> int:
        return len(self.docks)

    @property
    def n_trucks(self) -> int:
        return len(self.trucks)

    @cached_property
    def truck_index(self) -> dict[int, int]:
        return {t.id: i for i, t in enumerate(self.trucks)}

    def truck(self, truck_id: int) -> TruckSpec:
        return self.trucks[self.truck_index[truck_id]]

    @cached_property
    def distances(self) -> np.ndarray:
        return distance_matrix(self)

    @cached_property
    def handling_distance(self) -> np.ndarray:
        """Pallet-weighted distance of every truck at every dock, shape (trucks, docks).

        Entry ``[i, k]`` is ``sum_p h_ip * m(k, area(p))``, summed in ascending
        pallet-type order.
        """
        out = np.zeros((self.n_trucks, self.n_docks))
        area_idx = {aid: j for j, (aid, _) in enumerate(self.storage.areas)}
        for i, truck in enumerate(self.trucks):
            for k in range(self.n_docks):
                acc = 0.0
                for p in sorted(truck.cargo):
                    acc += truck.cargo[p] * float(self.distances[k, area_idx[self.storage.placement[p]]])
                out[i, k] = acc
        return out

    @cached_property
    def base_duration_ticks(self) -> np.ndarray:
        """Service time without the mixed-dock reaction term, in ticks, shape (trucks, docks)."""
        out = np.zeros((self.n_trucks, self.n_docks), dtype=np.int64)
        for i, truck in enumerate(self.trucks):
            if self.handling_term == "divide":
                handling = truck.total_pallets / self.unit_handle_time
            else:
                handling = truck.total_pallets * self.unit_handle_time
            for k in range(self.n_docks):
                agv = float(self.handling_distance[i, k]) / self.agv_speed
                out[i, k] = to_ticks(handling + agv)
        return out

    @cached_property
    def reaction_ticks(self) -> int:
        return to_ticks(self.mixed_reaction_time)

    @cached_property
    def arrival_ticks(self) -> tuple[int, ...]:
        return tuple(to_ticks(t.arrival) for t in self.trucks)

    @cached_property
    def due_ticks(self) -> tuple[int, ...]:
        return tuple(to_ticks(t.due) for t in self.trucks)

    @cached_property
    def inbound_mask(self) -> tuple[bool, ...]:
        return tuple(t.inbound for t in self.trucks)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return instance_to_dict(self) == instance_to_dict(other)

    def __hash__(self) -> int:
        return hash(json.dumps(instance_to_dict(self), sort_keys=True))


def validate_instance(inst: Instance) -> None:
    """Raise :class:`InstanceError` naming the first violated invariant."""
    if len(inst.docks) < 1:
        raise InstanceError("instance needs at least one dock")
    if len(inst.trucks) < 1:
        raise InstanceError("instance needs at least one truck")
    if not inst.unit_handle_time > 0:
        raise InstanceError("unit_handle_time must be > 0")
    if not inst.agv_speed > 0:
        raise InstanceError("agv_speed must be > 0")
    if not inst.mixed_reaction_time >= 0:
        raise InstanceError("mixed_reaction_time must be >= 0")
    if inst.handling_term not in ("multiply", "divide"):
        raise InstanceError(f"unknown handling_term {inst.handling_term!r}")

    dock_ids = [d.id for d in inst.docks]
    if len(set(dock_ids)) != len(dock_ids):
        raise InstanceError("dock ids must be unique")
    for d in inst.docks:
        if not all(math.isfinite(c) for c in d.position):
            raise InstanceError(f"dock {d.id}: position must be finite")

    area_ids = [a for a, _ in inst.storage.areas]
    if len(set(area_ids)) != len(area_ids):
        raise InstanceError("storage area ids must be unique")
    for aid, pos in inst.storage.areas:
        if not all(math.isfinite(c) for c in pos):
            raise InstanceError(f"area {aid}: position must be finite")
    for ptype, aid in inst.storage.placement.items():
        if aid not in area_ids:
            raise InstanceError(f"pallet type {ptype} placed in unknown area {aid}")

    truck_ids = [t.id for t in inst.trucks]
    if len(set(truck_ids)) != len(truck_ids):
        raise InstanceError("truck ids must be unique")
    for t in inst.trucks:
        if not t.arrival >= 0:
            raise InstanceError(f"truck {t.id}: arrival must be >= 0")
        if not t.due > t.arrival:
            raise InstanceError(f"truck {t.id}: due must be > arrival")
        if not t.cargo:
            raise InstanceError(f"truck {t.id}: cargo must be non-empty")
        for ptype, count in t.cargo.items():
            if count < 1:
                raise InstanceError(f"truck {t.id}: pallet count for type {ptype} must be >= 1")
            if ptype not in inst.storage.placement:
                raise InstanceError(f"truck {t.id}: pallet type {ptype} has no storage area")
    max_due = max(t.due for t in inst.trucks)
    if not inst.horizon > max_due:
        raise InstanceError(f"horizon {inst.horizon} must exceed the latest due time {max_due}")


def distance_matrix(instance: Instance) -> np.ndarray:
    """Euclidean dock-to-area distances in meters, shape (docks, areas)."""
    docks = np.array([d.position for d in instance.docks], dtype=float)
    areas = np.array([pos for _, pos in instance.storage.areas], dtype=float)
    dx = docks[:, None, 0] - areas[None, :, 0]
    dy = docks[:, None, 1] - areas[None, :, 1]
    return np.sqrt(dx * dx + dy * dy)


# -- serialization -----------------------------------------------------------


def _minutes(x: float) -> float:
    return round(float(x), 2)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "docks": [{"id": d.id, "position": [float(d.position[0]), float(d.position[1])]} for d in inst.docks],
        "trucks": [
            {
                "id": t.id,
                "direction": t.direction.value,
                "arrival": _minutes(t.arrival),
                "due": _minutes(t.due),
                "cargo": {str(p): int(c) for p, c in sorted(t.cargo.items())},
            }
            for t in inst.trucks
        ],
        "storage": {
            "areas": [{"id": aid, "position": [float(pos[0]), float(pos[1])]} for aid, pos in inst.storage.areas],
            "placement": {str(p): a for p, a in sorted(inst.storage.placement.items())},
        },
        "params": {
            "name": inst.name,
            "unit_handle_time": float(inst.unit_handle_time),
            "agv_speed": float(inst.agv_speed),
            "mixed_reaction_time": _minutes(inst.mixed_reaction_time),
            "horizon": _minutes(inst.horizon),
            "handling_term": inst.handling_term,
        },
    }


def instance_from_dict(data: Mapping) -> Instance:
    try:
        params = data["params"]
        docks = [DockSpec(int(d["id"]), (float(d["position"][0]), float(d["position"][1]))) for d in data["docks"]]
        trucks = [
            TruckSpec(
                id=int(t["id"]),
                direction=Direction(t["direction"]),
                arrival=_minutes(t["arrival"]),
                due=_minutes(t["due"]),
                cargo={int(p): int(c) for p, c in t["cargo"].items()},
            )
            for t in data["trucks"]
        ]
        storage = StorageMap(
            areas=tuple(
                (int(a["id"]), (float(a["position"][0]), float(a["position"][1]))) for a in data["storage"]["areas"]
            ),
            placement={int(p): int(a) for p, a in data["storage"]["placement"].items()},
        )
        return Instance(
            docks=docks,
            trucks=trucks,
            storage=storage,
            unit_handle_time=float(params["unit_handle_time"]),
            agv_speed=float(params["agv_speed"]),
            mixed_reaction_time=_minutes(params["mixed_reaction_time"]),
            horizon=_minutes(params["horizon"]),
            name=str(params.get("name", "")),
            handling_term=str(params.get("handling_term", "multiply")),
        )
    except InstanceError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InstanceError(f"malformed instance data: {exc!r}") from exc


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps_instance(instance), encoding="utf-8")


def load_instance(path: str | Path) -> Instance:
    """Read and validate an instance file.

    Raises ``json.JSONDecodeError`` for unparsable files and
    :class:`InstanceError` for schema or invariant violations.
    """
    text = Path(path).read_text(encoding="utf-8")
    return instance_from_dict(json.loads(text))


# -- generator ---------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs of the synthetic instance generator.

    ``horizon=None`` derives a horizon from the expected workload so that the
    docks run at roughly ``load_factor`` utilization over the arrival window.
    """

    dock_count: int = 3
    truck_count: int = 20
    inbound_fraction: float = 0.4
    pallet_type_count: int = 10
    horizon: float | None = None
    seed: int = 0
    area_count: int | None = None
    types_per_truck: tuple[int, int] = (1, 3)
    pallets_per_type: tuple[int, int] = (1, 8)
    slack: tuple[float, float] = (15.0, 45.0)
    arrival_window: float = 0.6
    load_factor: float = 0.9
    unit_handle_time: float = 0.5
    agv_speed: float = 50.0
    mixed_reaction_time: float = 2.0
    dock_spacing: float = 10.0
    area_spacing: float = 8.0
    aisle_offset: float = 12.0
    area_rows: int = 2
    name: str = ""

    def __post_init__(self) -> None:
        if self.dock_count < 1 or self.truck_count < 1 or self.pallet_type_count < 1:
            raise InstanceError("generator counts must be positive")
        if self.area_count is not None and self.area_count < 1:
            raise InstanceError("area_count must be positive")
        if not 0 < self.inbound_fraction < 1:
            raise InstanceError("inbound_fraction must lie in (0, 1)")
        if not 0 < self.arrival_window < 1:
            raise InstanceError("arrival_window must lie in (0, 1)")
        lo, hi = self.types_per_truck
        if not 1 <= lo <= hi:
            raise InstanceError("types_per_truck bounds must satisfy 1 <= lo <= hi")
        lo, hi = self.pallets_per_type
        if not 1 <= lo <= hi:
            raise InstanceError("pallets_per_type bounds must satisfy 1 <= lo <= hi")
        lo, hi = self.slack
        if not 0 < lo <= hi:
            raise InstanceError("slack bounds must satisfy 0 < lo <= hi")
        if self.horizon is not None and self.horizon <= 0:
            raise InstanceError("horizon must be positive")
        if self.load_factor <= 0 or self.area_rows < 1:
            raise InstanceError("load_factor and area_rows must be positive")


def _auto_horizon(cfg: GeneratorConfig, mean_distance: float) -> float:
    types = (cfg.types_per_truck[0] + cfg.types_per_truck[1]) / 2
    pallets = types * (cfg.pallets_per_type[0] + cfg.pallets_per_type[1]) / 2
    service = pallets * cfg.unit_handle_time + pallets * mean_distance / cfg.agv_speed
    horizon = cfg.truck_count * service / (cfg.arrival_window * cfg.load_factor * cfg.dock_count)
    # due dates must stay inside the horizon
    horizon = max(horizon, (cfg.slack[1] + 1.0) / (1.0 - cfg.arrival_window))
    return float(math.ceil(horizon / 10.0) * 10)


def generate_instance(config: GeneratorConfig) -> Instance:
    """Draw a synthetic instance; a pure function of ``config`` (PCG64 stream)."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    n_docks = config.dock_count
    n_areas = config.area_count or config.pallet_type_count

    docks = [DockSpec(k, (round(k * config.dock_spacing, 2), 0.0)) for k in range(n_docks)]
    span = (n_docks - 1) * config.dock_spacing
    rows = min(config.area_rows, n_areas)
    cols = math.ceil(n_areas / rows)
    areas = []
    for j in range(n_areas):
        row, col = divmod(j, cols)
        x = span * col / (cols - 1) if cols > 1 else span / 2
        y = config.aisle_offset + row * config.area_spacing
        areas.append((j, (round(x, 2), round(y, 2))))
    placement = {p: int(rng.integers(n_areas)) for p in range(config.pallet_type_count)}
    storage = StorageMap(tuple(areas), placement)

    mean_distance = 0.0
    for k in range(n_docks):
        for _, (x, y) in areas:
            mean_distance += math.hypot(docks[k].position[0] - x, y)
    mean_distance /= n_docks * n_areas
    horizon = config.horizon if config.horizon is not None else _auto_horizon(config, mean_distance)

    n_in = round_half_up(config.inbound_fraction * config.truck_count)
    directions = [Direction.INBOUND] * n_in + [Direction.OUTBOUND] * (config.truck_count - n_in)
    rng.shuffle(directions)
    trucks = []
    for i, direction in enumerate(directions):
        arrival = round(float(rng.uniform(0.0, config.arrival_window * horizon)), 2)
        slack = round(float(rng.uniform(*config.slack)), 2)
        n_types = int(rng.integers(config.types_per_truck[0], config.types_per_truck[1] + 1))
        n_types = min(n_types, config.pallet_type_count)
        types = sorted(int(p) for p in rng.choice(config.pallet_type_count, size=n_types, replace=False))
        cargo = {p: int(rng.integers(config.pallets_per_type[0], config.pallets_per_type[1] + 1)) for p in types}
        trucks.append(TruckSpec(i, direction, arrival, round(arrival + slack, 2), cargo))

    horizon = max(horizon, math.floor(max(t.due for t in trucks)) + 1.0)
    name = config.name or f"{n_docks}_{config.truck_count}_s{config.seed}"
    return Instance(
        docks=docks,
        trucks=trucks,
        storage=storage,
        unit_handle_time=config.unit_handle_time,
        agv_speed=config.agv_speed,
        mixed_reaction_time=config.mixed_reaction_time,
        horizon=round(float(horizon), 2),
        name=name,
    )


def suite_configs(seed: int = 0, **overrides) -> list[GeneratorConfig]:
    """Generator configs for the ten benchmark scales."""
    return [
        GeneratorConfig(dock_count=d, truck_count=t, seed=seed + idx, name=f"{d}_{t}", **overrides)
        for idx, (d, t) in enumerate(SUITE_SCALES)
    ]
