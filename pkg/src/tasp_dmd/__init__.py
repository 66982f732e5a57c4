"""Truck-to-dock assignment and scheduling with dock mode decisions, solved by Q-learning guided ALNS."""

from .instance import (
    Direction,
    DockSpec,
    GeneratorConfig,
    Instance,
    InstanceError,
    StorageMap,
    TruckSpec,
    generate_instance,
    load_instance,
    save_instance,
    suite_configs,
)
from .oracle import StateSpaceTooLarge, count_states, enumerate_pareto, oracle_evaluate
from .schedule import (
    DockMode,
    ObjectiveVector,
    ScheduleError,
    Solution,
    check_feasibility,
    decode,
    dominates,
    evaluate,
    scalarize,
)
from .solver import ConfigError, ParetoArchive, QTable, RunReport, SolverConfig, solve

__version__ = "0.1.0"
