import pytest

from tasp_dmd.instance import Direction, DockSpec, Instance, StorageMap, TruckSpec


def build_instance(trucks, docks=((0.0, 0.0),), areas=((0.0, 4.0),), placement=None, *, unit_handle_time=0.5,
                   agv_speed=1.0, mixed_reaction_time=1.0, horizon=1000.0, handling_term="multiply", name="hand"):
    """Small hand-made instance. ``trucks`` holds (direction letter, arrival, due, cargo) tuples."""
    placement = placement or {0: 0}
    specs = [
        TruckSpec(i, Direction.INBOUND if d == "I" else Direction.OUTBOUND, float(a), float(due), dict(cargo))
        for i, (d, a, due, cargo) in enumerate(trucks)
    ]
    return Instance(
        docks=[DockSpec(k, tuple(p)) for k, p in enumerate(docks)],
        trucks=specs,
        storage=StorageMap(tuple((j, tuple(p)) for j, p in enumerate(areas)), dict(placement)),
        unit_handle_time=unit_handle_time,
        agv_speed=agv_speed,
        mixed_reaction_time=mixed_reaction_time,
        horizon=horizon,
        name=name,
        handling_term=handling_term,
    )


@pytest.fixture
def make_instance():
    return build_instance


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
