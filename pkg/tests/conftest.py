from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spindarboux import TimeGrid

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> list of (part, ok, detail)
CRITERIA: dict[int, list] = {}


@pytest.fixture
def record():
    """Register one checked claim of an acceptance criterion, then return ``ok``."""

    def _record(criterion: int, part: str, ok: bool, detail: str) -> bool:
        CRITERIA.setdefault(criterion, []).append((part, bool(ok), detail))
        print(f"criterion {criterion} [{part}]: {'PASS' if ok else 'FAIL'} {detail}")
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c in sorted(CRITERIA):
        parts = CRITERIA[c]
        ok = all(p[1] for p in parts)
        tr.write_line(f"criterion {c:2d}: {'PASS' if ok else 'FAIL'}")
        for part, pok, detail in parts:
            tr.write_line(f"    {'ok  ' if pok else 'FAIL'} {part}: {detail}")


@pytest.fixture
def grid_short():
    return TimeGrid(0.0, 10.0, 801)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
