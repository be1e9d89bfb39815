import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cepspin.collective_model import PresetParams, build_example_model

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_params():
    """g=2, omega=1, delta=1, no dephasing."""
    return PresetParams.from_delta(2.0, 1.0, 1.0)


@pytest.fixture
def unit_model(unit_params):
    return build_example_model(unit_params)


_ACCEPTANCE_LINES: dict = {}


@pytest.fixture(scope="session")
def criterion_log():
    """Record one verdict line per acceptance criterion."""
    def record(key, ok: bool, detail: str):
        line = f"criterion {key}: {'PASS' if ok else 'FAIL'} | {detail}"
        _ACCEPTANCE_LINES[key] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE_LINES, key=lambda k: int(k)):
        terminalreporter.write_line(_ACCEPTANCE_LINES[key])
