import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hansim.workload import parse_scenario  # noqa: E402


def scenario_text(body, duration="5h", seed=0, mode="both"):
    return f"[scenario]\nduration = {duration}\nseed = {seed}\nmode = {mode}\n\n{body}"


@pytest.fixture
def four_devices():
    """Four 1 kW appliances (15 min / 30 min) that all ask for power at t=0."""
    return parse_scenario(scenario_text(
        "[devices]\nd = type2 power=1 min_dcd=15min max_dcp=30min count=4\n"
        "[arrivals]\nd = explicit on@0\n"
    ))


# (criterion, verdict, detail) lines collected by tests/test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
