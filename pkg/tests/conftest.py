import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from febe.core import kinematics_from_energy, snv_center  # noqa: E402


@pytest.fixture(scope="session")
def kin60():
    return kinematics_from_energy(60e3)


@pytest.fixture(scope="session")
def snv():
    return snv_center()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
