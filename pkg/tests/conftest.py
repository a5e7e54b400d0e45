import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

import helpers  # noqa: E402


@pytest.fixture
def small_ds():
    return helpers.small_dataset()


@pytest.fixture(scope="session")
def break_ds():
    from evograph.synth import synth_dataset

    ds, _ = synth_dataset(200, 64, 0.3, seed=11)
    return ds


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
