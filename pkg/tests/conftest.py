"""Shared fixtures and the acceptance-criteria summary.

Tests marked ``@pytest.mark.acceptance("<criterion>")`` back one acceptance
criterion each; the terminal summary prints a PASS/FAIL line per criterion
so the gate can be read off the bottom of a test run.
"""

from __future__ import annotations

import importlib.util
from pathlib import Path

import numpy as np
import pytest

from visii.backend import BackendConfig, load_backend
from visii.backend.synthetic import LinearSyntheticBackend
from visii.samples import sample_images, synthetic_scene

_ACCEPTANCE: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(criterion): test backing one acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    criterion = marker.args[0]
    if rep.when == "call":
        _ACCEPTANCE[criterion] = "PASS" if rep.passed else "FAIL"
    elif rep.when == "setup" and not rep.passed:
        _ACCEPTANCE[criterion] = "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, verdict in _ACCEPTANCE.items():
        terminalreporter.write_line(f"[ACCEPTANCE] {criterion}: {verdict}")


# --- fixtures ---------------------------------------------------------------


@pytest.fixture(scope="session")
def tiny_backend():
    return load_backend(BackendConfig())


@pytest.fixture(scope="session")
def synthetic_backend():
    return LinearSyntheticBackend()


@pytest.fixture(scope="session")
def scenes():
    return sample_images()


@pytest.fixture(scope="session")
def small_scene():
    """32x32 scene; still divisible by the 8-fold downscale, 4x cheaper."""
    return synthetic_scene(11, 32)


@pytest.fixture(scope="session")
def oracle_module():
    path = Path(__file__).parent / "oracles" / "metric_oracle.py"
    spec = importlib.util.spec_from_file_location("metric_oracle", path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


@pytest.fixture()
def rng():
    return np.random.default_rng(321)
