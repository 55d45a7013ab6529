import numpy as np
import pytest

from cellphase.profiles import build_profile


@pytest.fixture(scope="session")
def profile():
    return build_profile(40.0, 0.01)


@pytest.fixture(scope="session")
def coarse_profile():
    return build_profile(40.0, 0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_report(pytestconfig):
    """Mapping ``criterion number -> (passed, detail)`` printed at the end of the run."""
    return pytestconfig.stash.setdefault(_ACCEPTANCE, {})


def pytest_terminal_summary(terminalreporter, config):
    report = config.stash.get(_ACCEPTANCE, {})
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(report):
        passed, detail = report[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
