import numpy as np
import pytest

from fedhealth.crypto import FixedPointCodec, keygen
from fedhealth.data import make_synthetic_har


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def keypair():
    return keygen(256, seed=7, allow_insecure=True)


@pytest.fixture(scope="session")
def other_keypair():
    return keygen(256, seed=8, allow_insecure=True)


@pytest.fixture(scope="session")
def codec(keypair):
    return FixedPointCodec(keypair.public_key.n)


@pytest.fixture(scope="session")
def small_har():
    """A few hundred synthetic windows covering all 30 subjects and 6 activities."""
    return make_synthetic_har(total_windows=1200, seed=3)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call":
        item.stash[ACCEPTANCE_CALL] = report


ACCEPTANCE_CALL = pytest.StashKey[object]()


@pytest.fixture
def criterion(request):
    """Collects a verdict line per acceptance criterion, printed in the terminal summary."""
    state = {"detail": ""}
    yield state
    report = request.node.stash.get(ACCEPTANCE_CALL, None)
    ok = report is not None and report.passed
    line = f"criterion {state['number']:>2}: {'PASS' if ok else 'FAIL'}  {state['name']}  {state['detail']}".rstrip()
    print(line)
    request.config.stash.setdefault(ACCEPTANCE, {})[state["number"]] = line


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
