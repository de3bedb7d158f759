import pytest

from qreflect import DEFAULT_CATALOG, PotentialModel


@pytest.fixture(scope="session")
def rb_si():
    return DEFAULT_CATALOG.pair("Rb87", "Si")


@pytest.fixture(scope="session")
def rb_hot_env(rb_si):
    """Rb/Si with a 1200 K environment over a 300 K surface, tabulated."""
    return PotentialModel(rb_si, 300.0, 1200.0).tabulated()


@pytest.fixture(scope="session")
def rb_room(rb_si):
    return PotentialModel(rb_si, 300.0, 300.0).tabulated()


@pytest.fixture(scope="session")
def rb_cold(rb_si):
    return PotentialModel(rb_si, 0.0, 0.0).tabulated()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(number, passed, detail)."""
    log = request.config.__dict__.setdefault("_qreflect_acceptance", {})

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        log[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = getattr(config, "_qreflect_acceptance", None)
    if log:
        terminalreporter.section("acceptance criteria")
        for number in sorted(log):
            terminalreporter.write_line(log[number])
