import numpy as np
import pytest

from esta.models import make_model


@pytest.fixture(scope="session")
def two_level():
    return make_model("two_level")


@pytest.fixture(scope="session")
def single():
    return make_model("single_transport")


@pytest.fixture(scope="session")
def two_ion():
    return make_model("two_ion")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def report(request):
    """Record one pass/fail line for an acceptance criterion and echo it."""
    lines = request.config.acceptance_lines

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
