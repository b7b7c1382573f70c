import pytest

from stratcap.grid import Grid, build_sublaplacian

_CACHE = {}


def operator(group="r1", points=64, half_width=1.0, boundary="dirichlet"):
    key = (group, points, half_width, boundary)
    if key not in _CACHE:
        _CACHE[key] = build_sublaplacian(Grid(group, points, half_width, boundary))
    return _CACHE[key]


@pytest.fixture
def r1_64():
    return operator("r1", 64)


@pytest.fixture
def r1_128():
    return operator("r1", 128)


@pytest.fixture
def r1_periodic():
    return operator("r1", 64, boundary="periodic")


@pytest.fixture
def r2_small():
    return operator("r2", 12)


@pytest.fixture
def h1_small():
    return operator("h1", 8)


# one line per acceptance criterion, shown after the test session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
