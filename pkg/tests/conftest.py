import pytest

from ctmg_nets import SolverConfig, build_running_example, solve


@pytest.fixture(scope="session")
def running():
    return build_running_example()


@pytest.fixture(scope="session")
def running_solve_l2(running):
    return solve(running, SolverConfig(2, 4.0, precision=1e-6), record="full")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
