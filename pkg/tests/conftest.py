import pytest

from stefankpp.model import ModelParams

# c*(mu=a=b=d=1) from tests/oracles/cstar_oracle.py (DOP853 + brentq), frozen.
CSTAR_ORACLE = 0.3643707233150328
# Z'_0(0) for a=b=d=1 from the same oracle; closed form 3**-0.5.
SLOPE0_ORACLE = 0.5773502691896226

ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def unit_params():
    return ModelParams()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
