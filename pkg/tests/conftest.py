import os

import pytest
from hypothesis import HealthCheck, settings

from horncrit.classify import DomainSpec
from horncrit.profile import make_profile

settings.register_profile("suite", max_examples=100, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "suite"))


def domain(l, m, family, **kw):
    return DomainSpec(l, m, make_profile(family, **kw))


@pytest.fixture
def horn_half():
    return domain(1, 2, "power", gamma=0.5)


@pytest.fixture
def cylinder():
    return domain(1, 2, "constant", a=1.0)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
