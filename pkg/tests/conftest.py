import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mfspec.gibbs_metric import WeakGibbsMetric
from mfspec.potentials import LocallyConstant
from mfspec.sft import Sft

settings.register_profile("mfspec", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("mfspec")


@pytest.fixture(scope="session")
def full2():
    return Sft.full(2)


@pytest.fixture(scope="session")
def golden():
    return Sft.from_matrix([[1, 1], [1, 0]])


@pytest.fixture(scope="session")
def digit(full2):
    return LocallyConstant.digit(full2)


@pytest.fixture(scope="session")
def standard(full2):
    return WeakGibbsMetric.standard(full2)


@pytest.fixture(scope="session")
def nonuniform(full2):
    return WeakGibbsMetric(LocallyConstant.per_symbol(full2, [-np.log(2), -np.log(4)]))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
