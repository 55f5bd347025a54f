import numpy as np
import pytest

from finsler_torus import ConformalChart, ConstantChart, EuclideanNorm, PipelineConfig, RandersNorm, run_pipeline

_CRITERIA = {}


def record_criterion(number, passed, detail=""):
    """Store an acceptance outcome; the lines are printed in the terminal summary."""
    _CRITERIA[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


SMALL = dict(n_theta=64, n_x=49)


@pytest.fixture(scope="session")
def randers():
    return RandersNorm(np.eye(2), [0.3, 0.0])


@pytest.fixture(scope="session")
def conformal_chart():
    return ConformalChart(EuclideanNorm(), "0.1*x")


@pytest.fixture(scope="session")
def small_conformal(conformal_chart):
    """Pipeline on the conformal test patch at coarse grids (unit tests only)."""
    return run_pipeline(conformal_chart, PipelineConfig(**SMALL))


@pytest.fixture(scope="session")
def small_flat():
    return run_pipeline(ConstantChart(EuclideanNorm()), PipelineConfig(**SMALL))
