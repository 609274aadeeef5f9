import numpy as np
import pytest

from radialcr.likelihood import Dataset, fit
from radialcr.models import (
    bivariate_normal_model,
    linear_regression_model,
    benchmark_data,
    standardized_normal_data,
    trivariate_normal_model,
)

CHI2_2_010 = 4.605170185988091  # -2 ln 0.10
CHI2_3_010 = 6.2513886311703232  # mpmath CDF-integration oracle


@pytest.fixture
def square_data():
    return Dataset({"x": [0.0, 2.0, 0.0, 2.0], "y": [0.0, 0.0, 2.0, 2.0]})


@pytest.fixture
def isotropic_fit():
    """Bivariate normal with MLE mean 0, unit variances, zero correlation, n=10."""
    return fit(bivariate_normal_model(), standardized_normal_data(10, 2, seed=1))


@pytest.fixture
def sphere_fit():
    return fit(trivariate_normal_model(), standardized_normal_data(10, 3, seed=1))


@pytest.fixture
def bench_fit():
    return fit(bivariate_normal_model(), benchmark_data())


@pytest.fixture
def tiny_regression():
    return Dataset({"x": [0.0, 1.0, 2.0], "y": [0.0, 1.0, 3.0]})


@pytest.fixture
def regression_fit(tiny_regression):
    return fit(linear_regression_model(), tiny_regression)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One summary line per acceptance criterion, printed after the run.
_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE.items():
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{mark}] {name}")
