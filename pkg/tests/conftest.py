import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.skipped:  # skip markers fire during setup, not call
        print(f"\nACCEPTANCE SKIP  {name}")
    elif report.when == "call":
        print(f"\nACCEPTANCE {'PASS' if report.passed else 'FAIL'}  {name}")
