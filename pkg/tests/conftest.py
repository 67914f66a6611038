import numpy as np
import pytest

from bergman_lab.geometry import ModelSurface, build_family_weight, default_psi, zero_weight

# criterion id -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def cp1():
    return ModelSurface(1)


@pytest.fixture(scope="session")
def cp2():
    return ModelSurface(2)


@pytest.fixture(scope="session")
def fam05(cp1):
    return build_family_weight(cp1, 0.5, default_psi(1))


@pytest.fixture(scope="session")
def zero1():
    return zero_weight(1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
