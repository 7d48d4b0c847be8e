import numpy as np
import pytest

from fracobstacle import DomainSpec, FracOperator, build_basis


@pytest.fixture(scope="session")
def basis16():
    return build_basis(DomainSpec.interval(16))


@pytest.fixture(scope="session")
def basis32():
    return build_basis(DomainSpec.interval(32))


@pytest.fixture(scope="session")
def basis2d():
    return build_basis(DomainSpec.rectangle(8, 6, 1.0, 0.75))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def hat(basis, height=0.2, centre=0.5):
    x = basis.nodes[:, 0]
    return np.maximum(0.0, height - np.abs(x - centre))


@pytest.fixture(scope="session")
def op_half(basis16):
    return FracOperator(basis16, 0.5)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
