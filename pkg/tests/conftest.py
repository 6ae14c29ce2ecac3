import numpy as np
import pytest

from nhberry import FrameField, make_model


@pytest.fixture(scope="session")
def hyper():
    return make_model("pseudo_hermitian_hyperbolic")


@pytest.fixture(scope="session")
def hyper_frames(hyper):
    return FrameField(hyper)


@pytest.fixture(scope="session")
def qwz():
    return make_model("qwz", m=1.0)


def pt(lam, xi):
    return np.array([lam, xi], dtype=float)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checks")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("]")[1].split(".")[0])):
            terminalreporter.write_line(line)
