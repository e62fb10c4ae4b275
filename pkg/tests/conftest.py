import numpy as np
import pytest

from ergocert.kernel import validate_kernel

TWO_STATE = [[0.9, 0.1], [0.2, 0.8]]


@pytest.fixture
def two_state():
    return validate_kernel(TWO_STATE, ["s0", "s1"])


@pytest.fixture
def lazy3():
    P = 0.5 * np.eye(3) + 0.5 * np.roll(np.eye(3), 1, axis=1)
    return validate_kernel(P)


@pytest.fixture
def cycle3():
    return validate_kernel(np.roll(np.eye(3), 1, axis=1))


def iid_kernel(pi):
    pi = list(pi)
    return validate_kernel([pi] * len(pi))


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
