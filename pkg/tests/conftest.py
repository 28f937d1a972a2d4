import numpy as np
import pytest
from hypothesis import strategies as st

from bqt.statevector import PureState

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@st.composite
def coefficient_pairs(draw):
    parts = draw(
        st.lists(st.floats(-1, 1, allow_nan=False, allow_infinity=False), min_size=4, max_size=4)
    )
    v = np.array([parts[0] + 1j * parts[1], parts[2] + 1j * parts[3]])
    norm = np.linalg.norm(v)
    if norm < 1e-3:
        v, norm = np.array([1.0, 0.0]), 1.0
    v = v / norm
    return complex(v[0]), complex(v[1])


@st.composite
def two_term_supports(draw, n=None):
    n = n if n is not None else draw(st.sampled_from([2, 3]))
    x = draw(st.integers(0, 2**n - 1))
    y = draw(st.integers(0, 2**n - 1).filter(lambda v: v != x))
    return format(x, f"0{n}b"), format(y, f"0{n}b")


@st.composite
def random_states(draw, labels=("q0", "q1", "q2")):
    n = len(labels)
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return PureState(tuple(labels), v / np.linalg.norm(v))
