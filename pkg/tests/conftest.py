import numpy as np
import pytest
from hypothesis import strategies as st

angles = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)


def random_density_matrix(rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


@st.composite
def density_matrices(draw, dim: int = 2):
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return random_density_matrix(np.random.default_rng(seed), dim)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
