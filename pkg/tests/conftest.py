import numpy as np
import pytest
from hypothesis import settings

from noisealg.probspace import SigmaField, sign_cube
from noisealg.scenarios import classical_signs

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def two_signs():
    return classical_signs(2)


@pytest.fixture
def three_signs():
    return classical_signs(3)


@pytest.fixture
def counter_space():
    """Uniform signs on two coordinates, with the three-block field x1."""
    space, (xi1, xi2) = sign_cube(2)
    x1 = SigmaField.from_blocks(space, [[0, 1], [2], [3]])
    return space, xi1, xi2, x1


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        name, ok, detail = results[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {name} ({detail})")
