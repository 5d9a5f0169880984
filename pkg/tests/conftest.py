import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from micv.dataset import Dataset  # noqa: E402
from micv.simulate import crt_like_scenario, generate  # noqa: E402


def mixed_dataset(n=80, seed=0, missing=0.25):
    """Two continuous and one binary predictor, missing cells in x1 and x3."""
    rng = np.random.default_rng(seed)
    x1 = rng.normal(size=n)
    x2 = 0.6 * x1 + rng.normal(scale=0.8, size=n)
    x3 = (rng.random(n) < 1 / (1 + np.exp(-x2))).astype(float)
    y = (rng.random(n) < 1 / (1 + np.exp(-(-0.3 + 0.9 * x1 - 0.5 * x3)))).astype(int)
    X = np.column_stack([x1, x2, x3])
    X[rng.random(n) < missing, 0] = np.nan
    X[rng.random(n) < missing, 2] = np.nan
    return Dataset.from_arrays(X, y, kinds=["continuous", "continuous", "binary"])


@pytest.fixture
def small_mixed():
    return mixed_dataset()


@pytest.fixture(scope="session")
def crt200():
    return generate(crt_like_scenario(n=200, rng_seed=5))


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 11):
        terminalreporter.write_line(ACCEPTANCE.get(number, f"criterion {number:>2} NOT RUN"))
