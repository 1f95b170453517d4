import numpy as np
import pytest

from coefrand.core import Dataset


def random_dataset(rng, T=None, demean=True, hetero=False):
    """A persistent-predictor regression sample with some coefficient noise."""
    T = int(rng.integers(20, 200)) if T is None else T
    e = rng.standard_normal((T + 1, 3))
    x = np.zeros(T + 1)
    rho = rng.uniform(0.5, 0.99)
    for t in range(1, T + 1):
        x[t] = rho * x[t - 1] + e[t, 0]
    scale = np.exp(0.5 * e[1:, 2]) if hetero else 1.0
    y = rng.normal() * x[:-1] + (0.3 * e[1:, 2]) * x[:-1] + scale * e[1:, 1]
    return Dataset.from_arrays(y, x[:-1], demean=demean)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def acceptance_log(capsys):
    def record(key, ok, detail):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        line = f"{key}: {status}  {detail}"
        ACCEPTANCE_LINES[key] = line
        with capsys.disabled():
            print("\n" + line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
