import numpy as np
import pytest

from imblab.data import TimeSeriesDataset, synth_two_patterns


def make_dataset(counts, n_dims=1, length=8, seed=0, name="toy"):
    """Random dataset with the given per-class counts."""
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(counts)), counts)
    values = rng.standard_normal((len(labels), n_dims, length))
    ids = [f"i{j}" for j in range(len(labels))]
    return TimeSeriesDataset(ids, labels, values, len(counts), name)


@pytest.fixture
def balanced8():
    return make_dataset([40] * 8, length=4)


@pytest.fixture(scope="session")
def two_patterns_small():
    return synth_two_patterns(30, 64, 0.3, seed=11)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
