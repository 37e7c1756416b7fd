import warnings

import numpy as np
import pytest

from excessmort.dataset import MonthlySeries, reconstructed_series
from excessmort.inference import SamplerConfig

_ACCEPTANCE: list[str] = []


@pytest.fixture
def record():
    """Append a one-line acceptance verdict to the end-of-run summary."""

    def _record(line: str) -> None:
        _ACCEPTANCE.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def fast_config():
    return SamplerConfig(n_chains=2, n_iterations=400, n_warmup=200, seed=11)


@pytest.fixture(scope="session")
def series():
    return reconstructed_series(1)


@pytest.fixture(scope="session")
def baseline_series(series):
    return series.select_years(range(2010, 2017))


def make_series(values, start=(2010, 1)):
    """Series of consecutive months starting at ``start``."""
    y, m = start
    entries = []
    for v in values:
        entries.append((y, m, int(v)))
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return MonthlySeries.from_entries(entries)


@pytest.fixture(autouse=True)
def _quiet_sampler_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", category=UserWarning, module="excessmort")
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
