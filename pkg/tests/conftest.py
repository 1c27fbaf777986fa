import numpy as np
import pytest

from return_intervals.ingest import MinuteSeries
from return_intervals.synth import SynthSpec, generate_correlated, minute_prices

_acceptance = []


def pytest_runtest_makereport(item, call):
    if call.when != "call":
        return
    crit = item.get_closest_marker("criterion")
    if crit is not None:
        outcome = "PASS" if call.excinfo is None else "FAIL"
        _acceptance.append((crit.args[0], crit.args[1], outcome))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, outcome in sorted(_acceptance):
        terminalreporter.write_line(f"[{outcome}] criterion {n:>2}: {title}")


def make_minute_series(symbol="SYN", n_days=60, alpha=0.8, seed=0, trades=600, start_price=50.0):
    length = 1 << int(np.ceil(np.log2(n_days * 389)))
    length = max(length, 4096)
    x = generate_correlated(SynthSpec(length, alpha, seed))
    prices = minute_prices(x, n_days, start_price=start_price)
    days = [f"2001-{1 + d // 28:02d}-{1 + d % 28:02d}" for d in range(n_days)]
    return MinuteSeries(symbol, days, prices, np.full(n_days, trades))


@pytest.fixture
def minute_series():
    return make_minute_series()


@pytest.fixture(scope="session")
def white_2_20():
    return generate_correlated(SynthSpec(2 ** 20, 0.5, 11))
