from pathlib import Path

import numpy as np
import pytest

from rpcasynth.panel import Panel, write_wide

FIXTURES = Path(__file__).parent / "fixtures"


def grouped_panel(seed=0, n_per_group=(6, 4, 3), n_years=30, t0=20, effect=-3.0, noise=0.3):
    """Three groups of units with distinct growth paths; unit 0 is treated.

    The treated unit follows the first group's path and drops by ``effect``
    after ``t0`` periods.
    """
    rng = np.random.default_rng(seed)
    years = np.arange(1960, 1960 + n_years, dtype=float)
    t = np.arange(n_years, dtype=float)
    paths = [10 + 0.8 * t, 4 + 0.3 * t + np.sin(t / 3), 20 + 1.5 * t]
    rows, labels = [], []
    for g, n in enumerate(n_per_group):
        for i in range(n):
            level = rng.uniform(0.9, 1.1)
            rows.append(level * paths[g] + noise * rng.standard_normal(n_years))
            labels.append(f"g{g}_u{i}")
    values = np.array(rows)
    values[0, t0:] += effect
    labels[0] = "treated"
    return Panel(values, np.ones(values.shape, bool), labels, years, treated=0, t0=t0)


def low_rank_plus_sparse(seed, n=50, rank=2, density=0.05, scale=10.0):
    """Rank-``rank`` Gaussian product plus uniform spikes on a random ``density`` share of cells."""
    rng = np.random.default_rng(seed)
    low = rng.standard_normal((n, rank)) @ rng.standard_normal((rank, n))
    sparse = np.zeros((n, n))
    idx = rng.choice(n * n, size=int(round(density * n * n)), replace=False)
    sparse.flat[idx] = rng.uniform(-scale, scale, size=idx.size)
    return low, sparse


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config._criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.skipped):
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        item.config._criteria.append((marker.args[0], status, marker.args[1]))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not config._criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title in sorted(config._criteria):
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")


@pytest.fixture
def panel3():
    return grouped_panel()


@pytest.fixture
def panel3_csv(tmp_path, panel3):
    path = tmp_path / "panel.csv"
    write_wide(panel3, path)
    return path
