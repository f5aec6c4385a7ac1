"""Shared fixtures. Trained models are built once per session through the
same cached context the ``reproduce`` recipes use."""

import numpy as np
import pytest

from rcdyn import experiments


@pytest.fixture(scope="session")
def ctx(tmp_path_factory):
    return experiments.Context(tmp_path_factory.mktemp("repro"), seed=0)


@pytest.fixture(scope="session")
def lorenz28_series():
    """Actual r=28 trajectory, T=2000 at dt=0.01."""
    return experiments.generate("lorenz28", 2000.0, seed=11)


@pytest.fixture(scope="session")
def small_model(lorenz28_series):
    """A cheap r=28 model for plumbing tests (N=300)."""
    from rcdyn import reservoir as res

    cfg = res.load_preset("lorenz28").replace(N=300)
    return res.train(cfg, lorenz28_series.slice(0, 60_000), L0=1000,
                     noise_amplitude=0.003 * lorenz28_series.samples.std(axis=0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)



# --- acceptance verdicts -------------------------------------------------------

def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance_lines(request):
    return request.config._acceptance_lines


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
