import numpy as np
import pytest

from stablecir import ModelSpec, build_density, simulate_path

ALPHAS = (1.1, 1.3, 1.5, 1.7, 1.9)


@pytest.fixture(scope="session")
def density_cache(tmp_path_factory):
    return tmp_path_factory.mktemp("density")


@pytest.fixture(scope="session")
def get_law(density_cache):
    laws = {}

    def get(alpha):
        if alpha not in laws:
            laws[alpha] = build_density(alpha, cache_dir=density_cache)
        return laws[alpha]

    return get


@pytest.fixture(scope="session")
def law15(get_law):
    return get_law(1.5)


@pytest.fixture(scope="session")
def truth():
    """The reference point used throughout: x0 = 1, theta = (1, 0.5, 0.3), q = alpha = 1.5."""
    return ModelSpec(a1=1.0, a2=0.5, a3=0.3, q=1.5, alpha=1.5, eps=0.0, x0=1.0)


@pytest.fixture(scope="session")
def path500(truth):
    n = 500
    eps = n ** (1 / 1.5 - 1)
    spec = ModelSpec(**{**truth.to_dict(), "eps": eps})
    return simulate_path(spec, n, substeps=8, rng=np.random.default_rng(11)), eps


def pytest_terminal_summary(terminalreporter):
    from .helpers import acceptance_lines

    lines = acceptance_lines()
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
