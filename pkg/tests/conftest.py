import numpy as np
import pytest


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return x.mean(axis=0), x.std(axis=0, ddof=1) / np.sqrt(x.shape[0])


def var_se(x):
    """Sample variance and its standard error from the spread of squared deviations."""
    x = np.asarray(x, dtype=float)
    dev2 = (x - x.mean(axis=0)) ** 2
    n = x.shape[0]
    return dev2.sum(axis=0) / (n - 1), dev2.std(axis=0, ddof=1) / np.sqrt(n)


def cov_se(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    prod = (x - x.mean(axis=0)) * (y - y.mean(axis=0))
    n = x.shape[0]
    return prod.sum(axis=0) / (n - 1), prod.std(axis=0, ddof=1) / np.sqrt(n)


def compound_moments(mu, M, p):
    """Oracle: mean/variance of Bin(G, p) for G with mean mu and variance mu (1 + mu/M)."""
    var_g = mu * (1 + mu / M)
    return p * mu, p * p * var_g + p * (1 - p) * mu


def pixel_oracle(p, t):
    """Per-pixel (var1, var2, cov) from the compound count law with explicit routing."""
    if p.kind == "twin":
        mu, q1, q2 = p.n2 / p.eta, p.eta * t, p.eta
        var_g = mu * (1 + mu / p.M)
        cov = q1 * q2 * var_g
    else:
        q = p.eta / 2
        mu, q1, q2 = p.n2 / q, q * t, q
        var_g = mu * (1 + mu / p.M)
        cov = q1 * q2 * (var_g - mu)
    d2 = p.delta_el ** 2
    return compound_moments(mu, p.M, q1)[1] + d2, compound_moments(mu, p.M, q2)[1] + d2, cov


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
