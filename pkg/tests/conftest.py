import sys

import numpy as np
import pytest

from coevo.network import ModelParams, make_family


def random_instance(rng, n=None, lo=0.05):
    """Random strongly connected two-layer network with random per-node weights."""
    n = int(rng.integers(3, 13)) if n is None else n
    net = make_family("random_regularized", n, seed=int(rng.integers(2**31)),
                      density=float(rng.uniform(0.1, 0.6)))
    params = ModelParams(rng.uniform(lo, 1.0, n), rng.uniform(lo, 1.0, n))
    return net, params


def random_subset(rng, n, p=None):
    p = rng.uniform(0, 0.5) if p is None else p
    return frozenset(np.flatnonzero(rng.random(n) < p).tolist())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.VERDICTS):
        terminalreporter.write_line(mod.VERDICTS[k])
