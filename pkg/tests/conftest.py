from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from bqpmc.core import Point, inst_a, inst_b, inst_c, load_instance

DATA = Path(__file__).parent / "data"


@pytest.fixture
def A():
    return inst_a()


@pytest.fixture
def B():
    return inst_b()


@pytest.fixture
def C():
    return inst_c()


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def box_points(inst, rng, n):
    return [Point(inst, rng.uniform(0, 1, inst.dim)) for _ in range(n)]


def loaded(name):
    return load_instance(DATA / f"{name}.json")


def random_network(rng, max_nodes=8, max_arcs=8, max_cap=2):
    from bqpmc.netflow import Network
    n = int(rng.integers(2, max_nodes + 1))
    net = Network(n)
    for _ in range(int(rng.integers(1, max_arcs + 1))):
        a, b = rng.choice(n, 2, replace=False)
        cap = int(rng.integers(1, max_cap + 1))
        lower = int(rng.integers(0, cap + 1)) if rng.random() < 0.2 else 0
        net.add_arc(int(a), int(b), cap, float(rng.integers(-5, 6)), lower)
    return net


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
