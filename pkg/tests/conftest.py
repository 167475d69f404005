from __future__ import annotations

import itertools

import numpy as np
import pytest

from quditqaoa import _kernels
from quditqaoa.problems import BUNDLED_GRAPH_N6


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    """Run a test once per kernel backend."""
    prev = _kernels.use_backend(request.param)
    yield request.param
    _kernels.use_backend(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def graph_test_set():
    """Every graph on up to 4 nodes plus seeded random graphs on 5 and 6 nodes."""
    graphs = []
    for n in range(1, 5):
        pairs = list(itertools.combinations(range(n), 2))
        for mask in range(2 ** len(pairs)):
            graphs.append((n, [e for b, e in enumerate(pairs) if mask >> b & 1]))
    gen = np.random.default_rng(1234)
    for n in (5, 6):
        pairs = list(itertools.combinations(range(n), 2))
        for _ in range(12):
            graphs.append((n, [e for e in pairs if gen.random() < 0.5]))
    graphs.append((6, list(BUNDLED_GRAPH_N6)))
    graphs.append((6, list(itertools.combinations(range(6), 2))))
    return graphs


_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
