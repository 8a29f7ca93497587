import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ces2gad.graph import EdgeSet, MultiRelationGraph  # noqa: E402


def make_graph(n, edges, labels=None, features=None, relations=None, names=None):
    """Single-relation graph from ``edges``, or multi-relation from ``relations``."""
    rels = tuple(EdgeSet(n, e) for e in (relations if relations is not None else [edges]))
    return MultiRelationGraph(n, rels, features, labels, names)


TRIANGLE = [(0, 1), (0, 2), (1, 2)]
PATH3 = [(0, 1), (1, 2)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria record one line each; they are echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
