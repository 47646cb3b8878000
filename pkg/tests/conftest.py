from __future__ import annotations

import numpy as np
import pytest

from mvpb.hierarchy import (
    Categorical,
    HierarchicalDistribution,
    MultiviewSample,
    Stump,
    VoterPool,
)


def sample(views, labels) -> MultiviewSample:
    return MultiviewSample.from_dense([np.asarray(v, dtype=float) for v in views], labels)


def hier(hyper, *per_view) -> HierarchicalDistribution:
    return HierarchicalDistribution(Categorical(hyper), tuple(Categorical(q) for q in per_view))


@pytest.fixture
def four_examples():
    """Two views, one feature each; labels (+1, +1, -1, -1)."""
    x1 = [[2.0], [1.0], [-1.0], [-2.0]]
    x2 = [[1.0], [-1.0], [-1.0], [1.0]]
    return sample([x1, x2], [1, 1, -1, -1])


@pytest.fixture
def two_by_two(four_examples):
    pool = VoterPool((
        (Stump(0, 0, 0.0), Stump(0, 0, 1.5)),
        (Stump(1, 0, 0.0), Stump(1, 0, 0.0, -1)),
    ))
    dist = hier([0.25, 0.75], [0.5, 0.5], [0.125, 0.875])
    return dist, pool, four_examples


@pytest.fixture
def diverse_perfect():
    """Three voters in three views, each wrong on a different third; the vote is always right."""
    y = np.array([1, 1, 1, -1, -1, -1])
    wrong = [(0, 3), (1, 4), (2, 5)]
    views = []
    for bad in wrong:
        col = y.astype(float).copy()
        col[list(bad)] *= -1
        views.append(col[:, None])
    S = sample(views, y)
    pool = VoterPool(tuple((Stump(v, 0, 0.0),) for v in range(3)))
    dist = hier([1 / 3] * 3, [1.0], [1.0], [1.0])
    return dist, pool, S


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
