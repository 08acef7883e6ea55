import itertools
import math

import numpy as np
import pytest

from qmn.ensemble import Grid
from qmn.noncompactness import QuasimeasureParams


@pytest.fixture
def grid1():
    return Grid(1, 3.0, 31)


@pytest.fixture
def params1(grid1):
    return QuasimeasureParams.default(grid1)


def brute_kcenter(P, k):
    """Restricted k-center radius by plain enumeration."""
    P = np.unique(np.asarray(P, float).reshape(len(P), -1), axis=0)
    if k >= len(P):
        return 0.0
    best = math.inf
    for C in itertools.combinations(range(len(P)), k):
        d = np.linalg.norm(P[:, None, :] - P[None, list(C), :], axis=2).min(axis=1).max()
        best = min(best, d)
    return best


def brute_line(v, k):
    """Unrestricted 1-D k-center radius: best split into k contiguous runs."""
    v = np.unique(np.asarray(v, float))
    n = len(v)
    if k >= n:
        return 0.0
    best = math.inf
    for cuts in itertools.combinations(range(1, n), k - 1):
        bounds = (0, *cuts, n)
        r = max((v[b - 1] - v[a]) / 2 for a, b in zip(bounds[:-1], bounds[1:]))
        best = min(best, r)
    return best
