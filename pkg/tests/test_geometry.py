import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial import ConvexHull

from qmn.geometry import (GeometryError, PointCloud, hausdorff_distance, hull_distance,
                          hull_projection, hull_samples, kcenter_radius, nonconvexity)

from conftest import brute_kcenter, brute_line

coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def clouds(dim=None, max_size=8):
    dims = st.just(dim) if dim else st.integers(1, 3)
    return dims.flatmap(lambda d: arrays(float, st.tuples(st.integers(1, max_size), st.just(d)), elements=coords))


def test_hausdorff_of_shifted_pair():
    assert hausdorff_distance([[0, 0], [1, 0]], [[0, 1], [1, 1]]) == 1.0
    assert hausdorff_distance([[0.0, 0.0]], [[1.0, 1.0]]) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_hausdorff_dimension_mismatch():
    with pytest.raises(GeometryError):
        hausdorff_distance([[0.0, 0.0]], [[1.0]])


@settings(max_examples=60, deadline=None)
@given(clouds(dim=2), clouds(dim=2), clouds(dim=2))
def test_hausdorff_metric_properties(A, B, C):
    ab = hausdorff_distance(A, B)
    assert ab == hausdorff_distance(B, A)
    assert hausdorff_distance(A, A) == 0.0
    assert ab <= hausdorff_distance(A, C) + hausdorff_distance(C, B) + 1e-12


def test_kcenter_small_cases():
    line = [[0.0], [1.0], [2.0], [3.0]]
    assert kcenter_radius(line, 2) == 1.0
    assert kcenter_radius(line, 2, mode="greedy", start=0) == 1.0
    assert kcenter_radius([[0.0], [1.0]], 1, mode="unrestricted") == 0.5
    assert kcenter_radius(line, 4) == 0.0


@settings(max_examples=80, deadline=None)
@given(clouds(max_size=9), st.integers(1, 4))
def test_exhaustive_matches_enumeration(A, k):
    assert kcenter_radius(A, k) == pytest.approx(brute_kcenter(A, k), abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(clouds(max_size=10), st.integers(1, 4))
def test_greedy_within_factor_two(A, k):
    exact = kcenter_radius(A, k)
    g = kcenter_radius(A, k, mode="greedy")
    assert exact - 1e-12 <= g <= 2 * exact + 1e-12


@settings(max_examples=80, deadline=None)
@given(arrays(float, st.integers(1, 9), elements=coords), st.integers(1, 4))
def test_unrestricted_line_matches_partition_oracle(v, k):
    r = kcenter_radius(v[:, None], k, mode="unrestricted")
    assert r == pytest.approx(brute_line(v, k), abs=1e-12)
    assert r <= kcenter_radius(v[:, None], k) + 1e-12


@settings(max_examples=40, deadline=None)
@given(clouds(max_size=7), st.integers(1, 3), st.randoms(use_true_random=False))
def test_kcenter_ignores_order_and_duplicates(A, k, rnd):
    idx = list(range(len(A))) + [rnd.randrange(len(A)) for _ in range(3)]
    rnd.shuffle(idx)
    B = A[idx]
    for mode in ("exhaustive", "greedy"):
        assert kcenter_radius(B, k, mode=mode) == kcenter_radius(A, k, mode=mode)


def test_kcenter_errors():
    with pytest.raises(GeometryError):
        kcenter_radius([[0.0]], 0)
    with pytest.raises(GeometryError):
        kcenter_radius([[0.0, 1.0]], 1, mode="unrestricted")
    with pytest.raises(GeometryError):
        kcenter_radius(np.arange(20.0)[:, None], 2, cap=14)
    with pytest.raises(GeometryError):
        kcenter_radius([[0.0]], 1, mode="nearest")


def test_pointcloud_rejects_empty():
    with pytest.raises(GeometryError):
        PointCloud(np.zeros((0, 2)))


def test_hull_distance_to_triangle():
    tri = [[0, 0], [1, 0], [0, 1]]
    assert hull_distance([1, 1], tri) == pytest.approx(math.sqrt(2) / 2, abs=1e-9)
    assert hull_distance([0.2, 0.2], tri) == pytest.approx(0.0, abs=1e-9)
    proj = hull_projection([1, 1], tri)
    assert proj.weights.sum() == pytest.approx(1.0)
    assert proj.gap <= 1e-9
    np.testing.assert_allclose(proj.point, [0.5, 0.5], atol=1e-9)


def test_hull_distance_rejects_nan():
    with pytest.raises(GeometryError):
        hull_distance([np.nan, 0.0], [[0, 0], [1, 1]])


def _segment_distance(p, a, b):
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0, 1)
    return np.linalg.norm(p - (a + t * ab))


@settings(max_examples=60, deadline=None)
@given(arrays(float, (6, 2), elements=st.floats(-5, 5)), arrays(float, 2, elements=st.floats(-8, 8)))
def test_hull_distance_matches_polygon_oracle(A, p):
    try:
        hull = ConvexHull(A)
    except Exception:
        return  # degenerate (collinear) sample; the polygon oracle needs area
    eq = hull.equations
    if (eq[:, :2] @ p + eq[:, 2] <= 1e-12).all():
        expect = 0.0
    else:
        V = A[hull.vertices]
        expect = min(_segment_distance(p, V[i], V[(i + 1) % len(V)]) for i in range(len(V)))
    assert hull_distance(p, A) == pytest.approx(expect, abs=1e-8)


def test_nonconvexity_known_values():
    assert abs(nonconvexity([[0.0], [1.0]], budget=10_000) - 0.5) <= 1e-6
    tri = [[0, 0], [1, 0], [0, 1]]
    assert abs(nonconvexity(tri, budget=10_000) - math.sqrt(2) / 2) <= 1e-3
    assert nonconvexity([[3.0, 3.0], [3.0, 3.0]], budget=10) == 0.0


@settings(max_examples=30, deadline=None)
@given(arrays(float, st.integers(2, 6), elements=st.floats(-5, 5)))
def test_nonconvexity_of_line_is_half_largest_gap(v):
    """On the line the hull is an interval, so the answer is half the widest gap."""
    gaps = np.diff(np.unique(v))
    expect = gaps.max() / 2 if gaps.size else 0.0
    got = nonconvexity(v[:, None], budget=2000)
    assert got <= expect + 1e-9
    assert got >= expect - 1e-6


def test_nonconvexity_monotone_in_budget():
    A = np.random.default_rng(3).normal(size=(7, 3))
    vals = [nonconvexity(A, budget=b, seed=1) for b in (10, 100, 1000, 5000)]
    assert vals == sorted(vals)


def test_nonconvexity_budget_must_cover_cloud():
    with pytest.raises(GeometryError):
        nonconvexity(np.eye(3), budget=2)


def test_hull_samples_are_prefix_stable():
    a = hull_samples(4, 50, seed=7)
    b = hull_samples(4, 200, seed=7)
    np.testing.assert_array_equal(a, b[:50])
    np.testing.assert_allclose(b.sum(axis=1), 1.0)
