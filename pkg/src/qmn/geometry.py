"""Functionals on finite point clouds in Euclidean space.

Hausdorff distance, k-center covering radii (the finite surrogate of the
Hausdorff measure of noncompactness), distance to a convex hull, and a
sampled lower estimate of the measure of nonconvexity.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

EXHAUSTIVE_CAP = 14


class GeometryError(ValueError):
    """Invalid input to a point-cloud functional."""


@dataclass(frozen=True)
class PointCloud:
    """Finite ordered set of points in R^dim. Duplicates are allowed."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise GeometryError("a point cloud needs at least one point of positive dimension")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def canonical(self) -> np.ndarray:
        """Distinct points in lexicographic order."""
        return kernels.canonical(np.ascontiguousarray(self.points))

    def scaled(self, s: float) -> "PointCloud":
        return PointCloud(self.points * s)


def _cloud(A) -> PointCloud:
    return A if isinstance(A, PointCloud) else PointCloud(A)


def hausdorff_distance(A, B) -> float:
    A, B = _cloud(A), _cloud(B)
    if A.dim != B.dim:
        raise GeometryError(f"dimension mismatch: {A.dim} vs {B.dim}")
    return float(kernels.hausdorff(A.points, B.points))


def kcenter_radius(A, k: int, mode: str = "exhaustive", start: int | None = None,
                   cap: int = EXHAUSTIVE_CAP) -> float:
    """Covering radius of ``A`` by ``k`` balls.

    ``exhaustive`` and ``greedy`` restrict centers to points of ``A``;
    exhaustive enumerates every center subset and greedy runs farthest-point
    traversal. ``unrestricted`` places centers anywhere and is exact, but only
    for dim 1.

    Duplicates are removed and points sorted lexicographically before any
    mode runs, so every result is invariant under reordering and duplication
    of ``A``. Greedy starts from ``start`` (an index into ``A`` as given) or,
    by default, from the point of smallest eccentricity; ties go to the
    lowest canonical index. The exhaustive cap applies to distinct points.
    """
    A = _cloud(A)
    if k < 1:
        raise GeometryError("k must be a positive integer")
    P = A.canonical()
    n = P.shape[0]
    if mode == "unrestricted":
        if A.dim != 1:
            raise GeometryError("unrestricted centers are only supported in dimension 1")
        return float(kernels.line(np.ascontiguousarray(P[:, 0]), k))
    if mode not in ("exhaustive", "greedy"):
        raise GeometryError(f"unknown mode {mode!r}")
    if mode == "exhaustive" and n > cap:
        raise GeometryError(
            f"{n} distinct points exceed the exhaustive cap {cap}; use mode='greedy'")
    if k >= n:
        return 0.0
    D = kernels.pairwise(P)
    if mode == "exhaustive":
        return float(kernels.exhaustive(D, k))
    if start is None:
        s = int(kernels.eccentric_start(D))
    else:
        s = int(np.flatnonzero((P == A.points[start]).all(axis=1))[0])
    return float(kernels.greedy(D, k, s))


def hull_distance(p, A, tol: float = 1e-9, max_iter: int = 10_000) -> float:
    """Euclidean distance from ``p`` to conv(A), certified to ``tol``."""
    return hull_projection(p, A, tol=tol, max_iter=max_iter).distance


@dataclass(frozen=True)
class HullProjection:
    weights: np.ndarray
    point: np.ndarray
    distance: float
    lower_bound: float

    @property
    def gap(self) -> float:
        return self.distance - self.lower_bound


def hull_projection(p, A, tol: float = 1e-9, max_iter: int = 10_000) -> HullProjection:
    """Nearest point of conv(A) to ``p`` by Wolfe's minimum-norm-point iteration.

    Works on the shifted points ``a_i - p`` and keeps convex weights on an
    affinely independent active set. It stops once the upper bound ``|y|``
    and the separating-hyperplane lower bound ``min_i <y, a_i - p> / |y|``
    are within ``tol`` of each other.
    """
    A = _cloud(A)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.shape != (A.dim,):
        raise GeometryError(f"point has shape {p.shape}, cloud has dimension {A.dim}")
    if not (np.isfinite(p).all() and np.isfinite(A.points).all()):
        raise GeometryError("non-finite coordinates")
    X = A.points - p
    n = X.shape[0]
    sq = np.einsum("ij,ij->i", X, X)
    first = int(np.argmin(sq))
    active = [first]
    w = np.array([1.0])
    y = X[first].copy()
    scale = max(1.0, float(np.sqrt(sq.max())))
    zero_tol = 1e-14 * scale

    def bounds(y):
        ny = float(np.linalg.norm(y))
        if ny <= zero_tol:
            return ny, ny
        return ny, max(0.0, float((X @ y).min()) / ny)

    for _ in range(max_iter):
        upper, lower = bounds(y)
        if upper - lower <= tol:
            break
        j = int(np.argmin(X @ y))
        if j in active:
            break
        active.append(j)
        w = np.append(w, 0.0)
        while True:
            S = X[active]
            v = _affine_min_norm(S)
            if (v > 1e-14).all():
                w = v
                break
            neg = v <= 1e-14
            ratios = w[neg] / np.maximum(w[neg] - v[neg], 1e-300)
            theta = min(1.0, float(ratios.min()))
            w = w + theta * (v - w)
            keep = w > 1e-14
            keep[np.flatnonzero(neg)[np.argmin(ratios)]] = False
            active = [a for a, kk in zip(active, keep) if kk]
            w = w[keep]
            w /= w.sum()
        y = w @ X[active]
    else:
        log.warning("hull projection hit max_iter=%d", max_iter)
    upper, lower = bounds(y)
    lam = np.zeros(n)
    lam[active] = w
    return HullProjection(lam, y + p, upper, lower)


def _affine_min_norm(S: np.ndarray) -> np.ndarray:
    """Weights (summing to 1) of the min-norm point of aff(S)."""
    k = S.shape[0]
    G = S @ S.T
    M = np.zeros((k + 1, k + 1))
    M[:k, :k] = G
    M[:k, k] = 1.0
    M[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
    return sol[:k]


_ALPHAS = np.array([1.0, 0.5, 0.2, 0.1])


def hull_samples(n: int, budget: int, seed: int) -> np.ndarray:
    """Dirichlet weights for ``budget`` hull points, prefix-stable in ``budget``.

    Rows cycle through concentrations 1, 0.5, 0.2, 0.1 so that faces and
    edges of the hull get sampled as well as its interior.
    """
    rng = np.random.default_rng(seed)
    shape = np.resize(_ALPHAS, budget)[:, None] * np.ones((1, n))
    g = rng.standard_gamma(shape)
    s = g.sum(axis=1)
    dead = s <= 0.0
    if dead.any():
        g[dead, 0] = 1.0
        s[dead] = 1.0
    return g / s[:, None]


def nonconvexity(A, budget: int = 10_000, seed: int = 0, step_min: float = 1e-13) -> float:
    """Lower estimate of the measure of nonconvexity d_H(A, conv A).

    Samples ``budget`` hull points, then refines every running-record sample
    (each sample that beats all earlier ones) by steepest coordinate ascent
    on weight pairs. Refining all records rather than only the final best
    keeps the estimate nondecreasing in ``budget`` for a fixed seed.
    """
    A = _cloud(A)
    n = len(A)
    if budget < n:
        raise GeometryError(f"budget {budget} is smaller than the cloud size {n}")
    P = np.ascontiguousarray(A.points)
    if A.canonical().shape[0] == 1:
        return 0.0
    W = hull_samples(n, budget, seed)
    vals = kernels.min_dist(W @ P, P)
    running = np.maximum.accumulate(vals)
    records = np.flatnonzero(np.concatenate(([True], vals[1:] > running[:-1])))
    best = float(running[-1])
    for r in records:
        _, v = kernels.refine(W[r], P, 0.25, step_min, 64)
        best = max(best, float(v))
    return best
