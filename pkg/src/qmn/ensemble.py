"""Grids over a truncated box, sampled functions and ensembles of them."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on [-L, L]^dim with trapezoidal weights.

    Nodes are enumerated row-major (last axis fastest).
    """

    dim: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise EnsembleError("dim must be a positive integer")
        if not (np.isfinite(self.half_width) and self.half_width > 0):
            raise EnsembleError("half_width must be positive and finite")
        if int(self.points_per_axis) != self.points_per_axis or self.points_per_axis < 2:
            raise EnsembleError("points_per_axis must be an integer >= 2")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "points_per_axis", int(self.points_per_axis))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points_per_axis - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        a = np.linspace(-self.half_width, self.half_width, self.points_per_axis)
        a.setflags(write=False)
        return a

    @cached_property
    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        pts.setflags(write=False)
        return pts

    @cached_property
    def axis_weights(self) -> np.ndarray:
        w = np.full(self.points_per_axis, self.spacing)
        w[0] = w[-1] = self.spacing / 2
        w.setflags(write=False)
        return w

    @cached_property
    def quad_weights(self) -> np.ndarray:
        w = self.axis_weights
        out = w
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, w)
        out = np.ascontiguousarray(out.ravel())
        out.setflags(write=False)
        return out

    def box_nodes(self, half: float) -> np.ndarray:
        """Indices of nodes inside [-half, half]^dim."""
        slack = 1e-12 * max(1.0, self.half_width)
        inside = (np.abs(self.nodes) <= half + slack).all(axis=1)
        return np.flatnonzero(inside)

    def ball_nodes(self, radius: float) -> np.ndarray:
        slack = 1e-12 * max(1.0, self.half_width)
        return np.flatnonzero(np.linalg.norm(self.nodes, axis=1) <= radius + slack)

    def sample(self, func, codomain_dim: int | None = None) -> "SampledFunction":
        """Evaluate ``func`` on the ``(nodes, dim)`` array of node coordinates."""
        vals = np.asarray(func(self.nodes), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        return SampledFunction(self, vals)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "half_width": self.half_width, "points_per_axis": self.points_per_axis}


@dataclass(frozen=True)
class SampledFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.grid.size or v.shape[1] < 1:
            raise EnsembleError(f"values of shape {v.shape} do not fit a grid of {self.grid.size} nodes")
        if not np.isfinite(v).all():
            raise EnsembleError("sampled values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def codomain_dim(self) -> int:
        return self.values.shape[1]

    def scalar(self) -> np.ndarray:
        if self.codomain_dim != 1:
            raise EnsembleError("expected a scalar-valued function")
        return self.values[:, 0]


def _check_pair(f: SampledFunction, g: SampledFunction):
    if f.grid != g.grid:
        raise EnsembleError("functions live on different grids")
    if f.codomain_dim != g.codomain_dim:
        raise EnsembleError("functions have different codomain dimensions")


def sup_distance(f: SampledFunction, g: SampledFunction) -> float:
    _check_pair(f, g)
    d = f.values - g.values
    return float(np.sqrt(np.einsum("ij,ij->i", d, d).max()))


def restricted_distance(f: SampledFunction, g: SampledFunction, S) -> float:
    _check_pair(f, g)
    S = np.asarray(S, dtype=np.intp)
    if S.size == 0:
        raise EnsembleError("empty node subset")
    d = f.values[S] - g.values[S]
    return float(np.sqrt(np.einsum("ij,ij->i", d, d).max()))


@dataclass(frozen=True, eq=False)
class FunctionEnsemble:
    """Finite family of sampled functions on one grid.

    Members are stored stacked in ``values`` with shape
    ``(members, nodes, codomain_dim)``.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3 or v.shape[0] < 1 or v.shape[1] != self.grid.size:
            raise EnsembleError(f"ensemble values of shape {v.shape} do not fit the grid")
        if not np.isfinite(v).all():
            raise EnsembleError("ensemble values must be finite")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_members(cls, members: Sequence[SampledFunction]) -> "FunctionEnsemble":
        if not members:
            raise EnsembleError("an ensemble needs at least one member")
        grid = members[0].grid
        for f in members[1:]:
            _check_pair(members[0], f)
        return cls(grid, np.stack([f.values for f in members]))

    @property
    def codomain_dim(self) -> int:
        return self.values.shape[2]

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, i: int) -> SampledFunction:
        return SampledFunction(self.grid, self.values[i])

    @property
    def members(self) -> list[SampledFunction]:
        return [self[i] for i in range(len(self))]

    def subset(self, idx) -> "FunctionEnsemble":
        return FunctionEnsemble(self.grid, self.values[np.asarray(idx, dtype=np.intp)])

    def union(self, other: "FunctionEnsemble") -> "FunctionEnsemble":
        if other.grid != self.grid or other.codomain_dim != self.codomain_dim:
            raise EnsembleError("cannot join ensembles on different grids")
        return FunctionEnsemble(self.grid, np.concatenate([self.values, other.values]))

    def clouds(self, nodes) -> list[np.ndarray]:
        """Member values at each node in ``nodes``, one ``(members, m)`` array each."""
        return [self.values[:, int(x), :] for x in nodes]


@dataclass(frozen=True)
class SaturatingSequence:
    """Nested node sets S_1 < ... < S_N from boxes [-L_n, L_n]^dim."""

    grid: Grid
    half_widths: tuple[float, ...]
    levels: tuple[np.ndarray, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.levels)

    def level(self, n: int) -> np.ndarray:
        if not 1 <= n <= len(self.levels):
            raise EnsembleError(f"level {n} outside 1..{len(self.levels)}")
        return self.levels[n - 1]


def make_saturating(grid: Grid, levels: int) -> SaturatingSequence:
    if int(levels) != levels or not 1 <= levels <= grid.points_per_axis:
        raise EnsembleError(f"levels must lie in 1..{grid.points_per_axis}")
    halves = tuple(n * grid.half_width / levels for n in range(1, levels + 1))
    sets = [grid.box_nodes(h) for h in halves[:-1]] + [np.arange(grid.size)]
    if sets[0].size == 0:
        raise EnsembleError(f"grid too coarse: the first box [-{halves[0]}, {halves[0]}] holds no node")
    for n in range(1, len(sets)):
        if sets[n].size <= sets[n - 1].size:
            raise EnsembleError(f"grid too coarse for {levels} levels: level {n + 1} adds no node")
    for s in sets:
        s.setflags(write=False)
    return SaturatingSequence(grid, halves, tuple(sets))


def scale_ensemble(F: FunctionEnsemble, s: float) -> FunctionEnsemble:
    if not np.isfinite(s):
        raise EnsembleError("scale must be finite")
    return FunctionEnsemble(F.grid, F.values * s)


def combine(F: FunctionEnsemble, weights) -> SampledFunction:
    """Convex combination anchored at the first member.

    Computed as ``f_0 + sum_i w_i (f_i - f_0)`` so that mixing copies of one
    function returns that function bit for bit.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(F),) or (w < 0).any():
        raise EnsembleError("weights must be nonnegative, one per member")
    w = w / w.sum()
    base = F.values[0]
    return SampledFunction(F.grid, base + np.tensordot(w, F.values - base, axes=1))


def convex_mix(F: FunctionEnsemble, count: int, seed: int) -> FunctionEnsemble:
    """Append ``count`` random convex combinations (flat Dirichlet weights)."""
    if count < 1:
        raise EnsembleError("count must be positive")
    rng = np.random.default_rng(seed)
    W = rng.dirichlet(np.ones(len(F)), size=count)
    base = F.values[0]
    mixed = base + np.tensordot(W, F.values - base, axes=1)
    return FunctionEnsemble(F.grid, np.concatenate([F.values, mixed]))
