"""Hammerstein operators (Hf)(x) = int K(x, y) N(y, f(y)) dy on a grid.

Kernels and nonlinearities come from small built-in families. They are
continuous and nonnegative by construction, so the measurability and
domination conditions hold without testing. The sup-integral bound, the cone
condition on kernel sections, the radius equation and the chi-contraction
ratio are checked numerically.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np

from . import kernels
from .ensemble import FunctionEnsemble, Grid, SampledFunction
from .noncompactness import QuasimeasureParams, chi0

log = logging.getLogger(__name__)


class HammersteinError(ValueError):
    pass


class RadiusError(ArithmeticError):
    pass


# --------------------------------------------------------------------------
# profiles for separable kernels


def _hat_mass(axis: np.ndarray, h: float, lo: float, hi: float) -> np.ndarray:
    """int over [lo, hi] of each node's hat function, clipped to the axis range."""
    lo, hi = max(lo, axis[0]), min(hi, axis[-1])
    if hi <= lo:
        return np.zeros_like(axis)

    def antider(u):
        u = np.clip(u, -1.0, 1.0)
        return np.where(u <= 0, 0.5 * (u + 1) ** 2, 1 - 0.5 * (1 - u) ** 2)

    return h * (antider((hi - axis) / h) - antider((lo - axis) / h))


def _outer(prof: dict, x: np.ndarray) -> np.ndarray:
    kind = prof.get("kind", "const")
    if kind == "const":
        return np.full(x.shape[0], float(prof.get("value", 1.0)))
    if kind == "gauss":
        w = float(prof.get("width", 1.0))
        return float(prof.get("amp", 1.0)) * np.exp(-(x ** 2).sum(axis=1) / w ** 2)
    if kind == "lorentz":
        w = float(prof.get("width", 1.0))
        return float(prof.get("amp", 1.0)) / (1.0 + (x ** 2).sum(axis=1) / w ** 2)
    if kind == "relu":
        return float(prof.get("amp", 1.0)) * np.maximum(x[:, 0], 0.0)
    raise HammersteinError(f"unknown outer profile {kind!r}")


def _inner(prof: dict, grid: Grid) -> np.ndarray:
    kind = prof.get("kind", "const")
    y = grid.nodes
    if kind == "const":
        return np.full(grid.size, float(prof.get("value", 1.0)))
    if kind == "gauss":
        w = float(prof.get("width", 1.0))
        c = float(prof.get("center", 0.0))
        return float(prof.get("amp", 1.0)) * np.exp(-((y - c) ** 2).sum(axis=1) / w ** 2)
    if kind == "indicator":
        # cell average against the hat basis keeps trapezoid quadrature second order
        lo, hi = float(prof.get("lo", 0.0)), float(prof.get("hi", 1.0))
        frac = _hat_mass(grid.axis, grid.spacing, lo, hi) / grid.axis_weights
        out = frac
        for _ in range(grid.dim - 1):
            out = np.multiply.outer(out, frac)
        return float(prof.get("height", 1.0)) * out.ravel()
    raise HammersteinError(f"unknown inner profile {kind!r}")


def _check_profile(prof: dict, where: str):
    for key, val in prof.items():
        if key == "kind":
            continue
        if not np.isfinite(float(val)):
            raise HammersteinError(f"{where}.{key} must be finite")
    for key in ("amp", "value", "height"):
        if float(prof.get(key, 1.0)) < 0:
            raise HammersteinError(f"{where}.{key} must be nonnegative")
    for key in ("width",):
        if key in prof and float(prof[key]) <= 0:
            raise HammersteinError(f"{where}.{key} must be positive")


KERNEL_FAMILIES = ("gaussian", "laplace", "separable")


@dataclass(frozen=True)
class Kernel:
    """Nonnegative kernel from a built-in family.

    ``gaussian``: a exp(-b |x-y|^2); ``laplace``: a exp(-b |x-y|_1);
    ``separable``: outer(x) * inner(y) with profiles chosen by ``kind``.
    """

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise HammersteinError(f"unknown kernel family {self.family!r}")
        p = self.params
        if self.family in ("gaussian", "laplace"):
            a, b = float(p.get("a", 1.0)), float(p.get("b", 1.0))
            if not (a >= 0 and b >= 0 and np.isfinite(a) and np.isfinite(b)):
                raise HammersteinError(f"{self.family} kernel needs finite a >= 0 and b >= 0")
        else:
            _check_profile(p.get("outer", {}), "outer")
            _check_profile(p.get("inner", {}), "inner")

    def matrix(self, grid: Grid) -> np.ndarray:
        """K(x_i, y_j) for all node pairs, shape ``(nodes, nodes)``."""
        x = grid.nodes
        p = self.params
        if self.family == "separable":
            return np.multiply.outer(_outer(p.get("outer", {}), x), _inner(p.get("inner", {}), grid))
        a, b = float(p.get("a", 1.0)), float(p.get("b", 1.0))
        diff = x[:, None, :] - x[None, :, :]
        if self.family == "gaussian":
            return a * np.exp(-b * (diff ** 2).sum(axis=2))
        return a * np.exp(-b * np.abs(diff).sum(axis=2))

    def scaled(self, s: float) -> "Kernel":
        p = dict(self.params)
        if self.family == "separable":
            inner = dict(p.get("inner", {}))
            key = "height" if inner.get("kind") == "indicator" else ("value" if inner.get("kind", "const") == "const" else "amp")
            inner[key] = float(inner.get(key, 1.0)) * s
            p["inner"] = inner
        else:
            p["a"] = float(p.get("a", 1.0)) * s
        return Kernel(self.family, p)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params}


NONLINEARITY_FAMILIES = ("affine", "saturating", "sqrt")


@dataclass(frozen=True)
class Nonlinearity:
    """N(y, z) >= 0 for z >= 0 with growth bound zeta and optional Lipschitz q.

    ``affine``: alpha z + gamma; ``saturating``: gamma z / (1 + z);
    ``sqrt``: gamma sqrt(z). Each is its own growth bound.
    """

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in NONLINEARITY_FAMILIES:
            raise HammersteinError(f"unknown nonlinearity family {self.family!r}")
        for key in ("alpha", "gamma"):
            v = float(self.params.get(key, 0.0))
            if not (np.isfinite(v) and v >= 0):
                raise HammersteinError(f"nonlinearity parameter {key} must be finite and >= 0")
        z = np.linspace(0.0, 100.0, 1001)
        if (np.diff(self.zeta(z)) < 0).any():
            raise HammersteinError("growth bound is not nondecreasing")

    @property
    def alpha(self) -> float:
        return float(self.params.get("alpha", 0.0))

    @property
    def gamma(self) -> float:
        return float(self.params.get("gamma", 0.0))

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.family == "affine":
            return self.alpha * z + self.gamma
        if self.family == "saturating":
            return self.gamma * z / (1.0 + z)
        return self.gamma * np.sqrt(z)

    def zeta(self, z) -> np.ndarray:
        return self(z)

    @property
    def lipschitz(self) -> float | None:
        """Lipschitz constant in z, when the family has a finite one."""
        if self.family == "affine":
            return self.alpha
        if self.family == "saturating":
            return self.gamma
        return None

    @property
    def is_constant(self) -> bool:
        return (self.family == "affine" and self.alpha == 0.0) or self.gamma == 0.0 and self.family != "affine"

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params}


@dataclass(frozen=True)
class Cone:
    r: float
    c: float

    def __post_init__(self):
        if not self.r > 0:
            raise HammersteinError("cone radius r must be positive")
        if not 0 < self.c < 1:
            raise HammersteinError("cone constant c must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class HammersteinProblem:
    grid: Grid
    kernel: Kernel
    nonlinearity: Nonlinearity
    cone: Cone
    radius: float | None = None

    def __post_init__(self):
        if self.radius is not None and not self.radius > 0:
            raise HammersteinError("radius must be positive")

    @cached_property
    def kernel_matrix(self) -> np.ndarray:
        K = np.ascontiguousarray(self.kernel.matrix(self.grid))
        if not (np.isfinite(K).all() and (K >= 0).all()):
            raise HammersteinError("kernel must be finite and nonnegative on the grid")
        K.setflags(write=False)
        return K

    def with_radius(self, R: float) -> "HammersteinProblem":
        out = replace(self, radius=float(R))
        out.__dict__["kernel_matrix"] = self.kernel_matrix
        return out


# --------------------------------------------------------------------------
# operator and checks


def apply_values(problem: HammersteinProblem, V: np.ndarray) -> np.ndarray:
    """Apply the operator to each row of ``V`` (shape ``(members, nodes)``)."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[1] != problem.grid.size:
        raise HammersteinError("input does not live on the problem grid")
    if (V < 0).any():
        raise HammersteinError("the operator acts on nonnegative functions only")
    Nv = np.ascontiguousarray(problem.nonlinearity(V))
    return kernels.quad_apply(problem.kernel_matrix, problem.grid.quad_weights, Nv)


def apply(problem: HammersteinProblem, f: SampledFunction) -> SampledFunction:
    if f.grid != problem.grid:
        raise HammersteinError("function does not live on the problem grid")
    return SampledFunction(problem.grid, apply_values(problem, f.scalar()[None, :])[0])


def apply_ensemble(problem: HammersteinProblem, F: FunctionEnsemble) -> FunctionEnsemble:
    if F.grid != problem.grid or F.codomain_dim != 1:
        raise HammersteinError("ensemble must be scalar and live on the problem grid")
    return FunctionEnsemble(F.grid, apply_values(problem, F.values[:, :, 0]))


def car4_norm(kernel: Kernel, grid: Grid) -> float:
    """max over nodes x of the quadrature of K(x, .)."""
    return float((kernel.matrix(grid) @ grid.quad_weights).max())


def cone_margin(values: np.ndarray, grid: Grid, cone: Cone) -> np.ndarray:
    """Cone margins of each column of ``values`` (shape ``(nodes, k)``)."""
    ball = grid.ball_nodes(cone.r)
    if ball.size == 0:
        raise HammersteinError(f"no grid node lies in the ball of radius {cone.r}")
    return values[ball].min(axis=0) - cone.c * values.max(axis=0)


def cone_check(f: SampledFunction, cone: Cone) -> tuple[bool, float]:
    v = f.scalar()
    if (v < 0).any():
        raise HammersteinError("cone membership is defined for nonnegative functions")
    margin = float(cone_margin(v[:, None], f.grid, cone)[0])
    return margin >= 0, margin


@dataclass(frozen=True)
class K1Report:
    sample: tuple[int, ...]
    margins: tuple[float, ...]
    failing: tuple[int, ...]

    @property
    def passed(self) -> bool:
        return not self.failing

    @property
    def worst_margin(self) -> float:
        return min(self.margins)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "worst_margin": self.worst_margin,
                "failing_nodes": list(self.failing), "checked": len(self.sample)}


def k1_check(problem: HammersteinProblem, sample=None) -> K1Report:
    """Cone check of every kernel section K(., y) for y in ``sample`` (all nodes by default)."""
    idx = np.arange(problem.grid.size) if sample is None else np.asarray(sample, dtype=np.intp)
    if idx.size == 0:
        raise HammersteinError("empty node sample")
    margins = cone_margin(problem.kernel_matrix[:, idx], problem.grid, problem.cone)
    failing = tuple(int(y) for y, m in zip(idx, margins) if m < 0)
    return K1Report(tuple(int(i) for i in idx), tuple(float(m) for m in margins), failing)


# --------------------------------------------------------------------------
# radius equation sup_x int K(x, y) zeta(y, R) dy = R


@dataclass(frozen=True)
class RadiusSolution:
    R: float
    lo: float
    hi: float
    g_lo: float
    g_hi: float
    iterations: int

    def to_dict(self) -> dict:
        return {"R": self.R, "bracket": [self.lo, self.hi], "g_at_bracket": [self.g_lo, self.g_hi],
                "bisection_steps": self.iterations}


def radius_gap(problem: HammersteinProblem, R: float) -> float:
    z = problem.nonlinearity.zeta(np.full(problem.grid.size, R))
    return float((problem.kernel_matrix @ (problem.grid.quad_weights * z)).max()) - R


def find_radius(problem: HammersteinProblem, max_scan: int = 60, rel_tol: float = 1e-10) -> RadiusSolution:
    """Bracket the radius equation by doubling or halving from R = 1, then bisect.

    A gap counts as zero when it is within ``rel_tol * max(1, R)``. A zero at
    R = 1 is accepted only if it is isolated, i.e. the gap at R = 2 or R = 1/2
    is nonzero; an identically vanishing gap has no well-defined root.
    """
    def g(R):
        return radius_gap(problem, R)

    def sign(R, v):
        tau = rel_tol * max(1.0, R)
        return 0 if abs(v) <= tau else (1 if v > 0 else -1)

    g1 = g(1.0)
    s1 = sign(1.0, g1)
    if s1 == 0:
        if sign(2.0, g(2.0)) == 0 and sign(0.5, g(0.5)) == 0:
            raise RadiusError("no (K2) radius in scan range: the gap vanishes identically near R = 1")
        return RadiusSolution(1.0, 1.0, 1.0, g1, g1, 0)
    # the scan compares strict signs: with the tolerance, halving toward 0
    # would eventually accept the trivial root R = 0
    R, gR = 1.0, g1
    factor = 2.0 if g1 > 0 else 0.5
    for _ in range(max_scan):
        R2 = R * factor
        g2 = g(R2)
        if g2 == 0.0:
            return RadiusSolution(R2, R2, R2, g2, g2, 0)
        if (g2 > 0) != (g1 > 0):
            lo, hi, glo, ghi = (R, R2, gR, g2) if factor > 1 else (R2, R, g2, gR)
            break
        R, gR = R2, g2
    else:
        raise RadiusError("no (K2) radius in scan range")
    a, b, ga, gb = lo, hi, glo, ghi
    for it in range(1, 400):
        mid = 0.5 * (a + b)
        gm = g(mid)
        if sign(mid, gm) == 0:
            return RadiusSolution(mid, lo, hi, glo, ghi, it)
        if gm > 0:
            a, ga = mid, gm
        else:
            b, gb = mid, gm
        if b - a <= 4 * np.finfo(float).eps * b:
            break
    raise RadiusError(f"bisection stalled in [{a!r}, {b!r}] without meeting the tolerance")


def solve_radius(problem: HammersteinProblem) -> float:
    sol = find_radius(problem)
    log.info("radius %.12g from bracket [%g, %g]", sol.R, sol.lo, sol.hi)
    return sol.R


# --------------------------------------------------------------------------
# empirical contraction ratio of chi0 under the operator

Sampler = Callable[[np.random.Generator, HammersteinProblem, QuasimeasureParams], FunctionEnsemble]


def _unit_profile(rng: np.random.Generator, grid: Grid) -> np.ndarray:
    x = grid.nodes
    out = np.zeros(grid.size)
    for _ in range(rng.integers(1, 4)):
        c = rng.uniform(-grid.half_width, grid.half_width, size=grid.dim)
        w = rng.uniform(0.3, 1.5)
        out += rng.uniform(0.2, 1.0) * np.exp(-((x - c) ** 2).sum(axis=1) / w ** 2)
    top = out.max()
    return out / top if top > 0 else out


def cone_ball_sampler(members: int = 6) -> Sampler:
    """Clusters of cone functions inside B(0, R) with diameter below eps_min.

    Each cluster is a base function plus nonnegative perturbations that are
    either constant offsets or smooth bumps, sized so that every member
    stays in the cone and below R.
    """
    def sample(rng, problem, params):
        if problem.radius is None:
            raise HammersteinError("the problem radius must be set before sampling")
        grid, R, c = problem.grid, problem.radius, problem.cone.c
        c_base = c + 0.5 * (1 - c)
        s = rng.uniform(0.05, 0.7) * R
        base = s * (c_base + (1 - c_base) * _unit_profile(rng, grid))
        amp = min(rng.uniform(0.1, 0.45) * params.eps_schedule[-1], 0.2 * R, s * (c_base - c) / c)
        constant = rng.random() < 0.5
        rows = [base]
        for _ in range(members - 1):
            pert = np.full(grid.size, rng.random()) if constant else rng.random() * _unit_profile(rng, grid)
            rows.append(base + amp * pert)
        return FunctionEnsemble(grid, np.stack(rows))

    return sample


@dataclass(frozen=True)
class QEstimate:
    q_hat: float
    table: tuple[dict, ...]

    @property
    def flagged(self) -> bool:
        return self.q_hat >= 1.0

    def to_dict(self) -> dict:
        return {"q_hat": self.q_hat, "flagged": self.flagged, "trials": list(self.table)}


def estimate_q(problem: HammersteinProblem, sampler: Sampler | None, trials: int,
               params: QuasimeasureParams, seed: int = 0) -> QEstimate:
    """Largest observed chi0(H F) / chi0(F) over sampled ensembles F.

    Trials with chi0(F) = 0 carry no information and are skipped. A ratio of
    1 or more is a definite counterexample to a contraction; smaller values
    are only empirical evidence.
    """
    if problem.radius is None:
        raise HammersteinError("estimate_q needs the radius R")
    if trials < 1:
        raise HammersteinError("trials must be positive")
    sampler = sampler or cone_ball_sampler()
    rng = np.random.default_rng(seed)
    rows, ratios = [], []
    for t in range(trials):
        F = sampler(rng, problem, params)
        before = chi0(F, params)[0]
        after = chi0(apply_ensemble(problem, F), params)[0]
        ratio = after / before if before > 0 else None
        if ratio is not None:
            ratios.append(ratio)
        rows.append({"trial": t, "chi0": before, "chi0_image": after, "ratio": ratio})
    if not ratios:
        raise HammersteinError("every trial had chi0(F) = 0; no ratio could be formed")
    return QEstimate(float(max(ratios)), tuple(rows))
