"""The quasimeasure of noncompactness Omega = eta + omega0 + chi0 on ensembles.

* ``eta``: largest covering radius of the pointwise value clouds.
* ``omega`` / ``omega0``: largest oscillation of a member over node pairs
  closer than delta; ``omega0`` reads it at the smallest delta of a schedule.
* ``chi`` / ``chi0``: largest global distance between members that agree
  within eps on a compact piece S_n; ``chi0`` reads it at the deepest level
  and the smallest eps.

Each component comes with its full table so the monotone trends toward the
limits stay visible.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Mapping

import numpy as np

from . import kernels
from .ensemble import (FunctionEnsemble, Grid, SaturatingSequence, convex_mix, make_saturating,
                       scale_ensemble)
from .geometry import EXHAUSTIVE_CAP


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class QuasimeasureParams:
    k_budget: int
    delta_schedule: tuple[float, ...]
    eps_schedule: tuple[float, ...]
    saturating: SaturatingSequence

    def __post_init__(self):
        object.__setattr__(self, "delta_schedule", tuple(float(d) for d in self.delta_schedule))
        object.__setattr__(self, "eps_schedule", tuple(float(e) for e in self.eps_schedule))
        if int(self.k_budget) != self.k_budget or self.k_budget < 1:
            raise MeasureError("k_budget must be a positive integer")
        for name in ("delta_schedule", "eps_schedule"):
            sched = getattr(self, name)
            if not sched:
                raise MeasureError(f"{name} is empty")
            if any(not (np.isfinite(v) and v > 0) for v in sched):
                raise MeasureError(f"{name} must hold positive finite values")
            if any(a <= b for a, b in zip(sched, sched[1:])):
                raise MeasureError(f"{name} must be strictly descending")
        h = self.grid.spacing
        if abs(self.delta_schedule[-1] - h) > 1e-9 * h:
            raise MeasureError(f"delta_schedule must end at the grid spacing {h!r}")

    @property
    def grid(self) -> Grid:
        return self.saturating.grid

    @classmethod
    def default(cls, grid: Grid, levels: int = 3, k_budget: int = 1,
                eps_schedule=(0.5, 0.1, 0.02), delta_multiples=(4, 2, 1)) -> "QuasimeasureParams":
        h = grid.spacing
        return cls(k_budget, tuple(m * h for m in delta_multiples), tuple(eps_schedule),
                   make_saturating(grid, levels))

    def with_eps_scaled(self, factor: float) -> "QuasimeasureParams":
        return QuasimeasureParams(self.k_budget, self.delta_schedule,
                                  tuple(e * factor for e in self.eps_schedule), self.saturating)

    def with_k(self, k: int) -> "QuasimeasureParams":
        return QuasimeasureParams(k, self.delta_schedule, self.eps_schedule, self.saturating)

    def to_dict(self) -> dict:
        return {
            "k_budget": self.k_budget,
            "delta_schedule": list(self.delta_schedule),
            "eps_schedule": list(self.eps_schedule),
            "saturating_half_widths": list(self.saturating.half_widths),
        }


@dataclass(frozen=True)
class QuasimeasureReport:
    eta_value: float
    omega0_value: float
    chi0_value: float
    omega_total: float
    omega_table: tuple[tuple[float, float], ...]
    chi_table: tuple[tuple[int, float, float], ...]
    params: QuasimeasureParams = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "eta": self.eta_value,
            "omega0": self.omega0_value,
            "chi0": self.chi0_value,
            "omega_total": self.omega_total,
            "omega_table": [{"delta": d, "omega": v} for d, v in self.omega_table],
            "chi_table": [{"level": n, "eps": e, "chi": v} for n, e, v in self.chi_table],
            "params": self.params.to_dict(),
        }


# --------------------------------------------------------------------------
# eta


def eta(F: FunctionEnsemble, k: int, cap: int = EXHAUSTIVE_CAP) -> float:
    """max over nodes of the k-center radius of the value cloud.

    Scalar clouds use the exact unrestricted radius on the line; vector
    clouds restrict centers to the cloud (exhaustive up to ``cap`` distinct
    values, greedy beyond).
    """
    if k < 1:
        raise MeasureError("k must be a positive integer")
    return float(kernels.eta_radii(F.values, int(k), int(cap)).max())


# --------------------------------------------------------------------------
# omega


def _offsets(grid: Grid, delta: float) -> list[tuple[int, ...]]:
    h = grid.spacing
    lim = delta * (1 + 1e-12)
    r = int(np.floor(lim / h))
    zero = (0,) * grid.dim
    out = []
    for o in product(range(-r, r + 1), repeat=grid.dim):
        if o > zero and h * np.sqrt(sum(c * c for c in o)) <= lim:
            out.append(o)
    return out


def omega(F: FunctionEnsemble, delta: float) -> float:
    """Largest |f(y) - f(x)| over members and node pairs with |x - y| <= delta."""
    grid = F.grid
    offs = _offsets(grid, delta)
    if not offs:
        raise MeasureError(f"delta {delta!r} is below the grid spacing {grid.spacing!r}")
    n = grid.points_per_axis
    V = F.values.reshape((len(F),) + grid.shape + (F.codomain_dim,))
    best = 0.0
    for o in offs:
        lo = tuple(slice(max(0, -c), n - max(0, c)) for c in o)
        hi = tuple(slice(max(0, c), n + min(0, c)) for c in o)
        if any(s.stop <= s.start for s in lo):
            continue
        d = V[(slice(None),) + hi] - V[(slice(None),) + lo]
        best = max(best, float(np.einsum("...c,...c->...", d, d).max()))
    return float(np.sqrt(best))


def omega0(F: FunctionEnsemble, params: QuasimeasureParams):
    table = tuple((d, omega(F, d)) for d in params.delta_schedule)
    return table[-1][1], table


# --------------------------------------------------------------------------
# chi


def pair_distances(F: FunctionEnsemble, nodes=None) -> np.ndarray:
    """Matrix of sup distances between members over ``nodes`` (all if None)."""
    idx = np.arange(F.grid.size) if nodes is None else np.asarray(nodes, dtype=np.intp)
    return kernels.pair_sup(F.values, np.ascontiguousarray(idx))


def _chi_from(R: np.ndarray, D: np.ndarray, eps: float) -> float:
    return float(D[R <= eps].max())


def chi(F: FunctionEnsemble, n: int, eps: float, saturating: SaturatingSequence) -> float:
    """sup of d(f, g) over member pairs with d_{S_n}(f, g) <= eps (0 if none)."""
    if saturating.grid != F.grid:
        raise MeasureError("saturating sequence belongs to another grid")
    S = saturating.level(n)
    D = pair_distances(F)
    R = D if S.size == F.grid.size else pair_distances(F, S)
    return _chi_from(R, D, eps)


def chi0(F: FunctionEnsemble, params: QuasimeasureParams):
    sat = params.saturating
    if sat.grid != F.grid:
        raise MeasureError("saturating sequence belongs to another grid")
    D = pair_distances(F)
    table = []
    for n in range(1, len(sat) + 1):
        S = sat.level(n)
        R = D if S.size == F.grid.size else pair_distances(F, S)
        for e in params.eps_schedule:
            table.append((n, e, _chi_from(R, D, e)))
    return table[-1][2], tuple(table)


# --------------------------------------------------------------------------
# Omega


def quasimeasure(F: FunctionEnsemble, params: QuasimeasureParams) -> QuasimeasureReport:
    if params.grid != F.grid:
        raise MeasureError("params belong to another grid")
    e = eta(F, params.k_budget)
    w, wt = omega0(F, params)
    c, ct = chi0(F, params)
    return QuasimeasureReport(e, w, c, e + w + c, wt, ct, params)


# --------------------------------------------------------------------------
# axiom suite

Component = Callable[[FunctionEnsemble, QuasimeasureParams], float]


def standard_components() -> dict[str, Component]:
    return {
        "eta": lambda F, p: eta(F, p.k_budget),
        "omega0": lambda F, p: omega0(F, p)[0],
        "chi0": lambda F, p: chi0(F, p)[0],
    }


def shrinking_stub(F: FunctionEnsemble, params: QuasimeasureParams) -> float:
    """Deliberately non-monotone functional: larger families score lower."""
    return 1.0 / len(F)


@dataclass
class CheckResult:
    name: str
    trials: int = 0
    failures: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def fail(self, trial: int, **detail):
        self.failures.append({"trial": trial, **detail})

    def to_dict(self) -> dict:
        return {"passed": self.passed, "trials": self.trials, "failures": self.failures[:10],
                "failure_count": len(self.failures)}


@dataclass
class SuiteReport:
    checks: dict[str, CheckResult]
    seed: int
    trials: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def to_dict(self) -> dict:
        return {"passed": self.passed, "seed": self.seed, "trials": self.trials,
                "checks": {k: v.to_dict() for k, v in self.checks.items()}}


def _bump_function(rng: np.random.Generator, grid: Grid) -> np.ndarray:
    x = grid.nodes
    L = grid.half_width
    out = np.full(grid.size, rng.uniform(-1, 1))
    for _ in range(rng.integers(1, 4)):
        c = rng.uniform(-L, L, size=grid.dim)
        width = rng.uniform(0.2, 1.0) * L
        out += rng.uniform(-1, 1) * np.exp(-((x - c) ** 2).sum(axis=1) / width ** 2)
    return out


def _tail(rng: np.random.Generator, grid: Grid, inner: float) -> np.ndarray:
    r = np.abs(grid.nodes).max(axis=1)
    span = max(grid.half_width - inner, grid.spacing)
    return rng.uniform(-1, 1) * np.clip((r - inner) / span, 0.0, 1.0)


def random_ensemble(rng: np.random.Generator, params: QuasimeasureParams, size: int) -> FunctionEnsemble:
    """Scalar ensemble mixing smooth bumps, boundary tails and near-copies.

    Near-copies differ from an earlier member only outside a saturating box,
    so that the chi filter admits pairs with nonzero global distance.
    """
    grid = params.grid
    inner = params.saturating.half_widths[0]
    rows: list[np.ndarray] = []
    for _ in range(size):
        u = rng.random()
        if rows and u < 0.4:
            base = rows[rng.integers(len(rows))]
            rows.append(base + _tail(rng, grid, inner))
        elif rows and u < 0.55:
            base = rows[rng.integers(len(rows))]
            rows.append(base + rng.uniform(-1, 1) * params.eps_schedule[-1])
        else:
            rows.append(_bump_function(rng, grid) + (_tail(rng, grid, inner) if u > 0.8 else 0.0))
    return FunctionEnsemble(grid, np.stack(rows))


def _close(a: float, b: float, rel: float) -> bool:
    return a == b or abs(a - b) <= rel * max(abs(a), abs(b))


def axiom_suite(params: QuasimeasureParams, seed: int = 0, trials: int = 100,
                components: Mapping[str, Component] | None = None,
                max_size: int = 6) -> SuiteReport:
    """Run the QMN2-QMN5 surrogates and the Mazur surrogate on random ensembles.

    ``components`` overrides any of ``eta``, ``omega0``, ``chi0`` (used to
    inject a broken functional as a negative control). Failures are returned
    as data, never raised.
    """
    if trials < 1:
        raise MeasureError("trials must be positive")
    comp = standard_components()
    comp.update(components or {})
    names = ("eta", "omega0", "chi0")

    def measure(F, p=params):
        return {n: float(comp[n](F, p)) for n in names}

    checks = {k: CheckResult(k) for k in ("qmn2_monotone", "qmn3_duplication", "qmn4_homogeneity",
                                          "qmn5_finite_union", "mazur_hull")}
    rng = np.random.default_rng(seed)
    k = params.k_budget
    for t in range(trials):
        F = random_ensemble(rng, params, int(rng.integers(3, max_size + 1)))
        base = measure(F)

        # (a) monotonicity under taking a sub-ensemble
        c = checks["qmn2_monotone"]
        c.trials += 1
        m = int(rng.integers(1, len(F)))
        sub = F.subset(np.sort(rng.choice(len(F), size=m, replace=False)))
        small = measure(sub)
        bad = [n for n in names if not small[n] <= base[n]]
        if not sum(small.values()) <= sum(base.values()):
            bad.append("total")
        if bad:
            c.fail(t, components=bad, sub=small, full=base)

        # (b) duplication and reordering leave every component unchanged
        c = checks["qmn3_duplication"]
        c.trials += 1
        extra = rng.integers(0, len(F), size=int(rng.integers(1, len(F) + 1)))
        order = rng.permutation(len(F) + extra.size)
        dup = FunctionEnsemble(F.grid, np.concatenate([F.values, F.values[extra]])[order])
        again = measure(dup)
        bad = [n for n in names if again[n] != base[n]]
        if bad:
            c.fail(t, components=bad, duplicated=again, original=base)

        # (c) homogeneity under real scaling with matched eps schedule
        c = checks["qmn4_homogeneity"]
        c.trials += 1
        s = float(rng.choice([-1.0, 1.0]) * np.exp(rng.uniform(np.log(0.25), np.log(4.0))))
        scaled = measure(scale_ensemble(F, s), params.with_eps_scaled(abs(s)))
        bad = [n for n in names if not _close(scaled[n], abs(s) * base[n], 1e-9)]
        if bad:
            c.fail(t, components=bad, scale=s, scaled=scaled, original=base)

        # (d) union with a finite family of constants
        c = checks["qmn5_finite_union"]
        c.trials += 1
        na = int(rng.integers(1, 4))
        A = FunctionEnsemble(F.grid, np.repeat(rng.uniform(-3, 3, size=(na, 1, 1)), F.grid.size, axis=1))
        U = A.union(F)
        problems = {}
        wa, wg, wu = (comp["omega0"](X, params) for X in (A, F, U))
        if not (wu == max(wa, wg) and wu == wg):
            problems["omega0"] = {"union": wu, "A": wa, "G": wg}
        sat = params.saturating
        for n in range(1, len(sat) + 1):
            S = sat.level(n)
            cross = pair_distances(U, S)[:na, na:].min()
            if cross <= 0:
                continue
            e = 0.5 * float(cross)
            cu, ca, cg = (chi(X, n, e, sat) for X in (U, A, F))
            if cu != max(ca, cg):
                problems[f"chi_level{n}"] = {"eps": e, "union": cu, "A": ca, "G": cg}
        eu = comp["eta"](U, params.with_k(k + na))
        if not eu <= base["eta"]:
            problems["eta"] = {"union_k_plus_A": eu, "G": base["eta"]}
        if problems:
            c.fail(t, **problems)

        # (e) Mazur surrogate: hulls of zero-measure ensembles stay zero
        c = checks["mazur_hull"]
        c.trials += 1
        const = np.full((int(rng.integers(2, 5)), F.grid.size, 1), rng.uniform(-2, 2))
        Z = FunctionEnsemble(F.grid, const)
        z = measure(Z)
        if sum(z.values()) != 0.0:
            c.fail(t, reason="constructed ensemble has nonzero measure", values=z)
        else:
            mixed = measure(convex_mix(Z, int(rng.integers(1, 6)), int(rng.integers(2**31))))
            if mixed["eta"] != 0.0 or mixed["omega0"] != 0.0 or mixed["chi0"] > params.eps_schedule[-1]:
                c.fail(t, mixed=mixed)
    return SuiteReport(checks, seed, trials)
