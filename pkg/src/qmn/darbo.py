"""Fixed-point engine: Picard iteration, ensemble iteration and certificates.

``picard_solve`` produces the fixed point. ``ensemble_iterate`` pushes a
whole ensemble through the operator and records the quasimeasure, the
nonconvexity at probe nodes and distances to the last iterate. ``certify``
then checks the comparison-function inequalities along that trace.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .ensemble import FunctionEnsemble, SampledFunction, sup_distance
from .geometry import hausdorff_distance, nonconvexity
from .hammerstein import (HammersteinError, HammersteinProblem, apply, apply_ensemble,
                          car4_norm, cone_check)
from .noncompactness import QuasimeasureParams, quasimeasure

log = logging.getLogger(__name__)

DIVERGENCE_GUARD = 1e6
DEFAULT_SLACK = 1e-9


class DivergenceError(ArithmeticError):
    pass


class EnsembleIterationError(RuntimeError):
    def __init__(self, message: str, trace: "DarboTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class ComparisonFunction:
    """Nondecreasing comparison map, linear ``q t`` or tabulated.

    The tabulated form interpolates linearly between ``(t, values)`` pairs
    and extends past the last knot along the ray through the origin.
    """

    slope: float | None = None
    t: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.slope is not None:
            if not 0 <= self.slope < 1:
                raise ValueError("a linear comparison function needs slope in [0, 1)")
            return
        t, v = np.asarray(self.t, float), np.asarray(self.values, float)
        if t.size < 2 or t.shape != v.shape:
            raise ValueError("a tabulated comparison function needs two or more matching knots")
        if t[0] != 0 or (np.diff(t) <= 0).any():
            raise ValueError("knots must start at 0 and increase strictly")
        if (np.diff(v) < 0).any() or (v < 0).any():
            raise ValueError("tabulated values must be nonnegative and nondecreasing")
        # phi(t) < t at every positive knot keeps the graph below the diagonal,
        # which is what makes the iterates vanish
        if v[0] != 0 or (v[1:] >= t[1:]).any():
            raise ValueError("tabulated values must satisfy phi(0) = 0 and phi(t) < t for t > 0")

    @classmethod
    def linear(cls, q: float) -> "ComparisonFunction":
        return cls(slope=float(q))

    @classmethod
    def tabulated(cls, t, values) -> "ComparisonFunction":
        return cls(t=tuple(map(float, t)), values=tuple(map(float, values)))

    def __call__(self, t: float) -> float:
        if self.slope is not None:
            return self.slope * t
        if t > self.t[-1]:
            return self.values[-1] * t / self.t[-1]
        return float(np.interp(t, self.t, self.values))

    def iterate(self, t: float, n: int) -> float:
        for _ in range(n):
            t = self(t)
        return t

    def to_dict(self) -> dict:
        if self.slope is not None:
            return {"form": "linear", "slope": self.slope}
        return {"form": "tabulated", "t": list(self.t), "values": list(self.values)}


# --------------------------------------------------------------------------
# Picard


@dataclass(frozen=True)
class PicardTrace:
    residuals: tuple[float, ...]
    cone_margins: tuple[float, ...]
    converged: bool
    contraction: float | None

    @property
    def iterations(self) -> int:
        return len(self.residuals)

    @property
    def bound(self) -> float:
        """A-posteriori bound on the fixed-point residual of the returned iterate."""
        q = self.contraction
        if q is not None and q < 1 and self.residuals:
            return self.residuals[-1] * (1 + q) / (1 - q)
        return self.residuals[-1] if self.residuals else float("inf")

    def to_dict(self) -> dict:
        return {"converged": self.converged, "iterations": self.iterations,
                "contraction": self.contraction, "bound": self.bound,
                "residuals": list(self.residuals), "cone_margins": list(self.cone_margins)}


def declared_contraction(problem: HammersteinProblem) -> float | None:
    q = problem.nonlinearity.lipschitz
    return None if q is None else q * car4_norm(problem.kernel, problem.grid)


def picard_solve(problem: HammersteinProblem, f0: SampledFunction | None = None,
                 tol: float = 1e-10, max_iter: int = 200) -> tuple[SampledFunction, PicardTrace]:
    """Iterate f <- H f from ``f0`` (zero by default) until successive iterates are within ``tol``."""
    if not tol > 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")
    f = f0 if f0 is not None else SampledFunction(problem.grid, np.zeros(problem.grid.size))
    q = declared_contraction(problem)
    residuals, margins = [], [cone_check(f, problem.cone)[1]]
    converged = False
    for _ in range(max_iter):
        g = apply(problem, f)
        r = sup_distance(g, f)
        residuals.append(r)
        margins.append(cone_check(g, problem.cone)[1])
        f = g
        if not np.isfinite(r) or r > DIVERGENCE_GUARD:
            raise DivergenceError(f"iteration diverged: residual {r:.3g} after {len(residuals)} steps")
        if r <= tol:
            converged = True
            break
    if not converged:
        log.warning("Picard iteration stopped at max_iter=%d with residual %.3g", max_iter, residuals[-1])
    return f, PicardTrace(tuple(residuals), tuple(margins), converged, q)


# --------------------------------------------------------------------------
# ensemble iteration


@dataclass(frozen=True)
class TraceRecord:
    n: int
    omega: float
    eta: float
    omega0: float
    chi0: float
    kappa: float
    residual: float
    dist_to_final: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class DarboTrace:
    records: tuple[TraceRecord, ...]
    probe_nodes: tuple[int, ...]
    member_count: int
    final: FunctionEnsemble | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def measured_contraction(self) -> float:
        """Largest observed ratio of consecutive quasimeasure values (zeros skipped)."""
        om = self.column("omega")
        ratios = [b / a for a, b in zip(om[:-1], om[1:]) if a > 0]
        return float(max(ratios)) if ratios else 0.0

    def to_dict(self) -> dict:
        return {"probe_nodes": list(self.probe_nodes), "member_count": self.member_count,
                "records": [r.to_dict() for r in self.records]}


def _probe_kappa(F: FunctionEnsemble, probes, budget: int, seed: int) -> float:
    return max(nonconvexity(c, budget=budget, seed=seed) for c in F.clouds(probes))


def _probe_hausdorff(F: FunctionEnsemble, G: FunctionEnsemble, probes) -> float:
    return max(hausdorff_distance(a, b) for a, b in zip(F.clouds(probes), G.clouds(probes)))


def ensemble_iterate(problem: HammersteinProblem, C1: FunctionEnsemble, iters: int,
                     params: QuasimeasureParams, probe_nodes, kappa_budget: int = 2000,
                     seed: int = 0) -> DarboTrace:
    """Apply the operator to every member ``iters`` times and trace C_1 .. C_{iters+1}.

    Each record's residual is |H f - f| for member 0 of that ensemble, so one
    extra application is made to close the last record. The closure step of
    the continuous argument does nothing for a finite ensemble and is skipped.
    """
    if iters < 1:
        raise ValueError("iters must be at least 1")
    probes = tuple(int(p) for p in probe_nodes)
    if not probes or min(probes) < 0 or max(probes) >= problem.grid.size:
        raise ValueError("probe nodes must be a nonempty list of valid node indices")
    if C1.grid != problem.grid:
        raise HammersteinError("initial ensemble does not live on the problem grid")
    chain = [C1]
    try:
        for _ in range(iters + 1):
            chain.append(apply_ensemble(problem, chain[-1]))
    except (HammersteinError, ValueError) as exc:
        partial = _records(chain[:-1], chain, probes, params, kappa_budget, seed)
        raise EnsembleIterationError(f"operator failed at step {len(chain)}: {exc}",
                                     DarboTrace(partial, probes, len(C1))) from exc
    ensembles = chain[:-1]
    return DarboTrace(_records(ensembles, chain, probes, params, kappa_budget, seed),
                      probes, len(C1), ensembles[-1])


def _records(ensembles, chain, probes, params, budget, seed) -> tuple[TraceRecord, ...]:
    if not ensembles:
        return ()
    final = ensembles[-1]
    out = []
    for i, C in enumerate(ensembles):
        rep = quasimeasure(C, params)
        nxt = chain[i + 1] if i + 1 < len(chain) else None
        residual = sup_distance(nxt[0], C[0]) if nxt is not None else float("nan")
        out.append(TraceRecord(
            n=i + 1, omega=rep.omega_total, eta=rep.eta_value, omega0=rep.omega0_value,
            chi0=rep.chi0_value, kappa=_probe_kappa(C, probes, max(budget, len(C)), seed),
            residual=residual, dist_to_final=_probe_hausdorff(C, final, probes)))
    return tuple(out)


# --------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class Certificate:
    steps: tuple[dict, ...]
    slack: float
    phi_D: ComparisonFunction
    phi_E: ComparisonFunction | None
    require_E: bool

    @property
    def d_violations(self) -> int:
        return sum(not s["D_pass"] for s in self.steps)

    @property
    def e_violations(self) -> int:
        return sum(s["E_pass"] is False for s in self.steps)

    @property
    def lipschitz_violations(self) -> int:
        return sum(not s["kappa_lipschitz_pass"] for s in self.steps)

    @property
    def passed(self) -> bool:
        ok = self.d_violations == 0 and self.lipschitz_violations == 0
        return ok and (self.e_violations == 0 or not self.require_E)

    @property
    def first_violation(self) -> int | None:
        for s in self.steps:
            if not s["D_pass"] or not s["kappa_lipschitz_pass"] or (self.require_E and s["E_pass"] is False):
                return s["n"]
        return None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "slack": self.slack, "first_violation": self.first_violation,
                "violations": {"D": self.d_violations, "E": self.e_violations,
                               "kappa_lipschitz": self.lipschitz_violations},
                "phi_D": self.phi_D.to_dict(),
                "phi_E": None if self.phi_E is None else self.phi_E.to_dict(),
                "E_informational": not self.require_E, "steps": list(self.steps)}


def certify(trace: DarboTrace, phi_D: ComparisonFunction, phi_E: ComparisonFunction | None = None,
            slack: float = DEFAULT_SLACK, require_E: bool = False) -> Certificate:
    """Check both comparison inequalities and the kappa Lipschitz bound along ``trace``.

    Failures are returned as data. The nonconvexity inequality is
    informational unless ``require_E`` is set, since ensembles drawn from a
    convex set need no convexity argument.
    """
    if len(trace) < 2:
        raise ValueError("certify needs a trace with at least two records")
    recs = trace.records
    kappa_final = recs[-1].kappa
    steps = []
    for a, b in zip(recs[:-1], recs[1:]):
        d_rhs = phi_D(a.omega) + slack
        e_rhs = None if phi_E is None else phi_E(a.kappa) + slack
        lip_lhs = abs(a.kappa - kappa_final)
        lip_rhs = 2 * a.dist_to_final + slack
        steps.append({
            "n": a.n, "D_lhs": b.omega, "D_rhs": d_rhs, "D_pass": bool(b.omega <= d_rhs),
            "E_lhs": b.kappa, "E_rhs": e_rhs, "E_pass": None if e_rhs is None else bool(b.kappa <= e_rhs),
            "kappa_lipschitz_lhs": lip_lhs, "kappa_lipschitz_rhs": lip_rhs,
            "kappa_lipschitz_pass": bool(lip_lhs <= lip_rhs),
        })
    return Certificate(tuple(steps), slack, phi_D, phi_E, require_E)
