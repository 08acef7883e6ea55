"""End-to-end acceptance checks, one PASS/FAIL line each.

Run with pytest, or directly with ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import contextlib
import filecmp
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

from qmn.cli import main as cli_main
from qmn.config import write_ensemble
from qmn.darbo import ComparisonFunction, certify, ensemble_iterate, picard_solve
from qmn.ensemble import FunctionEnsemble, Grid, SampledFunction
from qmn.geometry import hausdorff_distance, kcenter_radius, nonconvexity
from qmn.hammerstein import (Cone, HammersteinProblem, Kernel, Nonlinearity, apply, cone_ball_sampler,
                             solve_radius)
from qmn.noncompactness import QuasimeasureParams, axiom_suite, chi, shrinking_stub

ROOT = Path(__file__).resolve().parents[1]
A_ERF = math.sqrt(math.pi) / 2 * math.erf(1.0)  # integral of exp(-y^2) over [0, 1]
BOX = {"kind": "indicator", "lo": 0.0, "hi": 1.0}


def report(label: str, ok: bool, **info) -> bool:
    parts = "  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items())
    print(f"{'PASS' if ok else 'FAIL':<5} {label:<44} {parts}")
    return ok


# --------------------------------------------------------------------------


def geometry_oracles() -> bool:
    rng = np.random.default_rng(0)
    worst_lo, worst_hi, tri_slack = math.inf, 0.0, -math.inf
    for _ in range(200):
        dim, n, k = int(rng.integers(1, 4)), int(rng.integers(2, 13)), int(rng.integers(1, 5))
        A = rng.normal(size=(n, dim))
        exact, greedy = kcenter_radius(A, k), kcenter_radius(A, k, mode="greedy")
        ratio = 1.0 if exact == 0 else greedy / exact
        worst_lo, worst_hi = min(worst_lo, ratio), max(worst_hi, ratio)
        B, C = rng.normal(size=(int(rng.integers(1, 13)), dim)), rng.normal(size=(int(rng.integers(1, 13)), dim))
        tri_slack = max(tri_slack, hausdorff_distance(A, B) - hausdorff_distance(A, C) - hausdorff_distance(C, B))
    k_seg = nonconvexity([[0.0], [1.0]], budget=10_000)
    k_tri = nonconvexity([[0, 0], [1, 0], [0, 1]], budget=10_000)
    ok = (1 - 1e-12 <= worst_lo and worst_hi <= 2 + 1e-12 and tri_slack <= 1e-12
          and abs(k_seg - 0.5) <= 1e-6 and abs(k_tri - math.sqrt(2) / 2) <= 1e-3)
    return report("geometry oracles", ok, greedy_ratio=f"[{worst_lo:.4f},{worst_hi:.4f}]",
                  triangle_slack=tri_slack, kappa_segment=k_seg, kappa_triangle=k_tri)


def axiom_suite_check() -> bool:
    params = QuasimeasureParams.default(Grid(1, 3.0, 31))
    rep = axiom_suite(params, seed=0, trials=100)
    stub = axiom_suite(params, seed=0, trials=100, components={"eta": shrinking_stub})
    failed = [k for k, c in rep.checks.items() if not c.passed]
    ok = rep.passed and not stub.checks["qmn2_monotone"].passed
    return report("axiom suite + non-monotone stub", ok, trials=100, failing=failed or "none",
                  stub_monotone_failures=len(stub.checks["qmn2_monotone"].failures))


def chi_tail() -> bool:
    grid = Grid(1, 3.0, 31)
    params = QuasimeasureParams.default(grid)
    ramp = np.clip(np.abs(grid.axis) - 1.0, 0.0, 1.0)
    F = FunctionEnsemble(grid, np.stack([np.zeros(grid.size), ramp]))
    c1, c2 = chi(F, 1, 0.0, params.saturating), chi(F, 2, 0.1, params.saturating)
    return report("chi tail behaviour on the ramp", c1 == 1.0 and c2 == 0.0, level1_eps0=c1, level2_eps01=c2)


def _separable(n, nl, outer=None):
    kernel = Kernel("separable", {"outer": outer or {"kind": "gauss"}, "inner": BOX})
    return HammersteinProblem(Grid(1, 3.0, n), kernel, nl, Cone(1.0, 0.2))


def hammerstein_correctness() -> bool:
    errs = []
    for n in (201, 401):
        P = _separable(n, Nonlinearity("affine", {"alpha": 1.0, "gamma": 0.0}))
        x = P.grid.axis
        Hf = apply(P, SampledFunction(P.grid, 2 * np.exp(-x ** 2))).scalar()
        errs.append(float(np.abs(Hf - 2 * A_ERF * np.exp(-x ** 2)).max()))
    ratio = errs[0] / errs[1]
    R = solve_radius(_separable(201, Nonlinearity("sqrt", {"gamma": 1.0})))
    ok = errs[0] <= 1e-3 and 3 <= ratio <= 5 and abs(R - 1) <= 1e-9
    return report("operator quadrature and radius", ok, err_201=errs[0], refine_ratio=ratio, R=R)


def fixed_point() -> bool:
    m = 1 / (1 - A_ERF / 2)
    nl = Nonlinearity("affine", {"alpha": 0.5, "gamma": 1.0})
    peaks, iters, margin, converged = [], 0, math.inf, True
    for n in (241, 481):  # both grids carry 0 and 1 as nodes
        f, tr = picard_solve(_separable(n, nl), tol=1e-10, max_iter=60)
        converged &= tr.converged
        iters = max(iters, tr.iterations)
        margin = min(margin, min(tr.cone_margins))
        peaks.append(float(f.scalar().max()))
    extrapolated = (4 * peaks[1] - peaks[0]) / 3
    ok = converged and iters <= 60 and abs(extrapolated - m) <= 1e-6 and margin >= -1e-9
    return report("Picard fixed point", ok, iterations=iters, peak=extrapolated,
                  oracle=m, error=abs(extrapolated - m), min_cone_margin=margin)


def darbo_certificates() -> bool:
    nl = Nonlinearity("affine", {"alpha": 0.5, "gamma": 1.0})
    P = _separable(61, nl, outer={"kind": "const", "value": 1.0})
    P = P.with_radius(solve_radius(P))
    params = QuasimeasureParams.default(P.grid)
    C1 = cone_ball_sampler(6)(np.random.default_rng(0), P, params)
    trace = ensemble_iterate(P, C1, 8, params, [0, 15, 30, 45, 60])
    q0 = trace.measured_contraction()
    good = certify(trace, ComparisonFunction.linear(q0 + 0.01))
    bad = certify(trace, ComparisonFunction.linear(q0 - 0.1))
    ok = good.passed and bad.d_violations > 0 and good.lipschitz_violations == 0
    return report("contraction certificates", ok, q0=q0, pass_slope=good.passed,
                  control_first_violation=bad.first_violation, lipschitz_violations=good.lipschitz_violations)


def _run_all_commands(base: Path) -> Path:
    """Run every command from inside ``base`` so that all paths, and hence configs, coincide."""
    here = os.getcwd()
    os.chdir(base)
    try:
        with contextlib.redirect_stdout(io.StringIO()):
            _commands()
    finally:
        os.chdir(here)
    return base / "out"


def _commands():
    base = Path(".")
    grid = Grid(1, 3.0, 31)
    cfg = base / "cfg.json"
    cfg.write_text(json.dumps({"grid": {"points_per_axis": 31}, "suite": {"trials": 10}}))
    ens = base / "ens.csv"
    rng = np.random.default_rng(5)
    write_ensemble(FunctionEnsemble(grid, rng.normal(size=(4, grid.size))), ens)
    out = base / "out"
    cli_main(["measure", "--config", str(cfg), "--ensemble", str(ens), "--out", str(out / "measure"), "--seed", "3"])
    cli_main(["axioms", "--config", str(cfg), "--out", str(out / "axioms"), "--seed", "3"])
    cli_main(["hammerstein", "--config", str(ROOT / "configs" / "affine_const.json"),
              "--out", str(out / "hammerstein"), "--seed", "3"])


def determinism() -> bool:
    with tempfile.TemporaryDirectory() as t1, tempfile.TemporaryDirectory() as t2:
        a, b = _run_all_commands(Path(t1)), _run_all_commands(Path(t2))
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        other = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        same = files == other and all(filecmp.cmp(a / f, b / f, shallow=False) for f in files)
    return report("byte-identical command outputs", same and len(files) > 0, files=len(files))


CRITERIA = [geometry_oracles, axiom_suite_check, chi_tail, hammerstein_correctness,
            fixed_point, darbo_certificates, determinism]


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda f: f.__name__)
def test_acceptance(criterion, capsys):
    with capsys.disabled():
        print()
        ok = criterion()
    assert ok


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} passed")
    sys.exit(0 if all(results) else 1)
