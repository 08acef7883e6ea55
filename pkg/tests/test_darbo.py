import math

import numpy as np
import pytest

from qmn.darbo import (ComparisonFunction, DarboTrace, DivergenceError, EnsembleIterationError,
                       TraceRecord, certify, declared_contraction, ensemble_iterate, picard_solve)
from qmn.ensemble import FunctionEnsemble, Grid, SampledFunction
from qmn.hammerstein import (Cone, HammersteinProblem, Kernel, Nonlinearity, apply, car4_norm,
                             cone_ball_sampler, solve_radius)
from qmn.noncompactness import QuasimeasureParams

GAUSS_BOX = Kernel("separable", {"outer": {"kind": "gauss"}, "inner": {"kind": "indicator", "lo": 0.0, "hi": 1.0}})
CONST_BOX = Kernel("separable", {"outer": {"kind": "const", "value": 1.0}, "inner": {"kind": "indicator"}})


def make(kernel=GAUSS_BOX, alpha=0.5, gamma=1.0, n=61):
    P = HammersteinProblem(Grid(1, 3.0, n), kernel, Nonlinearity("affine", {"alpha": alpha, "gamma": gamma}),
                           Cone(1.0, 0.2))
    return P.with_radius(solve_radius(P)) if alpha < 1 and gamma > 0 else P.with_radius(1.0)


def test_comparison_functions():
    phi = ComparisonFunction.linear(0.5)
    assert phi(2.0) == 1.0 and phi.iterate(8.0, 3) == 1.0
    tab = ComparisonFunction.tabulated([0, 1, 2], [0, 0.5, 1.5])
    assert tab(0.5) == 0.25 and tab(4.0) == 3.0
    assert tab.iterate(2.0, 60) < 1e-6
    for bad in [lambda: ComparisonFunction.linear(1.0),
                lambda: ComparisonFunction.tabulated([0, 1], [0, 1.0]),
                lambda: ComparisonFunction.tabulated([0, 1, 2], [0, 0.8, 0.5]),
                lambda: ComparisonFunction.tabulated([1, 2], [0.5, 1.0])]:
        with pytest.raises(ValueError):
            bad()


def test_picard_zero_nonlinearity_stops_after_one_step():
    P = make(alpha=0.0, gamma=0.0)
    f, tr = picard_solve(P, tol=1e-12)
    assert tr.iterations == 1 and tr.converged
    assert (f.scalar() == 0).all()


def test_picard_residuals_contract_and_bound_holds():
    P = make()
    q = declared_contraction(P)
    assert q == pytest.approx(0.5 * car4_norm(P.kernel, P.grid))
    f, tr = picard_solve(P, tol=1e-10, max_iter=60)
    r = np.array(tr.residuals)
    assert tr.converged and tr.iterations <= 60
    assert (np.diff(r[1:]) < 0).all()
    assert (r[1:] <= (q + 1e-12) * r[:-1]).all()
    Hf = apply(P, f)
    assert np.abs(Hf.scalar() - f.scalar()).max() <= tr.bound
    assert min(tr.cone_margins) >= -1e-9


def test_picard_not_converged_is_reported():
    _, tr = picard_solve(make(), tol=1e-14, max_iter=3)
    assert not tr.converged and tr.iterations == 3


def test_picard_divergence_guard():
    P = make(kernel=Kernel("gaussian", {"a": 50.0, "b": 0.01}), alpha=1.0, gamma=1.0)
    with pytest.raises(DivergenceError, match="iteration diverged"):
        picard_solve(P, max_iter=500)


def test_picard_fixed_point_peak():
    A = math.sqrt(math.pi) / 2 * math.erf(1.0)
    m = 1 / (1 - A / 2)
    peaks = []
    for n in (241, 481):
        f, tr = picard_solve(make(n=n), tol=1e-10, max_iter=60)
        assert tr.converged
        peaks.append(f.scalar().max())
    assert abs((4 * peaks[1] - peaks[0]) / 3 - m) <= 1e-6


def _cluster(P, seed=0, members=6):
    params = QuasimeasureParams.default(P.grid)
    return params, cone_ball_sampler(members)(np.random.default_rng(seed), P, params)


def test_ensemble_iterate_zero_nonlinearity():
    P = make(alpha=0.0, gamma=0.0)
    params = QuasimeasureParams.default(P.grid)
    C1 = FunctionEnsemble(P.grid, np.full((3, P.grid.size), 0.7))
    tr = ensemble_iterate(P, C1, 3, params, [0, 30])
    assert all(r.omega == 0 and r.kappa == 0 for r in tr.records)
    assert certify(tr, ComparisonFunction.linear(0.0)).passed


def test_ensemble_iterate_contracts_and_preserves_shape():
    P = make(kernel=CONST_BOX)
    params, C1 = _cluster(P)
    tr = ensemble_iterate(P, C1, 6, params, [0, 15, 30, 45, 60])
    assert [r.n for r in tr.records] == list(range(1, 8))
    assert tr.member_count == len(C1) and len(tr.final) == len(C1) and tr.final.grid == P.grid
    om = tr.column("omega")
    assert (om[1:] <= 0.5 * om[:-1] + 1e-9).all()
    d = tr.column("dist_to_final")
    assert (np.diff(d[1:]) <= 1e-12).all()
    for r in tr.records:
        assert all(np.isfinite(v) and v >= 0 for v in r.to_dict().values())


def test_certify_positive_and_negative_control():
    P = make(kernel=CONST_BOX)
    params, C1 = _cluster(P, seed=4)
    tr = ensemble_iterate(P, C1, 6, params, [0, 30, 60])
    q0 = tr.measured_contraction()
    good = certify(tr, ComparisonFunction.linear(q0 + 0.01))
    assert good.passed and good.first_violation is None
    bad = certify(tr, ComparisonFunction.linear(q0 - 0.1))
    assert not bad.passed and bad.d_violations > 0
    assert bad.first_violation == next(s["n"] for s in bad.steps if not s["D_pass"])
    assert good.lipschitz_violations == 0


def test_certify_slack_monotone():
    recs = tuple(TraceRecord(n, om, om, 0, 0, ka, 0, d) for n, om, ka, d in
                 [(1, 1.0, 0.2, 0.5), (2, 0.6, 0.1, 0.2), (3, 0.3, 0.0, 0.0)])
    tr = DarboTrace(recs, (0,), 2)
    phi = ComparisonFunction.linear(0.5)
    results = [certify(tr, phi, slack=s).passed for s in (0.0, 0.05, 0.2, 1.0)]
    assert results == sorted(results)
    assert results[0] is False and results[-1] is True


def test_e_check_informational_by_default():
    recs = tuple(TraceRecord(n, 0.0, 0, 0, 0, ka, 0, 1.0) for n, ka in [(1, 0.1), (2, 0.5)])
    tr = DarboTrace(recs, (0,), 2)
    c = certify(tr, ComparisonFunction.linear(0.5), ComparisonFunction.linear(0.5))
    assert c.e_violations == 1 and c.passed
    assert not certify(tr, ComparisonFunction.linear(0.5), ComparisonFunction.linear(0.5), require_E=True).passed


def test_certify_needs_two_records():
    tr = DarboTrace((TraceRecord(1, 0, 0, 0, 0, 0, 0, 0),), (0,), 1)
    with pytest.raises(ValueError):
        certify(tr, ComparisonFunction.linear(0.5))


def test_ensemble_iterate_attaches_partial_trace():
    P = make()
    params = QuasimeasureParams.default(P.grid)
    C1 = FunctionEnsemble(P.grid, -np.ones((2, P.grid.size)))
    with pytest.raises(EnsembleIterationError) as info:
        ensemble_iterate(P, C1, 3, params, [0])
    # records need the image of their ensemble, so nothing completed here
    assert len(info.value.trace) == 0
    assert "step 1" in str(info.value)
