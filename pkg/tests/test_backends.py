"""The numba kernels and their numpy twins must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from qmn import kernels
from qmn._accel import NUMBA_AVAILABLE

pytestmark = pytest.mark.skipif(not NUMBA_AVAILABLE, reason="numba not installed")
rng = np.random.default_rng(2024)


def pair(name):
    return getattr(kernels, f"{name}_numba"), getattr(kernels, f"{name}_numpy")


@pytest.mark.parametrize("trial", range(5))
def test_distance_kernels(trial):
    A, B = rng.normal(size=(7, 3)), rng.normal(size=(5, 3))
    for name, args in [("hausdorff", (A, B)), ("pairwise", (A,)), ("min_dist", (B, A))]:
        nb, py = pair(name)
        np.testing.assert_allclose(nb(*args), py(*args), rtol=0, atol=1e-14)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_kcenter_kernels(k):
    P = kernels.canonical_numpy(rng.normal(size=(9, 2)))
    np.testing.assert_array_equal(kernels.canonical_numba(P), P)
    D = kernels.pairwise_numpy(P)
    assert pair("exhaustive")[0](D, k) == pair("exhaustive")[1](D, k)
    s = pair("eccentric_start")[1](D)
    assert pair("eccentric_start")[0](D) == s
    assert pair("greedy")[0](D, k, s) == pair("greedy")[1](D, k, s)
    v = np.unique(rng.normal(size=11))
    assert pair("line")[0](v, k) == pair("line")[1](v, k)


def test_eta_and_pair_kernels():
    vals = np.ascontiguousarray(rng.normal(size=(6, 40, 1)))
    for k in (1, 2):
        np.testing.assert_array_equal(pair("eta_radii")[0](vals, k, 14), pair("eta_radii")[1](vals, k, 14))
    vec = np.ascontiguousarray(rng.normal(size=(5, 40, 2)))
    np.testing.assert_allclose(pair("eta_radii")[0](vec, 2, 14), pair("eta_radii")[1](vec, 2, 14), atol=1e-14)
    idx = np.arange(10, 30)
    np.testing.assert_allclose(pair("pair_sup")[0](vals, idx), pair("pair_sup")[1](vals, idx), atol=1e-14)


def test_refine_and_quadrature():
    A = rng.normal(size=(5, 2))
    lam = np.full(5, 0.2)
    (l1, v1), (l2, v2) = pair("refine")[0](lam.copy(), A, 0.25, 1e-13, 64), pair("refine")[1](lam.copy(), A, 0.25, 1e-13, 64)
    assert v1 == pytest.approx(v2, abs=1e-12)
    K, w, Nv = rng.random((20, 20)), rng.random(20), rng.random((3, 20))
    np.testing.assert_allclose(pair("quad_apply")[0](K, w, Nv), pair("quad_apply")[1](K, w, Nv), rtol=1e-13)


def test_env_flag_selects_numpy_backend():
    code = ("import qmn, numpy as np; from qmn.geometry import nonconvexity;"
            "print(qmn.BACKEND, repr(nonconvexity([[0.0],[1.0]], budget=500)))")
    outs = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, QMN_BACKEND=backend)
        r = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
        name, value = r.stdout.split()
        assert name == backend
        outs[backend] = float(value)
    assert outs["numpy"] == pytest.approx(outs["numba"], abs=1e-12)


@pytest.mark.parametrize("n", [5, 40, 300, 1500])
def test_line_kernels_agree_across_sizes(n):
    for seed in range(4):
        v = np.unique(np.random.default_rng(seed).normal(size=n) * 10 ** seed)
        for k in (1, 2, 7):
            assert kernels.line_numba(v, k) == kernels.line_numpy(v, k)
