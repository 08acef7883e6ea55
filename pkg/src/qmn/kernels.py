"""Hot numeric kernels, each with a numba loop version and a numpy version.

The public names at the bottom of the module point at whichever backend
``qmn._accel`` selected. Both variants stay importable (``*_numba`` and
``*_numpy``) so tests and the benchmark can compare them directly.

Conventions: point clouds are ``(n, d)`` float arrays, ensembles are
``(members, nodes, m)`` float arrays. Distances are Euclidean and computed as
the square root of the maximal squared norm, so ``max`` commutes exactly with
``sqrt``.
"""
from itertools import combinations

import numpy as np

from ._accel import njit, select

INF = np.inf


# --------------------------------------------------------------------------
# point-cloud distances


def _hausdorff_loops(A, B):
    na, nb, d = A.shape[0], B.shape[0], A.shape[1]
    worst_a = 0.0
    for i in range(na):
        best = INF
        for j in range(nb):
            acc = 0.0
            for c in range(d):
                t = A[i, c] - B[j, c]
                acc += t * t
            if acc < best:
                best = acc
        if best > worst_a:
            worst_a = best
    worst_b = 0.0
    for j in range(nb):
        best = INF
        for i in range(na):
            acc = 0.0
            for c in range(d):
                t = A[i, c] - B[j, c]
                acc += t * t
            if acc < best:
                best = acc
        if best > worst_b:
            worst_b = best
    return np.sqrt(max(worst_a, worst_b))


def hausdorff_numpy(A, B):
    diff = A[:, None, :] - B[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return float(np.sqrt(max(sq.min(axis=1).max(), sq.min(axis=0).max())))


def _pairwise_loops(A):
    n, d = A.shape
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for c in range(d):
                t = A[i, c] - A[j, c]
                acc += t * t
            out[i, j] = np.sqrt(acc)
            out[j, i] = out[i, j]
    return out


def pairwise_numpy(A):
    diff = A[:, None, :] - A[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _min_dist_loops(Y, A):
    nb, n, d = Y.shape[0], A.shape[0], A.shape[1]
    out = np.empty(nb)
    for b in range(nb):
        best = INF
        for i in range(n):
            acc = 0.0
            for c in range(d):
                t = Y[b, c] - A[i, c]
                acc += t * t
            if acc < best:
                best = acc
        out[b] = np.sqrt(best)
    return out


def min_dist_numpy(Y, A):
    out = np.empty(Y.shape[0])
    chunk = max(1, 2_000_000 // max(1, A.shape[0] * A.shape[1]))
    for s in range(0, Y.shape[0], chunk):
        diff = Y[s:s + chunk, None, :] - A[None, :, :]
        out[s:s + chunk] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).min(axis=1))
    return out


# --------------------------------------------------------------------------
# k-center radii on a distance matrix of distinct points


def _exhaustive_loops(D, k):
    n = D.shape[0]
    if k >= n:
        return 0.0
    idx = np.arange(k)
    best = INF
    while True:
        r = 0.0
        for p in range(n):
            dmin = INF
            for c in range(k):
                t = D[p, idx[c]]
                if t < dmin:
                    dmin = t
            if dmin > r:
                r = dmin
                if r >= best:
                    break
        if r < best:
            best = r
        i = k - 1
        while i >= 0 and idx[i] == n - k + i:
            i -= 1
        if i < 0:
            break
        idx[i] += 1
        for j in range(i + 1, k):
            idx[j] = idx[j - 1] + 1
    return best


def exhaustive_numpy(D, k):
    n = D.shape[0]
    if k >= n:
        return 0.0
    best = INF
    it = combinations(range(n), k)
    while True:
        block = np.fromiter((c for _, c in zip(range(4096), it)), dtype=(np.intp, k))
        if block.size == 0:
            break
        best = min(best, float(D[:, block].min(axis=2).max(axis=0).min()))
    return best


def _eccentric_start(D):
    n = D.shape[0]
    best, arg = INF, 0
    for i in range(n):
        e = 0.0
        for j in range(n):
            if D[i, j] > e:
                e = D[i, j]
        if e < best:
            best, arg = e, i
    return arg


def _greedy_loops(D, k, start):
    n = D.shape[0]
    mind = D[start].copy()
    for _ in range(1, min(k, n)):
        j = 0
        for p in range(1, n):
            if mind[p] > mind[j]:
                j = p
        if mind[j] == 0.0:
            break
        for p in range(n):
            if D[j, p] < mind[p]:
                mind[p] = D[j, p]
    r = 0.0
    for p in range(n):
        if mind[p] > r:
            r = mind[p]
    return r


def greedy_numpy(D, k, start):
    mind = D[start].copy()
    for _ in range(1, min(k, D.shape[0])):
        j = int(np.argmax(mind))
        if mind[j] == 0.0:
            break
        np.minimum(mind, D[j], out=mind)
    return float(mind.max())


def eccentric_start_numpy(D):
    return int(np.argmin(D.max(axis=1)))


# --------------------------------------------------------------------------
# exact k-center on the line with unrestricted centers


def _line_runs(v, width, k):
    """Greedy cover of sorted ``v`` by runs of span <= width.

    Returns the largest run span, or -1.0 when more than ``k`` runs are
    needed. Membership is decided by the difference ``v[t] - v[s]`` so that
    the spans are exactly the pair differences the caller compares against.
    """
    n = v.shape[0]
    s = 0
    runs = 0
    span = 0.0
    while s < n:
        runs += 1
        if runs > k:
            return -1.0
        e = np.searchsorted(v, v[s] + width, side="right")
        while e < n and v[e] - v[s] <= width:
            e += 1
        while e - 1 > s and v[e - 1] - v[s] > width:
            e -= 1
        if v[e - 1] - v[s] > span:
            span = v[e - 1] - v[s]
        s = e
    return span


def _line_search(v, k):
    # lo stays infeasible and hi stays a feasible pair difference; once they
    # are adjacent floats no candidate lies strictly between them
    n = v.shape[0]
    if k >= n:
        return 0.0
    lo, hi = 0.0, v[n - 1] - v[0]
    while True:
        mid = lo + (hi - lo) / 2.0
        if mid <= lo or mid >= hi:
            break
        span = _line_runs(v, mid, k)
        if span < 0.0:
            lo = mid
        else:
            hi = span
    return hi / 2.0


_line_runs_py = _line_runs


def line_numpy(v, k):
    n = v.shape[0]
    if k >= n:
        return 0.0
    if n <= 256:
        # few points: binary search over the sorted pair differences directly
        cands = np.unique((v[None, :] - v[:, None])[np.triu_indices(n, 1)])
        lo, hi = 0, cands.shape[0] - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if _line_runs_py(v, cands[mid], k) >= 0.0:
                hi = mid
            else:
                lo = mid + 1
        return float(cands[lo]) / 2.0
    lo, hi = 0.0, float(v[n - 1] - v[0])
    while True:
        mid = lo + (hi - lo) / 2.0
        if mid <= lo or mid >= hi:
            break
        span = _line_runs_py(v, mid, k)
        if span < 0.0:
            lo = mid
        else:
            hi = float(span)
    return hi / 2.0


# --------------------------------------------------------------------------
# canonical form of a small cloud: lexicographically sorted distinct rows


def _lex_less(a, b):
    for c in range(a.shape[0]):
        if a[c] < b[c]:
            return True
        if a[c] > b[c]:
            return False
    return False


def _canonical_loops(P):
    n, d = P.shape
    Q = P.copy()
    for i in range(1, n):
        row = Q[i].copy()
        j = i - 1
        while j >= 0 and _lex_less(row, Q[j]):
            Q[j + 1] = Q[j]
            j -= 1
        Q[j + 1] = row
    keep = np.ones(n, dtype=np.bool_)
    for i in range(1, n):
        same = True
        for c in range(d):
            if Q[i, c] != Q[i - 1, c]:
                same = False
                break
        keep[i] = not same
    return Q[keep]


def canonical_numpy(P):
    return np.unique(P, axis=0)


# --------------------------------------------------------------------------
# per-node k-center radii of an ensemble's value clouds


def _eta_radii_loops(values, k, cap):
    M, N, m = values.shape
    out = np.zeros(N)
    for x in range(N):
        if m == 1:
            v = np.unique(values[:, x, 0])
            out[x] = _line_search_nb(v, k)
        else:
            P = _canonical_nb(values[:, x, :].copy())
            n = P.shape[0]
            if n <= k:
                out[x] = 0.0
                continue
            D = _pairwise_nb(P)
            if n <= cap:
                out[x] = _exhaustive_nb(D, k)
            else:
                out[x] = _greedy_nb(D, k, _eccentric_nb(D))
    return out


def eta_radii_numpy(values, k, cap):
    M, N, m = values.shape
    out = np.zeros(N)
    if m == 1:
        ordered = np.sort(values[:, :, 0], axis=0)
        for x in range(N):
            col = ordered[:, x]
            v = col[np.concatenate(([True], col[1:] != col[:-1]))]
            out[x] = line_numpy(v, k)
        return out
    for x in range(N):
        P = canonical_numpy(values[:, x, :])
        n = P.shape[0]
        if n <= k:
            continue
        D = pairwise_numpy(P)
        if n <= cap:
            out[x] = exhaustive_numpy(D, k)
        else:
            out[x] = greedy_numpy(D, k, eccentric_start_numpy(D))
    return out


# --------------------------------------------------------------------------
# pairwise restricted sup distances between ensemble members


def _pair_sup_loops(values, idx):
    M, _, m = values.shape
    out = np.zeros((M, M))
    for i in range(M):
        for j in range(i + 1, M):
            best = 0.0
            for s in idx:
                acc = 0.0
                for c in range(m):
                    t = values[i, s, c] - values[j, s, c]
                    acc += t * t
                if acc > best:
                    best = acc
            out[i, j] = np.sqrt(best)
            out[j, i] = out[i, j]
    return out


def pair_sup_numpy(values, idx):
    sub = values[:, idx, :]
    M = sub.shape[0]
    out = np.zeros((M, M))
    for i in range(M - 1):
        diff = sub[i + 1:] - sub[i]
        sq = np.einsum("jsc,jsc->js", diff, diff).max(axis=1)
        out[i, i + 1:] = np.sqrt(sq)
        out[i + 1:, i] = out[i, i + 1:]
    return out


# --------------------------------------------------------------------------
# coordinate ascent on simplex weights for max_y min_a |y - a|


def _refine_loops(lam, A, step0, step_min, max_moves):
    n, d = A.shape
    lam = lam.copy()
    y = np.zeros(d)
    for j in range(n):
        for c in range(d):
            y[c] += lam[j] * A[j, c]
    val = _min_dist_point(y, A)
    cand = np.empty(d)
    step = step0
    while step >= step_min:
        moves = 0
        while moves < max_moves:
            best_val, bi, bj, bt = val, -1, -1, 0.0
            for i in range(n):
                for j in range(n):
                    if i == j or lam[j] <= 0.0:
                        continue
                    t = min(step, lam[j])
                    for c in range(d):
                        cand[c] = y[c] + t * (A[i, c] - A[j, c])
                    v = _min_dist_point(cand, A)
                    if v > best_val:
                        best_val, bi, bj, bt = v, i, j, t
            if bi < 0:
                break
            for c in range(d):
                y[c] = y[c] + bt * (A[bi, c] - A[bj, c])
            lam[bi] += bt
            lam[bj] = lam[bj] - bt if bt < lam[bj] else 0.0
            val = best_val
            moves += 1
        step *= 0.5
    return lam, val


def _min_dist_point(y, A):
    best = INF
    for i in range(A.shape[0]):
        acc = 0.0
        for c in range(A.shape[1]):
            t = y[c] - A[i, c]
            acc += t * t
        if acc < best:
            best = acc
    return np.sqrt(best)


def refine_numpy(lam, A, step0, step_min, max_moves):
    n, d = A.shape
    lam = lam.astype(float).copy()
    y = np.zeros(d)
    for j in range(n):
        y += lam[j] * A[j]
    val = float(np.sqrt(((y - A) ** 2).sum(axis=1).min()))
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    dirs = A[ii] - A[jj]
    step = step0
    while step >= step_min:
        for _ in range(max_moves):
            t = np.minimum(step, lam[jj])
            ok = lam[jj] > 0.0
            cand = y + t[:, None] * dirs
            diff = cand[:, None, :] - A[None, :, :]
            vals = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).min(axis=1))
            vals[~ok] = -INF
            b = int(np.argmax(vals))
            if not vals[b] > val:
                break
            y = cand[b].copy()
            lam[ii[b]] += t[b]
            lam[jj[b]] = lam[jj[b]] - t[b] if t[b] < lam[jj[b]] else 0.0
            val = float(vals[b])
        step *= 0.5
    return lam, val


# --------------------------------------------------------------------------
# quadrature application of a kernel matrix


def _quad_apply_loops(K, w, Nv):
    P, N = Nv.shape
    out = np.zeros((P, K.shape[0]))
    for p in range(P):
        for i in range(K.shape[0]):
            acc = 0.0
            for j in range(N):
                acc += K[i, j] * w[j] * Nv[p, j]
            out[p, i] = acc
    return out


def quad_apply_numpy(K, w, Nv):
    return (Nv * w) @ K.T


# --------------------------------------------------------------------------
# compiled variants and backend dispatch

_pairwise_nb = njit(_pairwise_loops)
_canonical_nb = njit(_canonical_loops)
_exhaustive_nb = njit(_exhaustive_loops)
_greedy_nb = njit(_greedy_loops)
_eccentric_nb = njit(_eccentric_start)
_min_dist_point = njit(_min_dist_point)
_line_runs = njit(_line_runs)
_line_search_nb = njit(_line_search)
_lex_less = njit(_lex_less)

hausdorff_numba = njit(_hausdorff_loops)
pairwise_numba = _pairwise_nb
min_dist_numba = njit(_min_dist_loops)
exhaustive_numba = _exhaustive_nb
greedy_numba = _greedy_nb
eccentric_start_numba = _eccentric_nb
line_numba = _line_search_nb
canonical_numba = _canonical_nb
eta_radii_numba = njit(_eta_radii_loops)
pair_sup_numba = njit(_pair_sup_loops)
refine_numba = njit(_refine_loops)
quad_apply_numba = njit(_quad_apply_loops)

hausdorff = select(hausdorff_numba, hausdorff_numpy)
pairwise = select(pairwise_numba, pairwise_numpy)
min_dist = select(min_dist_numba, min_dist_numpy)
exhaustive = select(exhaustive_numba, exhaustive_numpy)
greedy = select(greedy_numba, greedy_numpy)
eccentric_start = select(eccentric_start_numba, eccentric_start_numpy)
line = select(line_numba, line_numpy)
canonical = select(canonical_numba, canonical_numpy)
eta_radii = select(eta_radii_numba, eta_radii_numpy)
pair_sup = select(pair_sup_numba, pair_sup_numpy)
refine = select(refine_numba, refine_numpy)
# a dense matrix product: BLAS through numpy beats compiled loops, so both
# backends use it; the loop version stays available for the benchmark
quad_apply = quad_apply_numpy
