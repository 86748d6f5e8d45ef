"""Hot inner loops.

Every kernel has a pure-numpy implementation (``*_np``) and a loop
implementation compiled with numba (``*_nb``).  The public name is bound to
one of them according to :mod:`otcl._accel`.  Both variants must agree to
floating-point rounding; ``tests/test_kernels.py`` pins that.
"""

from itertools import permutations

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# log-sum-exp reductions used by Sinkhorn, IBP barycenters and entropic JKO
# ---------------------------------------------------------------------------


def _lse_np(c, f, g, eps, axis):
    # f and g take values in [-inf, inf) and c in [0, inf], so no NaN can arise
    z = g[None, :] - c
    z += f[:, None]
    z /= eps
    mx = z.max(axis=axis)
    shift = np.where(np.isfinite(mx), mx, 0.0)
    z -= shift[:, None] if axis == 1 else shift[None, :]
    np.exp(z, out=z)
    with np.errstate(divide="ignore"):
        return np.log(z.sum(axis=axis)) + shift


def log_row_lse_np(c, f, g, eps):
    """``out[i] = log sum_j exp((f[i] + g[j] - c[i, j]) / eps)``."""
    return _lse_np(c, f, g, eps, 1)


def log_col_lse_np(c, f, g, eps):
    return _lse_np(c, f, g, eps, 0)


# terms more than SKIP below the running max are dropped (relative size < 1e-17)
SKIP = 40.0


@njit(cache=True)
def log_row_lse_nb(c, f, g, eps):
    # single pass, running max rescaling
    n, m = c.shape
    out = np.empty(n)
    for i in range(n):
        mx = -np.inf
        s = 0.0
        for j in range(m):
            z = (f[i] + g[j] - c[i, j]) / eps
            if z <= mx:
                if z > mx - SKIP:
                    s += np.exp(z - mx)
            elif z > -np.inf:
                s = s * np.exp(mx - z) + 1.0 if mx > z - SKIP else 1.0
                mx = z
        out[i] = mx + np.log(s) if mx > -np.inf else -np.inf
    return out


@njit(cache=True)
def log_col_lse_nb(c, f, g, eps):
    n, m = c.shape
    mx = np.full(m, -np.inf)
    s = np.zeros(m)
    for i in range(n):
        for j in range(m):
            z = (f[i] + g[j] - c[i, j]) / eps
            if z <= mx[j]:
                if z > mx[j] - SKIP:
                    s[j] += np.exp(z - mx[j])
            elif z > -np.inf:
                s[j] = s[j] * np.exp(mx[j] - z) + 1.0 if mx[j] > z - SKIP else 1.0
                mx[j] = z
    out = np.empty(m)
    for j in range(m):
        out[j] = mx[j] + np.log(s[j]) if mx[j] > -np.inf else -np.inf
    return out


# ---------------------------------------------------------------------------
# triangle inequality
# ---------------------------------------------------------------------------


def triangle_violations_np(d, tol):
    """All triples ``(i, j, k)`` with ``d[i, k] > d[i, j] + d[j, k] + tol``."""
    n = d.shape[0]
    found = []
    for j in range(n):
        via = d[:, j, None] + d[None, j, :]
        bad = np.argwhere(d > via + tol)
        for i, k in bad:
            found.append((i, j, k))
    if not found:
        return np.zeros((0, 3), dtype=np.int64)
    out = np.array(found, dtype=np.int64)
    return out[np.lexsort((out[:, 2], out[:, 1], out[:, 0]))]


@njit(cache=True)
def triangle_violations_nb(d, tol):
    n = d.shape[0]
    count = 0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if d[i, k] > d[i, j] + d[j, k] + tol:
                    count += 1
    out = np.empty((count, 3), dtype=np.int64)
    p = 0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if d[i, k] > d[i, j] + d[j, k] + tol:
                    out[p, 0] = i
                    out[p, 1] = j
                    out[p, 2] = k
                    p += 1
    return out


# ---------------------------------------------------------------------------
# point barycenters on finite spaces
# ---------------------------------------------------------------------------


def weighted_sq_objective_np(d, points, lam):
    """``out[z] = sum_i lam[i] * d[z, points[i]]**2`` with zero weights skipped."""
    out = np.zeros(d.shape[0])
    for p, w in zip(points, lam):
        if w > 0:
            out += w * d[:, p] ** 2
    return out


@njit(cache=True)
def weighted_sq_objective_nb(d, points, lam):
    n = d.shape[0]
    out = np.zeros(n)
    for z in range(n):
        s = 0.0
        for i in range(points.shape[0]):
            if lam[i] > 0:
                dz = d[z, points[i]]
                s += lam[i] * dz * dz
        out[z] = s
    return out


def barycenter_union_np(d, flat_sets, offsets, lam, rtol):
    """Mark every atom that minimizes ``z -> sum_i lam_i d(z, x_i)^2`` for some
    tuple ``x_i`` in the product of the sets.

    ``flat_sets[offsets[i]:offsets[i+1]]`` is the i-th set.  Returns the mask
    and the number of tuples whose objective was infinite everywhere.
    """
    k = len(lam)
    sets = [flat_sets[offsets[i]:offsets[i + 1]] for i in range(k)]
    d2 = d**2
    n = d.shape[0]
    mask = np.zeros(n, dtype=np.bool_)
    n_inf = 0
    sizes = [len(s) for s in sets]
    total = int(np.prod(sizes))
    chunk = max(1, 200_000 // max(n, 1))
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        obj = np.zeros((len(idx), n))
        rem = idx.copy()
        for i in range(k - 1, -1, -1):
            digit = rem % sizes[i]
            rem //= sizes[i]
            if lam[i] > 0:
                obj += lam[i] * d2[sets[i][digit], :]
        best = obj.min(axis=1)
        finite = np.isfinite(best)
        n_inf += int((~finite).sum())
        thresh = best + rtol * np.maximum(1.0, np.abs(best))
        hit = (obj <= thresh[:, None]) & finite[:, None]
        mask |= hit.any(axis=0)
    return mask, n_inf


@njit(cache=True)
def barycenter_union_nb(d, flat_sets, offsets, lam, rtol):
    k = lam.shape[0]
    n = d.shape[0]
    sizes = np.empty(k, dtype=np.int64)
    total = 1
    for i in range(k):
        sizes[i] = offsets[i + 1] - offsets[i]
        total *= sizes[i]
    mask = np.zeros(n, dtype=np.bool_)
    obj = np.empty(n)
    digits = np.zeros(k, dtype=np.int64)
    n_inf = 0
    for t in range(total):
        rem = t
        for i in range(k - 1, -1, -1):
            digits[i] = rem % sizes[i]
            rem //= sizes[i]
        best = np.inf
        for z in range(n):
            s = 0.0
            for i in range(k):
                if lam[i] > 0:
                    dz = d[z, flat_sets[offsets[i] + digits[i]]]
                    s += lam[i] * dz * dz
            obj[z] = s
            if s < best:
                best = s
        if best == np.inf:
            n_inf += 1
            continue
        thresh = best + rtol * max(1.0, abs(best))
        for z in range(n):
            if obj[z] <= thresh:
                mask[z] = True
    return mask, n_inf


# ---------------------------------------------------------------------------
# brute-force assignment
# ---------------------------------------------------------------------------


def min_permutation_cost_np(c):
    """Cheapest permutation of an ``n x n`` cost matrix, first in lexicographic
    order among exact ties."""
    n = c.shape[0]
    perms = np.array(list(permutations(range(n))), dtype=np.int64)
    costs = c[np.arange(n)[None, :], perms].sum(axis=1)
    best = int(np.argmin(costs))
    return float(costs[best]), perms[best]


@njit(cache=True)
def min_permutation_cost_nb(c):
    n = c.shape[0]
    perm = np.arange(n)
    best_perm = perm.copy()
    best = np.inf
    while True:
        s = 0.0
        for i in range(n):
            s += c[i, perm[i]]
        if s < best:
            best = s
            best_perm[:] = perm
        # next lexicographic permutation
        i = n - 2
        while i >= 0 and perm[i] >= perm[i + 1]:
            i -= 1
        if i < 0:
            break
        j = n - 1
        while perm[j] <= perm[i]:
            j -= 1
        perm[i], perm[j] = perm[j], perm[i]
        lo = i + 1
        hi = n - 1
        while lo < hi:
            perm[lo], perm[hi] = perm[hi], perm[lo]
            lo += 1
            hi -= 1
    return best, best_perm


if USE_NUMBA:
    log_row_lse = log_row_lse_nb
    log_col_lse = log_col_lse_nb
    triangle_violations = triangle_violations_nb
    weighted_sq_objective = weighted_sq_objective_nb
    barycenter_union = barycenter_union_nb
    min_permutation_cost = min_permutation_cost_nb
else:
    log_row_lse = log_row_lse_np
    log_col_lse = log_col_lse_np
    triangle_violations = triangle_violations_np
    weighted_sq_objective = weighted_sq_objective_np
    barycenter_union = barycenter_union_np
    min_permutation_cost = min_permutation_cost_np
