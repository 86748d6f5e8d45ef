"""Quadratic optimal transport between measures on a common ground space.

Exact plans come from a sparse linear program solved with HiGHS' dual
simplex; the equality-constraint duals are returned as Kantorovich potentials
and complementary slackness is checked before a plan is handed back.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.optimize import linprog

from . import kernels
from .linalg import check_spd, spd_sqrt
from .measures import DiscreteMeasure, GaussianMeasure, same_space

log = logging.getLogger(__name__)

MARGINAL_TOL = 1e-9
HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


class InfeasibleTransport(ValueError):
    """Every coupling moves mass across an infinite distance."""


@dataclass
class TransportPlan:
    source: DiscreteMeasure
    target: DiscreteMeasure
    matrix: np.ndarray
    cost: float
    potentials: tuple = None
    info: dict = field(default_factory=dict)

    def marginal_error(self):
        r = np.abs(self.matrix.sum(axis=1) - self.source.weights).max()
        c = np.abs(self.matrix.sum(axis=0) - self.target.weights).max()
        return float(max(r, c))

    def transpose(self):
        pots = None if self.potentials is None else self.potentials[::-1]
        return TransportPlan(self.target, self.source, self.matrix.T.copy(), self.cost, pots, dict(self.info))


def cost_matrix(mu, nu):
    space = same_space(mu, nu)
    return space.sq_dist(mu.support, nu.support)


def solve_transport_lp(a, b, c):
    """Minimize ``<c, P>`` over couplings of ``a`` and ``b``; ``inf`` cells of
    ``c`` are forbidden.  Returns ``(P, f, g)`` or raises
    :class:`InfeasibleTransport`."""
    n, m = c.shape
    finite = np.isfinite(c)
    rows, cols = np.nonzero(finite)
    nv = rows.size
    if nv == 0:
        raise InfeasibleTransport("no finite-cost cell")
    var = np.arange(nv)
    # the last column constraint is implied by the others (equal total mass);
    # dropping it fixes the dual gauge g[-1] = 0 and keeps presolve stable
    keep = cols < m - 1
    a_eq = sps.vstack([
        sps.csr_matrix((np.ones(nv), (rows, var)), shape=(n, nv)),
        sps.csr_matrix((np.ones(keep.sum()), (cols[keep], var[keep])), shape=(m - 1, nv)),
    ]).tocsr()
    res = linprog(c[rows, cols], A_eq=a_eq, b_eq=np.r_[a, b[:-1]], bounds=(0, None),
                  method="highs-ds", options=HIGHS_OPTIONS)
    if res.status == 2:
        raise InfeasibleTransport("marginals cannot be coupled at finite cost")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    p = np.zeros((n, m))
    p[rows, cols] = np.maximum(res.x, 0.0)
    duals = res.eqlin.marginals
    return p, duals[:n].copy(), np.r_[duals[n:], 0.0]


def _slackness(c, p, f, g):
    finite = np.isfinite(c)
    red = np.where(finite, c - f[:, None] - g[None, :], 0.0)
    dual_violation = float(max(0.0, -red[finite].min())) if finite.any() else 0.0
    support = p > 1e-12
    gap = float(np.abs(red[support]).max()) if support.any() else 0.0
    return dual_violation, gap


def _canonical(mu, nu):
    return mu.sort_key() > nu.sort_key()


def solve_ot_exact(mu, nu):
    """Optimal plan for the cost ``d^2``.

    The problem is always solved with its arguments in a canonical order, so
    ``solve_ot_exact(mu, nu).cost == solve_ot_exact(nu, mu).cost`` exactly.
    """
    same_space(mu, nu)
    if _canonical(mu, nu):
        return solve_ot_exact(nu, mu).transpose()
    c = cost_matrix(mu, nu)
    p, f, g = solve_transport_lp(mu.weights, nu.weights, c)
    cost = float(np.sum(p[p > 0] * c[p > 0]))
    dual_violation, gap = _slackness(c, p, f, g)
    plan = TransportPlan(mu, nu, p, cost, (f, g))
    err = plan.marginal_error()
    dual_obj = float(f @ mu.weights + g @ nu.weights)
    tol = 1e-8 * max(1.0, abs(cost))
    plan.info.update(
        solver="highs-ds",
        marginal_error=err,
        dual_objective=dual_obj,
        max_dual_violation=dual_violation,
        max_slackness_gap=gap,
        certified=bool(err <= MARGINAL_TOL and dual_violation <= tol and gap <= tol
                       and abs(dual_obj - cost) <= tol),
    )
    if err > MARGINAL_TOL:
        log.warning("exact OT marginal error %.3g exceeds %.1g", err, MARGINAL_TOL)
    return plan


def oracle_ot_bruteforce(mu, nu):
    """Exact optimum over permutation couplings; valid for uniform measures
    with equal support sizes (Birkhoff), n <= 7."""
    same_space(mu, nu)
    n = mu.support.size
    if nu.support.size != n:
        raise ValueError("brute force needs equal support sizes")
    if n > 7:
        raise ValueError("brute force limited to n <= 7")
    for w in (mu.weights, nu.weights):
        if np.abs(w - 1.0 / n).max() > 1e-12:
            raise ValueError("brute force needs uniform weights")
    c = cost_matrix(mu, nu)
    best, perm = kernels.min_permutation_cost(np.ascontiguousarray(c))
    if not np.isfinite(best):
        raise InfeasibleTransport("every permutation crosses an infinite distance")
    p = np.zeros((n, n))
    p[np.arange(n), perm] = 1.0 / n
    return TransportPlan(mu, nu, p, float(best) / n, None, {"solver": "bruteforce", "permutation": perm.tolist()})


def quantile_coupling(mu, nu):
    """Monotone (north-west corner) coupling on a one-dimensional grid; the
    exact optimum for the convex cost ``|x - y|^2``."""
    space = same_space(mu, nu)
    if getattr(space, "kind", None) != "grid" or space.dim != 1:
        raise ValueError("quantile coupling needs a one-dimensional grid")
    x = space.coords[mu.support, 0]
    y = space.coords[nu.support, 0]
    ia, ib = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
    a, b = mu.weights[ia].copy(), nu.weights[ib].copy()
    p = np.zeros((a.size, b.size))
    i = j = 0
    while i < a.size and j < b.size:
        q = min(a[i], b[j])
        p[ia[i], ib[j]] += q
        a[i] -= q
        b[j] -= q
        if a[i] <= b[j]:
            i += 1
        else:
            j += 1
    c = (x[:, None] - y[None, :]) ** 2
    return TransportPlan(mu, nu, p, float(np.sum(p * c)), None, {"solver": "quantile"})


def _sinkhorn(c, loga, logb, epsilon, f, g, max_iter, tol):
    err, it = np.inf, 0
    for it in range(1, int(max_iter) + 1):
        f = epsilon * (loga - kernels.log_row_lse(c, np.zeros_like(f), g, epsilon))
        g = epsilon * (logb - kernels.log_col_lse(c, f, np.zeros_like(g), epsilon))
        if it % 10 == 0 or it == 1:
            lr = kernels.log_row_lse(c, f, g, epsilon)
            err = float(np.abs(np.exp(lr) - np.exp(loga)).max())
            if not np.isfinite(err):
                raise InfeasibleTransport("Sinkhorn marginals diverged; infinite-cost blockage")
            if err < tol:
                break
    return f, g, it


def solve_ot_entropic(mu, nu, epsilon, max_iter=100_000, tol=1e-9):
    """Log-domain Sinkhorn for ``min <C, P> + epsilon * KL(P | a x b)``.

    The regularization is annealed geometrically from the largest finite cost
    down to ``epsilon`` with warm-started potentials; plain Sinkhorn from zero
    potentials stalls on nearly degenerate plans when ``epsilon`` is small.
    Stops when the row-marginal violation (columns are exact after each
    update) drops below ``tol``; otherwise returns the last iterate with
    ``info["converged"] = False``.  ``cost`` is the transport part ``<C, P>``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    same_space(mu, nu)
    c = np.ascontiguousarray(cost_matrix(mu, nu))
    if not np.isfinite(c).any():
        raise InfeasibleTransport("no finite-cost cell")
    loga, logb = np.log(mu.weights), np.log(nu.weights)
    f = np.zeros(c.shape[0])
    g = np.zeros(c.shape[1])
    schedule = [float(epsilon)]
    top = float(c[np.isfinite(c)].max())
    while schedule[-1] * 2.0 < top:
        schedule.append(schedule[-1] * 2.0)
    total = 0
    for eps_k in reversed(schedule):
        f, g, it = _sinkhorn(c, loga, logb, eps_k, f, g, max_iter - total if eps_k == epsilon else 1000, tol)
        total += it
    with np.errstate(invalid="ignore"):
        z = (f[:, None] + g[None, :] - c) / epsilon
    p = np.exp(np.where(np.isnan(z), -np.inf, z))
    err = float(max(np.abs(p.sum(1) - mu.weights).max(), np.abs(p.sum(0) - nu.weights).max()))
    finite = p > 0
    cost = float(np.sum(p[finite] * c[finite]))
    return TransportPlan(mu, nu, p, cost, (f, g), {
        "solver": "sinkhorn-log", "epsilon": float(epsilon), "iterations": total,
        "annealing_stages": len(schedule), "marginal_error": err, "converged": bool(err < tol),
    })


def w2_gaussian(g1, g2):
    """Bures-Wasserstein distance between Gaussians."""
    if g1.dim != g2.dim:
        raise ValueError("dimension mismatch")
    check_spd(g1.cov)
    check_spd(g2.cov)
    return math.sqrt(w2_gaussian_sq(g1, g2))


def w2_gaussian_sq(g1, g2):
    if g1.dim != g2.dim:
        raise ValueError("dimension mismatch")
    dm = float(np.sum((g1.mean - g2.mean) ** 2))
    if g1.dim == 1:
        s1, s2 = math.sqrt(g1.cov[0, 0]), math.sqrt(g2.cov[0, 0])
        return dm + (s1 - s2) ** 2
    r2, _ = spd_sqrt(g2.cov)
    cross, _ = spd_sqrt(r2 @ g1.cov @ r2)
    val = dm + float(np.trace(g1.cov + g2.cov - 2 * cross))
    return max(val, 0.0)


def w2_sq(mu, nu):
    """Squared Wasserstein distance for a pair of discrete or Gaussian measures;
    ``inf`` when no finite-cost coupling exists."""
    if isinstance(mu, GaussianMeasure) and isinstance(nu, GaussianMeasure):
        return w2_gaussian_sq(mu, nu)
    if isinstance(mu, DiscreteMeasure) and isinstance(nu, DiscreteMeasure):
        if mu == nu:
            return 0.0
        try:
            return solve_ot_exact(mu, nu).cost
        except InfeasibleTransport:
            return math.inf
    raise TypeError("w2 needs two discrete or two Gaussian measures")


def w2(mu, nu):
    return math.sqrt(w2_sq(mu, nu))
