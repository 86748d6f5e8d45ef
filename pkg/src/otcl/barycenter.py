"""Wasserstein barycenters and variances of finite mixtures of measures.

Free-support barycenters on general finite spaces are not searched; the
fixed-support linear program gives a certified optimum over its support and
``epsilon`` records how far a reported barycenter may be from the best value
over the searched class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.optimize import linprog

from . import kernels
from .linalg import spd_power, spd_sqrt
from .measures import DiscreteMeasure, GaussianMeasure
from .ot import HIGHS_OPTIONS, InfeasibleTransport, w2_gaussian_sq, w2_sq
from .spaces import EuclideanGrid

MULTIMARGINAL_CAP = 1_000_000


class MixtureOmega:
    """A finitely supported probability measure over measures."""

    def __init__(self, components):
        comps = [(float(lam), mu) for lam, mu in components]
        if not comps:
            raise ValueError("mixture needs at least one component")
        lams = np.array([c[0] for c in comps])
        if np.any(lams <= 0):
            raise ValueError("mixture weights must be positive")
        if abs(lams.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {lams.sum()!r}, not 1")
        kinds = {type(mu) for _, mu in comps}
        if len(kinds) != 1:
            raise ValueError("mixture components must all be discrete or all Gaussian")
        first = comps[0][1]
        if isinstance(first, DiscreteMeasure):
            if any(mu.space is not first.space for _, mu in comps):
                raise ValueError("mixture components live on different spaces")
        elif any(mu.dim != first.dim for _, mu in comps):
            raise ValueError("Gaussian components have different dimensions")
        self.components = comps

    @property
    def lambdas(self):
        return np.array([c[0] for c in self.components])

    @property
    def measures(self):
        return [c[1] for c in self.components]

    @property
    def gaussian(self):
        return isinstance(self.components[0][1], GaussianMeasure)

    @property
    def space(self):
        return None if self.gaussian else self.components[0][1].space

    def __len__(self):
        return len(self.components)


@dataclass
class BarycenterResult:
    measure: object
    objective: float
    epsilon: float = 0.0
    certified: bool = True
    info: dict = field(default_factory=dict)


def objective(omega, nu):
    """``sum_j lambda_j W2^2(nu, mu_j)``."""
    return float(sum(lam * w2_sq(nu, mu) for lam, mu in omega.components))


def variance(omega, candidates):
    """Smallest mixture objective over ``candidates`` and its minimizer.

    This is an upper bound on the variance.  Returns ``(inf, None)`` when no
    candidate has finite objective.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate list is empty")
    best, arg = math.inf, None
    for nu in candidates:
        val = objective(omega, nu)
        if val < best:
            best, arg = val, nu
    return best, arg


def _support_lp(omega, support):
    space = omega.space
    s = np.asarray(support, dtype=np.int64)
    ns = s.size
    costs, b_eq = [], []
    nvar = 0
    layout = []
    for j, (lam, mu) in enumerate(omega.components):
        c = space.sq_dist(s, mu.support)
        r, col = np.nonzero(np.isfinite(c))
        if r.size == 0:
            raise InfeasibleTransport(f"component {j} unreachable from the support")
        layout.append((nvar, r, col, c))
        costs.append(lam * c[r, col])
        nvar += r.size
    nu_off = nvar
    nvar += ns
    eq_rows = []
    for j, (lam, mu) in enumerate(omega.components):
        off, r, col, _ = layout[j]
        var = off + np.arange(r.size)
        # row sums minus nu
        eq_rows.append(sps.csr_matrix(
            (np.r_[np.ones(r.size), -np.ones(ns)], (np.r_[r, np.arange(ns)], np.r_[var, nu_off + np.arange(ns)])),
            shape=(ns, nvar)))
        b_eq.append(np.zeros(ns))
        eq_rows.append(sps.csr_matrix((np.ones(r.size), (col, var)), shape=(mu.support.size, nvar)))
        b_eq.append(mu.weights)
    a_eq = sps.vstack(eq_rows).tocsr()
    cvec = np.r_[np.concatenate(costs), np.zeros(ns)]
    res = linprog(cvec, A_eq=a_eq, b_eq=np.concatenate(b_eq), bounds=(0, None),
                  method="highs-ds", options=HIGHS_OPTIONS)
    if res.status == 2:
        raise InfeasibleTransport("fixed-support barycenter LP infeasible")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    x = np.maximum(res.x, 0.0)
    nu = x[nu_off:]
    return s, nu, float(res.fun), layout, x


def barycenter_fixed_support(omega, support):
    """Exact barycenter among measures carried by ``support`` (one joint LP
    over all component couplings sharing a common first marginal)."""
    if omega.gaussian:
        raise TypeError("fixed-support barycenters need discrete components")
    s, nu, val, _, _ = _support_lp(omega, support)
    dense = np.zeros(omega.space.n)
    dense[s] = nu
    dense /= dense.sum()
    bary = DiscreteMeasure.from_dense(omega.space, dense)
    return BarycenterResult(bary, max(val, 0.0), 0.0, True,
                            {"solver": "fixed-support-lp", "support_size": int(s.size),
                             "epsilon_scope": "fixed support"})


def _tuples(sizes):
    grids = np.meshgrid(*[np.arange(n) for n in sizes], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def barycenter_multimarginal(omega):
    """Free-support barycenter on a Euclidean grid via the multi-marginal LP.

    The optimal multi-plan is pushed forward under the weighted mean map; the
    resulting points generally fall off the input grid, so the barycenter is
    returned on a refined grid whose axes contain them (``info["space"]``),
    together with the components re-expressed there (``info["omega"]``).
    """
    space = omega.space
    if not isinstance(space, EuclideanGrid):
        raise TypeError("multi-marginal barycenters need a Euclidean grid")
    sizes = [mu.support.size for mu in omega.measures]
    total = int(np.prod(sizes, dtype=np.int64))
    if total > MULTIMARGINAL_CAP:
        raise ValueError(f"{total} tuples exceed the cap of {MULTIMARGINAL_CAP}")
    lam = omega.lambdas
    tup = _tuples(sizes)
    pts = np.stack([space.coords[mu.support][tup[:, j]] for j, mu in enumerate(omega.measures)], axis=1)
    bar = np.einsum("j,tjd->td", lam, pts)
    cost = np.einsum("j,tj->t", lam, np.sum((pts - bar[:, None, :]) ** 2, axis=2))
    rows, b_eq = [], []
    var = np.arange(total)
    for j, mu in enumerate(omega.measures):
        rows.append(sps.csr_matrix((np.ones(total), (tup[:, j], var)), shape=(sizes[j], total)))
        b_eq.append(mu.weights)
    res = linprog(cost, A_eq=sps.vstack(rows).tocsr(), b_eq=np.concatenate(b_eq), bounds=(0, None),
                  method="highs-ds", options=HIGHS_OPTIONS)
    if res.status != 0:
        raise RuntimeError(f"multi-marginal LP failed: {res.message}")
    mass = np.maximum(res.x, 0.0)
    refined = refine_grid(space, bar)
    idx, snap = refined.nearest_atoms(bar)
    dense = np.bincount(idx, weights=mass, minlength=refined.n)
    bary = DiscreteMeasure.from_dense(refined, dense / dense.sum())
    moved = MixtureOmega([(l, transfer(mu, refined)) for l, mu in omega.components])
    return BarycenterResult(bary, max(float(res.fun), 0.0), 0.0, True, {
        "solver": "multimarginal-lp", "tuples": total, "space": refined, "omega": moved,
        "image_atoms": np.unique(idx), "snap_max": float(snap.max()),
    })


def refine_grid(space, points):
    """Grid whose axes are the union of ``space``'s axes and the coordinates of
    ``points``; same reference type."""
    pts = np.atleast_2d(points)
    axes = [np.union1d(a, pts[:, k]) for k, a in enumerate(space.axes)]
    return EuclideanGrid(axes, reference=space.reference)


def transfer(mu, grid):
    """Re-express a grid measure on another grid containing its atoms."""
    idx, snap = grid.nearest_atoms(mu.space.coords[mu.support])
    if snap.max() > 0:
        raise ValueError("target grid does not contain the measure's atoms")
    return DiscreteMeasure(grid, idx, mu.weights)


def gaussian_barycenter(omega, tol=1e-12, max_iter=10_000):
    """Bures-Wasserstein barycenter by the covariance fixed-point iteration."""
    if not omega.gaussian:
        raise TypeError("gaussian_barycenter needs Gaussian components")
    lam = omega.lambdas
    gs = omega.measures
    mean = np.einsum("j,jd->d", lam, np.stack([g.mean for g in gs]))
    s = np.einsum("j,jab->ab", lam, np.stack([g.cov for g in gs]))
    clamps = 0
    residual = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        r, c1 = spd_sqrt(s)
        ir, c2 = spd_power(s, -0.5)
        acc = np.zeros_like(s)
        for l, g in zip(lam, gs):
            root, c3 = spd_sqrt(r @ g.cov @ r)
            acc += l * root
            clamps += c3
        clamps += c1 + c2
        new = ir @ acc @ acc @ ir
        new = 0.5 * (new + new.T)
        residual = float(np.abs(new - s).max())
        s = new
        if residual < tol:
            break
    bary = GaussianMeasure(mean, s)
    obj = float(sum(l * w2_gaussian_sq(bary, g) for l, g in zip(lam, gs)))
    info = {"solver": "bures-fixed-point", "iterations": it, "residual": residual,
            "converged": residual < tol, "eigen_clamps": clamps}
    if bary.dim == 1:
        info["closed_form_std"] = float(lam @ np.sqrt([g.cov[0, 0] for g in gs]))
    return BarycenterResult(bary, obj, 0.0, residual < tol, info)


def _ibp(cs, logmu, lam, f, g, epsilon, max_iter, tol):
    """Bregman projections from the potentials ``f``, ``g`` (updated in place)."""
    zs = np.zeros(cs[0].shape[0])
    err, lognu, it = math.inf, None, 0
    for it in range(1, int(max_iter) + 1):
        logr = []
        for j, c in enumerate(cs):
            g[j] = epsilon * (logmu[j] - kernels.log_col_lse(c, f[j], np.zeros_like(g[j]), epsilon))
            logr.append(kernels.log_row_lse(c, zs, g[j], epsilon) + f[j] / epsilon)
        with np.errstate(invalid="ignore"):
            lognu = sum(l * lr for l, lr in zip(lam, logr))
        lognu = np.where(np.isnan(lognu), -np.inf, lognu)
        for j in range(len(cs)):
            with np.errstate(invalid="ignore"):
                delta = np.where(np.isfinite(logr[j]), lognu - logr[j], 0.0)
            f[j] = f[j] + epsilon * np.where(np.isnan(delta), 0.0, delta)
        err = max(float(np.abs(np.exp(lr) - np.exp(lognu)).sum()) for lr in logr)
        if err < tol:
            break
    return lognu, err, it


def barycenter_sinkhorn(omega, support, epsilon, max_iter=100_000, tol=1e-9, certify=False):
    """Iterative Bregman projections (log domain) on a fixed support.

    With ``certify=True`` the exact fixed-support LP is also solved and
    ``epsilon`` is the objective gap to it; otherwise ``epsilon`` carries the
    regularization scale ``eps * sum_j lambda_j log(|S| n_j)`` and the result
    is marked uncertified.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if omega.gaussian:
        raise TypeError("Sinkhorn barycenters need discrete components")
    space = omega.space
    s = np.asarray(support, dtype=np.int64)
    lam = omega.lambdas
    cs = [np.ascontiguousarray(space.sq_dist(s, mu.support)) for mu in omega.measures]
    logmu = [np.log(mu.weights) for mu in omega.measures]
    f = [np.zeros(s.size) for _ in cs]
    g = [np.zeros(mu.support.size) for mu in omega.measures]
    top = max(float(c[np.isfinite(c)].max()) for c in cs)
    schedule = [float(epsilon)]
    while schedule[-1] * 2.0 < top:
        schedule.append(schedule[-1] * 2.0)
    it_total = 0
    # anneal the regularization with warm starts; IBP stalls from cold starts at small epsilon
    for eps_k in reversed(schedule):
        cap = int(max_iter) - it_total if eps_k == epsilon else 1000
        lognu, err, it = _ibp(cs, logmu, lam, f, g, eps_k, cap, tol)
        it_total += it
    nu = np.exp(lognu)
    nu /= nu.sum()
    dense = np.zeros(space.n)
    dense[s] = nu
    bary = DiscreteMeasure.from_dense(space, dense)
    plan_cost = 0.0
    for j, c in enumerate(cs):
        with np.errstate(invalid="ignore"):
            z = (f[j][:, None] + g[j][None, :] - c) / epsilon
        p = np.exp(np.where(np.isnan(z), -np.inf, z))
        ok = p > 0
        plan_cost += lam[j] * float(np.sum(p[ok] * c[ok]))
    info = {"solver": "ibp-log", "iterations": it_total, "annealing_stages": len(schedule), "marginal_error": err,
            "converged": err < tol, "entropic_plan_cost": plan_cost}
    if certify:
        obj = objective(omega, bary)
        exact = barycenter_fixed_support(omega, s)
        info["exact_objective"] = exact.objective
        return BarycenterResult(bary, obj, abs(obj - exact.objective), True, info)
    bound = float(epsilon * sum(l * math.log(s.size * mu.support.size) for l, mu in omega.components))
    info["note"] = "uncertified regularization bound"
    return BarycenterResult(bary, plan_cost, bound, False, info)
