"""Numerical certificates for curvature conditions and the inequalities they
imply.

Every check returns a :class:`CheckReport` whose rows carry
``margin = rhs - lhs``; the report passes when the smallest margin is at
least ``-tolerance``.  Inequalities asserted "for all t" are verified only at
the sampled parameters, and existential statements (some geodesic, some
barycenter) only along the geodesic or barycenter that the solvers return.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .functionals import EnergySpec, evaluate
from .interpolation import displacement_interpolate, gaussian_interpolate, t_grid
from .measures import GaussianMeasure
from .ot import solve_ot_exact, w2_gaussian_sq, w2_sq
from .spaces import EuclideanGrid, FiniteSpace, GaussianAnalytic, GaussianReference, point_barycenter

CLOSED_FORM_TOL = 1e-8
DISCRETE_TOL = 1e-7
TUPLE_CAP = 1_000_000


class GeodesicUnavailable(RuntimeError):
    pass


class StartConditionError(ValueError):
    pass


@dataclass
class Row:
    label: dict
    lhs: float
    rhs: float
    margin: float
    extra: dict = field(default_factory=dict)


@dataclass
class CheckReport:
    check: str
    params: dict
    rows: list
    tolerance: float
    status: str = "pass"
    witness: dict = field(default_factory=dict)
    budget: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def min_margin(self):
        ms = [r.margin for r in self.rows]
        return min(ms) if ms else math.inf

    @property
    def passed(self):
        return self.status == "pass"

    def finalize(self):
        """Derive ``status`` and ``witness`` from the rows (rows sorted by
        their insertion order, which is deterministic)."""
        if self.status in ("vacuous", "constraint_failed", "error"):
            return self
        if not self.rows:
            self.status = "pass"
            return self
        margins = np.array([r.margin for r in self.rows], dtype=float)
        bad = np.isnan(margins)
        k = int(np.argmax(bad)) if bad.any() else int(np.argmin(margins))
        row = self.rows[k]
        self.witness = {"row": k, **row.label, "margin": row.margin}
        ok = not bad.any() and margins[k] >= -self.tolerance
        self.status = "pass" if ok else "fail"
        return self


def i_k(K, t):
    """``int_0^t exp(K r) dr``, continuous in ``K`` at zero."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if K == 0:
        return float(t)
    return math.expm1(K * t) / K


def default_tolerance(budget=0.0, closed_form=False):
    if closed_form:
        return CLOSED_FORM_TOL
    return max(DISCRETE_TOL, 4.0 * budget)


# ---------------------------------------------------------------------------
# CD(K, inf)
# ---------------------------------------------------------------------------


def check_cd(space, mu0, mu1, K, t_values=None, tol=None, energy=None):
    """Entropy convexity along the geodesic induced by the solver's plan."""
    energy = EnergySpec.boltzmann() if energy is None else energy
    if t_values is None:
        ts = t_grid()
    elif isinstance(t_values, (int, np.integer)):
        ts = t_grid(t_values)
    else:
        ts = np.asarray(t_values, dtype=float)
    gaussian = isinstance(mu0, GaussianMeasure)
    e0 = evaluate(energy, mu0, space)
    e1 = evaluate(energy, mu1, space)
    params = {"K": float(K), "t_grid": [float(t) for t in ts], "energy": energy.label}
    notes = [f"verified at {len(ts)} sampled t values only"]
    if not (math.isfinite(e0) and math.isfinite(e1)):
        rep = CheckReport("cd", params, [], tol if tol is not None else CLOSED_FORM_TOL, "vacuous",
                          notes=notes + ["endpoint entropy is +inf; inequality is vacuous"])
        return rep
    if gaussian:
        w2sq = w2_gaussian_sq(mu0, mu1)
        curve = [gaussian_interpolate(mu0, mu1, t) for t in ts]
        budget = 0.0
        params["geodesic"] = "closed-form (unique)"
    else:
        plan = solve_ot_exact(mu0, mu1)
        w2sq = plan.cost
        try:
            curve = [displacement_interpolate(plan, t) for t in ts]
        except LookupError as exc:
            raise GeodesicUnavailable(str(exc)) from exc
        budget = max(m.meta.get("snap_budget", 0.0) for m in curve)
        params["plan"] = {"solver": plan.info.get("solver"), "cost": plan.cost,
                          "certified": plan.info.get("certified")}
    params["w2_sq"] = w2sq
    rows = []
    for t, mt in zip(ts, curve):
        lhs = evaluate(energy, mt, space)
        rhs = (1 - t) * e0 + t * e1 - 0.5 * K * (1 - t) * t * w2sq
        rows.append(Row({"t": float(t)}, lhs, rhs, rhs - lhs))
    tol = default_tolerance(budget, gaussian) if tol is None else float(tol)
    rep = CheckReport("cd", params, rows, tol, budget=budget, notes=notes).finalize()
    if rep.status == "fail" and not gaussian:
        rep.notes.append("no certificate found along the computed geodesic")
    return rep


# ---------------------------------------------------------------------------
# BCD(K, inf) / Wasserstein Jensen
# ---------------------------------------------------------------------------


def check_jensen_bcd(space, omega, K, bary, tol=None, energy=None):
    """Jensen inequality at a supplied barycenter.

    The row uses ``sum_j lambda_j W2^2(bary, mu_j)`` in place of the variance;
    for an exact barycenter the two coincide, otherwise the objective exceeds
    the variance by at most ``bary.epsilon``.
    """
    energy = EnergySpec.boltzmann() if energy is None else energy
    lam = omega.lambdas
    ents = np.array([evaluate(energy, mu, space) for mu in omega.measures])
    params = {"K": float(K), "energy": energy.label, "components": len(omega),
              "epsilon": float(bary.epsilon), "barycenter_solver": bary.info.get("solver")}
    if not np.all(np.isfinite(ents)):
        return CheckReport("bcd", params, [], tol if tol is not None else CLOSED_FORM_TOL, "vacuous",
                           notes=["a component has +inf entropy; the right-hand side is +inf"])
    nu = bary.measure
    d2 = np.array([w2_sq(nu, mu) for mu in omega.measures])
    obj = float(lam @ d2)
    mean_ent = float(lam @ ents)
    lhs = evaluate(energy, nu, space)
    rhs = mean_ent - 0.5 * K * obj
    gaussian = omega.gaussian
    budget = float(nu.meta.get("snap_budget", 0.0)) if not gaussian else 0.0
    row = Row({"omega": "mixture"}, lhs, rhs, rhs - lhs, {
        "mean_entropy": mean_ent, "barycenter_objective": obj,
        "variance_upper": obj, "variance_lower": max(0.0, obj - float(bary.epsilon)),
    })
    params["barycenter_objective"] = obj
    tol = default_tolerance(budget, gaussian) if tol is None else float(tol)
    rep = CheckReport("bcd", params, [row], tol, budget=budget, notes=[
        "right-hand side uses the integral of W2^2 to the computed barycenter",
    ]).finalize()
    if rep.status == "fail" and not gaussian:
        rep.notes.append("no certificate found at the computed barycenter")
    return rep


# ---------------------------------------------------------------------------
# EVI_K in integral form
# ---------------------------------------------------------------------------


def _dist_sq(a, b):
    if isinstance(a, GaussianMeasure):
        return w2_gaussian_sq(a, b)
    return w2_sq(a, b)


def check_evi_integral(curve, z, energy, K, space, tol=None):
    """Integral EVI inequality at every sampled pair ``s <= t``."""
    ez = evaluate(energy, z, space)
    if not math.isfinite(ez):
        raise ValueError("energy at the comparison point must be finite")
    ts = curve.times
    d2 = [_dist_sq(m, z) for m in curve.measures]
    es = [evaluate(energy, m, space) for m in curve.measures]
    rows, skipped = [], 0
    for j, t in enumerate(ts):
        for i in range(j + 1):
            s = ts[i]
            if not (math.isfinite(d2[i]) and math.isfinite(d2[j])):
                skipped += 1
                continue
            dt = t - s
            lhs = 0.5 * math.exp(K * dt) * d2[j] - 0.5 * d2[i]
            rhs = i_k(K, dt) * (ez - es[j])
            rows.append(Row({"s": float(s), "t": float(t)}, lhs, rhs, rhs - lhs))
    closed = all(isinstance(m, GaussianMeasure) for m in curve.measures)
    budget = float(curve.info.get("snap_budget", 0.0))
    tol = default_tolerance(budget, closed) if tol is None else float(tol)
    notes = ["verified at sampled (s, t) pairs only; absolute continuity is not checked"]
    if skipped:
        notes.append(f"{skipped} pairs skipped for infinite distance")
    params = {"K": float(K), "energy": energy.label, "times": [float(t) for t in ts],
              "curve": curve.provenance, "skipped_pairs": skipped, "energy_at_z": ez}
    return CheckReport("evi", params, rows, tol, budget=budget, notes=notes).finalize()


def check_evi_jensen_bound(curve, omega, energy, K, epsilon, var_est, space, tol=None, start_tol=1e-9):
    """Jensen bound along a flow started near a barycenter.

    ``var_est`` is the best available variance value (typically a barycenter
    objective); the start must satisfy
    ``sum_j lambda_j W2^2(y_0, mu_j) <= var_est + epsilon``.
    """
    if var_est is None:
        raise StartConditionError("no variance estimate available; start condition unverifiable")
    epsilon = float(epsilon)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    lam = omega.lambdas
    y0 = curve.measures[0]
    start = float(sum(l * _dist_sq(y0, mu) for l, mu in omega.components))
    if start > var_est + epsilon + start_tol:
        raise StartConditionError(
            f"start objective {start!r} exceeds variance estimate {var_est!r} + epsilon {epsilon!r}")
    ents = np.array([evaluate(energy, mu, space) for mu in omega.measures])
    params = {"K": float(K), "epsilon": epsilon, "variance_estimate": float(var_est),
              "start_objective": start, "energy": energy.label,
              "times": [float(t) for t in curve.times]}
    if not np.all(np.isfinite(ents)):
        return CheckReport("evi-jensen", params, [], tol if tol is not None else CLOSED_FORM_TOL,
                           "vacuous", notes=["a component has +inf energy"])
    base = float(lam @ ents) - 0.5 * K * float(var_est)
    rows = []
    for t, yt in zip(curve.times, curve.measures):
        ik = i_k(K, t)
        if epsilon == 0.0:
            slack = 0.0
        elif ik > 0:
            slack = epsilon / (2.0 * ik)
        else:
            slack = math.inf
        lhs = evaluate(energy, yt, space)
        rhs = base + slack
        rows.append(Row({"t": float(t)}, lhs, rhs, rhs - lhs, {"epsilon_term": slack}))
    closed = all(isinstance(m, GaussianMeasure) for m in curve.measures)
    tol = default_tolerance(float(curve.info.get("snap_budget", 0.0)), closed) if tol is None else float(tol)
    notes = ["variance replaced by the supplied estimate (an upper bound on the variance)"]
    return CheckReport("evi-jensen", params, rows, tol, notes=notes).finalize()


# ---------------------------------------------------------------------------
# multi-marginal log-Brunn-Minkowski
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo, hi]`` in Euclidean space."""

    lo: tuple
    hi: tuple

    @classmethod
    def interval(cls, a, b):
        return cls((float(a),), (float(b),))

    def arrays(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)


def _box_measure(space, lo, hi):
    ref = space.reference
    if ref == "lebesgue":
        return float(np.prod(hi - lo))
    if isinstance(ref, GaussianReference):
        mean, cov = ref.mean, ref.cov
    elif ref == "gaussian":
        mean, cov = np.zeros(lo.size), np.eye(lo.size)
    else:
        raise ValueError(f"unsupported reference {ref!r}")
    if not np.allclose(cov, np.diag(np.diag(cov))):
        raise ValueError("box measures need a diagonal Gaussian reference")
    sd = np.sqrt(np.diag(cov))
    return float(np.prod(ndtr((hi - mean) / sd) - ndtr((lo - mean) / sd)))


def _check_lambdas(lambdas, n):
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape != (n,):
        raise ValueError("one weight per set required")
    if n > 1 and np.any((lam <= 0) | (lam >= 1)):
        raise ValueError("weights must lie in (0, 1)")
    if abs(lam.sum() - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1")
    return lam


def check_logbm(space, sets, lambdas, tol=None):
    """``m(E) >= prod_i m(E_i)^lambda_i`` where ``E`` collects the barycenters
    of all tuples drawn from the sets."""
    lam = _check_lambdas(lambdas, len(sets))
    params = {"lambdas": lam.tolist(), "sets": len(sets)}
    notes = []
    budget = 0.0
    if all(isinstance(s, Box) for s in sets):
        if isinstance(space, FiniteSpace):
            raise TypeError("boxes need a Euclidean space")
        los = np.stack([s.arrays()[0] for s in sets])
        his = np.stack([s.arrays()[1] for s in sets])
        meas = np.array([_box_measure(space, lo, hi) for lo, hi in zip(los, his)])
        lo, hi = lam @ los, lam @ his
        m_e = _box_measure(space, lo, hi)
        params["barycenter_set"] = {"lo": lo.tolist(), "hi": hi.tolist()}
        params["method"] = "continuum (weighted Minkowski combination of boxes)"
        closed = True
    else:
        idx_sets = [np.unique(np.asarray(s, dtype=np.int64)) for s in sets]
        sizes = [s.size for s in idx_sets]
        total = int(np.prod(sizes, dtype=np.int64))
        if total > TUPLE_CAP:
            raise ValueError(f"{total} tuples exceed the cap of {TUPLE_CAP}")
        m = np.asarray(space.ref_weights, dtype=float)
        meas = np.array([m[s].sum() for s in idx_sets])
        closed = False
        if isinstance(space, FiniteSpace):
            from . import kernels

            flat = np.concatenate(idx_sets)
            offsets = np.r_[0, np.cumsum(sizes)].astype(np.int64)
            mask, n_inf = kernels.barycenter_union(np.ascontiguousarray(space.dist), flat, offsets, lam, 1e-12)
            if n_inf:
                notes.append(f"{n_inf} tuples had no finite-variance candidate")
            params["method"] = "exhaustive tuple enumeration"
        elif isinstance(space, EuclideanGrid):
            grids = np.meshgrid(*[np.arange(n) for n in sizes], indexing="ij")
            tup = np.stack([g.ravel() for g in grids], axis=1)
            pts = sum(l * space.coords[s[tup[:, i]]] for i, (l, s) in enumerate(zip(lam, idx_sets)))
            idx, snap = space.nearest_atoms(pts)
            mask = np.zeros(space.n, dtype=bool)
            mask[idx] = True
            budget = float(snap.max())
            params["method"] = "continuum barycenters snapped to cells"
        else:
            raise TypeError("index sets need a finite space or a grid")
        m_e = float(m[mask].sum())
        params["barycenter_set_size"] = int(mask.sum())
        params["tuples"] = total
    if np.any(meas <= 0):
        raise ValueError("every set must have positive measure")
    rhs = float(np.prod(meas**lam))
    row = Row({"sets": len(sets)}, rhs, m_e, m_e - rhs, {"set_measures": meas.tolist()})
    tol = (1e-9 if closed else default_tolerance(budget)) if tol is None else float(tol)
    return CheckReport("logbm", params, [row], tol, budget=budget, notes=notes).finalize()


# ---------------------------------------------------------------------------
# functional Blaschke-Santalo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticFunction:
    """``f(x) = c + b . x - (q / 2) |x|^2``."""

    c: float = 0.0
    b: tuple = (0.0,)
    q: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        b = np.asarray(self.b, dtype=float)
        return self.c + x @ b - 0.5 * self.q * np.sum(x * x, axis=-1)

    def gaussian_integral(self, dim):
        """``int exp(f) d gamma_dim`` in closed form; needs ``q > -1``."""
        if not self.q > -1:
            raise ValueError("exp(f) is not integrable against the Gaussian")
        b = np.resize(np.asarray(self.b, dtype=float), dim)
        return math.exp(self.c + float(b @ b) / (2 * (1 + self.q))) * (1 + self.q) ** (-dim / 2)


class ConstraintViolation(ValueError):
    pass


def _quadratic_constraint_exact(fs, dim):
    """Exact check of ``sum_i f_i(x_i) <= 1/2 sum_i |x_i - mean(x)|^2`` for
    quadratic ``f_i``: the difference is a quadratic form plus linear and
    constant parts which must be bounded below by zero."""
    k = len(fs)
    proj = np.eye(k) - np.full((k, k), 1.0 / k)
    a = np.kron(proj + np.diag([f.q for f in fs]), np.eye(dim))
    b = np.concatenate([np.resize(np.asarray(f.b, dtype=float), dim) for f in fs])
    c0 = sum(f.c for f in fs)
    w, v = np.linalg.eigh(a)
    if w.min() < -1e-12:
        return False, -math.inf
    proj_b = v.T @ b
    null = w <= 1e-12
    if np.any(np.abs(proj_b[null]) > 1e-12):
        return False, -math.inf
    minimum = -0.5 * float(np.sum(proj_b[~null] ** 2 / w[~null])) - c0
    return minimum >= -1e-12, minimum


def check_blaschke_santalo(space, functions, tol=None, samples=2000, seed=0, assume_bcd1=False):
    """Two phases: verify the duality constraint on tuples, then measure
    ``1 - prod_i int exp(f_i) dm``."""
    k = len(functions)
    if k < 1:
        raise ValueError("need at least one function")
    params = {"k": k, "seed": int(seed)}
    notes = []
    gaussian_space = isinstance(space, GaussianAnalytic)
    if not (gaussian_space and space.reference == "gaussian") and not assume_bcd1:
        raise ValueError("the reference must be the standard Gaussian or asserted BCD(1, inf)")
    violation = None
    if gaussian_space:
        dim = space.dim
        rng = np.random.default_rng(seed)
        xs = rng.normal(scale=2.0, size=(samples, k, dim))
        if dim == 1:
            g = np.linspace(-4, 4, 9)
            mesh = np.stack(np.meshgrid(*([g] * k), indexing="ij"), axis=-1).reshape(-1, k, 1)
            if mesh.shape[0] <= 100_000:
                xs = np.concatenate([mesh, xs])
        total = xs.shape[0]
        lhs = sum(np.asarray(f(xs[:, i, :]), dtype=float).reshape(total) for i, f in enumerate(functions))
        rhs = 0.5 * k * np.array([point_barycenter(space, x, np.full(k, 1.0 / k)).value for x in xs]) \
            if total <= 5000 else 0.5 * np.sum((xs - xs.mean(axis=1, keepdims=True)) ** 2, axis=(1, 2))
        gap = rhs - lhs
        params["constraint_samples"] = int(total)
        params["constraint_min_gap"] = float(gap.min())
        if gap.min() < -1e-12:
            j = int(np.argmin(gap))
            violation = {"tuple": xs[j].tolist(), "gap": float(gap[j])}
        if all(isinstance(f, QuadraticFunction) for f in functions):
            ok, minimum = _quadratic_constraint_exact(functions, dim)
            params["constraint_exact_min"] = minimum
            params["constraint_method"] = "sampled + exact quadratic form"
            if not ok and violation is None:
                violation = {"exact_minimum": minimum}
        else:
            params["constraint_method"] = "sampled"
            notes.append("conclusion conditional on sampled constraint")
        integrals = []
        for f in functions:
            if isinstance(f, QuadraticFunction):
                integrals.append(f.gaussian_integral(dim))
            elif dim == 1:
                val, err = integrate.quad(
                    lambda x: math.exp(float(f(np.array([x])).ravel()[0]) - 0.5 * x * x) / math.sqrt(2 * math.pi),
                    -np.inf, np.inf, epsabs=1e-12, epsrel=1e-12)
                integrals.append(val)
            else:
                raise ValueError("non-quadratic functions need dim = 1 for quadrature")
        closed = True
    else:
        n = space.n
        vals = [np.asarray(f, dtype=float) for f in functions]
        if any(v.shape != (n,) for v in vals):
            raise ValueError("per-atom functions need one value per atom")
        total = n**k
        if total > TUPLE_CAP:
            raise ValueError(f"{total} tuples exceed the cap of {TUPLE_CAP}")
        grids = np.meshgrid(*([np.arange(n)] * k), indexing="ij")
        tup = np.stack([g.ravel() for g in grids], axis=1)
        lhs = sum(vals[i][tup[:, i]] for i in range(k))
        if isinstance(space, FiniteSpace):
            d2 = space.dist**2
            rhs = np.empty(total)
            for start in range(0, total, 4096):
                block = tup[start:start + 4096]
                rhs[start:start + 4096] = 0.5 * d2[:, block].sum(axis=2).min(axis=0)
        else:
            pts = space.coords[tup]
            rhs = 0.5 * np.sum((pts - pts.mean(axis=1, keepdims=True)) ** 2, axis=(1, 2))
        gap = rhs - lhs
        params["constraint_samples"] = int(total)
        params["constraint_method"] = "exhaustive"
        params["constraint_min_gap"] = float(gap.min())
        if gap.min() < -1e-12:
            j = int(np.argmin(gap))
            violation = {"tuple": tup[j].tolist(), "gap": float(gap[j])}
        m = np.asarray(space.ref_weights, dtype=float)
        integrals = [float(m @ np.exp(v)) for v in vals]
        closed = False
    prod = float(np.prod(integrals))
    params["integrals"] = [float(v) for v in integrals]
    row = Row({"functions": k}, prod, 1.0, 1.0 - prod)
    tol = (CLOSED_FORM_TOL if closed else DISCRETE_TOL) if tol is None else float(tol)
    rep = CheckReport("bs", params, [row], tol, notes=notes)
    if violation is not None:
        rep.status = "constraint_failed"
        rep.witness = violation
        rep.notes.append("duality constraint violated; the inequality was not tested")
        return rep
    return rep.finalize()
