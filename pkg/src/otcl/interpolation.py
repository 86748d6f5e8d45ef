"""Displacement interpolation along optimal plans, and Gaussian geodesics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .linalg import spd_power, spd_sqrt
from .measures import DiscreteMeasure, GaussianMeasure

DEFAULT_T_GRID = 17


class MissingMidpoint(LookupError):
    pass


@dataclass
class WassersteinCurve:
    times: np.ndarray
    measures: list
    provenance: str = "user-supplied"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.measures) != self.times.size:
            raise ValueError("one measure per time required")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        spaces = {id(m.space) for m in self.measures if isinstance(m, DiscreteMeasure)}
        if len(spaces) > 1:
            raise ValueError("curve measures live on different spaces")

    def shifted(self, dt):
        return WassersteinCurve(self.times + dt, list(self.measures), self.provenance, dict(self.info))


def t_grid(count=DEFAULT_T_GRID):
    return np.linspace(0.0, 1.0, int(count))


def displacement_interpolate(plan, t):
    """Push every plan cell to the point at parameter ``t`` between its ends.

    On a finite space the point comes from the midpoint table; on a grid the
    straight-line point is snapped to the nearest atom and
    ``meta["snap_budget"]`` records the mass-weighted snap distance.
    """
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if t == 0.0:
        return DiscreteMeasure(plan.source.space, plan.source.support, plan.source.weights,
                               meta={"snap_budget": 0.0, "snap_max": 0.0, "t": 0.0})
    if t == 1.0:
        return DiscreteMeasure(plan.target.space, plan.target.support, plan.target.weights,
                               meta={"snap_budget": 0.0, "snap_max": 0.0, "t": 1.0})
    space = plan.source.space
    rows, cols = np.nonzero(plan.matrix > 0)
    mass = plan.matrix[rows, cols]
    xs = plan.source.support[rows]
    ys = plan.target.support[cols]
    meta = {"t": t}
    if space.kind == "finite":
        dest = np.empty(rows.size, dtype=np.int64)
        for k, (i, j) in enumerate(zip(xs, ys)):
            atom = space.midpoint(i, j, t)
            if atom is None:
                raise MissingMidpoint(f"no midpoint for atoms ({i}, {j}) at t={t}")
            dest[k] = atom
        meta.update(snap_budget=0.0, snap_max=0.0)
    elif space.kind == "grid":
        pts = (1.0 - t) * space.coords[xs] + t * space.coords[ys]
        dest, snap = space.nearest_atoms(pts)
        meta.update(snap_budget=float(mass @ snap), snap_max=float(snap.max()),
                    snap_flagged=bool(snap.max() > space.half_pitch + 1e-12))
    else:
        raise TypeError("displacement interpolation needs a finite space or a grid")
    dense = np.bincount(dest, weights=mass, minlength=space.n)
    dense /= dense.sum()
    return DiscreteMeasure.from_dense(space, dense, meta=meta)


def _optimal_map(s0, s1):
    r0, _ = spd_sqrt(s0)
    ir0, _ = spd_power(s0, -0.5)
    mid, _ = spd_sqrt(r0 @ s1 @ r0)
    return ir0 @ mid @ ir0


def gaussian_interpolate(g0, g1, t):
    if g0.dim != g1.dim:
        raise ValueError("dimension mismatch")
    t = float(t)
    mean = (1 - t) * g0.mean + t * g1.mean
    if g0.dim == 1:
        s = (1 - t) * np.sqrt(g0.cov[0, 0]) + t * np.sqrt(g1.cov[0, 0])
        return GaussianMeasure(mean, [[s * s]])
    a = (1 - t) * np.eye(g0.dim) + t * _optimal_map(g0.cov, g1.cov)
    cov = a @ g0.cov @ a
    return GaussianMeasure(mean, 0.5 * (cov + cov.T))


def geodesic_curve(mu0, mu1, times=None, plan=None):
    """Sampled geodesic between two measures; discrete inputs use ``plan`` or a
    freshly solved exact plan."""
    times = t_grid() if times is None else np.asarray(times, dtype=float)
    if isinstance(mu0, GaussianMeasure):
        return WassersteinCurve(times, [gaussian_interpolate(mu0, mu1, t) for t in times], "geodesic")
    from .ot import solve_ot_exact

    plan = solve_ot_exact(mu0, mu1) if plan is None else plan
    ms = [displacement_interpolate(plan, t) for t in times]
    budget = max(m.meta.get("snap_budget", 0.0) for m in ms)
    return WassersteinCurve(times, ms, "geodesic", {"snap_budget": budget, "plan_cost": plan.cost})


def write_curve_csv(curve, path):
    """One row per (t, atom, weight) for discrete curves, or per t with the
    flattened mean and covariance for Gaussian curves."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        first = curve.measures[0]
        if isinstance(first, GaussianMeasure):
            d = first.dim
            w.writerow(["t"] + [f"mean{i}" for i in range(d)]
                       + [f"cov{i}{j}" for i in range(d) for j in range(d)])
            for t, g in zip(curve.times, curve.measures):
                w.writerow([format(t, ".17g")] + [format(v, ".17g") for v in g.mean]
                           + [format(v, ".17g") for v in g.cov.ravel()])
        else:
            w.writerow(["t", "atom", "weight"])
            for t, m in zip(curve.times, curve.measures):
                for a, p in zip(m.support, m.weights):
                    w.writerow([format(t, ".17g"), int(a), format(p, ".17g")])
