"""JSON file formats for spaces, measures, mixtures and energies.

Distances may be given as the string ``"inf"``.  Discrete measures refer to
atoms by index (row-major on grids).
"""

from __future__ import annotations

import json
import math

import numpy as np

from .barycenter import MixtureOmega
from .functionals import EnergySpec, power_u
from .measures import DiscreteMeasure, GaussianMeasure, discretize_gaussian
from .spaces import EuclideanGrid, FiniteSpace, GaussianAnalytic, GaussianReference


def _num(x):
    if isinstance(x, str):
        if x.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        raise ValueError(f"unexpected string {x!r} in numeric field")
    return float(x)


def space_from_dict(d):
    kind = d.get("type")
    if kind == "finite":
        dist = [[_num(v) for v in row] for row in d["dist"]]
        ref = d.get("ref_weights", [1.0] * len(dist))
        mids = [tuple(m) for m in d.get("midpoints") or ()]
        return FiniteSpace(dist, ref, mids)
    if kind == "grid":
        if "axes" not in d and "range" in d:
            axes = [np.linspace(lo, hi, int(n)) for lo, hi, n in d["range"]]
        else:
            axes = d["axes"]
        return EuclideanGrid(axes, reference=d.get("reference", "lebesgue"),
                             cell_volumes=d.get("cell_volumes"))
    if kind == "gaussian":
        return GaussianAnalytic(int(d["dim"]), d.get("reference", "gaussian"))
    raise ValueError(f"unknown space type {kind!r}")


def space_to_dict(space):
    if isinstance(space, FiniteSpace):
        dist = [["inf" if not math.isfinite(v) else float(v) for v in row] for row in space.dist]
        mids = sorted([i, j, t, k] for (i, j, t), k in space.midpoints.items())
        out = {"type": "finite", "dist": dist, "ref_weights": space.ref_weights.tolist()}
        if mids:
            out["midpoints"] = mids
        return out
    if isinstance(space, EuclideanGrid):
        ref = space.reference
        if isinstance(ref, GaussianReference):
            ref = {"gaussian": {"mean": ref.mean.tolist(), "cov": ref.cov.tolist()}}
        return {"type": "grid", "axes": [a.tolist() for a in space.axes], "reference": ref}
    return {"type": "gaussian", "dim": space.dim, "reference": space.reference}


def measure_from_dict(d, space):
    kind = d.get("type")
    if kind == "discrete":
        return DiscreteMeasure(space, d["support"], d["weights"])
    if kind == "gaussian":
        g = GaussianMeasure(d["mean"], d["cov"])
        if isinstance(space, EuclideanGrid):
            return discretize_gaussian(space, g)
        return g
    if kind == "dirac":
        return DiscreteMeasure.dirac(space, int(d["atom"]))
    if kind == "uniform":
        return DiscreteMeasure.uniform(space, d["support"])
    raise ValueError(f"unknown measure type {kind!r}")


def measure_to_dict(mu):
    if isinstance(mu, GaussianMeasure):
        return {"type": "gaussian", "mean": mu.mean.tolist(), "cov": mu.cov.tolist()}
    return {"type": "discrete", "support": mu.support.tolist(), "weights": mu.weights.tolist()}


def omega_from_dict(d, space, named=None):
    """``{"components": [{"lambda": w, "measure": {...} | "name"}, ...]}``."""
    named = named or {}
    comps = []
    for c in d["components"]:
        m = c["measure"]
        mu = named[m] if isinstance(m, str) else measure_from_dict(m, space)
        comps.append((c["lambda"], mu))
    return MixtureOmega(comps)


def energy_from_dict(d):
    kind = d.get("kind", "boltzmann")
    if kind == "boltzmann":
        return EnergySpec.boltzmann()
    if kind == "internal":
        u = d.get("U", "power")
        if u == "xlogx":
            from .functionals import dxlogx, xlogx

            return EnergySpec.internal(xlogx, dxlogx, label="xlogx")
        if u == "power":
            p = float(d.get("params", {}).get("p", 2.0))
            fn, dfn = power_u(p)
            return EnergySpec.internal(fn, dfn, label=f"power{p:g}")
        raise ValueError(f"unknown internal energy {u!r}")
    if kind == "potential":
        if "values" in d:
            return EnergySpec.potential(values=[_num(v) for v in d["values"]])
        return EnergySpec.potential(builtin=d["builtin"], **d.get("params", {}))
    raise ValueError(f"unknown energy kind {kind!r}")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)
