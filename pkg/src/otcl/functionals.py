"""Internal energies, Boltzmann entropy and potential energies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import check_spd, logdet
from .measures import DiscreteMeasure, GaussianMeasure


def xlogx(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def dxlogx(x):
    with np.errstate(divide="ignore"):
        return np.log(x) + 1.0


def power_u(p):
    """``U(x) = x**p / (p - 1)`` for ``p > 1`` together with its derivative."""
    if not p > 1:
        raise ValueError("power energy needs p > 1")
    return (lambda x: np.asarray(x, dtype=float) ** p / (p - 1),
            lambda x: p * np.asarray(x, dtype=float) ** (p - 1) / (p - 1))


PROBE_GRID = np.geomspace(1e-6, 1e6, 61)


def probe_u(u):
    """Sample-based checks of ``U(0) = 0``, convexity and the growth probe
    ``U(2r)/2 >= U(r)``.  A finite sample proves nothing; the result is
    recorded, not trusted."""
    r = PROBE_GRID
    u0 = float(np.asarray(u(np.array([0.0])))[0])
    vals = np.asarray(u(r), dtype=float)
    mid = np.asarray(u(np.sqrt(r[:-1] * r[1:])), dtype=float)
    # chord check on each consecutive pair: U(mid) <= linear interpolation
    lam = (np.sqrt(r[:-1] * r[1:]) - r[:-1]) / (r[1:] - r[:-1])
    chord = (1 - lam) * vals[:-1] + lam * vals[1:]
    convex = bool(np.all(mid <= chord + 1e-9 * (1 + np.abs(chord))))
    growth = np.asarray(u(2 * r), dtype=float) / 2 >= vals - 1e-12 * (1 + np.abs(vals))
    return {
        "u_at_zero": u0,
        "convex_on_samples": convex,
        "growth_probe_passes": bool(np.all(growth)),
        "samples": int(r.size),
        "range": [float(r[0]), float(r[-1])],
    }


@dataclass
class EnergySpec:
    """Energy functional descriptor.

    ``kind`` is ``"boltzmann"``, ``"internal"`` or ``"potential"``.  Internal
    energies carry ``U`` (and optionally ``dU`` for JKO); potentials carry
    per-atom ``values`` or a named ``builtin`` (``"quadratic"``:
    ``scale * |x - center|^2``; ``"linear"``: ``slope . x``).
    """

    kind: str
    U: object = None
    dU: object = None
    values: np.ndarray = None
    builtin: str = None
    params: dict = field(default_factory=dict)
    label: str = ""
    probe: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("boltzmann", "internal", "potential"):
            raise ValueError(f"unknown energy kind {self.kind!r}")
        if self.kind == "internal":
            if self.U is None:
                raise ValueError("internal energy needs U")
            self.probe = probe_u(self.U)
            if abs(self.probe["u_at_zero"]) > 1e-12:
                raise ValueError("internal energy needs U(0) = 0")
            if not self.probe["convex_on_samples"]:
                raise ValueError("U fails the convexity probe")
        if self.kind == "potential":
            if self.values is None and self.builtin is None:
                raise ValueError("potential energy needs values or a builtin")
            if self.builtin is not None and self.builtin not in ("quadratic", "linear"):
                raise ValueError(f"unknown builtin potential {self.builtin!r}")
            if self.values is not None:
                self.values = np.asarray(self.values, dtype=float)

    @classmethod
    def boltzmann(cls):
        return cls("boltzmann", label="boltzmann")

    @classmethod
    def internal(cls, U, dU=None, label="internal"):
        return cls("internal", U=U, dU=dU, label=label)

    @classmethod
    def potential(cls, values=None, builtin=None, **params):
        return cls("potential", values=values, builtin=builtin, params=params,
                   label=builtin or "potential")

    def potential_values(self, space):
        """Per-atom potential values on a finite space or grid."""
        if self.values is not None:
            if self.values.shape != (space.n,):
                raise ValueError("potential needs one value per atom")
            return self.values
        if space.kind != "grid":
            raise ValueError(f"builtin potential {self.builtin!r} needs coordinates")
        x = space.coords
        if self.builtin == "quadratic":
            center = np.asarray(self.params.get("center", np.zeros(space.dim)), dtype=float)
            return float(self.params.get("scale", 1.0)) * np.sum((x - center) ** 2, axis=1)
        slope = np.asarray(self.params.get("slope", np.ones(space.dim)), dtype=float)
        return x @ slope


def internal_energy(mu, space, U):
    """``sum_i m_i U(p_i / m_i)``; ``inf`` if ``mu`` charges an atom of zero
    reference mass."""
    m = np.asarray(space.ref_weights)[mu.support]
    if np.any(m <= 0):
        return math.inf
    rho = mu.weights / m
    return float(np.sum(m * np.asarray(U(rho), dtype=float)))


def entropy(mu, space=None):
    """Boltzmann entropy relative to the space's reference measure."""
    if isinstance(mu, GaussianMeasure):
        return gaussian_entropy(mu, getattr(space, "reference", "gaussian"))
    return internal_energy(mu, mu.space if space is None else space, xlogx)


def potential_energy(mu, f):
    """``sum_i p_i f(x_i)`` where ``f`` is a per-atom array (or mapping)."""
    if isinstance(f, dict):
        missing = [int(a) for a in mu.support if int(a) not in f]
        if missing:
            raise KeyError(f"potential undefined on atoms {missing}")
        vals = np.array([f[int(a)] for a in mu.support], dtype=float)
    else:
        f = np.asarray(f, dtype=float)
        if np.any(mu.support >= f.size):
            raise KeyError("potential undefined on part of the support")
        vals = f[mu.support]
    if not np.all(np.isfinite(vals)):
        raise ValueError("potential must be finite on the support")
    return float(mu.weights @ vals)


def gaussian_entropy(g, reference="gaussian"):
    """Closed-form entropy of ``N(m, S)`` relative to Lebesgue measure or to
    the standard Gaussian."""
    cov = check_spd(g.cov)
    d = g.dim
    ld = logdet(cov)
    if reference == "lebesgue":
        return -0.5 * (d * math.log(2 * math.pi * math.e) + ld)
    if reference in ("gaussian", "standard_gaussian"):
        return 0.5 * (float(np.trace(cov)) + float(g.mean @ g.mean) - d - ld)
    raise ValueError(f"unknown reference {reference!r}")


def _gaussian_potential(energy, g):
    if energy.builtin == "quadratic":
        center = np.asarray(energy.params.get("center", np.zeros(g.dim)), dtype=float)
        scale = float(energy.params.get("scale", 1.0))
        return scale * (float(np.sum((g.mean - center) ** 2)) + float(np.trace(g.cov)))
    if energy.builtin == "linear":
        slope = np.asarray(energy.params.get("slope", np.ones(g.dim)), dtype=float)
        return float(slope @ g.mean)
    raise ValueError("tabulated potentials are undefined for Gaussian measures")


def evaluate(energy, mu, space):
    """Value of ``energy`` at ``mu`` (discrete or Gaussian)."""
    if isinstance(mu, GaussianMeasure):
        if energy.kind == "boltzmann":
            return gaussian_entropy(mu, getattr(space, "reference", "gaussian"))
        if energy.kind == "potential":
            return _gaussian_potential(energy, mu)
        raise ValueError("general internal energies have no Gaussian closed form")
    if not isinstance(mu, DiscreteMeasure):
        raise TypeError(f"cannot evaluate an energy at {type(mu).__name__}")
    if energy.kind == "boltzmann":
        return entropy(mu, space)
    if energy.kind == "internal":
        return internal_energy(mu, space, energy.U)
    return potential_energy(mu, energy.potential_values(space))
