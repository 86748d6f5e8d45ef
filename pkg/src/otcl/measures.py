"""Probability measures: weighted atoms on a ground space, and Gaussians."""

from __future__ import annotations

import numpy as np

from .linalg import check_spd

PRUNE_BELOW = 1e-15
SUM_TOL = 1e-12


class DiscreteMeasure:
    """Probability weights on atoms of ``space``.

    Weights below ``1e-15`` are pruned on construction and the support is kept
    sorted by atom index.  ``meta`` carries solver diagnostics (for instance
    snapping budgets from interpolation) and is ignored by equality.
    """

    __slots__ = ("space", "support", "weights", "meta")

    def __init__(self, space, support, weights, meta=None):
        s = np.asarray(support, dtype=np.int64).ravel()
        w = np.asarray(weights, dtype=float).ravel()
        if s.shape != w.shape:
            raise ValueError("support and weights must have equal length")
        if s.size == 0:
            raise ValueError("empty support")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        if np.any((s < 0) | (s >= space.n)):
            raise ValueError("support index outside the space")
        if np.unique(s).size != s.size:
            raise ValueError("support indices must be distinct")
        keep = w >= PRUNE_BELOW
        if not keep.all():
            s, w = s[keep], w[keep]
            w = w / w.sum()
        order = np.argsort(s, kind="stable")
        s, w = s[order], w[order]
        s.setflags(write=False)
        w.setflags(write=False)
        self.space = space
        self.support = s
        self.weights = w
        self.meta = dict(meta or {})

    @classmethod
    def from_dense(cls, space, dense, meta=None):
        dense = np.asarray(dense, dtype=float)
        idx = np.flatnonzero(dense > 0)
        return cls(space, idx, dense[idx], meta=meta)

    @classmethod
    def dirac(cls, space, atom):
        return cls(space, [atom], [1.0])

    @classmethod
    def uniform(cls, space, atoms):
        atoms = np.asarray(atoms, dtype=np.int64)
        return cls(space, atoms, np.full(atoms.size, 1.0 / atoms.size))

    def dense(self):
        out = np.zeros(self.space.n)
        out[self.support] = self.weights
        return out

    def mix(self, other, s):
        """Linear (not displacement) mixture ``(1 - s) self + s other``."""
        if other.space is not self.space:
            raise ValueError("measures live on different spaces")
        return DiscreteMeasure.from_dense(self.space, (1 - s) * self.dense() + s * other.dense())

    def sort_key(self):
        return (tuple(self.support.tolist()), tuple(self.weights.tolist()))

    def __eq__(self, other):
        return (isinstance(other, DiscreteMeasure) and other.space is self.space
                and np.array_equal(self.support, other.support)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash(self.sort_key())

    def __repr__(self):
        return f"DiscreteMeasure(atoms={self.support.size}, space={self.space!r})"


class GaussianMeasure:
    __slots__ = ("mean", "cov")

    def __init__(self, mean, cov):
        m = np.atleast_1d(np.asarray(mean, dtype=float)).ravel()
        c = check_spd(cov)
        if c.shape != (m.size, m.size):
            raise ValueError("mean and covariance dimensions disagree")
        m.setflags(write=False)
        c = c.copy()
        c.setflags(write=False)
        self.mean = m
        self.cov = c

    @classmethod
    def normal(cls, mean, var):
        """One-dimensional ``N(mean, var)``."""
        return cls([mean], [[var]])

    @classmethod
    def standard(cls, dim=1):
        return cls(np.zeros(dim), np.eye(dim))

    @property
    def dim(self):
        return self.mean.size

    def sort_key(self):
        return (tuple(self.mean.tolist()), tuple(self.cov.ravel().tolist()))

    def __eq__(self, other):
        return (isinstance(other, GaussianMeasure) and np.array_equal(self.mean, other.mean)
                and np.array_equal(self.cov, other.cov))

    def __hash__(self):
        return hash(self.sort_key())

    def __repr__(self):
        if self.dim == 1:
            return f"N({self.mean[0]!r}, {self.cov[0, 0]!r})"
        return f"GaussianMeasure(dim={self.dim})"


def discretize_gaussian(space, g):
    """Gaussian density times cell volume on a grid, normalized to mass one."""
    if space.kind != "grid" or space.dim != g.dim:
        raise ValueError("need a Euclidean grid of matching dimension")
    diff = space.coords - g.mean
    quad = np.einsum("ni,ij,nj->n", diff, np.linalg.inv(g.cov), diff)
    w = np.exp(-0.5 * quad) * space.cell_volumes
    w = w / w.sum()
    keep = w >= PRUNE_BELOW
    w = np.where(keep, w, 0.0)
    return DiscreteMeasure.from_dense(space, w / w.sum())


def same_space(mu, nu):
    if mu.space is not nu.space:
        raise ValueError("measures live on different ground spaces")
    return mu.space
