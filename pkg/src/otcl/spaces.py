"""Ground spaces: finite (extended) metric spaces, Euclidean grids and the
analytic Gaussian space.

All three are immutable.  Atoms of a grid are numbered row-major over the
product of its axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

TRIANGLE_TOL = 1e-12
TRIANGLE_AUTO_LIMIT = 500
SOFT_ATOM_LIMIT = 10_000


def _t_key(t):
    return round(float(t), 12)


class FiniteSpace:
    """A finite extended metric space with a reference measure.

    Parameters
    ----------
    dist : (n, n) array_like
        Distance matrix.  ``np.inf`` entries are allowed.
    ref_weights : (n,) array_like
        Reference measure; not required to be a probability vector.
    midpoints : iterable of (i, j, t, k), optional
        Tabulated geodesic points: ``d(i, k) = t d(i, j)`` and
        ``d(k, j) = (1 - t) d(i, j)``.  The reversed entry ``(j, i, 1 - t, k)``
        is added automatically.
    """

    kind = "finite"

    def __init__(self, dist, ref_weights, midpoints=None):
        d = np.array(dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("dist must be a square matrix")
        m = np.array(ref_weights, dtype=float)
        if m.shape != (d.shape[0],):
            raise ValueError("ref_weights length must match dist")
        d.setflags(write=False)
        m.setflags(write=False)
        self.dist = d
        self.ref_weights = m
        table = {}
        for i, j, t, k in midpoints or ():
            i, j, k = int(i), int(j), int(k)
            table[(i, j, _t_key(t))] = k
            table.setdefault((j, i, _t_key(1.0 - float(t))), k)
        self.midpoints = table

    @property
    def n(self):
        return self.dist.shape[0]

    def sq_dist(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        return self.dist[np.ix_(a, b)] ** 2

    def midpoint(self, i, j, t):
        """Atom at parameter ``t`` on a geodesic from ``i`` to ``j``, or None."""
        if t == 0.0 or i == j:
            return int(i)
        if t == 1.0:
            return int(j)
        return self.midpoints.get((int(i), int(j), _t_key(t)))

    def diameter(self, atoms=None):
        idx = np.arange(self.n) if atoms is None else np.asarray(atoms)
        sub = self.dist[np.ix_(idx, idx)]
        finite = sub[np.isfinite(sub)]
        return float(finite.max()) if finite.size else 0.0

    def __repr__(self):
        return f"FiniteSpace(n={self.n}, midpoints={len(self.midpoints)})"


@dataclass(frozen=True)
class GaussianReference:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        object.__setattr__(self, "cov", np.atleast_2d(np.asarray(self.cov, dtype=float)))


def _voronoi_widths(axis):
    if len(axis) == 1:
        return np.ones(1)
    gaps = np.diff(axis)
    left = np.r_[gaps[0], gaps]
    right = np.r_[gaps, gaps[-1]]
    return 0.5 * (left + right)


class EuclideanGrid:
    """Product grid in ``R^dim`` with Lebesgue or Gaussian reference.

    ``cell_volumes`` defaults to products of per-axis Voronoi widths, so on a
    uniform grid every cell has volume ``h**dim`` and discrete entropies are
    midpoint-rule discretizations of the continuum integrals.
    """

    kind = "grid"

    def __init__(self, axes, reference="lebesgue", cell_volumes=None):
        self.axes = tuple(np.array(a, dtype=float).ravel() for a in axes)
        for a in self.axes:
            a.setflags(write=False)
        self.dim = len(self.axes)
        self.shape = tuple(len(a) for a in self.axes)
        mesh = np.meshgrid(*self.axes, indexing="ij")
        coords = np.stack([g.ravel() for g in mesh], axis=1)
        coords.setflags(write=False)
        self.coords = coords
        if cell_volumes is None:
            widths = np.meshgrid(*[_voronoi_widths(a) for a in self.axes], indexing="ij")
            vols = np.prod(np.stack([w.ravel() for w in widths], axis=1), axis=1)
        else:
            vols = np.array(cell_volumes, dtype=float)
        vols.setflags(write=False)
        self.cell_volumes = vols
        if isinstance(reference, GaussianReference):
            self.reference = reference
        elif isinstance(reference, dict) and "gaussian" in reference:
            g = reference["gaussian"]
            self.reference = GaussianReference(
                np.atleast_1d(np.asarray(g["mean"], dtype=float)),
                np.atleast_2d(np.asarray(g["cov"], dtype=float)),
            )
        elif reference == "lebesgue":
            self.reference = "lebesgue"
        elif reference == "gaussian":
            self.reference = GaussianReference(np.zeros(self.dim), np.eye(self.dim))
        else:
            raise ValueError(f"unknown grid reference {reference!r}")
        self.ref_weights = self._reference_weights()

    def _reference_weights(self):
        if self.reference == "lebesgue":
            return self.cell_volumes
        mean, cov = self.reference.mean, self.reference.cov
        if mean.shape != (self.dim,) or cov.shape != (self.dim, self.dim):
            return np.full(self.coords.shape[0], np.nan)
        evals = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        if np.any(evals <= 0):
            return np.full(self.coords.shape[0], np.nan)
        diff = self.coords - mean
        quad = np.einsum("ni,ij,nj->n", diff, np.linalg.inv(cov), diff)
        dens = np.exp(-0.5 * quad) / np.sqrt((2 * np.pi) ** self.dim * np.prod(evals))
        w = dens * self.cell_volumes
        w.setflags(write=False)
        return w

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def half_pitch(self):
        spacing = [np.diff(a).max() if len(a) > 1 else 0.0 for a in self.axes]
        return 0.5 * float(np.sqrt(np.sum(np.square(spacing))))

    def sq_dist(self, a, b):
        xa = self.coords[np.asarray(a, dtype=np.int64)]
        xb = self.coords[np.asarray(b, dtype=np.int64)]
        return np.sum((xa[:, None, :] - xb[None, :, :]) ** 2, axis=2)

    def atom_of(self, multi_index):
        return int(np.ravel_multi_index(tuple(multi_index), self.shape))

    def nearest_atoms(self, points):
        """Nearest atom of each point (ties go to the smaller index) and the
        snap distances."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        multi = []
        for k, axis in enumerate(self.axes):
            x = pts[:, k]
            hi = np.clip(np.searchsorted(axis, x, side="left"), 0, len(axis) - 1)
            lo = np.clip(hi - 1, 0, len(axis) - 1)
            pick = np.where(np.abs(x - axis[lo]) <= np.abs(axis[hi] - x), lo, hi)
            multi.append(pick)
        idx = np.ravel_multi_index(tuple(multi), self.shape)
        snap = np.sqrt(np.sum((self.coords[idx] - pts) ** 2, axis=1))
        return idx.astype(np.int64), snap

    def diameter(self, atoms=None):
        x = self.coords if atoms is None else self.coords[np.asarray(atoms)]
        lo, hi = x.min(axis=0), x.max(axis=0)
        return float(np.sqrt(np.sum((hi - lo) ** 2)))

    def __repr__(self):
        return f"EuclideanGrid(shape={self.shape}, reference={'lebesgue' if self.reference == 'lebesgue' else 'gaussian'})"


@dataclass(frozen=True)
class GaussianAnalytic:
    """``(R^dim, |.|, reference)`` handled through closed forms.

    ``reference`` is ``"gaussian"`` for the standard Gaussian measure or
    ``"lebesgue"``.
    """

    dim: int
    reference: str = "gaussian"
    kind: str = field(default="gaussian", init=False)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    indices: tuple
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple
    checked: tuple

    @property
    def valid(self):
        return not self.violations

    def to_dict(self):
        return {
            "valid": self.valid,
            "checked": list(self.checked),
            "violations": [
                {"code": v.code, "indices": list(v.indices), "message": v.message}
                for v in self.violations
            ],
        }


def validate_space(space, check_triangle=None):
    """Report every violated invariant of ``space``; never raises.

    Triangle validation is O(n^3); by default it only runs for n <= 500.
    Pass ``check_triangle=True`` to force it.
    """
    out = []
    checked = []
    if isinstance(space, FiniteSpace):
        d, m = space.dist, space.ref_weights
        n = space.n
        checked.append("shape")
        if n > SOFT_ATOM_LIMIT:
            out.append(Violation("too_many_atoms", (n,), f"{n} atoms exceeds soft limit {SOFT_ATOM_LIMIT}"))
        checked.append("nan")
        for i, j in np.argwhere(np.isnan(d)):
            out.append(Violation("nan_distance", (int(i), int(j)), "distance is NaN"))
        checked.append("symmetry")
        for i, j in np.argwhere(np.triu(d != d.T, 1)):
            out.append(Violation("asymmetric", (int(i), int(j)), f"d({i},{j}) != d({j},{i})"))
        checked.append("diagonal")
        for i in np.flatnonzero(np.diag(d) != 0):
            out.append(Violation("nonzero_diagonal", (int(i),), f"d({i},{i}) != 0"))
        checked.append("positivity")
        bad = ~(d > 0)
        for i, j in np.argwhere(np.triu(bad | bad.T, 1)):
            out.append(Violation("nonpositive_distance", (int(i), int(j)), f"d({i},{j}) <= 0"))
        if check_triangle is None:
            check_triangle = n <= TRIANGLE_AUTO_LIMIT
        if check_triangle and not np.isnan(d).any():
            checked.append("triangle")
            for i, j, k in kernels.triangle_violations(np.ascontiguousarray(d), TRIANGLE_TOL):
                out.append(Violation("triangle", (int(i), int(j), int(k)),
                                     f"d({i},{k}) > d({i},{j}) + d({j},{k})"))
        checked.append("ref_weights")
        for i in np.flatnonzero(~(m >= 0)):
            out.append(Violation("negative_ref_weight", (int(i),), f"m[{i}] < 0"))
        if not np.any(m > 0):
            out.append(Violation("zero_reference", (), "reference measure has no positive entry"))
        checked.append("midpoints")
        for (i, j, t), k in sorted(space.midpoints.items()):
            ok = all(0 <= x < n for x in (i, j, k)) and 0.0 <= t <= 1.0
            if ok:
                dij = d[i, j]
                ok = np.isfinite(dij) and np.isclose(d[i, k], t * dij, atol=1e-9) \
                    and np.isclose(d[k, j], (1 - t) * dij, atol=1e-9)
            if not ok:
                out.append(Violation("bad_midpoint", (i, j, k), f"entry ({i},{j},{t})->{k} is not a geodesic point"))
    elif isinstance(space, EuclideanGrid):
        checked.append("axes")
        for k, a in enumerate(space.axes):
            if a.size == 0:
                out.append(Violation("empty_axis", (k,), f"axis {k} is empty"))
            for i in np.flatnonzero(~(np.diff(a) > 0)):
                out.append(Violation("axis_not_increasing", (k, int(i)), f"axis {k} not strictly increasing at {i}"))
        checked.append("cell_volumes")
        if space.cell_volumes.shape != (space.n,):
            out.append(Violation("cell_volume_shape", (), "cell_volumes length does not match atom count"))
        else:
            for i in np.flatnonzero(~(space.cell_volumes > 0)):
                out.append(Violation("nonpositive_cell_volume", (int(i),), f"cell volume {i} <= 0"))
        if isinstance(space.reference, GaussianReference):
            checked.append("gaussian_reference")
            mean, cov = space.reference.mean, space.reference.cov
            if mean.shape != (space.dim,) or cov.shape != (space.dim, space.dim):
                out.append(Violation("reference_shape", (), "gaussian reference has wrong dimension"))
            else:
                for i, j in np.argwhere(np.triu(~np.isclose(cov, cov.T, atol=1e-12, rtol=0), 1)):
                    out.append(Violation("cov_asymmetric", (int(i), int(j)), "covariance not symmetric"))
                if np.any(np.linalg.eigvalsh(0.5 * (cov + cov.T)) <= 0):
                    out.append(Violation("cov_not_spd", (), "covariance has a non-positive eigenvalue"))
    elif isinstance(space, GaussianAnalytic):
        checked.append("dim")
        if not (isinstance(space.dim, (int, np.integer)) and space.dim >= 1):
            out.append(Violation("bad_dim", (), "dim must be a positive integer"))
        if space.reference not in ("gaussian", "lebesgue"):
            out.append(Violation("bad_reference", (), f"unknown reference {space.reference!r}"))
    else:
        out.append(Violation("unknown_space", (), f"unsupported space type {type(space).__name__}"))
    return ValidationReport(tuple(out), tuple(checked))


# ---------------------------------------------------------------------------
# point barycenters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointBarycenter:
    """All minimizers of ``z -> sum_i w_i d(z, x_i)^2``.

    ``points`` holds atom indices on a finite space and coordinates of shape
    ``(1, dim)`` on Euclidean spaces.  When every candidate has infinite
    objective, ``points`` is empty and ``note`` says so.
    """

    points: np.ndarray
    value: float
    note: str = ""


def _check_weights(weights, count):
    w = np.asarray(weights, dtype=float)
    if count == 0:
        raise ValueError("empty point list")
    if w.shape != (count,):
        raise ValueError("one weight per point required")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    return w


def point_barycenter(space, points, weights, rtol=1e-12):
    if isinstance(space, FiniteSpace):
        pts = np.asarray(points, dtype=np.int64).ravel()
        w = _check_weights(weights, len(pts))
        if np.any((pts < 0) | (pts >= space.n)):
            raise ValueError("point index outside the space")
        obj = kernels.weighted_sq_objective(np.ascontiguousarray(space.dist), pts, w)
        best = float(obj.min())
        if not np.isfinite(best):
            return PointBarycenter(np.zeros(0, dtype=np.int64), np.inf, "no finite-variance candidate")
        thresh = best + rtol * max(1.0, abs(best))
        return PointBarycenter(np.flatnonzero(obj <= thresh), best)
    dim = space.dim
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if dim == 1 else x.reshape(1, -1)
    if x.shape[0] == 0:
        raise ValueError("empty point list")
    if x.shape[1] != dim:
        raise ValueError("point dimension does not match the space")
    w = _check_weights(weights, x.shape[0])
    z = w @ x
    value = float(np.sum(w * np.sum((x - z) ** 2, axis=1)))
    return PointBarycenter(z.reshape(1, dim), value)
