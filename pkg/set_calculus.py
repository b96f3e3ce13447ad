"""Zonotope, box and interval-matrix algebra used by the reachability engine.

Every set value is immutable after construction (arrays are flagged
read-only) and every operation returns a new value.
"""

import numpy as np
from scipy.optimize import linprog

from errors import InputError

CONTAINMENT_TOL = 1e-9


def _vector(values):
    return np.array(values, dtype=float).reshape(-1)


def _readonly(arr):
    arr.setflags(write=False)
    return arr


def _same_dim(a, b, what):
    if a != b:
        raise InputError(f"{what}: dimension mismatch ({a} vs {b})")


# ── Set types ────────────────────────────────────────────────────────────────

class Zonotope:
    """{c + G xi : xi in [-1, 1]^p}. Generators are the columns of an n x p matrix.

    All-zero generators are dropped on construction. For n = 1 a flat list of
    scalars is read as a list of generators.
    """

    __slots__ = ("center", "generators")

    def __init__(self, center, generators=None):
        c = _vector(center)
        n = c.size
        if generators is None:
            G = np.zeros((n, 0))
        else:
            G = np.array(generators, dtype=float)
            if G.ndim == 1:
                if n == 0 or G.size % n:
                    raise InputError(f"generators of size {G.size} do not fit dimension {n}")
                G = G.reshape(n, -1)
            if G.ndim != 2 or G.shape[0] != n:
                raise InputError(f"generator matrix {G.shape} does not match center of dimension {n}")
            G = G[:, np.any(G != 0.0, axis=0)]
        self.center = _readonly(c)
        self.generators = _readonly(np.ascontiguousarray(G))

    @classmethod
    def from_list(cls, center, generator_list):
        """Build from an ordered list of generator vectors."""
        c = _vector(center)
        if not generator_list:
            return cls(c)
        return cls(c, np.column_stack([_vector(g) for g in generator_list]))

    @property
    def dim(self):
        return self.center.size

    @property
    def num_generators(self):
        return self.generators.shape[1]

    @property
    def order(self):
        if self.dim == 0:
            raise InputError("order is undefined for a zero-dimensional zonotope")
        return self.num_generators / self.dim

    def __repr__(self):
        return f"Zonotope(dim={self.dim}, generators={self.num_generators}, center={self.center.tolist()})"


class Hyperrectangle:
    __slots__ = ("center", "radius")

    def __init__(self, center, radius):
        c, r = _vector(center), _vector(radius)
        _same_dim(c.size, r.size, "Hyperrectangle")
        if np.any(r < 0):
            raise InputError("Hyperrectangle radius must be nonnegative")
        self.center = _readonly(c)
        self.radius = _readonly(r)

    @classmethod
    def from_bounds(cls, low, high):
        low, high = _vector(low), _vector(high)
        if np.any(high < low):
            raise InputError("Hyperrectangle bounds: high < low")
        return cls((low + high) / 2.0, (high - low) / 2.0)

    @property
    def low(self):
        return self.center - self.radius

    @property
    def high(self):
        return self.center + self.radius

    def to_zonotope(self):
        return Zonotope(self.center, np.diag(self.radius))

    def __repr__(self):
        return f"Hyperrectangle(low={self.low.tolist()}, high={self.high.tolist()})"


class IntervalMatrix:
    """Entrywise interval matrix in midpoint-radius form."""

    __slots__ = ("mid", "rad")

    def __init__(self, mid, rad=None):
        m = np.atleast_2d(np.array(mid, dtype=float))
        r = np.zeros_like(m) if rad is None else np.atleast_2d(np.array(rad, dtype=float))
        if m.shape != r.shape:
            raise InputError(f"IntervalMatrix: midpoint {m.shape} and radius {r.shape} differ")
        if np.any(r < 0):
            raise InputError("IntervalMatrix radius must be nonnegative")
        self.mid = _readonly(m)
        self.rad = _readonly(r)

    @classmethod
    def from_bounds(cls, low, high):
        low = np.atleast_2d(np.array(low, dtype=float))
        high = np.atleast_2d(np.array(high, dtype=float))
        if np.any(high < low):
            raise InputError("IntervalMatrix bounds: high < low")
        return cls((low + high) / 2.0, (high - low) / 2.0)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @property
    def shape(self):
        return self.mid.shape

    @property
    def inf(self):
        return self.mid - self.rad

    @property
    def sup(self):
        return self.mid + self.rad

    def contains(self, matrix, tol=0.0):
        A = np.atleast_2d(np.array(matrix, dtype=float))
        if A.shape != self.shape:
            return False
        return bool(np.all(np.abs(A - self.mid) <= self.rad + tol))

    def norm_inf(self):
        return float(np.max(np.sum(np.abs(self.mid) + self.rad, axis=1)))

    def scale(self, s):
        return IntervalMatrix(self.mid * s, self.rad * abs(s))

    def widen(self, r):
        return IntervalMatrix(self.mid, self.rad + r)

    def __add__(self, other):
        _same_dim(self.shape, other.shape, "IntervalMatrix sum")
        return IntervalMatrix(self.mid + other.mid, self.rad + other.rad)

    def __matmul__(self, other):
        # midpoint-radius product enclosure
        if not isinstance(other, IntervalMatrix):
            other = IntervalMatrix(other)
        _same_dim(self.shape[1], other.shape[0], "IntervalMatrix product")
        mid = self.mid @ other.mid
        rad = np.abs(self.mid) @ other.rad + self.rad @ np.abs(other.mid) + self.rad @ other.rad
        return IntervalMatrix(mid, rad)

    def __repr__(self):
        return f"IntervalMatrix(shape={self.shape}, max_radius={float(self.rad.max(initial=0.0)):.3g})"


class AffineMap:
    """x -> matrix @ x + offset."""

    __slots__ = ("matrix", "offset")

    def __init__(self, matrix, offset=None):
        M = np.atleast_2d(np.array(matrix, dtype=float))
        b = np.zeros(M.shape[0]) if offset is None else _vector(offset)
        _same_dim(M.shape[0], b.size, "AffineMap")
        self.matrix = _readonly(M)
        self.offset = _readonly(b)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    def apply(self, point):
        return self.matrix @ _vector(point) + self.offset

    def __repr__(self):
        return f"AffineMap(matrix={self.matrix.tolist()}, offset={self.offset.tolist()})"


# ── Operations ───────────────────────────────────────────────────────────────

def minkowski_sum(z1, z2):
    _same_dim(z1.dim, z2.dim, "minkowski_sum")
    return Zonotope(z1.center + z2.center, np.hstack([z1.generators, z2.generators]))


def linear_map(matrix, Z):
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    _same_dim(M.shape[1], Z.dim, "linear_map")
    return Zonotope(M @ Z.center, M @ Z.generators)


def affine_map(M, Z):
    _same_dim(M.matrix.shape[1], Z.dim, "affine_map")
    return Zonotope(M.matrix @ Z.center + M.offset, M.matrix @ Z.generators)


def interval_matrix_map(IM, Z):
    """Zonotope enclosing {A z : A in IM, z in Z}.

    The midpoint image keeps the zonotope shape; the radius part is covered
    by one axis-aligned box of half-widths rad @ (|c| + sum |g|).
    """
    _same_dim(IM.shape[1], Z.dim, "interval_matrix_map")
    c, G = Z.center, Z.generators
    spread = IM.rad @ (np.abs(c) + np.abs(G).sum(axis=1))
    return Zonotope(IM.mid @ c, np.hstack([IM.mid @ G, np.diag(spread)]))


def support_function(Z, direction):
    d = _vector(direction)
    _same_dim(d.size, Z.dim, "support_function")
    return float(d @ Z.center + np.abs(d @ Z.generators).sum())


def support_functions(Z, directions):
    """Support values for each row of `directions`."""
    D = np.atleast_2d(np.asarray(directions, dtype=float))
    _same_dim(D.shape[1], Z.dim, "support_functions")
    return D @ Z.center + np.abs(D @ Z.generators).sum(axis=1)


def project(Z, index):
    """(lo, hi) of the zonotope along one coordinate axis."""
    if not 0 <= index < Z.dim:
        raise InputError(f"axis {index} out of range for dimension {Z.dim}")
    r = float(np.abs(Z.generators[index]).sum())
    return float(Z.center[index]) - r, float(Z.center[index]) + r


def reduce_order(Z, max_order):
    """Girard-style reduction to at most max_order * n generators.

    Generators with the smallest ||g||_1 - ||g||_inf are replaced by their
    interval hull (n axis-aligned generators); the others are kept in order.
    """
    if not max_order >= 1:
        raise InputError(f"max_order must be >= 1, got {max_order}")
    n, p = Z.dim, Z.num_generators
    if np.isinf(max_order) or p <= max_order * n:
        return Z
    keep = int(np.floor(max_order * n)) - n
    G = Z.generators
    absG = np.abs(G)
    score = absG.sum(axis=0) - absG.max(axis=0)
    ranked = np.argsort(score, kind="stable")
    boxed, kept = ranked[: p - keep], np.sort(ranked[p - keep:])
    box = absG[:, boxed].sum(axis=1)
    return Zonotope(Z.center, np.hstack([G[:, kept], np.diag(box)]))


def interval_hull(Z):
    return Hyperrectangle(Z.center, np.abs(Z.generators).sum(axis=1))


def cluster_union(sets):
    """One zonotope covering every set in the list (box hull; identity on one set)."""
    sets = list(sets)
    if not sets:
        raise InputError("cluster_union needs at least one set")
    if len(sets) == 1:
        return sets[0]
    n = sets[0].dim
    lows, highs = [], []
    for Z in sets:
        _same_dim(Z.dim, n, "cluster_union")
        box = interval_hull(Z)
        lows.append(box.low)
        highs.append(box.high)
    return Hyperrectangle.from_bounds(np.min(lows, axis=0), np.max(highs, axis=0)).to_zonotope()


def contains_point(Z, point, tol=CONTAINMENT_TOL):
    """Exact membership test: is there xi in [-1, 1]^p with c + G xi = point?

    Rows are scaled by their magnitude so tolerances are relative. Linearly
    independent generators have a unique coefficient vector (least squares);
    otherwise a feasibility LP decides.
    """
    p = _vector(point)
    _same_dim(p.size, Z.dim, "contains_point")
    G = Z.generators
    scale = np.abs(Z.center) + np.abs(G).sum(axis=1) + np.abs(p)
    scale = np.where(scale > 0.0, scale, 1.0)
    d = (p - Z.center) / scale
    if G.shape[1] == 0:
        return bool(np.all(np.abs(d) <= tol))
    Gs = G / scale[:, None]

    if np.linalg.matrix_rank(Gs) == G.shape[1]:
        xi = np.linalg.lstsq(Gs, d, rcond=None)[0]
        residual = np.abs(Gs @ xi - d)
        return bool(np.all(residual <= tol) and np.max(np.abs(xi)) <= 1.0 + tol)

    res = linprog(
        np.zeros(G.shape[1]),
        A_eq=Gs, b_eq=d,
        bounds=[(-1.0 - tol, 1.0 + tol)] * G.shape[1],
        method="highs",
    )
    return res.status == 0
