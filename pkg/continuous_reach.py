"""Flowpipes for one continuous phase: GLGM06, ASB07 and exact time-point sets.

Flowpipes are built with phase-relative times starting at 0; the hybrid
engine moves them to absolute time with `shifted`.
"""

import numpy as np

from errors import InputError
from discretization import DiscretizedSystem, matrix_exponential
from set_calculus import (
    IntervalMatrix,
    Zonotope,
    interval_matrix_map,
    linear_map,
    minkowski_sum,
    reduce_order,
)

POWER_CACHE_SIZE = 4

_power_cache: dict = {}


class ReachSet:
    __slots__ = ("set", "time_lo", "time_hi")

    def __init__(self, zonotope, time_lo, time_hi):
        if time_hi < time_lo:
            raise InputError(f"ReachSet: time_hi {time_hi} < time_lo {time_lo}")
        self.set = zonotope
        self.time_lo = float(time_lo)
        self.time_hi = float(time_hi)

    def __repr__(self):
        return f"ReachSet([{self.time_lo:.6g}, {self.time_hi:.6g}], {self.set!r})"


# ── Flowpipes ────────────────────────────────────────────────────────────────

class Flowpipe:
    """Ordered reach sets over the frames [t0 + k delta, t0 + (k+1) delta + spread].

    spread is zero for a phase that starts at a known instant. After a jittered
    switch the phase may start anywhere in [t0, t0 + spread], so every frame
    is stretched by that much at its upper end.
    """

    def __init__(self, length, delta, t0=0.0, spread=0.0):
        if length < 1:
            raise InputError("a flowpipe holds at least one reach set")
        if spread < 0:
            raise InputError(f"time spread must be nonnegative, got {spread}")
        self.length = int(length)
        self.delta = float(delta)
        self.t0 = float(t0)
        self.spread = float(spread)

    def __len__(self):
        return self.length

    def __getitem__(self, k):
        if k < 0:
            k += self.length
        if not 0 <= k < self.length:
            raise IndexError(f"reach set {k} out of range for flowpipe of {self.length}")
        lo, hi = self._edge(k), self._edge(k + 1) + self.spread
        return ReachSet(self.set_at(k), lo, hi)

    def __iter__(self):
        for k in range(self.length):
            yield self[k]

    def _edge(self, k):
        return self.t0 + k * self.delta

    @property
    def start(self):
        return self.t0

    @property
    def end(self):
        return self._edge(self.length) + self.spread

    def times(self):
        edges = self.t0 + np.arange(self.length + 1) * self.delta
        return edges[:-1], edges[1:] + self.spread

    def bounds(self, index):
        e = np.zeros(self.dim)
        e[index] = 1.0
        return -self.supports(-e), self.supports(e)

    # subclasses: dim, set_at, supports, shifted


class ArrayFlowpipe(Flowpipe):
    """Explicit storage: centers (N, n) and zero-padded generators (N, n, p)."""

    def __init__(self, centers, generators, delta, t0=0.0, spread=0.0):
        super().__init__(len(centers), delta, t0, spread)
        self.centers = centers
        self.generators = generators

    @classmethod
    def from_sets(cls, sets, delta, t0=0.0):
        n = sets[0].dim
        width = max(Z.num_generators for Z in sets)
        centers = np.empty((len(sets), n))
        generators = np.zeros((len(sets), n, width))
        for k, Z in enumerate(sets):
            centers[k] = Z.center
            generators[k, :, : Z.num_generators] = Z.generators
        return cls(centers, generators, delta, t0)

    @property
    def dim(self):
        return self.centers.shape[1]

    def set_at(self, k):
        return Zonotope(self.centers[k], self.generators[k])

    def supports(self, direction):
        d = np.asarray(direction, dtype=float)
        return self.centers @ d + np.abs(np.einsum("knp,n->kp", self.generators, d)).sum(axis=1)

    def shifted(self, t_shift, spread=0.0):
        return ArrayFlowpipe(self.centers, self.generators, self.delta, self.t0 + t_shift, self.spread + spread)


class PowerFlowpipe(Flowpipe):
    """X(k) = Phi^k Omega0 + sum_{i<k} Phi^i V, read off a shared stack of powers of Phi."""

    def __init__(self, omega0, v, powers, length, delta, t0=0.0, spread=0.0):
        super().__init__(length, delta, t0, spread)
        if len(powers) < length:
            raise InputError(f"power stack holds {len(powers)} entries, flowpipe needs {length}")
        self.omega0 = omega0
        self.v = v
        self.powers = powers
        self._homogeneous = v.num_generators == 0 and not np.any(v.center)

    @property
    def dim(self):
        return self.omega0.dim

    def set_at(self, k):
        P = self.powers
        center = P[k] @ self.omega0.center
        gens = [P[k] @ self.omega0.generators]
        if k and not self._homogeneous:
            head = P[:k]
            center = center + (head @ self.v.center).sum(axis=0)
            gens.append(np.einsum("kij,jm->ikm", head, self.v.generators).reshape(self.dim, -1))
        return Zonotope(center, np.hstack(gens))

    def supports(self, direction):
        d = np.asarray(direction, dtype=float)
        L = np.einsum("kji,j->ki", self.powers[: self.length], d)
        values = L @ self.omega0.center + np.abs(L @ self.omega0.generators).sum(axis=1)
        if not self._homogeneous:
            per_step = L @ self.v.center + np.abs(L @ self.v.generators).sum(axis=1)
            values[1:] += np.cumsum(per_step)[:-1]
        return values

    def shifted(self, t_shift, spread=0.0):
        return PowerFlowpipe(
            self.omega0, self.v, self.powers, self.length, self.delta, self.t0 + t_shift, self.spread + spread
        )


# ── Powers of Phi ────────────────────────────────────────────────────────────

def power_stack(phi, count):
    """Read-only array P with P[k] = phi^k for k < count (cached per phi)."""
    phi = np.asarray(phi, dtype=float)
    key = (phi.shape, phi.tobytes())
    cached = _power_cache.get(key)
    if cached is not None and len(cached) >= count:
        return cached

    n = phi.shape[0]
    P = np.empty((max(count, 1), n, n))
    P[0] = np.eye(n)
    for k in range(1, count):
        P[k] = P[k - 1] @ phi
    P.setflags(write=False)

    if key not in _power_cache and len(_power_cache) >= POWER_CACHE_SIZE:
        _power_cache.pop(next(iter(_power_cache)))
    _power_cache[key] = P
    return P


# ── Algorithms ───────────────────────────────────────────────────────────────

def reach_glgm06(sys: DiscretizedSystem, N):
    """Wrapping-free flowpipe X(0..N-1) for scalar dynamics."""
    if sys.is_interval:
        raise InputError("reach_glgm06 needs a scalar Phi; use reach_asb07 for interval dynamics")
    if N < 1:
        raise InputError(f"number of steps must be positive, got {N}")
    return PowerFlowpipe(sys.omega0, sys.v, power_stack(sys.phi, N), N, sys.delta)


def reach_asb07(sys: DiscretizedSystem, N, max_order):
    """Recursive flowpipe X(k) = reduce(Phi X(k-1) + V) with an interval Phi."""
    if not isinstance(sys.phi, IntervalMatrix):
        raise InputError("reach_asb07 needs an interval Phi")
    if not max_order >= 1:
        raise InputError(f"max_order must be >= 1, got {max_order}")
    if N < 1:
        raise InputError(f"number of steps must be positive, got {N}")

    X = reduce_order(sys.omega0, max_order)
    sets = [X]
    for _ in range(1, N):
        X = reduce_order(minkowski_sum(interval_matrix_map(sys.phi, X), sys.v), max_order)
        sets.append(X)
    return ArrayFlowpipe.from_sets(sets, sys.delta)


def exact_point_successor(A, X0, t, sys: DiscretizedSystem):
    """e^{At} X0 + sum_{i=1..k} Phi^{i-1} V for t = k delta; exact for homogeneous systems."""
    if sys.is_interval or isinstance(A, IntervalMatrix):
        raise InputError("exact successors need scalar dynamics")
    k = int(round(t / sys.delta))
    if k < 0 or abs(t - k * sys.delta) > 1e-12 * max(abs(t), sys.delta):
        raise InputError(f"t = {t} is not a multiple of delta = {sys.delta}")

    moved = linear_map(matrix_exponential(A, t), X0)
    if k == 0 or sys.homogeneous:
        return moved
    P = power_stack(sys.phi, k)[:k]
    center = moved.center + (P @ sys.v.center).sum(axis=0)
    inputs = np.einsum("kij,jm->ikm", P, sys.v.generators).reshape(X0.dim, -1)
    return Zonotope(center, np.hstack([moved.generators, inputs]))
