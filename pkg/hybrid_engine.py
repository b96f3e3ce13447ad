"""Periodic time-triggered flowpipe construction for single-location self-loop systems.

Each period: extract the reach sets in which the switch can fire, cluster
them, apply the reset, compute the next flowpipe from the result and shift
it to absolute time.
"""

import math
import os
from dataclasses import dataclass
from typing import NamedTuple, Optional

from errors import InputError
from continuous_reach import exact_point_successor, reach_asb07, reach_glgm06
from discretization import DEFAULT_TAYLOR_ORDER, discretize
from set_calculus import IntervalMatrix, affine_map, cluster_union, reduce_order

# ── Config ──────────────────────────────────────────────────────────────────
VERBOSE = bool(os.getenv("REACH_VERBOSE"))

ALGORITHMS = ("glgm06", "asb07", "exact")


@dataclass(frozen=True)
class ReachOptions:
    delta: float
    algorithm: str = "glgm06"
    max_order: float = math.inf
    horizon: Optional[float] = None
    taylor_order: int = DEFAULT_TAYLOR_ORDER

    def __post_init__(self):
        if not self.delta > 0:
            raise InputError(f"delta must be positive, got {self.delta}")
        if self.algorithm not in ALGORITHMS:
            raise InputError(f"algorithm must be one of {ALGORITHMS}, got '{self.algorithm}'")
        if not self.max_order >= 1:
            raise InputError(f"max_order must be >= 1, got {self.max_order}")
        if self.horizon is not None and not self.horizon > 0:
            raise InputError(f"horizon must be positive, got {self.horizon}")


class JumpRecord(NamedTuple):
    index: int        # flowpipe the seed starts
    clustered: int    # reach sets merged before the reset
    seed: object      # post-reset Zonotope


class HybridRun:
    def __init__(self, flowpipes, jumps, delta, algorithm, variable_names, t_min, t_shift):
        if len(jumps) != len(flowpipes) - 1:
            raise InputError("a run has exactly one jump between consecutive flowpipes")
        self.flowpipes = flowpipes
        self.jumps = jumps
        self.delta = delta
        self.algorithm = algorithm
        self.variable_names = tuple(variable_names)
        self.t_min = t_min
        self.t_shift = t_shift

    @property
    def set_count(self):
        return sum(len(fp) for fp in self.flowpipes)

    @property
    def final_set(self):
        return self.flowpipes[-1][-1]

    @property
    def time_span(self):
        return self.flowpipes[0].start, max(fp.end for fp in self.flowpipes)

    def __repr__(self):
        return f"HybridRun({self.algorithm}, flowpipes={len(self.flowpipes)}, sets={self.set_count})"


# ── Building blocks ──────────────────────────────────────────────────────────

def _grid_steps(t, delta):
    """t / delta, snapped to the nearest integer when within rounding noise."""
    q = t / delta
    r = round(q)
    return float(r) if abs(q - r) <= 1e-9 * max(1.0, abs(q)) else q


def compute_transition_indices(t_sample, zeta, delta):
    """(k1, k2) such that the frames k1..k2-1 cover [t_sample + zeta_lo, t_sample + zeta_hi]."""
    lo, hi = zeta
    if not 0 < delta <= t_sample:
        raise InputError(f"need 0 < delta <= t_sample, got delta={delta}, t_sample={t_sample}")
    if not lo <= 0 <= hi:
        raise InputError(f"zeta must satisfy zeta_lo <= 0 <= zeta_hi, got {zeta}")
    if not t_sample + lo > 0:
        raise InputError("t_sample + zeta_lo must be positive")
    k1 = math.floor(_grid_steps(t_sample + lo, delta))
    k2 = math.ceil(_grid_steps(t_sample + hi, delta))
    if k1 == k2:
        # switch exactly on a grid point: take it from the set ending there
        k1 = k2 - 1
    return k1, k2


def jump(fp, k1, k2, reset):
    if not 0 <= k1 < k2 <= len(fp):
        raise InputError(f"jump window [{k1}, {k2}) outside flowpipe of {len(fp)} sets")
    return affine_map(reset, cluster_union([fp.set_at(k) for k in range(k1, k2)]))


def shift(fp, t_shift, spread=0.0):
    """Move fp to absolute time; spread widens every frame for a switch instant known up to spread."""
    return fp.shifted(t_shift, spread)


def _cont_reach(phs, seed, opts, steps):
    A = phs.dynamics
    if opts.algorithm == "asb07":
        if not isinstance(A, IntervalMatrix):
            A = IntervalMatrix(A)
    elif isinstance(A, IntervalMatrix):
        raise InputError("interval dynamics need the asb07 algorithm")
    elif not math.isinf(opts.max_order):
        seed = reduce_order(seed, opts.max_order)
    sys = discretize(A, phs.input_matrix, phs.input_set, seed, opts.delta, opts.taylor_order)
    if opts.algorithm == "asb07":
        return reach_asb07(sys, steps, opts.max_order), sys
    return reach_glgm06(sys, steps), sys


def _finish(phs, opts, flowpipes, jumps, t_min, t_shift):
    run = HybridRun(flowpipes, jumps, opts.delta, opts.algorithm, phs.names, t_min, t_shift)
    print(f"[REACH] {opts.algorithm}: {len(flowpipes)} flowpipes, {run.set_count} sets, delta={opts.delta:g}")
    return run


# ── Periodic loop ────────────────────────────────────────────────────────────

def reach_periodic(phs, opts: ReachOptions):
    delta = opts.delta
    horizon = opts.horizon or phs.horizon
    lo, _ = phs.zeta
    T = phs.t_sample
    if delta > T + lo:
        raise InputError(f"delta {delta} exceeds the earliest switching time {T + lo}")

    k1, k2 = compute_transition_indices(T, phs.zeta, delta)
    fp, _ = _cont_reach(phs, phs.x0_set, opts, k2)
    flowpipes, jumps = [fp], []

    # a later phase starts anywhere in a window of width w, so the next switch
    # falls between T - w and T + w after it
    width = phs.zeta_width
    k2_next = k2 + math.ceil(_grid_steps(width, delta))
    k1_next = max(0, min(k1, math.floor(_grid_steps(T - width, delta))))
    window = (k1, k2)
    t_min, t_shift = k1 * delta, T + lo

    while t_min <= horizon and t_shift < horizon:
        seed = jump(fp, window[0], window[1], phs.reset)
        clustered = window[1] - window[0]
        jumps.append(JumpRecord(len(flowpipes), clustered, seed))
        if VERBOSE:
            print(f"[JUMP] #{len(jumps)} at t={t_shift:.9g}: clustered {clustered} sets")
        fp, _ = _cont_reach(phs, seed, opts, k2_next)
        fp = shift(fp, t_shift, width)
        flowpipes.append(fp)
        window = (k1_next, k2_next)
        t_min = (len(jumps) + 1) * k1 * delta
        t_shift = (T + lo) + len(jumps) * T

    return _finish(phs, opts, flowpipes, jumps, t_min, t_shift)


def reach_periodic_exact(phs, opts: ReachOptions):
    """Deterministic scalar systems: jump seeds propagated as exact time-point sets."""
    if phs.is_parametric:
        raise InputError("exact mode needs nonparametric dynamics")
    if not phs.deterministic:
        raise InputError("exact mode needs deterministic switching (zeta = [0, 0])")
    delta = opts.delta
    horizon = opts.horizon or phs.horizon
    T = phs.t_sample
    glgm = ReachOptions(delta, "glgm06", opts.max_order, opts.horizon, opts.taylor_order)

    k1, k2 = compute_transition_indices(T, phs.zeta, delta)
    fp, sys = _cont_reach(phs, phs.x0_set, glgm, k2)
    flowpipes, jumps = [fp], []
    seed = phs.x0_set
    t_min, t_shift = k1 * delta, T

    while t_min <= horizon and t_shift < horizon:
        seed = affine_map(phs.reset, exact_point_successor(phs.dynamics, seed, T, sys))
        jumps.append(JumpRecord(len(flowpipes), 1, seed))
        if VERBOSE:
            print(f"[JUMP] #{len(jumps)} at t={t_shift:.9g}: exact seed")
        fp, sys = _cont_reach(phs, seed, glgm, k2)
        flowpipes.append(shift(fp, t_shift))
        t_min = (len(jumps) + 1) * k1 * delta
        t_shift = (len(jumps) + 1) * T

    return _finish(phs, opts, flowpipes, jumps, t_min, t_shift)


def run_analysis(phs, opts: ReachOptions):
    if opts.algorithm == "exact":
        return reach_periodic_exact(phs, opts)
    return reach_periodic(phs, opts)
