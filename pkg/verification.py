"""Support-function queries on hybrid runs: diameters, bounds, requirement (epsilon, t_c, v_r).

Every query takes one HybridRun or a list of runs over the same time grid
(the sub-runs of a parameter split); lists are evaluated on their union.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import InputError
from set_calculus import project

TIME_TOL = 1e-12


@dataclass(frozen=True)
class RequirementResult:
    epsilon: float
    verified: bool
    t_c: Optional[float] = None   # s
    v_r: Optional[float] = None   # m/s

    def __post_init__(self):
        if not self.verified and (self.t_c is not None or self.v_r is not None):
            raise InputError("an unverified requirement carries no t_c / v_r")


def _runs(run):
    runs = list(run) if isinstance(run, (list, tuple)) else [run]
    if not runs or not runs[0].flowpipes:
        raise InputError("empty run")
    return runs


def _axis(runs, var_index):
    n = runs[0].flowpipes[0].dim
    if not 0 <= var_index < n:
        raise InputError(f"variable index {var_index} out of range for dimension {n}")
    e = np.zeros(n)
    e[var_index] = 1.0
    return e


def _grid(run):
    """Flowpipe number, step and time frame of every reach set, flowpipe by flowpipe."""
    fps, ks, los, his = [], [], [], []
    for j, fp in enumerate(run.flowpipes):
        lo, hi = fp.times()
        fps.append(np.full(len(fp), j))
        ks.append(np.arange(len(fp)))
        los.append(lo)
        his.append(hi)
    return np.concatenate(fps), np.concatenate(ks), np.concatenate(los), np.concatenate(his)


def _times(run):
    """Concatenated (t_lo, t_hi) of every reach set, flowpipe by flowpipe."""
    frames = [fp.times() for fp in run.flowpipes]
    return np.concatenate([lo for lo, _ in frames]), np.concatenate([hi for _, hi in frames])


def _sup(runs, direction):
    """Support value of every reach set, maximised over the runs of a family."""
    values = None
    for run in runs:
        v = np.concatenate([fp.supports(direction) for fp in run.flowpipes])
        if values is not None and v.shape != values.shape:
            raise InputError("runs of a family must share their time grid")
        values = v if values is None else np.maximum(values, v)
    return values


def _sup_selected(runs, direction, mask):
    """Largest support value over the reach sets picked by mask; skips flowpipes with none picked."""
    best = -np.inf
    for run in runs:
        offset = 0
        for fp in run.flowpipes:
            picked = mask[offset:offset + len(fp)]
            if picked.any():
                best = max(best, float(fp.supports(direction)[picked].max()))
            offset += len(fp)
    return best


def time_order(run):
    fp, k, t_lo, _ = _grid(_runs(run)[0])
    return np.lexsort((k, fp, t_lo))


# ── Queries ──────────────────────────────────────────────────────────────────

def final_diameter(run, var_index):
    runs = _runs(run)
    _axis(runs, var_index)
    bounds = [project(r.flowpipes[-1].set_at(len(r.flowpipes[-1]) - 1), var_index) for r in runs]
    return max(hi for _, hi in bounds) - min(lo for lo, _ in bounds)


def flowpipe_bounds(run, var_index):
    """Rows (t_lo, t_hi, lo, hi) of the projection on one variable, ordered by time."""
    runs = _runs(run)
    e = _axis(runs, var_index)
    _, _, t_lo, t_hi = _grid(runs[0])
    hi = _sup(runs, e)
    lo = -_sup(runs, -e)
    order = time_order(runs)
    return np.column_stack([t_lo, t_hi, lo, hi])[order]


def bounds_table(run):
    """Columns for the CSV export: flowpipe, k, t_lo, t_hi and lo/hi per variable."""
    runs = _runs(run)
    fp, k, t_lo, t_hi = _grid(runs[0])
    order = time_order(runs)
    table = {"k": k[order], "flowpipe": fp[order], "t_lo": t_lo[order], "t_hi": t_hi[order]}
    for j, name in enumerate(runs[0].variable_names):
        e = _axis(runs, j)
        table[f"{name}_lo"] = -_sup(runs, -e)[order]
        table[f"{name}_hi"] = _sup(runs, e)[order]
    return table


def check_requirement(run, epsilon, x0, vel_row, position_index=None):
    """|x - x0| <= epsilon for all t >= t_c; v_r is the speed bound on the sets covering t_c.

    t_c is the end of the last reach set violating the band (the first frame
    if none does); the requirement fails when the final sets violate it.
    """
    if not epsilon > 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    runs = _runs(run)
    if position_index is None:
        names = runs[0].variable_names
        if "x" not in names:
            raise InputError("no position variable 'x'; pass position_index")
        position_index = names.index("x")
    e = _axis(runs, position_index)
    vel = np.asarray(vel_row, dtype=float)

    t_lo, t_hi = _times(runs[0])
    upper = _sup(runs, e)
    lower = -_sup(runs, -e)
    ok = (upper <= x0 + epsilon) & (lower >= x0 - epsilon)

    t_end = float(t_hi.max())
    t_c = float(t_lo.min()) if ok.all() else float(t_hi[~ok].max())
    tol = TIME_TOL * max(1.0, abs(t_end))
    if t_c >= t_end - tol:
        return RequirementResult(epsilon, False)

    window = (t_lo <= t_c + tol) & (t_hi >= t_c - tol)
    v_r = max(_sup_selected(runs, vel, window), _sup_selected(runs, -vel, window))
    return RequirementResult(epsilon, True, t_c, v_r)
