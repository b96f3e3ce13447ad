"""Ground-truth trajectories of instantiated periodic systems, checked against hybrid runs.

The dynamics are linear, so trajectories are advanced with exact
matrix-exponential steps; the only approximation left is the sampling grid.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from errors import InputError
from models import instantiations
from set_calculus import contains_point, interval_hull

SCHEDULE_MODES = ("random", "earliest", "latest")
TIME_TOL = 1e-12


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray          # one row per sample
    switch_times: tuple = ()

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise InputError("one state per sample time")
        if np.any(np.diff(self.times) < 0):
            raise InputError("sample times must be non-decreasing")

    def __len__(self):
        return len(self.times)

    @property
    def samples(self):
        return list(zip(self.times.tolist(), self.states))


@dataclass
class ContainmentReport:
    checked: int = 0
    violations: list = field(default_factory=list)   # (t, state)
    uncovered: list = field(default_factory=list)    # sample times no reach set covers

    @property
    def ok(self):
        return not self.violations


# ── Schedules ────────────────────────────────────────────────────────────────

def _validate_schedule(schedule, t_sample, zeta):
    lo, hi = zeta
    prev = -math.inf
    for k, s in enumerate(schedule, start=1):
        tol = TIME_TOL * max(1.0, abs(s))
        if not k * t_sample + lo - tol <= s <= k * t_sample + hi + tol:
            raise InputError(
                f"switch #{k} at t={s} outside its window "
                f"[{k * t_sample + lo}, {k * t_sample + hi}]"
            )
        if s <= prev:
            raise InputError("switch times must be strictly increasing")
        prev = s


def random_schedule(t_sample, zeta, horizon, rng, mode="random"):
    """Switch times k*T + offset strictly before the horizon; offsets are drawn, earliest or latest."""
    if mode not in SCHEDULE_MODES:
        raise InputError(f"schedule mode must be one of {SCHEDULE_MODES}, got '{mode}'")
    lo, hi = zeta
    out = []
    k = 1
    while k * t_sample + lo <= horizon:
        if mode == "earliest":
            offset = lo
        elif mode == "latest":
            offset = hi
        else:
            offset = rng.uniform(lo, hi) if hi > lo else lo
        s = k * t_sample + offset
        if s >= horizon - TIME_TOL * max(1.0, abs(horizon)):
            break
        out.append(s)
        k += 1
    return out


# ── Simulation ───────────────────────────────────────────────────────────────

def _propagator(A, drift):
    """h -> exp of the augmented matrix [[A, drift], [0, 0]] * h."""
    n = A.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A
    M[:n, n] = drift
    return lambda h: expm(M * h)


def simulate(phs, A, x0, schedule, dt, t_end=None, u=None):
    """Trajectory of x' = A x + B u from x0, reset at each switch in `schedule`.

    Samples every dt from each phase start, plus the pre- and post-reset
    states at every switch time.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = phs.dim
    if A.shape != (n, n):
        raise InputError(f"dynamics {A.shape} do not match dimension {n}")
    if phs.is_parametric and not phs.dynamics.contains(A, tol=1e-12):
        raise InputError("A does not instantiate the interval dynamics")
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.size != n:
        raise InputError(f"initial point of size {x.size} for dimension {n}")
    if not dt > 0:
        raise InputError(f"dt must be positive, got {dt}")
    t_end = phs.horizon if t_end is None else float(t_end)
    schedule = [s for s in schedule if s <= t_end]
    _validate_schedule(schedule, phs.t_sample, phs.zeta)

    u = phs.input_set.center if u is None else np.asarray(u, dtype=float).reshape(-1)
    drift = np.atleast_2d(phs.input_matrix) @ u
    step = _propagator(A, drift)
    full = step(dt)

    events = [(s, True) for s in schedule]
    if not schedule or schedule[-1] < t_end:
        events.append((t_end, False))

    times, states = [], []
    z = np.append(x, 1.0)
    start = 0.0
    for end, is_switch in events:
        tol = TIME_TOL * max(1.0, abs(end))
        t, j = start, 0
        while t < end - tol:
            if not times or t > times[-1]:
                times.append(t)
                states.append(z[:n].copy())
            nxt = start + (j + 1) * dt
            z = (full if nxt < end - tol else step(end - t)) @ z
            t, j = nxt, j + 1
        times.append(end)
        states.append(z[:n].copy())
        if is_switch:
            z = np.append(phs.reset.apply(z[:n]), 1.0)
            times.append(end)
            states.append(z[:n].copy())
        start = end
    return Trajectory(np.array(times), np.array(states), tuple(schedule))


# ── Containment ──────────────────────────────────────────────────────────────

def _in_box(Z, point, tol):
    box = interval_hull(Z)
    slack = tol * (np.abs(box.center) + box.radius + np.abs(point))
    return bool(np.all(point >= box.low - slack) and np.all(point <= box.high + slack))


def check_containment(traj: Trajectory, run, tol=1e-9):
    """Each sample must lie in some reach set whose time frame covers its time."""
    frames = [fp.times() for fp in run.flowpipes]
    cache = {}
    report = ContainmentReport()
    for t, x in zip(traj.times, traj.states):
        slack = TIME_TOL * max(1.0, abs(t))
        candidates = []
        for j, (lo, hi) in enumerate(frames):
            k = int(np.searchsorted(hi, t - slack, side="left"))
            while k < len(lo) and lo[k] <= t + slack:
                candidates.append((j, k))
                k += 1
        if not candidates:
            report.uncovered.append(float(t))
            continue
        report.checked += 1
        inside = False
        for key in candidates:
            Z = cache.get(key)
            if Z is None:
                Z = cache[key] = run.flowpipes[key[0]].set_at(key[1])
            if _in_box(Z, x, tol) and contains_point(Z, x, tol):
                inside = True
                break
        if not inside:
            report.violations.append((float(t), x.copy()))
    return report


def _sample_point(Z, rng, corner):
    p = Z.num_generators
    xi = rng.choice((-1.0, 1.0), size=p) if corner else rng.uniform(-1.0, 1.0, size=p)
    return Z.center + Z.generators @ xi


def random_check(phs, run, rng, trajectories=100, dt=None):
    """Simulate random instantiations, initial points, inputs and schedules; count violations.

    Corner matrices of interval dynamics come first; the first two
    trajectories switch at the earliest and latest instants of every window.
    """
    if trajectories < 1:
        raise InputError(f"trajectories must be positive, got {trajectories}")
    t_end = min(phs.horizon, run.time_span[1])
    if dt is None:
        dt = max(run.delta / 2.0, t_end / 2000.0)
    matrices = instantiations(phs, rng, count=trajectories)

    total = 0
    for i in range(trajectories):
        mode = SCHEDULE_MODES[1 + i] if i < 2 else "random"
        schedule = random_schedule(phs.t_sample, phs.zeta, t_end, rng, mode)
        x0 = _sample_point(phs.x0_set, rng, corner=i % 2 == 1)
        u = _sample_point(phs.input_set, rng, corner=i % 2 == 1)
        traj = simulate(phs, matrices[i % len(matrices)], x0, schedule, dt, t_end, u)
        total += len(check_containment(traj, run).violations)
    return total
