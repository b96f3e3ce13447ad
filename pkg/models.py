"""Periodic single-location hybrid systems: the running example and the EMB brake.

The clock is not a state variable. It lives in the engine's time bookkeeping;
its reset T' := T - T_sample is implicit in every model here.
"""

import itertools
import json
from dataclasses import dataclass, replace

import numpy as np

from errors import ConfigError, InputError
from set_calculus import AffineMap, IntervalMatrix, Zonotope

EMB_VARIABLES = ("I", "x", "x_e", "x_c")


@dataclass(frozen=True, eq=False)
class PeriodicHybridSystem:
    dynamics: object  # real matrix or IntervalMatrix
    input_matrix: np.ndarray
    input_set: Zonotope
    reset: AffineMap
    t_sample: float
    zeta: tuple
    x0_set: Zonotope
    horizon: float
    variable_names: tuple = ()

    def __post_init__(self):
        n = self.x0_set.dim
        shape = self.dynamics.shape if isinstance(self.dynamics, IntervalMatrix) else np.shape(self.dynamics)
        if shape != (n, n):
            raise InputError(f"dynamics {shape} do not match initial set of dimension {n}")
        B = np.atleast_2d(self.input_matrix)
        if B.shape != (n, self.input_set.dim):
            raise InputError(f"input matrix {B.shape} does not match ({n}, {self.input_set.dim})")
        if self.reset.matrix.shape != (n, n):
            raise InputError(f"reset map {self.reset.matrix.shape} does not match dimension {n}")
        if not self.t_sample > 0:
            raise InputError(f"t_sample must be positive, got {self.t_sample}")
        lo, hi = self.zeta
        if not lo <= 0 <= hi:
            raise InputError(f"zeta must satisfy zeta_lo <= 0 <= zeta_hi, got {self.zeta}")
        if not self.t_sample + lo > 0:
            raise InputError("t_sample + zeta_lo must be positive")
        if not self.horizon > 0:
            raise InputError(f"horizon must be positive, got {self.horizon}")
        if self.variable_names and len(self.variable_names) != n:
            raise InputError(f"{len(self.variable_names)} variable names for dimension {n}")

    @property
    def dim(self):
        return self.x0_set.dim

    @property
    def is_parametric(self):
        return isinstance(self.dynamics, IntervalMatrix)

    @property
    def deterministic(self):
        return self.zeta[0] == 0 and self.zeta[1] == 0

    @property
    def zeta_width(self):
        return self.zeta[1] - self.zeta[0]

    @property
    def names(self):
        return self.variable_names or tuple(f"x{j}" for j in range(self.dim))


@dataclass(frozen=True)
class EMBParams:
    resistance: float       # Ohm
    inductance: float       # H
    motor_constant: float   # V s
    gear_ratio: float
    friction: float         # N m s (rotational)
    k_p: float
    k_i: float
    disk_position: float    # m
    t_sample: float         # s
    zeta: tuple = (0.0, 0.0)
    horizon: float = 0.1
    initial_state: tuple = (0.0, 0.0, 0.0, 0.0)
    initial_radius: tuple = (0.0, 0.0, 0.0, 0.0)

    PHYSICAL = ("resistance", "inductance", "motor_constant", "gear_ratio", "friction", "k_p", "k_i")

    def __post_init__(self):
        for name in self.PHYSICAL + ("disk_position", "t_sample", "horizon"):
            if not getattr(self, name) > 0:
                raise InputError(f"EMB parameter '{name}' must be positive, got {getattr(self, name)}")
        if len(self.initial_state) != 4 or len(self.initial_radius) != 4:
            raise InputError("EMB initial_state and initial_radius need 4 entries (I, x, x_e, x_c)")

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InputError(f"unknown EMB parameter(s): {', '.join(unknown)}")
        missing = [f for f in cls.PHYSICAL + ("disk_position", "t_sample") if f not in data]
        if missing:
            raise InputError(f"missing EMB parameter(s): {', '.join(missing)}")
        values = dict(data)
        for key in ("zeta", "initial_state", "initial_radius"):
            if key in values:
                values[key] = tuple(float(v) for v in values[key])
        return cls(**values)


@dataclass(frozen=True)
class Variation:
    kind: str = "none"
    amount: float = 0.0

    KINDS = ("none", "pv1", "pv2")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InputError(f"variation kind must be one of {self.KINDS}, got '{self.kind}'")
        if self.kind != "none" and not self.amount > 0:
            raise InputError(f"variation {self.kind} needs a positive amount")

    @classmethod
    def from_dict(cls, data):
        if data is None:
            return cls()
        kind = data.get("kind", "none")
        if kind == "pv1":
            return cls("pv1", float(data.get("width", 0.0)))
        if kind == "pv2":
            return cls("pv2", float(data.get("fraction", 0.0)))
        return cls(kind)


# ── Loading ──────────────────────────────────────────────────────────────────

def read_json(path):
    """Parse a JSON file; syntax errors become ConfigError with line and column."""
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"{path}: file not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None


def load_params(path):
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object of EMB parameters")
    data.pop("_source", None)
    try:
        return EMBParams.from_dict(data)
    except ConfigError:
        raise
    except (InputError, TypeError) as e:
        raise ConfigError(f"{path}: {e}") from None


# ── Builders ─────────────────────────────────────────────────────────────────

def build_simple(x0_value, t_sample, zeta, horizon):
    """x' = -x with the reset x' := 2x at every sampling instant."""
    return PeriodicHybridSystem(
        dynamics=np.array([[-1.0]]),
        input_matrix=np.zeros((1, 1)),
        input_set=Zonotope([0.0]),
        reset=AffineMap([[2.0]]),
        t_sample=float(t_sample),
        zeta=(float(zeta[0]), float(zeta[1])),
        x0_set=Zonotope([float(x0_value)]),
        horizon=float(horizon),
        variable_names=("x",),
    )


def _emb_entries(R, L, K, i, d_rot, k_p, k_i):
    return {
        (0, 0): -(R + K * K / d_rot) / L,
        (0, 2): k_p / L,
        (0, 3): k_i / L,
        (1, 0): K / (i * d_rot),
    }


def _emb_matrix(entries):
    A = np.zeros((4, 4))
    for idx, value in entries.items():
        A[idx] = value
    return A


def emb_reset(t_sample, disk_position):
    """x_e' := x0 - x, x_c' := x_c + T_sample (x0 - x); I and x unchanged."""
    M = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
        [0.0, -t_sample, 0.0, 1.0],
    ])
    b = np.array([0.0, 0.0, disk_position, t_sample * disk_position])
    return AffineMap(M, b)


def build_emb(p: EMBParams, variation: Variation = Variation()):
    physical = [getattr(p, name) for name in EMBParams.PHYSICAL]
    nominal = _emb_entries(*physical)
    A = _emb_matrix(nominal)

    if variation.kind == "none":
        dynamics = A
    elif variation.kind == "pv1":
        rad = np.zeros((4, 4))
        rad[1, 0] = variation.amount / 2.0
        dynamics = IntervalMatrix(A, rad)
    else:
        # nominal-centred enclosure of every +-chi corner of the seven parameters
        chi = variation.amount
        rad = np.zeros((4, 4))
        for signs in itertools.product((-1.0, 1.0), repeat=len(physical)):
            corner = _emb_entries(*[v * (1.0 + s * chi) for v, s in zip(physical, signs)])
            for idx, value in corner.items():
                rad[idx] = max(rad[idx], abs(value - nominal[idx]))
        dynamics = IntervalMatrix(A, rad)

    return PeriodicHybridSystem(
        dynamics=dynamics,
        input_matrix=np.zeros((4, 1)),
        input_set=Zonotope([0.0]),
        reset=emb_reset(p.t_sample, p.disk_position),
        t_sample=p.t_sample,
        zeta=tuple(p.zeta),
        x0_set=Zonotope(p.initial_state, np.diag(p.initial_radius)),
        horizon=p.horizon,
        variable_names=EMB_VARIABLES,
    )


def split_parametric(phs, parts, entry):
    """Partition the interval of one dynamics entry into `parts` equal chunks."""
    if parts < 1:
        raise InputError(f"parts must be positive, got {parts}")
    if parts == 1:
        return [phs]
    if not phs.is_parametric:
        raise InputError("only interval dynamics can be split")
    IM = phs.dynamics
    row, col = entry
    if IM.rad[row, col] == 0:
        raise InputError(f"dynamics entry {entry} has zero radius")

    edges = np.linspace(IM.inf[row, col], IM.sup[row, col], parts + 1)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, rad = IM.mid.copy(), IM.rad.copy()
        mid[row, col] = (lo + hi) / 2.0
        rad[row, col] = (hi - lo) / 2.0
        out.append(replace(phs, dynamics=IntervalMatrix(mid, rad)))
    return out


# ── Queries ──────────────────────────────────────────────────────────────────

def velocity_row(phs, variable="x"):
    """Coefficients of d(variable)/dt; worst-case magnitude for interval dynamics."""
    names = phs.names
    if variable not in names:
        raise InputError(f"unknown variable '{variable}' (have {', '.join(names)})")
    j = names.index(variable)
    if phs.is_parametric:
        mid, rad = phs.dynamics.mid[j], phs.dynamics.rad[j]
        return mid + np.where(mid < 0, -rad, rad)
    return np.asarray(phs.dynamics, dtype=float)[j].copy()


def instantiations(phs, rng, count=8, max_corner_entries=10):
    """Scalar matrices drawn from the dynamics: every entry corner plus `count` uniform draws."""
    if not phs.is_parametric:
        return [np.asarray(phs.dynamics, dtype=float)]
    IM = phs.dynamics
    free = list(zip(*np.nonzero(IM.rad)))
    out = []
    if len(free) <= max_corner_entries:
        for signs in itertools.product((-1.0, 1.0), repeat=len(free)):
            A = IM.mid.copy()
            for (r, c), s in zip(free, signs):
                A[r, c] += s * IM.rad[r, c]
            out.append(A)
    for _ in range(count):
        out.append(IM.mid + IM.rad * rng.uniform(-1.0, 1.0, size=IM.shape))
    return out
