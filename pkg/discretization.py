"""Time discretization of linear dynamics: Phi = e^{A delta}, Omega0 and V.

Omega0 covers every trajectory over [0, delta] from X0; V covers the input
effect of one step, so that X(k) = Phi X(k-1) + V.
"""

import os

import numpy as np
from scipy.linalg import expm

from errors import AnalysisError, InputError
from set_calculus import IntervalMatrix, Zonotope, linear_map

# ── Config ──────────────────────────────────────────────────────────────────
DEFAULT_TAYLOR_ORDER = int(os.getenv("TAYLOR_ORDER", "6"))
TAIL_TOL = float(os.getenv("TAYLOR_TAIL_TOL", "1e-18"))
MAX_TAIL_TERMS = 200


class DiscretizedSystem:
    """phi is a real matrix for the scalar path, an IntervalMatrix for parametric dynamics."""

    __slots__ = ("phi", "omega0", "v", "delta")

    def __init__(self, phi, omega0, v, delta):
        if not delta > 0:
            raise InputError(f"delta must be positive, got {delta}")
        shape = phi.shape if isinstance(phi, IntervalMatrix) else np.shape(phi)
        n = omega0.dim
        if shape != (n, n) or v.dim != n:
            raise InputError(f"phi {shape} does not match sets of dimension {n}/{v.dim}")
        self.phi = phi
        self.omega0 = omega0
        self.v = v
        self.delta = float(delta)

    @property
    def is_interval(self):
        return isinstance(self.phi, IntervalMatrix)

    @property
    def homogeneous(self):
        return self.v.num_generators == 0 and not np.any(self.v.center)


def _square(A, what):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"{what}: matrix must be square, got shape {A.shape}")
    return A


def matrix_exponential(A, t):
    A = _square(A, "matrix_exponential")
    if not np.isfinite(t):
        raise InputError(f"matrix_exponential: time must be finite, got {t}")
    return expm(A * t)


def interval_matrix_exponential(IM, t, p=DEFAULT_TAYLOR_ORDER):
    """Interval matrix containing e^{At} for every A instantiating IM.

    Taylor sum up to order p in interval arithmetic, widened entrywise by the
    tail sum_{i>p} (|A| t)^i / i! with |A| = |mid| + rad. The tail is summed as
    a matrix until the norm bound on what is left drops below TAIL_TOL, so
    rows of A that are identically zero get no widening at all.
    """
    if p < 2:
        raise InputError(f"Taylor order must be >= 2, got {p}")
    n, m = IM.shape
    if n != m:
        raise InputError(f"interval_matrix_exponential: matrix must be square, got {IM.shape}")
    if t == 0:
        return IntervalMatrix.identity(n)

    norm_t = IM.norm_inf() * abs(t)
    if norm_t >= p + 2:
        raise AnalysisError(
            f"interval exponential does not converge (||A|| t = {norm_t:.3g} >= {p + 2}); "
            f"reduce delta or raise the Taylor order"
        )

    step = IM.scale(t)
    term = IntervalMatrix.identity(n)
    total = term
    for i in range(1, p + 1):
        term = (term @ step).scale(1.0 / i)
        total = total + term
    return IntervalMatrix(total.mid, total.rad + _taylor_tail((np.abs(IM.mid) + IM.rad) * abs(t), p, norm_t))


def _taylor_tail(M, p, norm):
    """Entrywise bound on sum_{i>p} M^i / i! for a nonnegative matrix M with ||M|| = norm < p + 2."""
    live = np.any(M != 0.0, axis=1)
    term = np.eye(M.shape[0])
    scalar = 1.0
    for i in range(1, p + 1):
        term = term @ M / i
        scalar *= norm / i
    tail = np.zeros_like(M)
    i = p
    while True:
        i += 1
        term = term @ M / i
        tail += term
        scalar *= norm / i
        # norm^{i+1}/(i+1)! geometric bound on the rest of the series
        rest = scalar * norm / (i + 1) / (1.0 - norm / (i + 2))
        if rest <= TAIL_TOL or i >= p + MAX_TAIL_TERMS:
            break
    return tail + rest * live[:, None]


def _phi_blocks(M, delta):
    """(e^{M delta}, Phi_2(M, delta)) with Phi_2 = sum_{i>=0} delta^{i+2} M^i / (i+2)!.

    Both come out of one exponential of the block matrix
    [[M d, d I, 0], [0, 0, d I], [0, 0, 0]].
    """
    n = M.shape[0]
    block = np.zeros((3 * n, 3 * n))
    block[:n, :n] = M * delta
    block[:n, n:2 * n] = delta * np.eye(n)
    block[n:2 * n, 2 * n:] = delta * np.eye(n)
    E = expm(block)
    return E[:n, :n], E[:n, 2 * n:]


def _abs_bound(c, G):
    """Entrywise sup of |x| over the zonotope (c, G)."""
    return np.abs(c) + np.abs(G).sum(axis=1)


def discretize(A, B, U, X0, delta, p=DEFAULT_TAYLOR_ORDER):
    """Discretize x' = Ax + Bu, u in U, from X0 with step delta.

    omega0 is the first-order interpolation between X0 and Phi X0,

        c + (Phi - I) c / 2 + [(I + Phi) G / 2, (Phi - I) c / 2, Box(r)]

    with r = sum |(Phi - I) G| / 2 + rad(Phi) |X0| + Phi_2(|A|, d) |A^2 X0|
    plus the input part. The correction term only grows on axes where A^2 X0
    is nonzero. v = d BU + Box(|A| Phi_2(|A|, d) |BU|).

    For interval dynamics A = [M - R, M + R], Phi is the interval exponential
    and |A^2 x| is bounded by |M^2 x| + (|M| R + R |M| + R^2) |x|.
    """
    if not delta > 0:
        raise InputError(f"delta must be positive, got {delta}")
    n = X0.dim
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] != n or B.shape[1] != U.dim:
        raise InputError(f"input matrix {B.shape} does not match state {n} / input {U.dim}")

    if isinstance(A, IntervalMatrix):
        if A.shape != (n, n):
            raise InputError(f"dynamics {A.shape} do not match state dimension {n}")
        phi = interval_matrix_exponential(A, delta, p)
        M, R = np.asarray(A.mid), np.asarray(A.rad)
        phi_mid, phi_rad = np.asarray(phi.mid), np.asarray(phi.rad)
    else:
        A = _square(A, "discretize")
        if A.shape != (n, n):
            raise InputError(f"dynamics {A.shape} do not match state dimension {n}")
        M, R = A, np.zeros_like(A)
        phi = phi_mid = matrix_exponential(A, delta)
        phi_rad = np.zeros_like(A)

    A_abs = np.abs(M) + R
    _, phi2 = _phi_blocks(A_abs, delta)

    c, G = X0.center, X0.generators
    x0_abs = _abs_bound(c, G)
    M2 = M @ M
    curvature = _abs_bound(M2 @ c, M2 @ G) + (np.abs(M) @ R + R @ np.abs(M) + R @ R) @ x0_abs

    BU = linear_map(B, U)
    input_spread = A_abs @ phi2 @ _abs_bound(BU.center, BU.generators)

    step = phi_mid - np.eye(n)
    drift = step @ c / 2.0
    radius = (
        np.abs(step @ G).sum(axis=1) / 2.0
        + phi_rad @ x0_abs
        + phi2 @ curvature
        + input_spread
    )
    omega0 = Zonotope(
        c + drift + delta * BU.center / 2.0,
        np.hstack([
            (np.eye(n) + phi_mid) @ G / 2.0,
            drift[:, None],
            delta * BU.center[:, None] / 2.0,
            delta * BU.generators,
            np.diag(radius),
        ]),
    )
    v = Zonotope(delta * BU.center, np.hstack([delta * BU.generators, np.diag(input_spread)]))
    return DiscretizedSystem(phi, omega0, v, delta)
