import math
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from discretization import discretize, interval_matrix_exponential, matrix_exponential
from errors import AnalysisError, InputError
from models import build_emb, load_params
from set_calculus import IntervalMatrix, Zonotope, contains_point, project

EMB_PARAMS = Path(__file__).resolve().parents[1] / "configs" / "emb_params.json"


def test_matrix_exponential_examples():
    assert_allclose(matrix_exponential(np.zeros((3, 3)), 2.0), np.eye(3))
    assert matrix_exponential([[-1.0]], 1.0)[0, 0] == pytest.approx(math.exp(-1.0), rel=1e-14)
    d = 0.01
    assert_allclose(matrix_exponential([[0, 1], [0, 0]], d), [[1, d], [0, 1]], atol=1e-15)


def test_matrix_exponential_rejects_non_square():
    with pytest.raises(InputError):
        matrix_exponential(np.ones((2, 3)), 1.0)


def test_interval_exponential_point_matrix():
    E = interval_matrix_exponential(IntervalMatrix([[-1.0]]), 1.0, p=10)
    assert E.inf[0, 0] <= math.exp(-1.0) <= E.sup[0, 0]
    bound = 1.0 / math.factorial(11) / (1 - 1 / 12)
    assert 2 * E.rad[0, 0] <= 2 * bound + 1e-15


def test_interval_exponential_encloses_endpoints():
    E = interval_matrix_exponential(IntervalMatrix.from_bounds([[-1.01]], [[-0.99]]), 0.1)
    for a in (-1.01, -0.99, -1.0):
        assert E.inf[0, 0] <= math.exp(a * 0.1) <= E.sup[0, 0]


def test_interval_exponential_encloses_random_instantiations():
    rng = np.random.default_rng(5)
    IM = IntervalMatrix([[-2.0, 1.0], [0.5, -1.0]], [[0.1, 0.0], [0.05, 0.1]])
    E = interval_matrix_exponential(IM, 0.05)
    for _ in range(30):
        A = IM.mid + IM.rad * rng.uniform(-1, 1, size=(2, 2))
        assert E.contains(matrix_exponential(A, 0.05), tol=1e-14)


def test_interval_exponential_zero_time_is_identity():
    E = interval_matrix_exponential(IntervalMatrix([[3.0, 1.0], [0.0, 2.0]], [[0.1, 0], [0, 0]]), 0.0)
    assert_allclose(E.mid, np.eye(2))
    assert not E.rad.any()


def test_interval_exponential_radius_shrinks_with_order():
    IM = IntervalMatrix([[-1.0]], [[0.01]])
    radii = [interval_matrix_exponential(IM, 0.5, p).rad[0, 0] for p in (3, 4, 6, 8)]
    assert all(a >= b - 1e-15 for a, b in zip(radii, radii[1:]))


def test_interval_exponential_divergence_is_analysis_error():
    with pytest.raises(AnalysisError, match="reduce delta"):
        interval_matrix_exponential(IntervalMatrix([[-1000.0]]), 1.0, p=6)


def test_discretize_homogeneous_scalar():
    sys = discretize([[-1.0]], np.zeros((1, 1)), Zonotope([0.0]), Zonotope([10.0]), 0.1)
    lo, hi = project(sys.omega0, 0)
    assert lo <= 10 * math.exp(-0.1) and hi >= 10.0
    assert sys.homogeneous
    assert sys.phi[0, 0] == pytest.approx(math.exp(-0.1))


def test_discretize_omega0_covers_first_frame():
    A = np.array([[-1.0, 4.0], [-4.0, -1.0]])
    X0 = Zonotope([1.0, 0.0], [[0.1, 0.0], [0.0, 0.1]])
    sys = discretize(A, np.zeros((2, 1)), Zonotope([0.0]), X0, 0.05)
    for t in np.linspace(0, 0.05, 11):
        for xi in ([1, 1], [-1, 1], [1, -1], [-1, -1]):
            x = matrix_exponential(A, t) @ (X0.center + X0.generators @ np.array(xi))
            assert contains_point(sys.omega0, x)


def test_discretize_omega0_shrinks_with_delta():
    X0 = Zonotope([10.0])
    coarse = discretize([[-1.0]], np.zeros((1, 1)), Zonotope([0.0]), X0, 0.1)
    fine = discretize([[-1.0]], np.zeros((1, 1)), Zonotope([0.0]), X0, 0.001)
    width = lambda s: np.subtract(*project(s.omega0, 0)[::-1])
    assert width(fine) < width(coarse) / 50


def test_discretize_point_input_with_zero_dynamics_is_exact():
    sys = discretize(np.zeros((1, 1)), [[1.0]], Zonotope([2.0]), Zonotope([0.0]), 0.1)
    assert sys.v.num_generators == 0
    assert sys.v.center[0] == pytest.approx(0.2)


def test_discretize_interval_dynamics_gives_interval_phi():
    IM = IntervalMatrix.from_bounds([[-1.01]], [[-0.99]])
    sys = discretize(IM, np.zeros((1, 1)), Zonotope([0.0]), Zonotope([10.0]), 0.1)
    assert sys.is_interval
    lo, hi = project(sys.omega0, 0)
    assert lo <= 10 * math.exp(-0.101) and hi >= 10.0


def test_discretize_dimension_mismatch():
    with pytest.raises(InputError):
        discretize(np.eye(2), np.zeros((2, 1)), Zonotope([0.0]), Zonotope([0.0]), 0.1)


def test_interval_exponential_leaves_zero_rows_exact():
    IM = IntervalMatrix([[-5.0, 2.0], [0.0, 0.0]], [[0.5, 0.1], [0.0, 0.0]])
    E = interval_matrix_exponential(IM, 0.2, p=4)
    assert_allclose(E.mid[1], [0.0, 1.0])
    assert not E.rad[1].any()
    assert E.rad[0].min() > 0


def test_omega0_ignores_offset_on_axes_without_dynamics():
    A = np.array([[-1.0, 0.0], [0.0, 0.0]])
    X0 = Zonotope([0.0, 1e6])
    sys = discretize(A, np.zeros((2, 1)), Zonotope([0.0]), X0, 0.1)
    assert project(sys.omega0, 0) == pytest.approx((0.0, 0.0), abs=1e-12)
    assert project(sys.omega0, 1) == pytest.approx((1e6, 1e6), rel=1e-15)


def test_emb_omega0_bloats_only_driven_axes():
    phs = build_emb(load_params(EMB_PARAMS))
    A = phs.dynamics
    seed = Zonotope([800.0, 0.03, 0.02, 2e-6])
    sys = discretize(A, phs.input_matrix, phs.input_set, seed, 1e-7)
    assert project(sys.omega0, 2) == pytest.approx((0.02, 0.02), abs=1e-15)
    assert project(sys.omega0, 3) == pytest.approx((2e-6, 2e-6), abs=1e-15)

    step = matrix_exponential(A, 1e-7) @ seed.center - seed.center
    lo, hi = project(sys.omega0, 0)
    assert hi - lo >= abs(step[0])
    assert hi - lo <= 1.01 * abs(step[0])


def test_emb_omega0_width_follows_motion_not_magnitude():
    phs = build_emb(load_params(EMB_PARAMS))
    seed = Zonotope([0.0, 0.0, 0.05, 0.0])
    # same motion over one step, state shifted along x
    moved = Zonotope([0.0, 0.5, 0.05, 0.0])
    widths = []
    for X0 in (seed, moved):
        sys = discretize(phs.dynamics, phs.input_matrix, phs.input_set, X0, 1e-7)
        lo, hi = project(sys.omega0, 0)
        widths.append(hi - lo)
    assert widths[1] == pytest.approx(widths[0], rel=1e-9)
