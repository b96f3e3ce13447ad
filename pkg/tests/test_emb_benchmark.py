"""Reference values of the EMB brake over the full 0.1 s horizon."""

import time
from pathlib import Path

import pytest

from hybrid_engine import ReachOptions, run_analysis
from models import Variation, build_emb, load_params, velocity_row
from verification import check_requirement, final_diameter

PARAMS = load_params(Path(__file__).resolve().parents[1] / "configs" / "emb_params.json")
I, X = 0, 1

# final diameters of I and x published for the nominal brake (glgm06)
REFERENCE_I = {1e-7: 13.707, 1e-8: 1.369, 1e-9: 0.137}
REFERENCE_X = {1e-7: 73.519e-5}


@pytest.fixture(scope="module")
def nominal():
    return build_emb(PARAMS)


@pytest.fixture(scope="module")
def glgm06(nominal):
    runs = {}

    def run(delta):
        if delta not in runs:
            runs[delta] = run_analysis(nominal, ReachOptions(delta, max_order=1))
        return runs[delta]
    return run


def test_reach_loop_at_1e7_is_fast(nominal):
    start = time.perf_counter()
    run = run_analysis(nominal, ReachOptions(1e-7, max_order=1))
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    assert len(run.flowpipes) == 1000


def test_final_diameters_within_factor_two_of_reference(glgm06):
    run = glgm06(1e-7)
    d_i = final_diameter(run, I)
    d_x = final_diameter(run, X)
    assert REFERENCE_I[1e-7] / 2 <= d_i <= REFERENCE_I[1e-7] * 2
    assert REFERENCE_X[1e-7] / 2 <= d_x <= REFERENCE_X[1e-7] * 2


def test_diameter_scales_with_delta(glgm06):
    d = [final_diameter(glgm06(delta), I) for delta in (1e-7, 1e-8, 1e-9)]
    for coarse, fine in zip(d, d[1:]):
        assert 8.0 <= coarse / fine <= 12.0
    assert REFERENCE_I[1e-9] / 2 <= d[2] <= REFERENCE_I[1e-9] * 2


def test_exact_mode_collapses_the_final_set(nominal, glgm06):
    exact = run_analysis(nominal, ReachOptions(1e-8, "exact"))
    d_exact = final_diameter(exact, I)
    assert 0 < d_exact
    assert final_diameter(glgm06(1e-8), I) / d_exact >= 1e4


def test_contact_time_and_speed(nominal, glgm06):
    result = check_requirement(glgm06(1e-8), 0.002, PARAMS.disk_position, velocity_row(nominal))
    assert result.verified
    assert 0.080 <= result.t_c <= 0.095
    # m/s; the nominal solution gives 37.9 1/s * 2.1 mm at the band edge
    assert 0.07 <= result.v_r <= 0.09


@pytest.fixture(scope="module")
def pv1_diameters():
    phs = build_emb(PARAMS, Variation("pv1", 3.5e-5))
    return {
        order: final_diameter(run_analysis(phs, ReachOptions(1e-6, "asb07", order, taylor_order=12)), I)
        for order in (1, 2, 3)
    }


def test_pv1_order_two_is_much_tighter_than_order_one(pv1_diameters):
    assert pv1_diameters[2] * 10 <= pv1_diameters[1]


def test_pv1_order_three_is_no_looser_than_order_two(pv1_diameters):
    assert pv1_diameters[3] <= pv1_diameters[2]


@pytest.mark.parametrize("order, verified", [(1, False), (2, True)])
def test_pv2_needs_order_two(order, verified):
    phs = build_emb(PARAMS, Variation("pv2", 0.01))
    run = run_analysis(phs, ReachOptions(1e-6, "asb07", order, taylor_order=12))
    result = check_requirement(run, 0.02, PARAMS.disk_position, velocity_row(phs))
    assert result.verified is verified
