import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import InputError
from hybrid_engine import ReachOptions, reach_periodic
from models import EMBParams, Variation, build_emb, build_simple
from set_calculus import IntervalMatrix
from sim_oracle import (
    Trajectory,
    check_containment,
    random_check,
    random_schedule,
    simulate,
)

EMB = dict(
    resistance=0.5, inductance=1e-3, motor_constant=0.02, gear_ratio=113.1167,
    friction=0.1, k_p=10000.0, k_i=1000.0, disk_position=0.05, t_sample=1e-4,
    horizon=1e-3,
)


def value_at(traj, t):
    """State at t, taking the post-reset sample at a switch."""
    idx = np.nonzero(np.isclose(traj.times, t, rtol=0, atol=1e-12))[0]
    return traj.states[idx[-1]]


def test_simulate_simple_closed_form():
    phs = build_simple(10, 1, [0, 0], 5)
    traj = simulate(phs, [[-1.0]], [10.0], [1, 2, 3, 4, 5], 0.01)
    assert value_at(traj, 1.5)[0] == pytest.approx(2 * 10 * math.exp(-1.5), rel=1e-9)
    assert value_at(traj, 3.0)[0] == pytest.approx(8 * 10 * math.exp(-3.0), rel=1e-9)
    assert traj.switch_times == (1, 2, 3, 4, 5)


def test_simulate_emits_both_sides_of_a_switch():
    phs = build_simple(10, 1, [0, 0], 2)
    traj = simulate(phs, [[-1.0]], [10.0], [1.0], 0.1, t_end=2.0)
    at_switch = np.nonzero(traj.times == 1.0)[0]
    assert len(at_switch) == 2
    pre, post = traj.states[at_switch]
    assert post[0] == pytest.approx(2 * pre[0])
    assert np.all(np.diff(traj.times) >= 0)
    repeated = np.nonzero(np.diff(traj.times) == 0)[0]
    assert list(traj.times[repeated]) == [1.0]


def test_simulate_without_switches_is_lti():
    phs = build_simple(10, 1, [0, 0], 5)
    traj = simulate(phs, [[-1.0]], [10.0], [], 0.25, t_end=2.0)
    assert_allclose(traj.states[:, 0], 10 * np.exp(-traj.times), rtol=1e-12)


def test_simulate_step_refinement_is_exact():
    phs = build_simple(10, 1, [0, 0], 3)
    coarse = simulate(phs, [[-1.0]], [10.0], [1, 2, 3], 0.1)
    fine = simulate(phs, [[-1.0]], [10.0], [1, 2, 3], 0.05)
    for t in (0.5, 1.5, 2.7):
        assert value_at(fine, t)[0] == pytest.approx(value_at(coarse, t)[0], rel=1e-9)


def test_simulate_with_input_uses_closed_form():
    phs = replace(build_simple(0, 1, [0, 0], 1), input_matrix=np.array([[1.0]]))
    traj = simulate(phs, [[-1.0]], [0.0], [], 0.1, t_end=1.0, u=[2.0])
    assert value_at(traj, 1.0)[0] == pytest.approx(2 * (1 - math.exp(-1.0)), rel=1e-12)


def test_simulate_rejects_schedule_outside_window():
    phs = build_simple(10, 1, [-0.1, 0.1], 5)
    with pytest.raises(InputError, match="window"):
        simulate(phs, [[-1.0]], [10.0], [1.2], 0.01)
    with pytest.raises(InputError):
        simulate(phs, [[-1.0]], [10.0], [0.95, 1.95], 0.0)


def test_simulate_rejects_matrix_outside_interval():
    phs = replace(build_simple(10, 1, [0, 0], 1), dynamics=IntervalMatrix.from_bounds([[-1.01]], [[-0.99]]))
    with pytest.raises(InputError):
        simulate(phs, [[-2.0]], [10.0], [], 0.1)


def test_random_schedule_modes():
    rng = np.random.default_rng(0)
    early = random_schedule(1.0, (-0.1, 0.1), 5.0, rng, "earliest")
    late = random_schedule(1.0, (-0.1, 0.1), 5.0, rng, "latest")
    drawn = random_schedule(1.0, (-0.1, 0.1), 5.0, rng)
    assert early == pytest.approx([0.9, 1.9, 2.9, 3.9, 4.9])
    assert late == pytest.approx([1.1, 2.1, 3.1, 4.1])
    for k, s in enumerate(drawn, start=1):
        assert k - 0.1 <= s <= k + 0.1
    with pytest.raises(InputError):
        random_schedule(1.0, (0.0, 0.0), 5.0, rng, "middle")


def test_deterministic_simple_run_contains_trajectory():
    phs = build_simple(10, 1, [0, 0], 5)
    run = reach_periodic(phs, ReachOptions(0.1))
    traj = simulate(phs, [[-1.0]], [10.0], [1, 2, 3, 4], 0.005)
    report = check_containment(traj, run)
    assert report.ok
    assert report.checked == len(traj)
    assert not report.uncovered


def test_doubled_trajectory_is_flagged():
    phs = build_simple(10, 1, [0, 0], 5)
    run = reach_periodic(phs, ReachOptions(0.1))
    traj = simulate(phs, [[-1.0]], [10.0], [1, 2, 3, 4, 5], 0.05)
    doubled = Trajectory(traj.times, 2 * traj.states, traj.switch_times)
    assert len(check_containment(doubled, run).violations) > 0


def test_samples_past_coverage_are_reported():
    phs = build_simple(10, 1, [0, 0], 5)
    run = reach_periodic(phs, ReachOptions(0.1))
    traj = simulate(phs, [[-1.0]], [10.0], [1, 2, 3, 4], 0.1, t_end=5.5)
    report = check_containment(traj, run)
    assert report.uncovered and min(report.uncovered) > 5.0
    assert report.ok


@pytest.mark.parametrize("mode", ["earliest", "latest", "random"])
def test_jittered_simple_run_contains_schedules(mode):
    phs = build_simple(10, 1, [-0.1, 0.1], 5)
    run = reach_periodic(phs, ReachOptions(0.05))
    rng = np.random.default_rng(4)
    schedule = random_schedule(1.0, phs.zeta, 5.0, rng, mode)
    traj = simulate(phs, [[-1.0]], [10.0], schedule, 0.01)
    assert check_containment(traj, run).ok


def test_parametric_simple_run_contains_instantiations():
    phs = replace(build_simple(10, 1, [0, 0], 3), dynamics=IntervalMatrix.from_bounds([[-1.01]], [[-0.99]]))
    run = reach_periodic(phs, ReachOptions(0.1, "asb07", max_order=2))
    assert random_check(phs, run, np.random.default_rng(9), trajectories=10, dt=0.02) == 0


def test_emb_deterministic_run_passes_random_check():
    phs = build_emb(EMBParams(**EMB))
    run = reach_periodic(phs, ReachOptions(1e-7, horizon=5e-4))
    assert random_check(phs, run, np.random.default_rng(1), trajectories=3, dt=5e-6) == 0


def test_emb_pv1_run_passes_random_check():
    phs = build_emb(EMBParams(**EMB), Variation("pv1", 3.5e-5))
    run = reach_periodic(phs, ReachOptions(1e-7, "asb07", max_order=3, horizon=3e-4))
    assert random_check(phs, run, np.random.default_rng(2), trajectories=4, dt=5e-6) == 0


@pytest.fixture(scope="module")
def emb_jitter():
    phs = build_emb(EMBParams(**EMB, zeta=(-1e-8, 1e-7)))
    return phs, reach_periodic(phs, ReachOptions(1e-8, max_order=1))


@pytest.mark.parametrize("mode", ["earliest", "latest", "random"])
def test_emb_jittered_run_contains_schedules(emb_jitter, mode):
    phs, run = emb_jitter
    rng = np.random.default_rng(11)
    schedule = random_schedule(phs.t_sample, phs.zeta, phs.horizon, rng, mode)
    assert len(schedule) >= 9
    traj = simulate(phs, phs.dynamics, phs.x0_set.center, schedule, 5e-6)
    report = check_containment(traj, run)
    assert not report.uncovered
    assert report.ok, report.violations[:3]


def test_emb_jittered_run_passes_random_check(emb_jitter):
    phs, run = emb_jitter
    assert random_check(phs, run, np.random.default_rng(12), trajectories=4, dt=1e-5) == 0
