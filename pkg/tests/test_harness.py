import math

import numpy as np
import pytest

from conftest import small_config
from fishsim.config import build_model, config_from_dict, config_hash
from fishsim.harness import (Metrics, Trajectory, apply_parameter,
                             convergence_study, initial_ode_state, metrics,
                             run_simulation, sweep)


def quick_config(**overrides):
    """Very small, fast configuration for harness round trips."""
    base = {
        "numerics": {"ritz_modes": 2, "quadrature_nodes": 18,
                     "abs_tol": 1e-6, "rel_tol": 1e-4},
    }
    for key, val in overrides.items():
        if key in base and isinstance(val, dict):
            base[key].update(val)
        else:
            base[key] = val
    return config_from_dict(base)


def synthetic_trajectory(times, x, tau, q1_dot, f_gait, n_q=5):
    s = len(times)
    q = np.zeros((s, n_q))
    qd = np.zeros((s, n_q))
    q[:, 0] = x
    qd[:, 3] = q1_dot
    zeros = np.zeros(s)
    return Trajectory(
        times=np.asarray(times), q=q, qd=qd, tau_m=np.asarray(tau),
        v_inst=np.gradient(x, times), v_filt=zeros, f_cmd=np.full(s, f_gait),
        phase=zeros, energy_kinetic=zeros, energy_potential=zeros,
        config_hash="synthetic", solver_stats={})


@pytest.fixture(scope="module")
def tiny_model():
    return build_model(quick_config())


def test_cot_arithmetic(tiny_model):
    # W = 1 J over the window, d = 1 m, m_total g d scaling
    times = np.linspace(0.0, 2.0, 2001)
    x = 0.5 * times                      # 1 m over the 2 s window
    tau = np.ones_like(times)
    q1d = 0.5 * np.ones_like(times)      # |tau * q1d| integrates to 1 J
    traj = synthetic_trajectory(times, x, tau, q1d, f_gait=1.0)
    mets = metrics(traj, tiny_model)
    m_total = tiny_model.derived.m_total
    assert mets.motor_work == pytest.approx(1.0, rel=1e-6)
    assert mets.distance == pytest.approx(1.0, rel=1e-12)
    assert mets.cot == pytest.approx(1.0 / (m_total * 9.81), rel=1e-6)
    assert mets.steady_speed == pytest.approx(0.5, rel=1e-12)


def test_zero_torque_zero_work_zero_cot(tiny_model):
    times = np.linspace(0.0, 2.0, 501)
    traj = synthetic_trajectory(times, 0.3 * times, np.zeros_like(times),
                                np.ones_like(times), f_gait=1.0)
    mets = metrics(traj, tiny_model)
    assert mets.motor_work == 0.0
    assert mets.cot == 0.0 and mets.cot_defined


def test_rectified_work_of_in_phase_sinusoids(tiny_model):
    # tau = sin, q1d = sin over one period T: integral |sin^2| = T/2
    period = 0.5
    times = np.linspace(0.0, 2 * period, 4001)
    s = np.sin(2 * math.pi * times / period)
    traj = synthetic_trajectory(times, 0.1 * times, s, s, f_gait=1.0 / period)
    mets = metrics(traj, tiny_model)
    # window = final 2 cycles = full signal here: W = 2 * T/2 = T
    assert mets.motor_work == pytest.approx(period, rel=1e-5)


def test_zero_amplitude_gait_stays_at_rest():
    cfg = quick_config(gait={"amplitude": 0.0})
    traj, mets = run_simulation(cfg, "open-loop", duration=0.5)
    assert np.max(np.abs(traj.q - traj.q[0])) < 1e-12
    assert not mets.cot_defined
    assert math.isnan(mets.cot)


def test_run_simulation_deterministic():
    cfg = quick_config()
    t1, m1 = run_simulation(cfg, "open-loop", duration=0.4)
    t2, m2 = run_simulation(cfg, "open-loop", duration=0.4)
    assert np.array_equal(t1.to_matrix(), t2.to_matrix())
    assert m1 == m2


def test_trajectory_schema(tiny_model):
    cfg = quick_config()
    traj, _ = run_simulation(cfg, "open-loop", duration=0.3)
    n_q = cfg.numerics.state_dim
    names = traj.column_names()
    assert len(names) == 3 + 2 * n_q + 5
    assert traj.to_matrix().shape == (len(traj.times), len(names))
    assert np.all(np.diff(traj.times) > 0)
    dt = np.diff(traj.times)
    assert dt == pytest.approx(np.full_like(dt, cfg.numerics.sample_dt), rel=1e-9)
    assert traj.config_hash == config_hash(cfg)


def test_initial_state_from_config():
    cfg = quick_config(initial_state={"position": [0.1, -0.2], "heading": 0.3,
                                      "joint_angles": [0.05],
                                      "velocities": [0.01]})
    y0 = initial_ode_state(cfg)
    n_q = cfg.numerics.state_dim
    assert y0[:4] == pytest.approx([0.1, -0.2, 0.3, 0.05])
    assert y0[n_q] == 0.01


def test_apply_parameter_axes():
    cfg = quick_config()
    assert apply_parameter(cfg, "frequency", 3.0).gait.frequency == 3.0
    mod = apply_parameter(cfg, "baseline_e", 0.2e6)
    assert mod.youngs_modulus_profile.coefficients[0] == 0.2e6
    assert mod.youngs_modulus_profile.coefficients[3] == \
        cfg.youngs_modulus_profile.coefficients[3]
    with pytest.raises(ValueError):
        apply_parameter(cfg, "amplitude", 1.0)


def test_degenerate_sweep_matches_single_run():
    cfg = quick_config()
    rows = sweep(cfg, "frequency", [2.0], duration=0.4, max_workers=1)
    assert len(rows) == 1 and rows[0].status == "ok"
    traj, mets = run_simulation(apply_parameter(cfg, "frequency", 2.0),
                                "open-loop", 0.4)
    assert rows[0].steady_speed == mets.steady_speed
    assert np.array_equal(rows[0].trajectory.to_matrix(), traj.to_matrix())


def test_sweep_serial_equals_concurrent():
    cfg = quick_config()
    values = [1.5, 2.5]
    serial = sweep(cfg, "frequency", values, duration=0.3, max_workers=1)
    parallel = sweep(cfg, "frequency", values, duration=0.3, max_workers=2)
    for a, b in zip(serial, parallel):
        assert a.value == b.value and a.status == b.status
        assert np.array_equal(a.trajectory.to_matrix(), b.trajectory.to_matrix())


def test_sweep_records_failures_per_row():
    cfg = quick_config(numerics={"ritz_modes": 2, "quadrature_nodes": 18,
                                 "dt_min": 1e-3, "abs_tol": 1e-13,
                                 "rel_tol": 1e-13})
    rows = sweep(cfg, "frequency", [2.0], duration=0.3, max_workers=1)
    assert rows[0].status.startswith("failed")
    assert math.isnan(rows[0].steady_speed)


def test_convergence_single_mode_zero_deviation():
    cfg = quick_config()
    rows = convergence_study(cfg, [2], duration=0.3)
    assert len(rows) == 1
    assert rows[0].deviation == 0.0
    assert rows[0].wall_time > 0.0


def test_convergence_deviation_decreases():
    cfg = quick_config()
    rows = convergence_study(cfg, [1, 2, 3], duration=0.3)
    devs = {r.n_modes: r.deviation for r in rows}
    assert devs[3] == 0.0
    assert devs[1] > devs[2] > 0.0


def test_closed_loop_scenario_requires_target():
    cfg = quick_config()
    with pytest.raises(ValueError):
        run_simulation(cfg, "closed-loop", duration=0.3)
    with pytest.raises(ValueError):
        run_simulation(cfg, "sideways", duration=0.3)
    with pytest.raises(ValueError):
        run_simulation(cfg, "open-loop", duration=-1.0)
