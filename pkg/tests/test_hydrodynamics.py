import math

import numpy as np
import pytest

from conftest import random_state, small_config
from fishsim.autodiff import affine_extract
from fishsim.config import build_model
from fishsim.hydrodynamics import (body_drag, effective_head_matrix,
                                   ellipsoid_added_mass, head_drag,
                                   head_reactive, reactive_body_force)
from fishsim.kinematics import GeneralizedState, dynamic_fields, field_nodes
from fishsim.quadrature import tables_for_positions


# --- ellipsoid added mass ---------------------------------------------------

def test_sphere_added_mass_closed_form():
    r, rho = 0.04, 1000.0
    m = ellipsoid_added_mass((r, r, r), rho)
    expected = 0.5 * rho * 4.0 / 3.0 * math.pi * r**3
    assert m[0, 0] == pytest.approx(expected, rel=1e-9)
    assert m[1, 1] == pytest.approx(expected, rel=1e-9)
    assert m[2, 2] == pytest.approx(0.0, abs=1e-12)


def test_zero_density_gives_zero_matrix():
    assert np.all(ellipsoid_added_mass((0.05, 0.02, 0.02), 0.0) == 0.0)


def test_prolate_spheroid_ordering_and_literature_band():
    # 2:1 prolate spheroid: classical coefficients k1 ~ 0.209, k2 ~ 0.702
    a, b, rho = 0.05, 0.025, 1000.0
    m = ellipsoid_added_mass((a, b, b), rho)
    assert m[0, 0] < m[1, 1]
    volume = 4.0 / 3.0 * math.pi * a * b * b
    k1 = m[0, 0] / (rho * volume)
    k2 = m[1, 1] / (rho * volume)
    assert 0.19 < k1 < 0.23
    assert 0.68 < k2 < 0.72
    assert m[2, 2] > 0.0


def test_invalid_axes_rejected():
    with pytest.raises(ValueError):
        ellipsoid_added_mass((0.0, 0.01, 0.01), 1000.0)


# --- head loads -------------------------------------------------------------

def test_head_reactive_zero_acceleration():
    m_a = np.diag([1.0, 2.0, 0.1])
    force, torque = head_reactive(0.7, np.zeros(2), 0.0, m_a)
    assert np.all(force == 0.0) and torque == 0.0


def test_head_reactive_aligned_frames():
    m_a = np.diag([1.5, 2.5, 0.1])
    force, torque = head_reactive(0.0, np.array([1.0, 0.0]), 0.0, m_a)
    assert force == pytest.approx([-1.5, 0.0], abs=1e-15)
    assert torque == 0.0


def test_head_reactive_rotated_frame_hand_value():
    # theta = pi/2 swaps which body axis resists the inertial-x acceleration
    m_a = np.diag([1.5, 2.5, 0.1])
    force, torque = head_reactive(math.pi / 2, np.array([1.0, 0.0]), 0.0, m_a)
    assert force == pytest.approx([-2.5, 0.0], abs=1e-12)


def test_effective_matrix_similarity_transform():
    m_a = np.diag([1.0, 3.0, 0.2])
    theta = 0.0
    assert effective_head_matrix(m_a, theta) == pytest.approx(m_a)
    eff = effective_head_matrix(m_a, 0.9)
    assert np.linalg.eigvalsh(eff) == pytest.approx(np.linalg.eigvalsh(m_a), rel=1e-12)


def test_drag_loads_zero_velocity():
    d = np.diag([1.0, 2.0, 0.05])
    force, torque = head_drag(0.4, np.zeros(2), 0.0, d)
    assert np.all(force == 0.0) and torque == 0.0
    fdx, fdy = body_drag(np.zeros(3), np.zeros(3), 5.0)
    assert np.all(fdx == 0.0) and np.all(fdy == 0.0)


def test_body_drag_proportionality():
    fdx, fdy = body_drag(np.array([2.0]), np.array([0.0]), 5.0)
    assert fdx[0] == -10.0 and fdy[0] == 0.0


def test_head_spin_drag_moment():
    d = np.diag([1.0, 2.0, 0.05])
    _, torque = head_drag(1.1, np.zeros(2), 3.0, d)
    assert torque == pytest.approx(-0.05 * 3.0, rel=1e-14)


# --- reactive body force ----------------------------------------------------

def _uniform_lateral_state(model, vy=0.0):
    n_q = model.n_q
    q = np.zeros(n_q)
    qd = np.zeros(n_q)
    qd[1] = vy
    return GeneralizedState(q, qd)


def test_reactive_force_vanishes_in_steady_lateral_translation(model_small):
    st = _uniform_lateral_state(model_small, vy=0.8)
    fields = dynamic_fields(st.q, st.qd, model_small.tables,
                            model_small.config.head.joint_offset)
    frx, fry = reactive_body_force(fields.nodes, model_small.rho_a_nodes,
                                   model_small.drho_a_nodes,
                                   fields.vn_dot(np.zeros(model_small.n_q)))
    assert np.max(np.abs(frx)) < 1e-14
    assert np.max(np.abs(fry)) < 1e-14


def test_reactive_force_pure_added_mass_reaction(model_small):
    # straight body, uniform lateral acceleration a, zero velocity:
    # f_r = -rho_a * a * e_n
    st = _uniform_lateral_state(model_small, vy=0.0)
    fields = dynamic_fields(st.q, st.qd, model_small.tables,
                            model_small.config.head.joint_offset)
    a_lat = 2.3
    qdd = np.zeros(model_small.n_q)
    qdd[1] = a_lat
    frx, fry = reactive_body_force(fields.nodes, model_small.rho_a_nodes,
                                   model_small.drho_a_nodes, fields.vn_dot(qdd))
    assert frx == pytest.approx(np.zeros_like(frx), abs=1e-12)
    assert fry == pytest.approx(-model_small.rho_a_nodes * a_lat, rel=1e-12)


def test_flux_terms_match_finite_differences_in_s(model_small):
    rng = np.random.default_rng(12)
    st = random_state(model_small, rng, scale_q=0.2, scale_qd=0.4)
    joint = model_small.config.head.joint_offset
    rho_a_prof = model_small.derived.rho_a_profile
    s0 = np.array([0.08, 0.15, 0.22])
    delta = 1e-5

    def fluxes(s):
        tables = tables_for_positions(s, model_small.basis)
        nodes = field_nodes(st.q, st.qd, tables, joint)
        rho_a = np.asarray(rho_a_prof(s))
        conv = rho_a * np.asarray(nodes.v_n) * np.asarray(nodes.v_t)
        dyn = 0.5 * rho_a * np.asarray(nodes.v_n) ** 2
        return conv, dyn

    conv_p, dyn_p = fluxes(s0 + delta)
    conv_m, dyn_m = fluxes(s0 - delta)
    fd_conv = (conv_p - conv_m) / (2 * delta)
    fd_dyn = (dyn_p - dyn_m) / (2 * delta)

    tables = tables_for_positions(s0, model_small.basis)
    nodes = field_nodes(st.q, st.qd, tables, joint)
    rho_a = np.asarray(rho_a_prof(s0))
    drho_a = np.asarray(model_small.derived.drho_a_profile(s0))
    conv_analytic = drho_a * nodes.v_n * nodes.v_t + rho_a * (
        nodes.dvn_ds * nodes.v_t + nodes.v_n * nodes.dvt_ds)
    dyn_analytic = 0.5 * drho_a * nodes.v_n**2 + rho_a * nodes.v_n * nodes.dvn_ds
    assert np.asarray(conv_analytic) == pytest.approx(fd_conv, rel=1e-5, abs=1e-7)
    assert np.asarray(dyn_analytic) == pytest.approx(fd_dyn, rel=1e-5, abs=1e-7)


def test_reactive_force_affine_in_accelerations(model_small):
    rng = np.random.default_rng(13)
    st = random_state(model_small, rng)
    fields = dynamic_fields(st.q, st.qd, model_small.tables,
                            model_small.config.head.joint_offset)

    def stacked(qdd):
        frx, fry = reactive_body_force(fields.nodes, model_small.rho_a_nodes,
                                       model_small.drho_a_nodes,
                                       fields.vn_dot(qdd))
        return np.concatenate([frx, fry])

    a, b = affine_extract(stacked, model_small.n_q)
    for _ in range(10):
        qdd = rng.normal(0, 3.0, model_small.n_q)
        exact = stacked(qdd)
        assert np.linalg.norm(exact - (a @ qdd + b)) <= \
            1e-9 * (1.0 + np.linalg.norm(exact))


def test_momentum_bookkeeping_straight_rigid_motion(model_small):
    """Integrated f_r + dp/dt equals the boundary flux difference.

    On a straight body in rigid motion the frame vectors are s-independent,
    so the flux-divergence integral telescopes to the endpoint values exactly
    (up to quadrature error).
    """
    model = model_small
    n_q = model.n_q
    q = np.zeros(n_q)
    qd = np.zeros(n_q)
    qd[0], qd[1], qd[2] = 0.3, -0.2, 0.8
    st = GeneralizedState(q, qd)
    qdd = np.zeros(n_q)
    fields = dynamic_fields(st.q, st.qd, model.tables,
                            model.config.head.joint_offset)
    nodes = fields.nodes
    w = model.grid.weights
    frx, fry = reactive_body_force(nodes, model.rho_a_nodes,
                                   model.drho_a_nodes, fields.vn_dot(qdd))
    # dp/dt at qdd = 0: rho_a vn_dot e_n + rho_a v_n spin (K x e_n)
    vn_dot = fields.vn_dot(qdd)
    rho_a = model.rho_a_nodes
    dpx = rho_a * vn_dot * nodes.en_x - rho_a * nodes.v_n * nodes.omega_plus_phidot * nodes.et_x
    dpy = rho_a * vn_dot * nodes.en_y - rho_a * nodes.v_n * nodes.omega_plus_phidot * nodes.et_y
    lhs = np.array([np.dot(w, frx + dpx), np.dot(w, fry + dpy)])

    def boundary_flux(s):
        tables = tables_for_positions(np.array([s]), model.basis)
        bn = field_nodes(st.q, st.qd, tables, model.config.head.joint_offset)
        rho_a_s = float(model.derived.rho_a_profile.eval_unchecked(s))
        conv = rho_a_s * float(np.asarray(bn.v_n)[0]) * float(np.asarray(bn.v_t)[0])
        dyn = 0.5 * rho_a_s * float(np.asarray(bn.v_n)[0]) ** 2
        en = np.array([float(np.asarray(bn.en_x)[0]), float(np.asarray(bn.en_y)[0])])
        et = np.array([float(np.asarray(bn.et_x)[0]), float(np.asarray(bn.et_y)[0])])
        return conv * en - dyn * et

    length = model.config.body_length
    rhs = boundary_flux(length) - boundary_flux(0.0)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


def test_momentum_bookkeeping_smooth_state(model_small):
    """Discrete consistency of the momentum balance on a gently curved state."""
    model = model_small
    n_q = model.n_q
    q = np.zeros(n_q)
    q[4] = 0.002  # small curvature; the identity holds only to O(curvature)
    qd = np.zeros(n_q)
    qd[0], qd[1], qd[2], qd[3] = 0.3, -0.2, 0.8, 0.5
    st = GeneralizedState(q, qd)
    qdd = np.zeros(n_q)
    fields = dynamic_fields(st.q, st.qd, model.tables,
                            model.config.head.joint_offset)
    nodes = fields.nodes
    w = model.grid.weights
    frx, fry = reactive_body_force(nodes, model.rho_a_nodes,
                                   model.drho_a_nodes, fields.vn_dot(qdd))
    vn_dot = fields.vn_dot(qdd)
    rho_a = model.rho_a_nodes
    dpx = rho_a * vn_dot * nodes.en_x - rho_a * nodes.v_n * nodes.omega_plus_phidot * nodes.et_x
    dpy = rho_a * vn_dot * nodes.en_y - rho_a * nodes.v_n * nodes.omega_plus_phidot * nodes.et_y
    lhs = np.array([np.dot(w, frx + dpx), np.dot(w, fry + dpy)])

    def boundary_flux(s):
        tables = tables_for_positions(np.array([s]), model.basis)
        bn = field_nodes(st.q, st.qd, tables, model.config.head.joint_offset)
        rho_a_s = float(model.derived.rho_a_profile.eval_unchecked(s))
        conv = rho_a_s * float(np.asarray(bn.v_n)[0]) * float(np.asarray(bn.v_t)[0])
        dyn = 0.5 * rho_a_s * float(np.asarray(bn.v_n)[0]) ** 2
        en = np.array([float(np.asarray(bn.en_x)[0]), float(np.asarray(bn.en_y)[0])])
        et = np.array([float(np.asarray(bn.et_x)[0]), float(np.asarray(bn.et_y)[0])])
        return conv * en - dyn * et

    length = model.config.body_length
    rhs = boundary_flux(length) - boundary_flux(0.0)
    scale = np.linalg.norm(rhs) + np.linalg.norm(lhs)
    assert np.linalg.norm(lhs - rhs) <= 1e-3 * max(scale, 1e-6)


def test_drag_power_nonpositive(model_small):
    from fishsim.assembly import drag_power
    rng = np.random.default_rng(14)
    for _ in range(20):
        st = random_state(model_small, rng)
        assert drag_power(st, model_small) <= 1e-14
