"""Assembly of the projected weak form M qdd = F and its diagnostics.

The kinetic energy is an exact quadratic in the generalized velocities, so
its velocity Hessian is the quadrature sum of J^T rho J over the nodes with
J the AD-propagated position Jacobian, plus the rigid-head block. The
remaining inertial terms (the velocity-product forces
(d2T/dqd dq) qd - grad_q T) are the projection J^T rho a0 of the body
acceleration at zero generalized acceleration, which the same AD pass
supplies; the equivalence is that of Lagrange's equations with d'Alembert's
principle and is enforced to tight tolerances by the energy-rate and
two-body oracle tests.

Reactive fluid loads are affine in qdd; their generalized force is split by
affine extraction into a forcing part (the qdd = 0 value) and a matrix part
that moves into the mass matrix with a minus sign. The joint motor torque
excites only the first Ritz coordinate, since psi_1 is the only mode with a
nonzero angle at the joint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import affine_extract, gradient
from .hydrodynamics import (body_drag, effective_head_matrix, head_drag,
                            head_reactive, reactive_body_force)
from .kinematics import GeneralizedState, dynamic_fields, energy_terms, evaluate_nodes

JOINT_SLOT = 3  # index of q_1 in [X, Y, theta, q_1, ..., q_N]

CONDITION_LIMIT = 1e14


class SingularMassError(RuntimeError):
    """Mass matrix numerically singular at a given simulation time."""

    def __init__(self, time: float, condition: float):
        super().__init__(
            f"mass matrix numerically singular at t={time:.6g}"
            f" (condition estimate {condition:.3e})")
        self.time = time
        self.condition = condition


@dataclass
class EquationsOfMotion:
    mass: np.ndarray       # (n_q, n_q)
    forcing: np.ndarray    # (n_q,)
    condition: float       # 2-norm condition estimate of mass

    def solve(self, time: float = 0.0) -> np.ndarray:
        if not np.isfinite(self.condition) or self.condition > CONDITION_LIMIT:
            raise SingularMassError(time, self.condition)
        return np.linalg.solve(self.mass, self.forcing)


def _project(weights, f_x, f_y, jac_x, jac_y) -> np.ndarray:
    """Generalized force of a distributed load: integral of J^T f ds."""
    return (weights * f_x) @ jac_x + (weights * f_y) @ jac_y


def assemble(state: GeneralizedState, tau_m: float, model) -> EquationsOfMotion:
    """Mass matrix and excitation vector at the given state and motor torque."""
    cfg = model.config
    n_q = model.n_q
    fields = dynamic_fields(state.q, state.qd, model.tables, cfg.head.joint_offset)
    nodes = fields.nodes
    w = model.grid.weights
    wr = w * model.rho_nodes

    mass = np.zeros((n_q, n_q))
    mass[0, 0] = cfg.head.mass
    mass[1, 1] = cfg.head.mass
    mass[2, 2] = cfg.head.inertia
    mass += np.einsum("k,ki,kj->ij", wr, fields.jac_x, fields.jac_x)
    mass += np.einsum("k,ki,kj->ij", wr, fields.jac_y, fields.jac_y)

    # inertial velocity-product forces at qdd = 0, projected through J
    bias = _project(wr, fields.a_bias_x, fields.a_bias_y,
                    fields.jac_x, fields.jac_y)

    grad_v = np.zeros(n_q)
    grad_v[3:] = (w * model.ei_nodes * nodes.dphi_ds) @ model.tables.dpsi

    forcing = -bias - grad_v
    forcing[JOINT_SLOT] += tau_m

    theta = state.q[2]
    if model.derived.added_mass_head.any():
        mass[:3, :3] += effective_head_matrix(model.derived.added_mass_head, theta)
    if model.drag_matrix_head.any():
        d_eff = effective_head_matrix(model.drag_matrix_head, theta)
        forcing[:3] += -d_eff @ state.qd[:3]

    if cfg.fluid.body_drag_coefficient != 0.0:
        f_dx, f_dy = body_drag(nodes.v_x, nodes.v_y,
                               cfg.fluid.body_drag_coefficient)
        forcing += _project(w, f_dx, f_dy, fields.jac_x, fields.jac_y)

    if model.rho_a_nodes.any():
        def reactive_generalized(qdd):
            f_rx, f_ry = reactive_body_force(nodes, model.rho_a_nodes,
                                             model.drho_a_nodes,
                                             fields.vn_dot(qdd))
            return _project(w, f_rx, f_ry, fields.jac_x, fields.jac_y)

        a_r, b_r = affine_extract(reactive_generalized, n_q)
        mass -= a_r
        forcing += b_r

    if not (np.all(np.isfinite(mass)) and np.all(np.isfinite(forcing))):
        raise FloatingPointError(
            f"non-finite entries in assembled equations at t={state.t:.6g}")
    return EquationsOfMotion(mass=mass, forcing=forcing,
                             condition=float(np.linalg.cond(mass)))


def accelerations(state: GeneralizedState, tau_m: float, model) -> np.ndarray:
    """Generalized accelerations from a dense LU solve of the weak form."""
    return assemble(state, tau_m, model).solve(time=state.t)


def fluid_power(state: GeneralizedState, qdd: np.ndarray, model) -> float:
    """Instantaneous power delivered to the fish by all fluid loads."""
    cfg = model.config
    fields = dynamic_fields(state.q, state.qd, model.tables, cfg.head.joint_offset)
    nodes = fields.nodes
    w = model.grid.weights
    theta, omega = state.q[2], state.qd[2]
    v_g1 = state.qd[:2]

    f_dx, f_dy = body_drag(nodes.v_x, nodes.v_y, cfg.fluid.body_drag_coefficient)
    power = float(np.dot(w, f_dx * nodes.v_x + f_dy * nodes.v_y))

    f_rx, f_ry = reactive_body_force(nodes, model.rho_a_nodes,
                                     model.drho_a_nodes, fields.vn_dot(qdd))
    power += float(np.dot(w, f_rx * nodes.v_x + f_ry * nodes.v_y))

    f_dh, tau_dh = head_drag(theta, v_g1, omega, model.drag_matrix_head)
    power += float(np.dot(f_dh, v_g1)) + tau_dh * omega

    f_rh, tau_rh = head_reactive(theta, qdd[:2], qdd[2],
                                 model.derived.added_mass_head)
    power += float(np.dot(f_rh, v_g1)) + tau_rh * omega
    return power


def drag_power(state: GeneralizedState, model) -> float:
    """Dissipative part of the fluid power (always <= 0 for valid configs)."""
    cfg = model.config
    nodes = evaluate_nodes(state, model)
    w = model.grid.weights
    theta, omega = state.q[2], state.qd[2]
    v_g1 = state.qd[:2]
    f_dx, f_dy = body_drag(nodes.v_x, nodes.v_y, cfg.fluid.body_drag_coefficient)
    power = float(np.dot(w, f_dx * nodes.v_x + f_dy * nodes.v_y))
    f_dh, tau_dh = head_drag(theta, v_g1, omega, model.drag_matrix_head)
    return power + float(np.dot(f_dh, v_g1)) + tau_dh * omega


def power_balance(state: GeneralizedState, qdd: np.ndarray, tau_m: float,
                  model) -> float:
    """Residual of d(T+V)/dt against motor plus fluid power.

    The energy rate is evaluated by the AD chain rule through (q, qd, qdd);
    a vanishing residual certifies that the assembled M and F are consistent
    with the energy functionals.
    """
    n_q = model.n_q
    z = np.concatenate([state.q, state.qd])

    def total_energy(zz):
        t, v = energy_terms(zz[0:n_q], zz[n_q:2 * n_q], model)
        return t + v

    grad = gradient(total_energy, z)
    e_dot = float(np.dot(grad[:n_q], state.qd) + np.dot(grad[n_q:], qdd))
    motor = tau_m * state.qd[JOINT_SLOT]
    return e_dot - motor - fluid_power(state, qdd, model)
