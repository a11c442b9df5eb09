"""Kinematics of the head + elastica system in generalized coordinates.

Coordinates q^c = [X_G1, Y_G1, theta_G1, q_1..q_N]: inertial head-COM
position, head yaw, and Ritz coefficients of the body tangential angle
phi(s, t) = sum_n q_n psi_n(s). The joint sits a distance L_G1J behind the
head COM along the head x-axis; the body frame rotates with the head, and the
body coordinates follow from inextensibility,

    x2(s) = int_0^s cos(phi) dsigma,   y2(s) = int_0^s sin(phi) dsigma,

evaluated per node on its own Gauss-Legendre panel. dx2/ds is cos(phi(s))
itself (fundamental theorem of calculus), and relative accelerations are the
second *time* derivatives of (x2, y2); the joint-frame angular velocity is
the head's.

Every function here is written for scalars that may be floats or forward-AD
duals, so configuration derivatives of any quantity come from seeding the
coordinate vector. Node evaluations are independent and share no state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Dual, cos, sin, value
from .quadrature import FieldTables


@dataclass(frozen=True)
class GeneralizedState:
    """Full configuration q^c, its rate, and the current time."""

    q: np.ndarray
    qd: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        qd = np.asarray(self.qd, dtype=float)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qd", qd)
        if q.shape != qd.shape or q.ndim != 1:
            raise ValueError(f"state vectors must be equal-length 1-D, got {q.shape}, {qd.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
            raise ValueError("state contains non-finite entries")

    @property
    def n_q(self) -> int:
        return len(self.q)

    @staticmethod
    def rest(n_q: int, t: float = 0.0) -> "GeneralizedState":
        return GeneralizedState(np.zeros(n_q), np.zeros(n_q), t)


@dataclass
class HeadKinematics:
    v_g1: tuple      # inertial COM velocity (m/s)
    a_g1: tuple      # inertial COM acceleration (m/s^2)
    omega: float     # yaw rate (rad/s)
    alpha: float     # yaw acceleration (rad/s^2)
    v_j: tuple       # joint velocity (m/s)
    a_j: tuple       # joint acceleration (m/s^2)


def head_kinematics(state: GeneralizedState, qdd, joint_offset: float) -> HeadKinematics:
    """Velocities and accelerations of the head COM and the joint point."""
    q, qd = state.q, state.qd
    qdd = np.asarray(qdd, dtype=float)
    theta, omega, alpha = q[2], qd[2], qdd[2]
    ct, st = np.cos(theta), np.sin(theta)
    length = joint_offset
    v_j = (qd[0] + length * omega * st, qd[1] - length * omega * ct)
    a_j = (qdd[0] + length * alpha * st + length * omega**2 * ct,
           qdd[1] - length * alpha * ct + length * omega**2 * st)
    return HeadKinematics(
        v_g1=(qd[0], qd[1]), a_g1=(qdd[0], qdd[1]),
        omega=omega, alpha=alpha, v_j=v_j, a_j=a_j)


@dataclass
class NodeKinematics:
    """Per-node field values; entries are float arrays or forward-AD duals."""

    s: np.ndarray
    phi: object          # tangential angle (rad)
    dphi_ds: object      # curvature (rad/m)
    phidot: object       # angle rate (rad/s)
    x2: object           # body-frame coordinates (m)
    y2: object
    x2p: object          # dx2/ds = cos(phi), dy2/ds = sin(phi)
    y2p: object
    x2dot: object        # body-frame velocities (m/s)
    y2dot: object
    et_x: object         # inertial tangent / normal unit vectors
    et_y: object
    en_x: object
    en_y: object
    r_x: object          # inertial positions (m)
    r_y: object
    v_x: object          # inertial velocities (m/s)
    v_y: object
    v_n: object          # normal / tangential velocity components (m/s)
    v_t: object
    dvn_ds: object       # arc-length derivatives of the components (1/s)
    dvt_ds: object
    omega_plus_phidot: object  # total spin rate of the local frame (rad/s)


def _mode_sum(coeffs, table):
    """Sum_n coeffs[n] * table[..., n] over pre-extracted mode coefficients."""
    n_modes = table.shape[-1]
    acc = coeffs[0] * table[..., 0]
    for n in range(1, n_modes):
        acc = acc + coeffs[n] * table[..., n]
    return acc


def field_nodes(q, qd, tables: FieldTables, joint_offset: float) -> NodeKinematics:
    """Displacement field, frames, and velocities at the quadrature nodes.

    `q` and `qd` are indexables of scalars (floats or duals). The cumulative
    coordinates and their rates are evaluated with the per-node sub-panels;
    their s-derivatives come from the integrands themselves.
    """
    n_modes = tables.psi.shape[-1]
    qm = [q[3 + n] for n in range(n_modes)]
    qdm = [qd[3 + n] for n in range(n_modes)]
    phi = _mode_sum(qm, tables.psi)
    dphi_ds = _mode_sum(qm, tables.dpsi)
    phidot = _mode_sum(qdm, tables.psi)

    phi_sub = _mode_sum(qm, tables.psi_sub)
    phidot_sub = _mode_sum(qdm, tables.psi_sub)
    cos_sub = cos(phi_sub)
    sin_sub = sin(phi_sub)
    x2 = (tables.w_sub * cos_sub).sum(axis=1)
    y2 = (tables.w_sub * sin_sub).sum(axis=1)
    x2dot = (tables.w_sub * (-phidot_sub * sin_sub)).sum(axis=1)
    y2dot = (tables.w_sub * (phidot_sub * cos_sub)).sum(axis=1)

    x2p = cos(phi)
    y2p = sin(phi)

    theta = q[2]
    omega = qd[2]
    ct = cos(theta)
    st = sin(theta)
    length = joint_offset

    # joint position/velocity: COM-to-joint vector is -L i1
    rj_x = q[0] - length * ct
    rj_y = q[1] - length * st
    vj_x = qd[0] + length * omega * st
    vj_y = qd[1] - length * omega * ct

    rel_x = ct * x2 - st * y2
    rel_y = st * x2 + ct * y2
    r_x = rj_x + rel_x
    r_y = rj_y + rel_y

    # v = v_J + R (x2dot, y2dot) + omega K x r_rel
    v_x = vj_x + ct * x2dot - st * y2dot - omega * rel_y
    v_y = vj_y + st * x2dot + ct * y2dot + omega * rel_x

    et_x = ct * x2p - st * y2p
    et_y = st * x2p + ct * y2p
    en_x = -et_y
    en_y = et_x

    v_n = v_x * en_x + v_y * en_y
    v_t = v_x * et_x + v_y * et_y

    # dv/ds = (omega + phidot) e_n, so with e_n' = -phi' e_t, e_t' = phi' e_n:
    spin = omega + phidot
    dvn_ds = spin - dphi_ds * v_t
    dvt_ds = dphi_ds * v_n

    return NodeKinematics(
        s=tables.s, phi=phi, dphi_ds=dphi_ds, phidot=phidot,
        x2=x2, y2=y2, x2p=x2p, y2p=y2p, x2dot=x2dot, y2dot=y2dot,
        et_x=et_x, et_y=et_y, en_x=en_x, en_y=en_y,
        r_x=r_x, r_y=r_y, v_x=v_x, v_y=v_y, v_n=v_n, v_t=v_t,
        dvn_ds=dvn_ds, dvt_ds=dvt_ds, omega_plus_phidot=spin)


def body_acceleration(q, qd, qdd, tables: FieldTables, joint_offset: float):
    """Inertial acceleration of the body points at given accelerations.

    Direct evaluation of a = a_J + R(x2dd, y2dd) + alpha x r + w x (w x r)
    + 2 w x v_rel, with the relative acceleration taken as the second time
    derivative of the body coordinates. Serves as an independent check of
    the dual-propagated affine acceleration used in assembly.
    """
    n_modes = tables.psi.shape[-1]
    phi_sub = _mode_sum([q[3 + n] for n in range(n_modes)], tables.psi_sub)
    phidot_sub = _mode_sum([qd[3 + n] for n in range(n_modes)], tables.psi_sub)
    phiddot_sub = _mode_sum([qdd[3 + n] for n in range(n_modes)], tables.psi_sub)
    cos_sub = cos(phi_sub)
    sin_sub = sin(phi_sub)
    x2 = (tables.w_sub * cos_sub).sum(axis=1)
    y2 = (tables.w_sub * sin_sub).sum(axis=1)
    x2dot = (tables.w_sub * (-phidot_sub * sin_sub)).sum(axis=1)
    y2dot = (tables.w_sub * (phidot_sub * cos_sub)).sum(axis=1)
    x2dd = (tables.w_sub * (-phiddot_sub * sin_sub - phidot_sub**2 * cos_sub)).sum(axis=1)
    y2dd = (tables.w_sub * (phiddot_sub * cos_sub - phidot_sub**2 * sin_sub)).sum(axis=1)

    theta, omega, alpha = q[2], qd[2], qdd[2]
    ct, st = cos(theta), sin(theta)
    length = joint_offset
    aj_x = qdd[0] + length * alpha * st + length * omega**2 * ct
    aj_y = qdd[1] - length * alpha * ct + length * omega**2 * st

    rel_x = ct * x2 - st * y2
    rel_y = st * x2 + ct * y2
    vrel_x = ct * x2dot - st * y2dot
    vrel_y = st * x2dot + ct * y2dot
    arel_x = ct * x2dd - st * y2dd
    arel_y = st * x2dd + ct * y2dd

    a_x = aj_x + arel_x - alpha * rel_y - omega**2 * rel_x - 2.0 * omega * vrel_y
    a_y = aj_y + arel_y + alpha * rel_x - omega**2 * rel_y + 2.0 * omega * vrel_x
    return a_x, a_y


def energy_terms(q, qd, model):
    """Kinetic and potential energy; generic over float/dual coordinates."""
    cfg = model.config
    nodes = field_nodes(q, qd, model.tables, cfg.head.joint_offset)
    t_head = 0.5 * cfg.head.mass * (qd[0] * qd[0] + qd[1] * qd[1]) \
        + 0.5 * cfg.head.inertia * (qd[2] * qd[2])
    w = model.grid.weights
    t_body = (0.5 * (w * model.rho_nodes)
              * (nodes.v_x * nodes.v_x + nodes.v_y * nodes.v_y)).sum()
    potential = (0.5 * (w * model.ei_nodes) * (nodes.dphi_ds * nodes.dphi_ds)).sum()
    return t_head + t_body, potential


def energies(state: GeneralizedState, model):
    """(T, V) of the current state in joules."""
    t, v = energy_terms(state.q, state.qd, model)
    return float(value(t)), float(value(v))


def momentum(state: GeneralizedState, model):
    """Total linear momentum (kg m/s) of head plus body."""
    nodes = field_nodes(state.q, state.qd, model.tables,
                        model.config.head.joint_offset)
    w = model.grid.weights
    px = model.config.head.mass * state.qd[0] + float(
        np.dot(w * model.rho_nodes, value(nodes.v_x)))
    py = model.config.head.mass * state.qd[1] + float(
        np.dot(w * model.rho_nodes, value(nodes.v_y)))
    return np.array([px, py])


@dataclass
class ProjectionData:
    """Float-valued node kinematics plus the AD-propagated derivative blocks.

    jac_x/jac_y are the position Jacobians d(r_s)/d(q^c) at the nodes; the
    same matrices are d(v_s)/d(qd^c), so the acceleration of a node is
    a = a_bias + J qdd, and the normal-velocity rate is
    vn_dot = vn_dot_bias + (e_n . J) qdd.
    """

    nodes: NodeKinematics
    jac_x: np.ndarray        # (K, n_q)
    jac_y: np.ndarray        # (K, n_q)
    a_bias_x: np.ndarray     # (K,)
    a_bias_y: np.ndarray     # (K,)
    vn_dot_bias: np.ndarray  # (K,)
    jac_vn: np.ndarray       # (K, n_q) = e_n . J

    def acceleration(self, qdd):
        ax = self.a_bias_x + self.jac_x @ qdd
        ay = self.a_bias_y + self.jac_y @ qdd
        return ax, ay

    def vn_dot(self, qdd):
        return self.vn_dot_bias + self.jac_vn @ qdd


def _plain_nodes(nodes: NodeKinematics, n_nodes: int) -> NodeKinematics:
    def arr(x):
        v = np.asarray(value(x), dtype=float)
        return v if v.shape == (n_nodes,) else np.broadcast_to(v, (n_nodes,)).copy()

    return NodeKinematics(
        s=nodes.s, phi=arr(nodes.phi), dphi_ds=arr(nodes.dphi_ds),
        phidot=arr(nodes.phidot), x2=arr(nodes.x2), y2=arr(nodes.y2),
        x2p=arr(nodes.x2p), y2p=arr(nodes.y2p), x2dot=arr(nodes.x2dot),
        y2dot=arr(nodes.y2dot), et_x=arr(nodes.et_x), et_y=arr(nodes.et_y),
        en_x=arr(nodes.en_x), en_y=arr(nodes.en_y), r_x=arr(nodes.r_x),
        r_y=arr(nodes.r_y), v_x=arr(nodes.v_x), v_y=arr(nodes.v_y),
        v_n=arr(nodes.v_n), v_t=arr(nodes.v_t), dvn_ds=arr(nodes.dvn_ds),
        dvt_ds=arr(nodes.dvt_ds),
        omega_plus_phidot=arr(nodes.omega_plus_phidot))


def evaluate_nodes(state: GeneralizedState, model) -> NodeKinematics:
    """Plain-float node kinematics of a state on the model grid."""
    nodes = field_nodes(state.q, state.qd, model.tables,
                        model.config.head.joint_offset)
    return _plain_nodes(nodes, len(model.tables.s))


def dynamic_fields(q: np.ndarray, qd: np.ndarray, tables: FieldTables,
                   joint_offset: float) -> ProjectionData:
    """One forward-AD pass supplying everything the weak form needs.

    The coordinate vector is seeded with n_q unit directions plus one extra
    direction along qd, so a single evaluation yields the position Jacobians,
    the velocity-product part of the accelerations (d v/d q . qd), and the
    qdd-free part of the normal-velocity rate.
    """
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    n_q = len(q)
    eps = np.zeros((n_q, n_q + 1))
    eps[:, :n_q] = np.eye(n_q)
    eps[:, n_q] = qd
    q_dual = Dual(q.copy(), eps)

    nodes = field_nodes(q_dual, qd, tables, joint_offset)
    n_nodes = len(tables.s)

    rx_p = nodes.r_x.partials()
    ry_p = nodes.r_y.partials()
    vx_p = nodes.v_x.partials()
    vy_p = nodes.v_y.partials()
    vn_p = nodes.v_n.partials()

    plain = _plain_nodes(nodes, n_nodes)
    jac_x = rx_p[:, :n_q]
    jac_y = ry_p[:, :n_q]
    jac_vn = plain.en_x[:, None] * jac_x + plain.en_y[:, None] * jac_y
    return ProjectionData(
        nodes=plain,
        jac_x=jac_x,
        jac_y=jac_y,
        a_bias_x=vx_p[:, n_q],
        a_bias_y=vy_p[:, n_q],
        vn_dot_bias=vn_p[:, n_q],
        jac_vn=jac_vn,
    )
