"""Hydrodynamic loads: reactive (added-mass) forces and linear drag.

The body force follows the differential momentum balance of the fluid
added-mass control volume around a slender section: the rate of change of
the normal-direction momentum rho_a * v_n * e_n equals the convective flux
along the body minus a dynamic-pressure flux minus the reaction on the body,

    f_r = d/ds(rho_a v_n v_t) e_n - d/ds(rho_a v_n^2 / 2) e_t
          - rho_a dv_n/dt e_n - rho_a v_n (omega + dphi/dt) (K x e_n)

with K x e_n = -e_t. Spatial-derivative terms are expanded by the product
rule with the analytic rho_a'(s), and are only ever evaluated at interior
quadrature nodes (the free ends are never sampled). The head, approximated
as an ellipsoid, reacts through its potential-flow added-mass matrix.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad


def rotation(theta):
    """Planar rotation matrix mapping body components to inertial ones."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _block_rotation(theta) -> np.ndarray:
    out = np.eye(3)
    out[:2, :2] = rotation(theta)
    return out


def ellipsoid_added_mass(semi_axes, rho_water: float) -> np.ndarray:
    """Planar added-mass matrix diag(m_x, m_y, I_z) of an ellipsoid.

    Semi-axes (a, b, c) are aligned with the head frame: a fore-aft, b
    lateral, c vertical. The classical shape integrals

        alpha_0 = a b c * int_0^inf dt / ((a^2+t) D(t)),
        D(t) = sqrt((a^2+t)(b^2+t)(c^2+t))

    are evaluated by adaptive quadrature; they satisfy
    alpha_0 + beta_0 + gamma_0 = 2 exactly.
    """
    a, b, c = (float(v) for v in semi_axes)
    if min(a, b, c) <= 0:
        raise ValueError(f"ellipsoid semi-axes must be positive, got {semi_axes}")
    if rho_water < 0:
        raise ValueError(f"water density must be nonnegative, got {rho_water}")
    if rho_water == 0.0:
        return np.zeros((3, 3))

    def shape_integral(axis_sq: float) -> float:
        def integrand(t):
            delta = np.sqrt((a * a + t) * (b * b + t) * (c * c + t))
            return 1.0 / ((axis_sq + t) * delta)

        val, _ = quad(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
        return a * b * c * val

    alpha0 = shape_integral(a * a)
    beta0 = shape_integral(b * b)
    volume = 4.0 / 3.0 * np.pi * a * b * c
    m_x = alpha0 / (2.0 - alpha0) * rho_water * volume
    m_y = beta0 / (2.0 - beta0) * rho_water * volume
    if abs(a - b) < 1e-14 * max(a, b):
        i_z = 0.0
    else:
        num = (a * a - b * b) ** 2 * (alpha0 - beta0)
        den = 2.0 * (b * b - a * a) + (b * b + a * a) * (alpha0 - beta0)
        i_z = 0.2 * rho_water * volume * num / den
    return np.diag([m_x, m_y, i_z])


def effective_head_matrix(matrix_body: np.ndarray, theta: float) -> np.ndarray:
    """Rotate a body-frame 3x3 (added mass or drag) into the inertial frame."""
    r = _block_rotation(theta)
    return r @ np.asarray(matrix_body, dtype=float) @ r.T


def head_reactive(theta: float, a_g1: np.ndarray, alpha: float,
                  added_mass: np.ndarray):
    """Water reactive force (N) and moment (N m) on the rigid head."""
    load = -effective_head_matrix(added_mass, theta) @ np.array(
        [a_g1[0], a_g1[1], alpha])
    return load[:2], float(load[2])


def head_drag(theta: float, v_g1: np.ndarray, omega: float,
              drag_matrix: np.ndarray):
    """Linear drag force and moment on the rigid head."""
    load = -effective_head_matrix(drag_matrix, theta) @ np.array(
        [v_g1[0], v_g1[1], omega])
    return load[:2], float(load[2])


def body_drag(v_x, v_y, c_d: float):
    """Drag per unit length -c_d * v at each node (inertial components)."""
    return -c_d * v_x, -c_d * v_y


def reactive_body_force(nodes, rho_a: np.ndarray, drho_a: np.ndarray,
                        vn_dot: np.ndarray):
    """Reactive force per unit length at each node, inertial components.

    `nodes` must carry v_n, v_t, their s-derivatives, the frame vectors and
    the total spin rate omega + dphi/dt; `vn_dot` is the material rate of the
    normal velocity at the accelerations of interest (affine in qdd, supplied
    by the caller).
    """
    flux_n = drho_a * nodes.v_n * nodes.v_t + rho_a * (
        nodes.dvn_ds * nodes.v_t + nodes.v_n * nodes.dvt_ds)
    flux_t = 0.5 * drho_a * nodes.v_n**2 + rho_a * nodes.v_n * nodes.dvn_ds
    spin = rho_a * nodes.v_n * nodes.omega_plus_phidot
    coeff_n = flux_n - rho_a * vn_dot
    coeff_t = spin - flux_t
    return (coeff_n * nodes.en_x + coeff_t * nodes.et_x,
            coeff_n * nodes.en_y + coeff_t * nodes.et_y)
