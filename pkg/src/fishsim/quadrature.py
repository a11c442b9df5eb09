"""Gauss-Legendre quadrature and density-normalized Ritz basis functions.

The body displacement field is expanded in monomial shape functions
psi_1 = 1 (rigid rotation about the joint) and psi_n = s^(n-1) / ||s^(n-1)||
for n >= 2, where the norm is the linear-density-weighted L2 norm. The same
module builds the quadrature grid used for all spatial integrals, plus the
per-node sub-grids used to evaluate the cumulative (inner) integrals of the
elastica coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureGrid:
    """Gauss-Legendre nodes and weights on an interval [a, b]."""

    nodes: np.ndarray
    weights: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        if np.any(np.diff(self.nodes) <= 0):
            raise QuadratureError("quadrature nodes must be strictly increasing")
        if np.any(self.nodes <= self.a) or np.any(self.nodes >= self.b):
            raise QuadratureError("quadrature nodes must be interior to (a, b)")

    @property
    def order(self) -> int:
        return len(self.nodes)

    def integrate(self, values: np.ndarray) -> float:
        """Weighted sum of integrand values sampled at the nodes."""
        return float(np.dot(self.weights, values))


def _legendre_nodes(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Roots and weights of the order-k Legendre polynomial on [-1, 1].

    Newton iteration on the three-term recurrence; converges to machine
    precision in a handful of sweeps, so k is not limited by tabulated rules.
    """
    i = np.arange(1, k + 1)
    x = np.cos(np.pi * (i - 0.25) / (k + 0.5))

    def legendre_and_derivative(x):
        p_prev = np.ones_like(x)
        p = x.copy()
        for n in range(2, k + 1):
            p_prev, p = p, ((2 * n - 1) * x * p - (n - 1) * p_prev) / n
        dp = k * (x * p - p_prev) / (x * x - 1.0)
        return p, dp

    for _ in range(100):
        p, dp = legendre_and_derivative(x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    _, dp = legendre_and_derivative(x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    idx = np.argsort(x)
    return x[idx], w[idx]


def gauss_legendre(k: int, a: float, b: float) -> QuadratureGrid:
    """Gauss-Legendre rule with k nodes mapped to [a, b].

    Exact for polynomials of degree <= 2k - 1.
    """
    if k < 1:
        raise QuadratureError(f"node count must be >= 1, got {k}")
    if not a < b:
        raise QuadratureError(f"interval must satisfy a < b, got [{a}, {b}]")
    x, w = _legendre_nodes(k)
    half = 0.5 * (b - a)
    return QuadratureGrid(nodes=a + half * (x + 1.0), weights=half * w, a=a, b=b)


def rho_norm(psi_hat, rho_profile, grid: QuadratureGrid) -> float:
    """Density-weighted L2 norm sqrt(integral of rho * psi_hat^2 ds)."""
    s = grid.nodes
    rho = rho_profile(s)
    vals = np.asarray(psi_hat(s), dtype=float)
    radicand = float(np.dot(grid.weights, rho * vals * vals))
    if radicand < 0:
        raise QuadratureError("negative radicand in rho-norm (density profile invalid)")
    return float(np.sqrt(radicand))


@dataclass(frozen=True)
class RitzBasis:
    """Shape functions psi_1 = 1 and psi_n = s^(n-1)/norm for n >= 2."""

    n_modes: int
    norms: np.ndarray  # (n_modes,); norms[0] = 1 by convention

    def eval(self, n: int, s) -> tuple:
        """Values (psi_n, psi_n') at arc length s; n is 1-based."""
        if not 1 <= n <= self.n_modes:
            raise IndexError(f"basis index {n} out of range 1..{self.n_modes}")
        if n == 1:
            s_arr = np.asarray(s, dtype=float)
            return np.ones_like(s_arr), np.zeros_like(s_arr)
        p = n - 1
        c = self.norms[n - 1]
        s_arr = np.asarray(s, dtype=float)
        val = s_arr**p / c
        dval = p * s_arr ** (p - 1) / c
        return val, dval

    def table(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(psi, dpsi) tables with shape s.shape + (n_modes,)."""
        s = np.asarray(s, dtype=float)
        psi = np.empty(s.shape + (self.n_modes,))
        dpsi = np.empty_like(psi)
        for n in range(1, self.n_modes + 1):
            psi[..., n - 1], dpsi[..., n - 1] = self.eval(n, s)
        return psi, dpsi


def build_basis(n_modes: int, rho_profile, grid: QuadratureGrid) -> RitzBasis:
    """Normalize the monomial family against the body density on the grid."""
    if n_modes < 1:
        raise QuadratureError(f"need at least one basis function, got {n_modes}")
    norms = np.ones(n_modes)
    for n in range(2, n_modes + 1):
        norms[n - 1] = rho_norm(lambda s, p=n - 1: s**p, rho_profile, grid)
    return RitzBasis(n_modes=n_modes, norms=norms)


@dataclass(frozen=True)
class FieldTables:
    """Precomputed basis/quadrature tables for field evaluation.

    The cumulative integrals x2(s_k) = int_0^{s_k} cos(phi) dsigma get their
    own fixed-order Gauss-Legendre panel per node, so the inner-integral error
    is decoupled from the outer grid.
    """

    s: np.ndarray        # (K,) outer nodes
    w: np.ndarray        # (K,) outer weights
    psi: np.ndarray      # (K, N)
    dpsi: np.ndarray     # (K, N)
    s_sub: np.ndarray    # (K, M) inner panel nodes on [0, s_k]
    w_sub: np.ndarray    # (K, M)
    psi_sub: np.ndarray  # (K, M, N)


def build_tables(grid: QuadratureGrid, basis: RitzBasis, sub_order: int = 8) -> FieldTables:
    s = grid.nodes
    k = len(s)
    psi, dpsi = basis.table(s)
    x_ref, w_ref = _legendre_nodes(sub_order)
    # panel [0, s_k] per node
    half = 0.5 * s[:, None]
    s_sub = half * (x_ref[None, :] + 1.0)
    w_sub = half * w_ref[None, :]
    psi_sub, _ = basis.table(s_sub)
    return FieldTables(s=s, w=grid.weights, psi=psi, dpsi=dpsi,
                       s_sub=s_sub, w_sub=w_sub, psi_sub=psi_sub)


def tables_for_positions(s: np.ndarray, basis: RitzBasis, sub_order: int = 8) -> FieldTables:
    """Field tables for an arbitrary set of arc-length positions.

    Used to evaluate body shapes at plotting stations or boundary points;
    weights are set to zero since such tables are not meant for integration.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    psi, dpsi = basis.table(s)
    x_ref, w_ref = _legendre_nodes(sub_order)
    half = 0.5 * s[:, None]
    s_sub = half * (x_ref[None, :] + 1.0)
    w_sub = half * w_ref[None, :]
    psi_sub, _ = basis.table(s_sub)
    return FieldTables(s=s, w=np.zeros_like(s), psi=psi, dpsi=dpsi,
                       s_sub=s_sub, w_sub=w_sub, psi_sub=psi_sub)
