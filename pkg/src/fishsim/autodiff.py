"""Forward-mode automatic differentiation with fixed-width direction vectors.

Two scalar types are provided:

* ``Dual`` carries a value and a vector of directional derivatives. Values
  may be numpy arrays, in which case one arithmetic operation propagates all
  batch elements and all directions at once (vector-forward mode). Dual
  values may themselves be Duals, which nests first-order numbers into exact
  second-order ones; that path trades speed for generality and is what the
  nesting-consistency checks exercise.
* ``Dual2`` carries value, gradient, and Hessian explicitly with vectorized
  propagation rules; it is the fast second-order type behind ``hessian``.

Derivatives are exact for the implemented composition up to rounding; domain
violations (sqrt of a negative, division by zero, log of a nonpositive)
raise ``DomainError`` instead of propagating silent NaNs.
"""

from __future__ import annotations

import numbers

import numpy as np


class DomainError(ArithmeticError):
    """An elementary operation was evaluated outside its smooth domain."""


class AffinityError(ValueError):
    """A map assumed affine failed the affinity residual check."""


def _ex(v):
    """Append a direction axis to array values so they broadcast against eps."""
    return v[..., None] if isinstance(v, np.ndarray) else v


def _raw(v):
    """Underlying float/ndarray value of a possibly nested dual."""
    while isinstance(v, (Dual, Dual2)):
        v = v.val
    return v


def value(x):
    """Plain value of a Dual/Dual2/ndarray/scalar."""
    return _raw(x)


def _check_nonzero(v, what):
    if np.any(_raw(v) == 0):
        raise DomainError(f"{what}: division by zero")


def _check_positive(v, what):
    if np.any(_raw(v) <= 0):
        raise DomainError(f"{what}: argument must be strictly positive")


class Dual:
    """First-order forward-mode number: value plus directional derivatives.

    ``eps`` is an ndarray whose trailing axis indexes derivative directions;
    in nested mode it is a 1-D object array whose entries are scalars,
    arrays, or Duals sharing the batch shape of ``val``.
    """

    __slots__ = ("val", "eps")
    # force ndarray <op> Dual to use the reflected operators instead of
    # numpy's elementwise object broadcasting
    __array_ufunc__ = None

    def __init__(self, val, eps):
        self.val = val
        self.eps = eps

    # -- helpers ----------------------------------------------------------

    @property
    def nested(self) -> bool:
        return isinstance(self.val, (Dual, Dual2)) or self.eps.dtype == object

    @property
    def width(self) -> int:
        return self.eps.shape[-1] if not self.nested else len(self.eps)

    def _batch_shape(self):
        return np.shape(_raw(self.val))

    def __repr__(self):
        return f"Dual(val={self.val!r}, eps={self.eps!r})"

    def _map_eps(self, fn):
        out = np.empty(len(self.eps), dtype=object)
        for i in range(len(self.eps)):
            out[i] = fn(self.eps[i])
        return out

    @staticmethod
    def _combine(n, fn):
        out = np.empty(n, dtype=object)
        for i in range(n):
            out[i] = fn(i)
        return out

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            if self.nested or other.nested:
                eps = self._combine(len(self.eps), lambda i: self.eps[i] + other.eps[i])
                return Dual(self.val + other.val, eps)
            return Dual(self.val + other.val, self.eps + other.eps)
        return Dual(self.val + other, self.eps)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            if self.nested or other.nested:
                eps = self._combine(len(self.eps), lambda i: self.eps[i] - other.eps[i])
                return Dual(self.val - other.val, eps)
            return Dual(self.val - other.val, self.eps - other.eps)
        return Dual(self.val - other, self.eps)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.eps if not self.nested
                    else self._map_eps(lambda e: -e))

    def __neg__(self):
        if self.nested:
            return Dual(-self.val, self._map_eps(lambda e: -e))
        return Dual(-self.val, -self.eps)

    def __mul__(self, other):
        if isinstance(other, Dual):
            if self.nested or other.nested:
                eps = self._combine(
                    len(self.eps),
                    lambda i: self.eps[i] * other.val + other.eps[i] * self.val)
                return Dual(self.val * other.val, eps)
            return Dual(self.val * other.val,
                        self.eps * _ex(other.val) + other.eps * _ex(self.val))
        if self.nested:
            return Dual(self.val * other, self._map_eps(lambda e: e * other))
        return Dual(self.val * other, self.eps * _ex(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            _check_nonzero(other.val, "Dual division")
            z = self.val / other.val
            if self.nested or other.nested:
                eps = self._combine(
                    len(self.eps),
                    lambda i: (self.eps[i] - other.eps[i] * z) / other.val)
                return Dual(z, eps)
            return Dual(z, (self.eps - other.eps * _ex(z)) / _ex(other.val))
        _check_nonzero(other, "Dual division")
        if self.nested:
            return Dual(self.val / other, self._map_eps(lambda e: e / other))
        return Dual(self.val / other, self.eps / _ex(other))

    def __rtruediv__(self, other):
        _check_nonzero(self.val, "Dual division")
        z = other / self.val
        scale = -z / self.val
        if self.nested:
            return Dual(z, self._map_eps(lambda e: e * scale))
        return Dual(z, self.eps * _ex(scale))

    def __pow__(self, p):
        if not isinstance(p, numbers.Number):
            raise TypeError("Dual powers require a constant exponent")
        if p == 0:
            zeroed = self._map_eps(lambda e: 0.0 * e) if self.nested else 0.0 * self.eps
            return Dual(1.0 + 0.0 * self.val, zeroed)
        if float(p) != int(p):
            _check_positive(self.val, "Dual power with non-integer exponent")
        scale = p * self.val ** (p - 1)
        if self.nested:
            return Dual(self.val**p, self._map_eps(lambda e: e * scale))
        return Dual(self.val**p, self.eps * _ex(scale))

    # -- elementary functions ----------------------------------------------

    def sin(self):
        c = _cos_val(self.val)
        if self.nested:
            return Dual(_sin_val(self.val), self._map_eps(lambda e: e * c))
        return Dual(_sin_val(self.val), self.eps * _ex(c))

    def cos(self):
        s = _sin_val(self.val)
        if self.nested:
            return Dual(_cos_val(self.val), self._map_eps(lambda e: -e * s))
        return Dual(_cos_val(self.val), self.eps * _ex(-s))

    def sqrt(self):
        _check_positive(self.val, "Dual sqrt")
        root = _sqrt_val(self.val)
        scale = 0.5 / root
        if self.nested:
            return Dual(root, self._map_eps(lambda e: e * scale))
        return Dual(root, self.eps * _ex(scale))

    def exp(self):
        e_val = _exp_val(self.val)
        if self.nested:
            return Dual(e_val, self._map_eps(lambda e: e * e_val))
        return Dual(e_val, self.eps * _ex(e_val))

    def log(self):
        _check_positive(self.val, "Dual log")
        if self.nested:
            return Dual(_log_val(self.val), self._map_eps(lambda e: e / self.val))
        return Dual(_log_val(self.val), self.eps / _ex(self.val))

    # -- structure ----------------------------------------------------------

    def __getitem__(self, idx):
        if self.nested:
            return Dual(self.val[idx], self._map_eps(
                lambda e: e[idx] if isinstance(e, (np.ndarray, Dual)) else e))
        shape = np.shape(self.val)
        eps = self.eps
        if eps.shape[:-1] != shape:
            eps = np.broadcast_to(eps, shape + (eps.shape[-1],))
        return Dual(self.val[idx], eps[idx])

    def sum(self, axis=None):
        """Sum over batch axes (never over the direction axis)."""
        if self.nested:
            shape = self._batch_shape()
            val = self.val.sum(axis) if isinstance(self.val, (Dual, np.ndarray)) \
                else self.val
            return Dual(val, self._map_eps(lambda e: _sum_entry(e, shape, axis)))
        shape = np.shape(self.val)
        n = self.eps.shape[-1]
        eps = np.broadcast_to(self.eps, shape + (n,))
        if axis is None:
            return Dual(np.sum(self.val), eps.reshape(-1, n).sum(axis=0))
        return Dual(np.sum(self.val, axis=axis), eps.sum(axis=axis))

    def partials(self):
        """Directional derivatives broadcast to the full batch shape."""
        if self.nested:
            raise TypeError("partials() requires a flat (non-nested) Dual")
        shape = np.shape(self.val)
        return np.ascontiguousarray(
            np.broadcast_to(self.eps, shape + (self.eps.shape[-1],)).astype(float))


def _sum_entry(e, shape, axis):
    if isinstance(e, Dual):
        if np.shape(_raw(e.val)) != shape:
            e = e * np.ones(shape)
        return e.sum(axis)
    arr = np.broadcast_to(np.asarray(e, dtype=float), shape)
    return arr.sum() if axis is None else arr.sum(axis=axis)


class Dual2:
    """Second-order forward number: value, gradient, and Hessian.

    Equivalent to a Dual whose derivative entries are Duals, flattened so the
    propagation rules run as whole-array numpy operations.
    """

    __slots__ = ("val", "grad", "hess")
    __array_ufunc__ = None

    def __init__(self, val, grad, hess):
        self.val = val
        self.grad = grad
        self.hess = hess

    @property
    def width(self) -> int:
        return self.grad.shape[-1]

    @staticmethod
    def _outer(a, b):
        return np.einsum("...i,...j->...ij", a, b)

    def __repr__(self):
        return f"Dual2(val={self.val!r})"

    def __add__(self, other):
        if isinstance(other, Dual2):
            return Dual2(self.val + other.val, self.grad + other.grad,
                         self.hess + other.hess)
        return Dual2(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual2):
            return Dual2(self.val - other.val, self.grad - other.grad,
                         self.hess - other.hess)
        return Dual2(self.val - other, self.grad, self.hess)

    def __rsub__(self, other):
        return Dual2(other - self.val, -self.grad, -self.hess)

    def __neg__(self):
        return Dual2(-self.val, -self.grad, -self.hess)

    def __mul__(self, other):
        if isinstance(other, Dual2):
            gx, gy = np.broadcast_arrays(self.grad, other.grad)
            cross = self._outer(gx, gy)
            return Dual2(
                self.val * other.val,
                self.grad * _ex(other.val) + other.grad * _ex(self.val),
                self.hess * _ex(_ex(other.val)) + other.hess * _ex(_ex(self.val))
                + cross + np.swapaxes(cross, -1, -2),
            )
        return Dual2(self.val * other, self.grad * _ex(other),
                     self.hess * _ex(_ex(other)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual2):
            _check_nonzero(other.val, "Dual2 division")
            z = self.val / other.val
            g = (self.grad - other.grad * _ex(z)) / _ex(other.val)
            gz, gy = np.broadcast_arrays(g, other.grad)
            cross = self._outer(gz, gy)
            h = (self.hess - other.hess * _ex(_ex(z)) - cross
                 - np.swapaxes(cross, -1, -2)) / _ex(_ex(other.val))
            return Dual2(z, g, h)
        _check_nonzero(other, "Dual2 division")
        return Dual2(self.val / other, self.grad / _ex(other),
                     self.hess / _ex(_ex(other)))

    def __rtruediv__(self, other):
        _check_nonzero(self.val, "Dual2 division")
        z = other / self.val
        g = -self.grad * _ex(z / self.val)
        gz, gs = np.broadcast_arrays(g, self.grad)
        cross = self._outer(gz, gs)
        h = (-self.hess * _ex(_ex(z)) - cross - np.swapaxes(cross, -1, -2)) \
            / _ex(_ex(self.val))
        return Dual2(z, g, h)

    def __pow__(self, p):
        if not isinstance(p, numbers.Number):
            raise TypeError("Dual2 powers require a constant exponent")
        if p == 0:
            return Dual2(1.0 + 0.0 * self.val, 0.0 * self.grad, 0.0 * self.hess)
        if float(p) != int(p):
            _check_positive(self.val, "Dual2 power with non-integer exponent")
        v1 = p * self.val ** (p - 1)
        v2 = p * (p - 1) * self.val ** (p - 2) if p not in (1, 2) else (
            0.0 * self.val if p == 1 else 2.0 + 0.0 * self.val)
        return self._chain(self.val**p, v1, v2)

    def _chain(self, f, df, d2f):
        gg = self._outer(self.grad, self.grad)
        return Dual2(f, self.grad * _ex(df),
                     self.hess * _ex(_ex(df)) + gg * _ex(_ex(d2f)))

    def sin(self):
        return self._chain(np.sin(self.val), np.cos(self.val), -np.sin(self.val))

    def cos(self):
        return self._chain(np.cos(self.val), -np.sin(self.val), -np.cos(self.val))

    def sqrt(self):
        _check_positive(self.val, "Dual2 sqrt")
        root = np.sqrt(self.val)
        return self._chain(root, 0.5 / root, -0.25 / (root * self.val))

    def exp(self):
        e = np.exp(self.val)
        return self._chain(e, e, e)

    def log(self):
        _check_positive(self.val, "Dual2 log")
        return self._chain(np.log(self.val), 1.0 / self.val,
                           -1.0 / (self.val * self.val))

    def __getitem__(self, idx):
        shape = np.shape(self.val)
        n = self.width
        grad = np.broadcast_to(self.grad, shape + (n,))
        hess = np.broadcast_to(self.hess, shape + (n, n))
        return Dual2(self.val[idx], grad[idx], hess[idx])

    def sum(self, axis=None):
        shape = np.shape(self.val)
        n = self.width
        grad = np.broadcast_to(self.grad, shape + (n,))
        hess = np.broadcast_to(self.hess, shape + (n, n))
        if axis is None:
            return Dual2(np.sum(self.val), grad.reshape(-1, n).sum(axis=0),
                         hess.reshape(-1, n, n).sum(axis=0))
        return Dual2(np.sum(self.val, axis=axis), grad.sum(axis=axis),
                     hess.sum(axis=axis))


# ---------------------------------------------------------------------------
# dispatching elementary functions (work on floats, arrays, Dual, Dual2)

def _sin_val(v):
    return v.sin() if isinstance(v, (Dual, Dual2)) else np.sin(v)


def _cos_val(v):
    return v.cos() if isinstance(v, (Dual, Dual2)) else np.cos(v)


def _sqrt_val(v):
    return v.sqrt() if isinstance(v, (Dual, Dual2)) else np.sqrt(v)


def _exp_val(v):
    return v.exp() if isinstance(v, (Dual, Dual2)) else np.exp(v)


def _log_val(v):
    return v.log() if isinstance(v, (Dual, Dual2)) else np.log(v)


sin = _sin_val
cos = _cos_val
exp = _exp_val
log = _log_val


def sqrt(v):
    if isinstance(v, (Dual, Dual2)):
        return v.sqrt()
    if np.any(np.asarray(v) < 0):
        raise DomainError("sqrt: argument must be nonnegative")
    return np.sqrt(v)


# ---------------------------------------------------------------------------
# drivers

def seed(x, width=None, offset: int = 0) -> Dual:
    """Wrap a float vector as a batched Dual seeded with unit directions."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    width = n if width is None else width
    eps = np.zeros((n, width))
    eps[:, offset:offset + n] = np.eye(n)
    return Dual(x.copy(), eps)


def _seed_nested(x):
    """List of Duals over possibly-Dual inputs with unit seed directions."""
    n = len(x)
    out = []
    for i in range(n):
        eps = np.empty(n, dtype=object)
        for j in range(n):
            eps[j] = 1.0 if i == j else 0.0
        out.append(Dual(x[i], eps))
    return out


def gradient(f, x) -> np.ndarray:
    """Gradient of a scalar function at x; works when x entries are Duals."""
    if isinstance(x, (list, tuple)) and any(isinstance(xi, (Dual, Dual2)) for xi in x):
        xs = _seed_nested(list(x))
        y = f(xs)
        out = np.empty(len(xs), dtype=object)
        for i in range(len(xs)):
            out[i] = y.eps[i] if isinstance(y, Dual) else 0.0
        return out
    xd = seed(x)
    y = f(xd)
    if not isinstance(y, Dual):
        return np.zeros(xd.width)
    if np.shape(_raw(y.val)) != ():
        raise ValueError("gradient expects a scalar-valued function")
    return np.broadcast_to(y.eps, (xd.width,)).astype(float).copy()


def hessian(f, x) -> np.ndarray:
    """Hessian of a scalar function at x (symmetrized after a symmetry check)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    xd = Dual2(x.copy(), np.eye(n), np.zeros((n, n, n)))
    y = f(xd)
    if not isinstance(y, Dual2):
        return np.zeros((n, n))
    h = np.broadcast_to(y.hess, (n, n)).astype(float)
    asym = np.max(np.abs(h - h.T)) if h.size else 0.0
    if asym > 1e-10 + 1e-12 * np.max(np.abs(h), initial=0.0):
        raise ArithmeticError(f"Hessian asymmetry {asym:.3e} exceeds tolerance")
    return 0.5 * (h + h.T)


def hessian_via_nesting(f, x) -> np.ndarray:
    """Hessian computed literally as the gradient of each gradient component."""
    x = list(np.asarray(x, dtype=float))
    n = len(x)
    outer = _seed_nested(x)
    g = gradient(f, outer)
    rows = []
    for j in range(n):
        gj = g[j]
        if isinstance(gj, Dual):
            rows.append(np.array([float(_raw(gj.eps[i])) for i in range(n)]))
        else:
            rows.append(np.zeros(n))
    return np.array(rows)


def jacobian(f, x) -> np.ndarray:
    """m x n Jacobian of a vector-valued function at x."""
    x = np.asarray(x, dtype=float)
    xd = seed(x)
    y = f(xd)
    if isinstance(y, Dual):
        vals = np.asarray(y.val)
        if vals.ndim != 1:
            raise ValueError(f"jacobian expects a vector output, got shape {vals.shape}")
        return y.partials()
    rows = []
    for comp in y:
        if isinstance(comp, Dual):
            rows.append(np.broadcast_to(comp.eps, (xd.width,)).astype(float))
        else:
            rows.append(np.zeros(xd.width))
    return np.array(rows)


def affine_extract(f, p: int, rtol: float = 1e-9):
    """Split an affine map f(u) = A u + b into (A, b) by direct evaluation.

    b = f(0); column j of A is f(e_j) - b. One pseudo-random probe verifies
    the affinity assumption; a violation raises AffinityError since it
    signals a modeling bug, not a numerical issue.
    """
    zero = np.zeros(p)
    b = np.asarray(f(zero), dtype=float)
    a = np.empty((b.shape[0], p))
    for j in range(p):
        unit = np.zeros(p)
        unit[j] = 1.0
        a[:, j] = np.asarray(f(unit), dtype=float) - b
    probe = np.cos(1.0 + np.arange(p, dtype=float))  # fixed, deterministic
    lhs = np.asarray(f(probe), dtype=float)
    rhs = a @ probe + b
    err = np.linalg.norm(lhs - rhs)
    if err > rtol * (1.0 + np.linalg.norm(lhs)):
        raise AffinityError(
            f"affinity residual {err:.3e} exceeds {rtol:.1e} * (1 + |f(u)|)")
    return a, b
