"""Forward-mode automatic differentiation with dual numbers.

A `Dual` carries a value array of shape S and a partials array of shape
S + (n,), so one forward pass through a function of n variables produces
exact first derivatives at every point of a batch simultaneously.  The
module-level math functions (sin, cos, exp, log, sqrt) accept plain
numbers, numpy arrays, or Duals, which lets the same coefficient and map
definitions serve plain evaluation and differentiation.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError


class Dual:
    __slots__ = ("val", "eps")

    def __init__(self, val, eps):
        self.val = np.asarray(val, dtype=float)
        self.eps = np.asarray(eps, dtype=float)

    # arithmetic ------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.eps + other.eps)
        return Dual(self.val + other, self.eps)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.eps - other.eps)
        return Dual(self.val - other, self.eps)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.eps)

    def __neg__(self):
        return Dual(-self.val, -self.eps)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val,
                        self.eps * other.val[..., None]
                        + other.eps * self.val[..., None])
        other = np.asarray(other, dtype=float)
        return Dual(self.val * other, self.eps * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            return Dual(self.val * inv,
                        (self.eps - other.eps * (self.val * inv)[..., None])
                        * inv[..., None])
        other = np.asarray(other, dtype=float)
        return Dual(self.val / other, self.eps / other[..., None])

    def __rtruediv__(self, other):
        inv = 1.0 / self.val
        val = other * inv
        return Dual(val, -self.eps * (val * inv)[..., None])

    def __pow__(self, p):
        if isinstance(p, Dual):
            return exp(p * log(self))
        p = float(p)
        if p == 0:
            return Dual(np.ones_like(self.val), np.zeros_like(self.eps))
        return Dual(self.val ** p,
                    (p * self.val ** (p - 1))[..., None] * self.eps)

    def __rpow__(self, base):
        return exp(self * np.log(base))

    def __abs__(self):
        s = np.sign(self.val)
        return Dual(np.abs(self.val), s[..., None] * self.eps)

    # comparisons act on values only
    def __lt__(self, other):
        return self.val < (other.val if isinstance(other, Dual) else other)

    def __gt__(self, other):
        return self.val > (other.val if isinstance(other, Dual) else other)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.eps!r})"


def _lift(fn, dfn):
    def wrapped(x):
        if isinstance(x, Dual):
            return Dual(fn(x.val), dfn(x.val)[..., None] * x.eps)
        return fn(np.asarray(x, dtype=float))
    wrapped.__name__ = fn.__name__
    return wrapped


sin = _lift(np.sin, np.cos)
cos = _lift(np.cos, lambda v: -np.sin(v))
exp = _lift(np.exp, np.exp)
log = _lift(np.log, lambda v: 1.0 / v)
sqrt = _lift(np.sqrt, lambda v: 0.5 / np.sqrt(v))

MATH_FUNCTIONS = {"sin": sin, "cos": cos, "exp": exp, "log": log, "sqrt": sqrt}


def value_of(x, shape):
    """Plain value of a possibly-Dual, possibly-constant quantity."""
    v = x.val if isinstance(x, Dual) else np.asarray(x, dtype=float)
    return np.broadcast_to(v, shape).astype(float, copy=False)


def partials_of(x, shape, n):
    e = x.eps if isinstance(x, Dual) else np.zeros(shape + (n,))
    return np.broadcast_to(e, shape + (n,)).astype(float, copy=False)


def seed(X: np.ndarray) -> list[Dual]:
    """Dual coordinates for a batch of points X with shape (N, n)."""
    X = np.asarray(X, dtype=float)
    N, n = X.shape
    eye = np.eye(n)
    return [Dual(X[:, i], np.broadcast_to(eye[i], (N, n)).copy())
            for i in range(n)]


def evaluate_with_jacobian(fn, X: np.ndarray, out_dim: int):
    """Values (N, m) and exact Jacobians (N, m, n) of fn at the rows of X.

    fn takes a list of n coordinates (Duals here) and returns a sequence of
    out_dim scalars.  Non-finite results raise DomainError naming the first
    offending output coordinate.
    """
    X = np.asarray(X, dtype=float)
    N, n = X.shape
    with np.errstate(all="ignore"):
        ys = fn(seed(X))
    if len(ys) != out_dim:
        raise DomainError(f"map returned {len(ys)} coordinates, expected {out_dim}")
    values = np.empty((N, out_dim))
    jac = np.empty((N, out_dim, n))
    for i, y in enumerate(ys):
        values[:, i] = value_of(y, (N,))
        jac[:, i, :] = partials_of(y, (N,), n)
        if not np.isfinite(values[:, i]).all() or not np.isfinite(jac[:, i, :]).all():
            bad = np.flatnonzero(~np.isfinite(values[:, i]))
            where = X[bad[0]] if bad.size else X[0]
            raise DomainError(
                f"output coordinate {i + 1} is not finite at input {where.tolist()}")
    return values, jac


def evaluate_values(fn, X: np.ndarray, out_dim: int) -> np.ndarray:
    """Values only, (N, m); accepts the same fn signature on raw arrays."""
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    with np.errstate(all="ignore"):
        ys = fn([X[:, i] for i in range(X.shape[1])])
    values = np.empty((N, out_dim))
    for i, y in enumerate(ys):
        values[:, i] = value_of(y, (N,))
        if not np.isfinite(values[:, i]).all():
            bad = np.flatnonzero(~np.isfinite(values[:, i]))
            raise DomainError(
                f"output coordinate {i + 1} is not finite at input "
                f"{X[bad[0]].tolist()}")
    return values
