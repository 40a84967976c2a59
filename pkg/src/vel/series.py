"""Truncated Taylor series in time with array-valued coefficients.

A ``Series`` stores ``c[n] = (d/dt)^n f / n!`` at a fixed time slice, each
coefficient being a numpy array over the grid.  Products, quotients and the
usual elementary functions follow the Cauchy-product recurrences, so any
closed-form expression evaluated on series yields the time-Taylor series of
the expression.  Time derivatives then come for free: ``f.derivative()``.

Plain numbers and arrays mix in as time-independent constants.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


class Series:
    __array_ufunc__ = None  # keep numpy from broadcasting over us

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=np.result_type(np.asarray(coeffs), float))
        if c.ndim == 0:
            c = c[None]
        self.c = c

    # ------------------------------------------------------------ builders
    @classmethod
    def constant(cls, value, order: int) -> "Series":
        v = np.asarray(value, dtype=float)
        c = np.zeros((order + 1,) + v.shape, dtype=v.dtype)
        c[0] = v
        return cls(c)

    @classmethod
    def variable(cls, t0: float, order: int, shape=()) -> "Series":
        """The time coordinate itself, expanded about ``t0``."""
        c = np.zeros((order + 1,) + tuple(shape))
        c[0] = t0
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    # ------------------------------------------------------------ basics
    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @property
    def shape(self):
        return self.c.shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    def coeff(self, n: int) -> np.ndarray:
        return self.c[n]

    def taylor_derivative(self, n: int) -> np.ndarray:
        """n-th time derivative at the expansion point."""
        return self.c[n] * float(np.prod(np.arange(1, n + 1)))

    def truncate(self, order: int) -> "Series":
        return Series(self.c[: order + 1])

    def derivative(self) -> "Series":
        n = self.order
        if n == 0:
            return Series(np.zeros_like(self.c))
        k = np.arange(1, n + 1).reshape((-1,) + (1,) * (self.c.ndim - 1))
        return Series(self.c[1:] * k)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Series":
        """Apply a linear, time-independent operator to every coefficient."""
        return Series(np.stack([fn(ck) for ck in self.c]))

    def __getitem__(self, idx) -> "Series":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Series(self.c[(slice(None),) + idx])

    def __repr__(self) -> str:
        return f"Series(order={self.order}, shape={self.shape})"

    # ------------------------------------------------------------ arithmetic
    def _pair(self, other):
        if isinstance(other, Series):
            n = min(self.order, other.order)
            return self.c[: n + 1], other.c[: n + 1]
        o = np.asarray(other)
        oc = np.zeros((self.order + 1,) + np.broadcast_shapes(o.shape, self.shape),
                      dtype=np.result_type(o, self.c))
        oc[0] = o
        return self.c, oc

    def __add__(self, other):
        a, b = self._pair(other)
        return Series(a + b)

    __radd__ = __add__

    def __neg__(self):
        return Series(-self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Series):
            return Series(self.c * np.asarray(other))
        a, b = self._pair(other)
        n = a.shape[0]
        out = np.zeros((n,) + np.broadcast_shapes(a.shape[1:], b.shape[1:]),
                       dtype=np.result_type(a, b))
        for k in range(n):
            out[k] = np.sum(a[: k + 1] * b[k::-1], axis=0)
        return Series(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Series):
            return Series(self.c / np.asarray(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self) -> "Series":
        b = self.c
        q = np.zeros_like(b)
        q[0] = 1.0 / b[0]
        for n in range(1, b.shape[0]):
            acc = np.sum(b[1 : n + 1] * q[n - 1 :: -1][:n], axis=0)
            q[n] = -acc / b[0]
        return Series(q)

    def __pow__(self, alpha):
        if isinstance(alpha, (int, np.integer)) and alpha >= 0:
            out = Series.constant(np.ones(self.shape), self.order)
            for _ in range(int(alpha)):
                out = out * self
            return out
        x = self.c
        y = np.zeros_like(x)
        y[0] = x[0] ** alpha
        for n in range(1, x.shape[0]):
            k = np.arange(1, n + 1).reshape((-1,) + (1,) * (x.ndim - 1))
            y[n] = np.sum(((alpha + 1) * k - n) * x[1 : n + 1] * y[n - 1 :: -1][:n], axis=0) / (n * x[0])
        return Series(y)

    def sqrt(self) -> "Series":
        return self ** 0.5

    def exp(self) -> "Series":
        x = self.c
        y = np.zeros_like(x)
        y[0] = np.exp(x[0])
        for n in range(1, x.shape[0]):
            k = np.arange(1, n + 1).reshape((-1,) + (1,) * (x.ndim - 1))
            y[n] = np.sum(k * x[1 : n + 1] * y[n - 1 :: -1][:n], axis=0) / n
        return Series(y)

    def log(self) -> "Series":
        x = self.c
        y = np.zeros_like(x)
        y[0] = np.log(x[0])
        for n in range(1, x.shape[0]):
            acc = np.zeros_like(x[0])
            for k in range(1, n):
                acc = acc + k * y[k] * x[n - k]
            y[n] = (x[n] - acc / n) / x[0]
        return Series(y)

    def sincos(self) -> tuple["Series", "Series"]:
        x = self.c
        s = np.zeros_like(x)
        c = np.zeros_like(x)
        s[0], c[0] = np.sin(x[0]), np.cos(x[0])
        for n in range(1, x.shape[0]):
            k = np.arange(1, n + 1).reshape((-1,) + (1,) * (x.ndim - 1))
            s[n] = np.sum(k * x[1 : n + 1] * c[n - 1 :: -1][:n], axis=0) / n
            c[n] = -np.sum(k * x[1 : n + 1] * s[n - 1 :: -1][:n], axis=0) / n
        return Series(s), Series(c)

    def sin(self) -> "Series":
        return self.sincos()[0]

    def cos(self) -> "Series":
        return self.sincos()[1]


# ---------------------------------------------------------------- helpers
def lift(x, order: int) -> Series:
    return x.truncate(order) if isinstance(x, Series) else Series.constant(x, order)


def order_of(*xs) -> int | None:
    ords = [x.order for x in xs if isinstance(x, Series)]
    return min(ords) if ords else None


def value(x):
    return x.value if isinstance(x, Series) else x


def derivative(x):
    """Time derivative of a series; zero for plain (constant) data."""
    if isinstance(x, Series):
        return x.derivative()
    return np.zeros_like(np.asarray(x, dtype=float))


def sqrt(x):
    return x.sqrt() if isinstance(x, Series) else np.sqrt(x)


def exp(x):
    return x.exp() if isinstance(x, Series) else np.exp(x)


def log(x):
    return x.log() if isinstance(x, Series) else np.log(x)


def sin(x):
    return x.sin() if isinstance(x, Series) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Series) else np.cos(x)


def power(x, a):
    return x ** a if isinstance(x, Series) else np.power(x, a)


def spatial(op: Callable[[np.ndarray], np.ndarray], x):
    """Apply a time-independent linear operator to a series or an array."""
    return x.map(op) if isinstance(x, Series) else op(np.asarray(x, dtype=float))


def recurse(initial: list[np.ndarray], rhs: Callable[[list[Series]], list], order: int) -> list[Series]:
    """Taylor coefficients of the solution of ``d/dt q = rhs(q)``.

    ``q_{n+1} = rhs(q)_n / (n+1)``: the n-th coefficient of the right-hand
    side only depends on the first n+1 coefficients of q, so one pass per
    order fills the whole series.
    """
    shapes = [np.shape(v) for v in initial]
    coeffs = [np.zeros((order + 1,) + s) for s in shapes]
    for c, v in zip(coeffs, initial):
        c[0] = v
    for n in range(order):
        q = [Series(c[: n + 1]) for c in coeffs]
        out = rhs(q)
        for c, f in zip(coeffs, out):
            fn = f.c[n] if isinstance(f, Series) else (np.asarray(f) if n == 0 else 0.0)
            c[n + 1] = fn / (n + 1)
    return [Series(c) for c in coeffs]
