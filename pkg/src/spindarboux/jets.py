"""Pointwise derivative stacks ("jets") with Leibniz arithmetic.

A :class:`Jet` stores ``[g, g', ..., g^(m)]`` sampled on a grid, as an array of
shape ``(m + 1, N, *S)`` where ``S`` is the value shape (``()`` for scalars,
``(2,)`` for spinors, ``(2, 2)`` for matrices).  Products, quotients and
inverses propagate derivatives exactly, so no finite differences are involved
anywhere downstream.  The order of a result is the smallest order of its
operands; :meth:`Jet.d` drops one order.
"""

from __future__ import annotations

from math import comb

import numpy as np


def _binomials(m: int) -> np.ndarray:
    return np.array([[comb(k, i) for i in range(m + 1)] for k in range(m + 1)], dtype=float)


class Jet:
    __slots__ = ("data",)
    __array_priority__ = 100  # make ndarray * Jet defer to Jet.__rmul__

    def __init__(self, data):
        data = np.asarray(data)
        if data.ndim < 2:
            raise ValueError("jet data needs at least (order+1, N) dimensions")
        self.data = data

    # -- construction -------------------------------------------------------

    @classmethod
    def constant(cls, value, order: int, n: int) -> "Jet":
        value = np.asarray(value)
        data = np.zeros((order + 1, n) + value.shape, dtype=np.result_type(value, float))
        data[0] = value
        return cls(data)

    @classmethod
    def from_derivatives(cls, derivs) -> "Jet":
        return cls(np.stack([np.asarray(d) for d in derivs]))

    # -- basic properties ---------------------------------------------------

    @property
    def order(self) -> int:
        return self.data.shape[0] - 1

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def value(self) -> np.ndarray:
        return self.data[0]

    @property
    def shape(self):
        return self.data.shape[2:]

    def __getitem__(self, k: int) -> np.ndarray:
        return self.data[k]

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, n={self.n}, shape={self.shape}, dtype={self.data.dtype})"

    def d(self, times: int = 1) -> "Jet":
        if times > self.order:
            raise ValueError(f"cannot differentiate an order-{self.order} jet {times} times")
        return Jet(self.data[times:])

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError(f"jet has order {self.order} < {order}")
        return Jet(self.data[: order + 1])

    def conj(self) -> "Jet":
        return Jet(np.conj(self.data))

    @property
    def real(self) -> "Jet":
        return Jet(self.data.real)

    @property
    def imag(self) -> "Jet":
        return Jet(self.data.imag)

    @property
    def T(self) -> "Jet":
        return Jet(np.swapaxes(self.data, -1, -2))

    @property
    def H(self) -> "Jet":
        return Jet(np.conj(np.swapaxes(self.data, -1, -2)))

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        other = np.asarray(other)
        # constants: broadcast against a single grid point
        data = np.zeros((self.order + 1, 1) + other.shape, dtype=np.result_type(other, float))
        data[0, 0] = other
        return Jet(data)

    @staticmethod
    def _pair(a: "Jet", b: "Jet"):
        m = min(a.order, b.order)
        return a.data[: m + 1], b.data[: m + 1], m

    def __add__(self, other):
        other = self._coerce(other)
        a, b, _ = self._pair(self, other)
        return Jet(a + b)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.data)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def _leibniz(self, other: "Jet", op) -> "Jet":
        a, b, m = self._pair(self, other)
        binom = _binomials(m)
        out = [sum(binom[k, i] * op(a[i], b[k - i]) for i in range(k + 1)) for k in range(m + 1)]
        return Jet(np.stack(out))

    def __mul__(self, other):
        return self._leibniz(self._coerce(other), _bmul)

    def __rmul__(self, other):
        return self._coerce(other) * self

    def __matmul__(self, other):
        other = self._coerce(other)
        return self._leibniz(other, _bmatmul)

    def __rmatmul__(self, other):
        return self._coerce(other) @ self

    def reciprocal(self) -> "Jet":
        """Jet of ``1/g`` for a scalar-valued jet."""
        g = self.data
        m = self.order
        binom = _binomials(m)
        out = np.empty_like(g, dtype=np.result_type(g, float))
        out[0] = 1.0 / g[0]
        for k in range(1, m + 1):
            acc = sum(binom[k, i] * g[i] * out[k - i] for i in range(1, k + 1))
            out[k] = -acc * out[0]
        return Jet(out)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.data / np.asarray(other))

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def inv(self) -> "Jet":
        """Jet of the matrix inverse for a matrix-valued jet."""
        v = self.data
        m = self.order
        binom = _binomials(m)
        out = np.empty_like(v, dtype=np.result_type(v, float))
        out[0] = np.linalg.inv(v[0])
        for k in range(1, m + 1):
            acc = sum(binom[k, i] * (v[i] @ out[k - i]) for i in range(1, k + 1))
            out[k] = -(out[0] @ acc)
        return Jet(out)

    def max_abs(self, k: int = 0) -> float:
        return float(np.max(np.abs(self.data[k])))


def _bmul(x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    # scalar jet times tensor jet: pad trailing dims of the lower-rank factor
    if x.ndim < y.ndim:
        x = x.reshape(x.shape + (1,) * (y.ndim - x.ndim))
    elif y.ndim < x.ndim:
        y = y.reshape(y.shape + (1,) * (x.ndim - y.ndim))
    return x * y


def _bmatmul(x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    if y.ndim == x.ndim - 1:
        return np.einsum("...ij,...j->...i", x, y)
    return x @ y


def diag_jet(a: Jet, b: Jet) -> Jet:
    """Matrix jet ``diag(a, b)`` from two scalar jets."""
    m = min(a.order, b.order)
    n = max(a.n, b.n)
    dtype = np.result_type(a.data, b.data)
    out = np.zeros((m + 1, n, 2, 2), dtype=dtype)
    out[..., 0, 0] = a.data[: m + 1]
    out[..., 1, 1] = b.data[: m + 1]
    return Jet(out)
