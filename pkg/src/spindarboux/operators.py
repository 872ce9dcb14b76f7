"""Linear differential operators with matrix coefficients.

An operator ``sum_k C_k(t) d^k/dt^k`` stores its coefficients as jets, so it
can be applied to a test-function jet, composed with others and formally
conjugated without ever differencing samples.  Products and sums are kept
unevaluated and applied right to left; block operators act on pairs of
spinors and keep zero blocks as ``None`` so nilpotency is structural.
"""

from __future__ import annotations

from math import comb
from typing import Sequence

import numpy as np

from .jets import Jet


class Op:
    """Base class: something that maps a spinor jet to a spinor jet."""

    order: int = 0

    def apply(self, psi: Jet) -> Jet:
        raise NotImplementedError

    def __call__(self, psi: Jet) -> Jet:
        return self.apply(psi)

    def adjoint(self) -> "Op":
        raise NotImplementedError

    def sandwich(self, J: np.ndarray) -> "Op":
        """``J A J`` for a constant matrix ``J``."""
        raise NotImplementedError

    def __matmul__(self, other: "Op") -> "Op":
        return Product([self, other])

    def __add__(self, other: "Op") -> "Op":
        return Sum([(1.0, self), (1.0, other)])

    def __sub__(self, other: "Op") -> "Op":
        return Sum([(1.0, self), (-1.0, other)])

    def __rmul__(self, c) -> "Op":
        return Sum([(complex(c), self)])

    def __neg__(self) -> "Op":
        return Sum([(-1.0, self)])


def _const(mat, order: int) -> Jet:
    return Jet.constant(np.asarray(mat, dtype=complex), order, 1)


class DiffOp(Op):
    """``sum_k coeffs[k] d^k`` with matrix-valued coefficient jets."""

    def __init__(self, coeffs: Sequence[Jet | np.ndarray | None], name: str = ""):
        cs = list(coeffs)
        while cs and cs[-1] is None:
            cs.pop()
        self.coeffs = [c if (c is None or isinstance(c, Jet)) else _const(c, 16) for c in cs]
        self.name = name

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def apply(self, psi: Jet) -> Jet:
        out = None
        for k, c in enumerate(self.coeffs):
            if c is None:
                continue
            term = c @ psi.d(k)
            out = term if out is None else out + term
        if out is None:
            return psi * 0.0
        return out

    def adjoint(self) -> "DiffOp":
        """Formal adjoint ``sum_k (-d)^k o C_k^H``, expanded by Leibniz."""
        m = self.order
        new: list[Jet | None] = [None] * (m + 1)
        for k, c in enumerate(self.coeffs):
            if c is None:
                continue
            ch = c.H
            for l in range(k + 1):
                term = ch.d(k - l) * float((-1) ** k * comb(k, l))
                new[l] = term if new[l] is None else new[l] + term
        return DiffOp(new, name=f"{self.name}^+" if self.name else "")

    def sandwich(self, J: np.ndarray) -> "DiffOp":
        J = np.asarray(J, dtype=complex)
        return DiffOp([None if c is None else Jet(J @ c.data @ J) for c in self.coeffs])

    def compose(self, other: "DiffOp") -> "DiffOp":
        """Expanded ``self o other`` (needs coefficient jets of ``other``)."""
        new: list[Jet | None] = [None] * (self.order + other.order + 1)
        for i, a in enumerate(self.coeffs):
            if a is None:
                continue
            for j, b in enumerate(other.coeffs):
                if b is None:
                    continue
                for l in range(i + 1):
                    term = (a @ b.d(l)) * float(comb(i, l))
                    k = i - l + j
                    new[k] = term if new[k] is None else new[k] + term
        return DiffOp(new)


class Product(Op):
    """``factors[0] o factors[1] o ...`` applied right to left."""

    def __init__(self, factors: Sequence[Op]):
        flat: list[Op] = []
        for f in factors:
            flat.extend(f.factors if isinstance(f, Product) else [f])
        self.factors = flat

    @property
    def order(self) -> int:
        return sum(f.order for f in self.factors)

    def apply(self, psi: Jet) -> Jet:
        for f in reversed(self.factors):
            psi = f.apply(psi)
        return psi

    def adjoint(self) -> "Product":
        return Product([f.adjoint() for f in reversed(self.factors)])

    def sandwich(self, J: np.ndarray) -> "Product":
        # J^2 = 1 lets the sandwich distribute over factors
        return Product([f.sandwich(J) for f in self.factors])


class Sum(Op):
    def __init__(self, terms: Sequence[tuple[complex, Op]]):
        flat: list[tuple[complex, Op]] = []
        for c, t in terms:
            if isinstance(t, Sum):
                flat.extend((c * c2, t2) for c2, t2 in t.terms)
            else:
                flat.append((c, t))
        self.terms = flat

    @property
    def order(self) -> int:
        return max(t.order for _, t in self.terms)

    def apply(self, psi: Jet) -> Jet:
        out = None
        for c, t in self.terms:
            v = t.apply(psi) * c
            out = v if out is None else out + v
        return out

    def adjoint(self) -> "Sum":
        return Sum([(np.conj(c), t.adjoint()) for c, t in self.terms])

    def sandwich(self, J: np.ndarray) -> "Sum":
        return Sum([(c, t.sandwich(J)) for c, t in self.terms])


def identity(dim: int = 2, scale: complex = 1.0) -> DiffOp:
    return DiffOp([scale * np.eye(dim, dtype=complex)])


# ---------------------------------------------------------------------------
# 2x2 block operators on spinor pairs
# ---------------------------------------------------------------------------


class BlockOp:
    """``[[A, B], [C, D]]`` acting on ``(psi_top, psi_bottom)``; ``None`` is an exact zero."""

    def __init__(self, blocks):
        self.blocks = [[blocks[0][0], blocks[0][1]], [blocks[1][0], blocks[1][1]]]

    @property
    def is_zero(self) -> bool:
        return all(b is None for row in self.blocks for b in row)

    def apply(self, pair):
        out = []
        for row in self.blocks:
            acc = None
            for b, psi in zip(row, pair):
                if b is None:
                    continue
                v = b.apply(psi)
                acc = v if acc is None else acc + v
            out.append(acc)
        return out

    def __matmul__(self, other: "BlockOp") -> "BlockOp":
        res = [[None, None], [None, None]]
        for i in range(2):
            for j in range(2):
                terms = [
                    Product([self.blocks[i][k], other.blocks[k][j]])
                    for k in range(2)
                    if self.blocks[i][k] is not None and other.blocks[k][j] is not None
                ]
                if terms:
                    res[i][j] = terms[0] if len(terms) == 1 else Sum([(1.0, t) for t in terms])
        return BlockOp(res)

    def _combine(self, other: "BlockOp", sign: float) -> "BlockOp":
        res = [[None, None], [None, None]]
        for i in range(2):
            for j in range(2):
                a, b = self.blocks[i][j], other.blocks[i][j]
                if a is None and b is None:
                    continue
                if b is None:
                    res[i][j] = a
                elif a is None:
                    res[i][j] = Sum([(sign, b)])
                else:
                    res[i][j] = Sum([(1.0, a), (sign, b)])
        return BlockOp(res)

    def __add__(self, other: "BlockOp") -> "BlockOp":
        return self._combine(other, 1.0)

    def __sub__(self, other: "BlockOp") -> "BlockOp":
        return self._combine(other, -1.0)


__all__ = ["Op", "DiffOp", "Product", "Sum", "identity", "BlockOp"]
