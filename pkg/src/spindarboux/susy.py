"""Operator-level certification of the pseudo-supersymmetric structure.

Every identity is checked by applying both sides to test-function jets:

* pseudo-Hermiticity ``h^+ = J h J`` with ``J = sigma_1``;
* intertwining ``L h0 = hn L``;
* factorizations ``J L^+ J L = prod_k (h0^2 - Lam_k^2)`` and
  ``L J L^+ J = prod_k (hn^2 - Lam_k^2)``;
* the superalgebra of ``H = diag(h0, hn)``, ``Q1 = [[0, 0], [L, 0]]`` and
  ``Q2 = [[0, J L^+ J], [0, 0]]``: ``[Q_i, H] = 0``, ``Q_i^2 = 0`` and
  ``Q1 Q2 + Q2 Q1 = prod_k (H^2 - Gamma_k^2)``.

Adjoints are formal (``d^+ = -d`` on coefficients), so boundary terms never
enter; ``Lam_k^2 = -R_k^2`` is a scalar, so ``h^2 - Lam_k^2 = h^2 + R_k^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .chains import ChainState
from .core import (
    GAMMA,
    J,
    POTENTIAL_UNIT,
    PotentialFn,
    SpinSolution,
    TimeGrid,
    as_potential,
    integrate_spin,
    spin_jet,
)
from .jets import Jet
from .operators import BlockOp, DiffOp, Op, Product, Sum, identity

DEFAULT_ORDER = 6


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HamiltonianOp:
    """``h = gamma d/dt + f(t) i sigma_2`` on a grid, coefficient jets to ``order``."""

    f: PotentialFn
    grid: TimeGrid
    order: int = DEFAULT_ORDER

    @property
    def op(self) -> DiffOp:
        fj = self.f.jet(self.grid, self.order)
        V = Jet(fj.data[..., None, None] * POTENTIAL_UNIT)
        return DiffOp([V, Jet.constant(GAMMA, self.order, 1)], name="h")

    def squared_shifted(self, R: float) -> Op:
        """``h^2 - Lam^2 = h^2 + R^2``."""
        h = self.op
        return Sum([(1.0, Product([h, h])), (R * R, identity())])


def apply_h(h: HamiltonianOp, psi: Jet) -> Jet:
    """``gamma psi' + V psi``."""
    return h.op.apply(psi)


def _rel(res: Jet, psi: Jet) -> float:
    scale = max(float(np.max(np.abs(psi.value))), 1e-300)
    return float(np.max(np.abs(res.value))) / scale


def _pair_rel(res: list, pair: list) -> float:
    scale = max(float(max(np.max(np.abs(p.value)) for p in pair)), 1e-300)
    vals = [0.0 if r is None else float(np.max(np.abs(r.value))) for r in res]
    return max(vals) / scale


def pseudo_hermiticity_residual(h: HamiltonianOp, tests: Sequence[Jet]) -> float:
    """``max ||(J h J - h^+) psi|| / ||psi||`` over the test set."""
    op = h.op
    diff = Sum([(1.0, op.sandwich(J)), (-1.0, op.adjoint())])
    return max(_rel(diff.apply(p), p) for p in tests)


def intertwining_residual(L: Op, h0: HamiltonianOp, h1: HamiltonianOp, tests: Sequence[Jet]) -> float:
    """``max ||(L h0 - h1 L) psi|| / ||psi||``."""
    a, b = h0.op, h1.op
    return max(_rel(L.apply(a.apply(p)) - b.apply(L.apply(p)), p) for p in tests)


# ---------------------------------------------------------------------------
# Super system
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuperSystem:
    """``(h0, hn, L, {R_k})`` and the derived block operators."""

    h0: HamiltonianOp
    hn: HamiltonianOp
    L: Op
    Rs: tuple

    @property
    def L_sharp(self) -> Op:
        """``J L^+ J``, with ``L^+`` built factor by factor."""
        return self.L.adjoint().sandwich(J)

    def poly(self, h: HamiltonianOp) -> Op:
        return Product([h.squared_shifted(R) for R in self.Rs])

    @property
    def H(self) -> BlockOp:
        return BlockOp([[self.h0.op, None], [None, self.hn.op]])

    @property
    def Q1(self) -> BlockOp:
        return BlockOp([[None, None], [self.L, None]])

    @property
    def Q2(self) -> BlockOp:
        return BlockOp([[None, self.L_sharp], [None, None]])

    @property
    def polynomial_H(self) -> BlockOp:
        """``prod_k (H^2 - Gamma_k^2)``, ``Gamma_k = diag(Lam_k, Lam_k)``."""
        return BlockOp([[self.poly(self.h0), None], [None, self.poly(self.hn)]])


def build_super_system(chain: ChainState, order: int = DEFAULT_ORDER) -> SuperSystem:
    grid = chain.grid
    h0 = HamiltonianOp(chain.f0, grid, order)
    hn = HamiltonianOp(chain.fn, grid, order)
    return SuperSystem(h0, hn, chain.operator(order), tuple(chain.constants))


def factorization_residual(system: SuperSystem, tests: Sequence[Jet]) -> tuple[float, float]:
    """Residuals of ``J L^+ J L = P(h0)`` and ``L J L^+ J = P(hn)``."""
    Ls = system.L_sharp
    left = Sum([(1.0, Product([Ls, system.L])), (-1.0, system.poly(system.h0))])
    right = Sum([(1.0, Product([system.L, Ls])), (-1.0, system.poly(system.hn))])
    return (max(_rel(left.apply(p), p) for p in tests), max(_rel(right.apply(p), p) for p in tests))


def superalgebra_residuals(system: SuperSystem, pairs: Sequence[list]) -> dict:
    """Commutators with ``H``, the anticommutator identity and nilpotency.

    ``pairs`` are 4-component test functions given as ``[top, bottom]`` jets.
    """
    H, Q1, Q2 = system.H, system.Q1, system.Q2
    c1 = Q1 @ H - H @ Q1
    c2 = Q2 @ H - H @ Q2
    anti = (Q1 @ Q2 + Q2 @ Q1) - system.polynomial_H
    return {
        "commutator_Q1_H": max(_pair_rel(c1.apply(p), p) for p in pairs),
        "commutator_Q2_H": max(_pair_rel(c2.apply(p), p) for p in pairs),
        "anticommutator": max(_pair_rel(anti.apply(p), p) for p in pairs),
        "Q1_squared_zero": (Q1 @ Q1).is_zero,
        "Q2_squared_zero": (Q2 @ Q2).is_zero,
    }


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


def windowed_polynomials(grid: TimeGrid, count: int = 5, order: int = DEFAULT_ORDER, seed: int = 0,
                         max_degree: int = 4) -> list:
    """Random complex polynomial spinors (degree <= ``max_degree``) times a bump.

    The bump ``(4 s (1 - s))^3``, ``s = (t - t_start)/(t_end - t_start)``,
    vanishes with two derivatives at both ends.  Jets are exact.
    """
    rng = np.random.default_rng(seed)
    span = grid.t_end - grid.t_start
    s = (grid.t - grid.t_start) / span
    bump = Polynomial([0.0, 4.0, -4.0]) ** 3
    out = []
    for _ in range(count):
        comps = []
        for _c in range(2):
            deg = int(rng.integers(0, max_degree + 1))
            coef = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
            pr = Polynomial(coef.real) * bump
            pi = Polynomial(coef.imag) * bump
            comps.append(
                np.stack([(pr.deriv(k)(s) + 1j * pi.deriv(k)(s)) / span**k for k in range(order + 1)])
            )
        out.append(Jet(np.stack(comps, axis=-1)))
    return out


def solution_tests(f, xi: float, grid: TimeGrid, order: int = DEFAULT_ORDER) -> list:
    """Three genuine solutions of the ``f`` equation with their exact jets."""
    f = as_potential(f)
    inits = [(1.0, 0.0), (0.0, 1.0), (1.0 / np.sqrt(2), 1j / np.sqrt(2))]
    energies = [xi, xi, -0.5 * xi]
    sols = [integrate_spin(f, xi, init, grid, energy=E) for init, E in zip(inits, energies)]
    return [spin_jet(s, f, order) for s in sols]


def residual_test_set(system: SuperSystem, xi: float, seed: int = 0) -> tuple[list, list, list]:
    """Tests for the ``h0`` side, the ``hn`` side and 4-component pairs."""
    grid = system.h0.grid
    order = system.h0.order
    poly = windowed_polynomials(grid, 5, order, seed)
    sol0 = solution_tests(system.h0.f, xi, grid, order)
    soln = solution_tests(system.hn.f, xi, grid, order)
    side0 = poly + sol0
    siden = poly + soln
    pairs = [[poly[i], poly[(i + 1) % len(poly)]] for i in range(len(poly))]
    pairs += [[a, b] for a, b in zip(sol0, soln)]
    return side0, siden, pairs


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


def certify_system(system: SuperSystem, xi: float, seed: int = 0) -> dict:
    """All residuals for one system, as a flat dictionary."""
    side0, siden, pairs = residual_test_set(system, xi, seed)
    fl, _ = factorization_residual(system, side0)
    _, fr = factorization_residual(system, siden)
    out = {
        "n": len(system.Rs),
        "pseudo_hermiticity_h0": pseudo_hermiticity_residual(system.h0, side0),
        "pseudo_hermiticity_hn": pseudo_hermiticity_residual(system.hn, siden),
        "intertwining": intertwining_residual(system.L, system.h0, system.hn, side0),
        "factorization_h0": fl,
        "factorization_hn": fr,
    }
    out.update(superalgebra_residuals(system, pairs))
    return out


def format_report(values: dict) -> str:
    """``key: value`` lines in insertion order; floats with 6 significant digits."""
    lines = []
    for k, v in values.items():
        if isinstance(v, bool):
            text = "true" if v else "false"
        elif isinstance(v, float):
            text = f"{v:.6e}"
        else:
            text = str(v)
        lines.append(f"{k}: {text}")
    return "\n".join(lines) + "\n"


__all__ = [
    "DEFAULT_ORDER", "HamiltonianOp", "apply_h", "pseudo_hermiticity_residual", "intertwining_residual",
    "SuperSystem", "build_super_system", "factorization_residual", "superalgebra_residuals",
    "windowed_polynomials", "solution_tests", "residual_test_set", "certify_system", "format_report",
]
