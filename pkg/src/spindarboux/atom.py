"""Two-level atom: populations, closed-form benchmarks and driving fields.

The amplitudes obey ``i A1' - f A1 = xi A2``, ``i A2' + f A2 = xi A1`` with
``f = (t delta(t))'/2`` set by the detuning ``delta`` of a field
``E(t) = E0 cos(t omega(t))``, ``omega = omega21 + delta``.  A system
prepared in the ground state, ``A(0) = (1, 0)``, is found excited with
probability ``|A2(t)|^2``.

The scenario pipelines at the bottom build transformed potentials with
:mod:`spindarboux.chains` and carry Rabi solutions through the
corresponding intertwiners.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .chains import ChainState, chain_step_coinciding, iterate_chain, shift_from_closed_form_constant
from .core import (
    ConstantPotential,
    PotentialFn,
    RationalPotential,
    SpinSolution,
    TimeGrid,
    as_potential,
    cumulative_integral,
    integrate_chi,
    integrate_spin_batch,
)
from .darboux import TransformStep, UPair, make_step, u_const_f0
from .errors import (
    DegenerateSolutionError,
    NumericalSingularityError,
    UnsupportedRegimeError,
    ValidationError,
)

SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class AtomParams:
    """Coupling ``xi`` (half the Rabi frequency), transition frequency and field amplitude."""

    xi: float = 1.0
    omega21: float = 0.0
    E0: float = 1.0

    def __post_init__(self):
        for name in ("xi", "omega21", "E0"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.E0 <= 0:
            raise ValidationError("E0 must be positive")


@dataclass(frozen=True)
class FieldTrace:
    grid: TimeGrid
    f: np.ndarray
    delta: np.ndarray
    omega: np.ndarray
    E: np.ndarray


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def rabi_probability(f0: float, xi: float, t):
    """``xi^2/(2 Omega^2) (1 - cos 2 Omega t)``, ``Omega^2 = f0^2 + xi^2``."""
    t = np.asarray(t, dtype=float)
    om2 = f0 * f0 + xi * xi
    if om2 == 0:
        return np.zeros_like(t)
    return xi * xi / (2.0 * om2) * (1.0 - np.cos(2.0 * np.sqrt(om2) * t))


def monotone_p1(f0: float, t):
    """``3 f0^2 t^2/(1 + 4 f0^2 t^2)``: one-fold population when ``f0^2 = xi^2/3``."""
    t = np.asarray(t, dtype=float)
    s = f0 * f0 * t * t
    return 3.0 * s / (1.0 + 4.0 * s)


def condit_roots(xi: float) -> tuple[float, float]:
    """Roots in ``f0^2`` of ``5 f0^4 - 10 f0^2 xi^2 + xi^4 = 0``: ``xi^2 (1 +- 2/sqrt 5)``."""
    if xi == 0:
        raise ValidationError("xi must be nonzero")
    x2 = xi * xi
    return x2 * (1.0 + 2.0 / SQRT5), x2 * (1.0 - 2.0 / SQRT5)


def closed_form_p2(xi: float, t):
    """Monotone two-fold population for the quartic-condition case, as a rational function of ``xi t``."""
    t = np.asarray(t, dtype=float)
    x2 = (xi * t) ** 2
    num = 2000.0 * x2 * (45 * (25 + 11 * SQRT5) + 60 * (123 + 55 * SQRT5) * x2 + 32 * (1525 + 682 * SQRT5) * x2**2)
    den = (5 + SQRT5) ** 5 * (
        225 + 540 * (5 + 2 * SQRT5) * x2 + 240 * (9 + 4 * SQRT5) * x2**2 + 64 * (85 + 38 * SQRT5) * x2**3
    )
    return num / den


def closed_form_p2_limit() -> float:
    """``t -> oo`` value of :func:`closed_form_p2` from its leading coefficients."""
    return 2000.0 * 32 * (1525 + 682 * SQRT5) / ((5 + SQRT5) ** 5 * 64 * (85 + 38 * SQRT5))


def _f22_polys(f0: float, C: float) -> tuple[Polynomial, Polynomial]:
    T = Polynomial([0.0, 1.0])
    s = 1 + 4 * f0**2 * T**2
    num = f0 * (-648 * (-1 + 4 * f0**2 * T**2) - 243 * s**2 + (C - 6 * f0 * T * (9 + 4 * f0**2 * T**2)) ** 2)
    den = 81 * s**2 + (C - 6 * f0 * T * (-3 + 4 * f0**2 * T**2)) ** 2
    return num, den


def f22_closed(f0: float, C: float, t):
    """Closed-form two-fold potential for coinciding constants on the linear-chi branch."""
    num, den = _f22_polys(f0, C)
    t = np.asarray(t, dtype=float)
    return num(t) / den(t)


def f22_potential(f0: float, C: float) -> RationalPotential:
    """:func:`f22_closed` as a potential with exact derivatives."""
    return RationalPotential(*_f22_polys(f0, C))


def f1_closed(f0: float, t):
    """One-fold potential on the linear-chi branch: ``f0 - 4 f0/(1 + 4 f0^2 t^2)``."""
    t = np.asarray(t, dtype=float)
    return f0 - 4.0 * f0 / (1.0 + 4.0 * f0 * f0 * t * t)


def polynomial_field(t, E0: float):
    """Field for ``C = 0``, ``f0 = -1``, ``omega21 = 2``, where ``cos(t omega)`` is rational."""
    t = np.asarray(t, dtype=float)
    P = 9 + 108 * t**2 + 48 * t**4 + 64 * t**6
    return E0 * (1 - 5184 * (1 + 16 * t**2 + 48 * t**4) / P**2 + 288 * (2 + 7 * t**2 - 4 * t**4) / P)


# ---------------------------------------------------------------------------
# Constant background: q_k and B_k
# ---------------------------------------------------------------------------


def _nu(f0: float, R: float) -> float:
    if f0 * f0 <= R * R:
        raise UnsupportedRegimeError(f"needs f0^2 > R^2 (got f0={f0}, R={R})")
    return np.sqrt(f0 * f0 - R * R)


def qk_const_f0(f0: float, R: float, t):
    """``q`` of the constant-``f0`` transformation function with ``q(0) = -1``.

    Equivalent to ``[R cos wt + (w/2) sin wt - f0]/[f0 cos wt - R]``,
    ``w = 2 sqrt(f0^2 - R^2)``, after cancelling the common factor
    ``cos(wt/2) - ...`` that makes that form 0/0 where ``f0 cos wt = R``.
    Here ``q = (s (f0 + R) - c)/(c + s (f0 + R))``, ``c = cos(nu t)``,
    ``s = sin(nu t)/nu``, ``nu = w/2``; it still has genuine poles, where
    :func:`bk_const_f0` should be used instead.
    """
    nu = _nu(f0, R)
    t = np.asarray(t, dtype=float)
    c, s = np.cos(nu * t), np.sin(nu * t) / nu
    den = c + s * (f0 + R)
    if np.any(den == 0):
        raise NumericalSingularityError("q has a pole", np.atleast_1d(t)[np.atleast_1d(den == 0)])
    return (s * (f0 + R) - c) / den


def qk_const_f0_unreduced(f0: float, R: float, t):
    """The unreduced ratio ``[R cos wt + (w/2) sin wt - f0]/[f0 cos wt - R]``."""
    w = 2.0 * _nu(f0, R)
    t = np.asarray(t, dtype=float)
    return (R * np.cos(w * t) + 0.5 * w * np.sin(w * t) - f0) / (f0 * np.cos(w * t) - R)


def bk_const_f0(f0: float, R: float, t):
    """``B = (1 - i q)/(1 + i q) = u/ut`` for :func:`qk_const_f0`, regular everywhere."""
    nu = _nu(f0, R)
    t = np.asarray(t, dtype=float)
    c, s = np.cos(nu * t), np.sin(nu * t) / nu
    k = s * (f0 + R)
    # u ~ (c + k) + i (c - k)
    u = (c + k) + 1j * (c - k)
    return u / np.conj(u)


# ---------------------------------------------------------------------------
# Populations
# ---------------------------------------------------------------------------


def population(sol: SpinSolution) -> np.ndarray:
    """``|A2(t)|^2 / N(t_start)`` with ``N = |A1|^2 + |A2|^2``."""
    n0 = abs(sol.A1[0]) ** 2 + abs(sol.A2[0]) ** 2
    if n0 == 0:
        raise DegenerateSolutionError("solution has zero norm", [sol.grid.t_start])
    return np.abs(sol.A2) ** 2 / n0


def impose_initial(sol_a: SpinSolution, sol_b: SpinSolution, target=(1.0, 0.0)) -> SpinSolution:
    """Linear combination of two solutions with the prescribed values at ``t_start``."""
    M = np.array([[sol_a.A1[0], sol_b.A1[0]], [sol_a.A2[0], sol_b.A2[0]]])
    if abs(np.linalg.det(M)) <= 1e-14 * max(1.0, np.abs(M).max() ** 2):
        raise DegenerateSolutionError("solutions are linearly dependent at the start", [sol_a.grid.t_start])
    ca, cb = np.linalg.solve(M, np.asarray(target, dtype=complex))
    return SpinSolution(sol_a.grid, ca * sol_a.A1 + cb * sol_b.A1, ca * sol_a.A2 + cb * sol_b.A2, sol_a.xi,
                        sol_a.energy)


def rabi_pair(f0, xi: float, grid: TimeGrid) -> list:
    """Solutions of the source equation starting from ``(1, 0)`` and ``(0, 1)``."""
    return integrate_spin_batch(f0, xi, [(1.0, 0.0), (0.0, 1.0)], grid)


def transformed_ground_state(chain: ChainState, xi: float, grid: TimeGrid, check: bool = True) -> SpinSolution:
    """Solution of the ``f_n`` equation with ``A(0) = (1, 0)`` obtained through ``L_{0,n}``."""
    a, b = rabi_pair(chain.f0, xi, grid)
    return impose_initial(chain.apply(a, check=check), chain.apply(b, check=check))


# ---------------------------------------------------------------------------
# Detuning and field
# ---------------------------------------------------------------------------


def detuning_and_field(f, params: AtomParams, grid: TimeGrid) -> FieldTrace:
    """``delta = (2/t) int_0^t f``, ``omega = omega21 + delta``, ``E = E0 cos(t omega)``.

    ``delta(0) = 2 f(0)`` by continuity.  The phase ``t omega`` is formed as
    ``omega21 t + 2 int_0^t f`` so it stays accurate near ``t = 0``.
    """
    if grid.t_start != 0:
        raise ValidationError("the detuning is defined from t = 0; the grid must start there")
    f = as_potential(f)
    fv = f.samples(grid)
    F = cumulative_integral(fv, grid)
    t = grid.t
    delta = np.empty_like(fv)
    delta[0] = 2.0 * fv[0]
    delta[1:] = 2.0 * F[1:] / t[1:]
    omega = params.omega21 + delta
    E = params.E0 * np.cos(params.omega21 * t + 2.0 * F)
    return FieldTrace(grid, fv, delta, omega, E)


# ---------------------------------------------------------------------------
# Scenario pipelines
# ---------------------------------------------------------------------------


def onefold_linear_chi_step(f0: float, grid: TimeGrid, phase_C: float = 0.0) -> TransformStep:
    """First step with ``R = f0`` and ``chi = 2 f0 t + 1`` (integrated numerically)."""
    if f0 <= 0:
        raise UnsupportedRegimeError("chi = 2 f0 t + 1 is zero-free on t >= 0 only for f0 > 0")
    chi = integrate_chi(f0, f0, grid, (1.0 + 2.0 * f0 * grid.t_start, 2.0 * f0))
    return make_step(f0, f0, grid, chi=chi, phase_C=phase_C, label="L01")


def onefold_linear_u_step(f0: float, grid: TimeGrid) -> TransformStep:
    """Same step from the closed-form ``u`` (any sign of ``f0``)."""
    return TransformStep(ConstantPotential(f0), u_const_f0(f0, f0, grid), "L01")


def coinciding_chain(f0: float, grid: TimeGrid, C: float = 0.0, shift: float | None = None,
                     c_tilde: float = 1.0) -> ChainState:
    """Two steps with ``R1 = R2 = f0`` on the linear-chi branch.

    ``shift`` defaults to the value matching the closed-form constant ``C``.
    Only ``c_tilde**2 * shift`` enters the second potential, so the default
    shift is rescaled by ``c_tilde**-2`` and ``f2`` does not depend on ``c_tilde``.
    """
    if not np.isfinite(c_tilde) or c_tilde == 0:
        raise ValidationError("c_tilde must be finite and nonzero")
    if grid.t_start != 0:
        raise ValidationError("the linear-chi branch is anchored at t = 0")
    step1 = onefold_linear_chi_step(f0, grid) if f0 > 0 else onefold_linear_u_step(f0, grid)
    K = shift_from_closed_form_constant(C) / c_tilde**2 if shift is None else shift
    step2 = chain_step_coinciding(step1, shift=K, c_tilde=c_tilde, label="L12")
    return ChainState((step1, step2))


def distinct_chain(f0: float, R1: float, R2: float, grid: TimeGrid) -> ChainState:
    """Two steps with distinct constants on a constant background."""
    pairs = [u_const_f0(f0, R1, grid), u_const_f0(f0, R2, grid)]
    return iterate_chain(ConstantPotential(f0), pairs, labels=["L01", "L12"])


__all__ = [
    "AtomParams", "FieldTrace", "rabi_probability", "monotone_p1", "condit_roots", "closed_form_p2",
    "closed_form_p2_limit", "f22_closed", "f22_potential", "f1_closed", "polynomial_field", "qk_const_f0",
    "qk_const_f0_unreduced", "bk_const_f0", "population", "impose_initial", "rabi_pair",
    "transformed_ground_state", "detuning_and_field", "onefold_linear_chi_step", "onefold_linear_u_step",
    "coinciding_chain", "distinct_chain",
]
