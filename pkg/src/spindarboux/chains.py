"""Transformation chains: coinciding and distinct factorization constants.

Coinciding constants
    After a step ``f0 -> f1`` with constant ``R`` the ``f1`` equation for the
    same ``R`` has the closed-form solution ``u_a = -i C~/u1`` (the inverse
    step, back to ``f0``).  Its Wronskian companion gives the nontrivial
    continuation.  Two equivalent routes are provided:

    * the chi route (:func:`inverse_chi`, :func:`companion_chi`,
      :func:`chain_step_coinciding_chi`), literal but undefined wherever
      ``chi``, ``q`` or the potential vanish;
    * the u route (:func:`chain_step_coinciding`), which works with the
      transformation function directly and stays regular across those points.

Distinct constants
    ``n`` transformation functions on the same background are combined by
    Crum-Krein determinants (:func:`wronsky_blocks`,
    :func:`potential_n_fold`, :func:`apply_L0n`) or by iterating one-fold
    steps (:func:`iterate_chain`); the two routes are independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    GAMMA,
    GAMMA_INV,
    POTENTIAL_UNIT,
    ChiSolution,
    PotentialFn,
    SpinSolution,
    TimeGrid,
    as_potential,
    cumulative_integral,
    derivative_stack,
    spin_jet,
    spin_residual,
)
from .darboux import (
    DEFAULT_SOLUTION_GATE,
    TransformStep,
    UPair,
    _sign_changes,
    _zero_times,
    q_from_chi,
    transform_potential,
)
from .errors import (
    ChiZeroCrossingError,
    DegenerateChainError,
    NumericalSingularityError,
    PreconditionError,
    RealityViolationError,
    SingularCoefficientError,
    ValidationError,
)
from .jets import Jet
from .operators import DiffOp, Product

REALITY_GATE = 1e-8

# ---------------------------------------------------------------------------
# Coinciding constants: chi route
# ---------------------------------------------------------------------------


def _require_nonzero(x: np.ndarray, grid: TimeGrid, what: str, exc=SingularCoefficientError):
    if np.any(x == 0) or _sign_changes(x).size:
        raise exc(f"{what} vanishes", _zero_times(x, grid.t))


def inverse_chi(f_prev, q_prev, R: float, grid: TimeGrid, c_tilde: float = 1.0) -> ChiSolution:
    """``chi2 = C~ exp int (R - f'/(2 f) - f/q_prev) dt`` for the ``f_prev`` equation.

    ``f_prev`` is the potential after the previous step and ``q_prev`` that
    step's ``q``; the lower limit of the integral is ``grid.t_start``.  The
    derivative is returned exactly as ``chi2 * integrand``.
    """
    f_prev = as_potential(f_prev)
    q_prev = np.asarray(q_prev, dtype=float)
    f = f_prev.samples(grid)
    _require_nonzero(f, grid, "potential")
    _require_nonzero(q_prev, grid, "q of the previous step", ChiZeroCrossingError)
    fd = f_prev.jet(grid, 1)[1]
    g = R - fd / (2.0 * f) - f / q_prev
    chi = c_tilde * np.exp(cumulative_integral(g, grid))
    return ChiSolution(grid, chi, chi * g)


def companion_chi(chi: ChiSolution, shift: float = 0.0) -> ChiSolution:
    """``chi~ = chi (int chi^-2 dt + shift)`` so that ``W(chi, chi~) = 1``.

    ``shift`` is the free multiple of ``chi`` (lower limit ``t_start``).
    """
    c = np.asarray(chi.chi, dtype=float)
    _require_nonzero(c, chi.grid, "chi", ChiZeroCrossingError)
    integral = cumulative_integral(1.0 / (c * c), chi.grid) + shift
    return ChiSolution(chi.grid, c * integral, chi.chi_dot * integral + 1.0 / c)


def chain_step_coinciding_chi(f_prev, q_prev, R: float, grid: TimeGrid, shift: float = 0.0,
                              branch: str = "companion", c_tilde: float = 1.0):
    """Second step with the same ``R`` by the chi route; returns ``(q_next, f_next)``.

    ``branch`` is ``"companion"`` (nontrivial), ``"inverse"`` (back to the
    potential before ``f_prev``) or ``"repeat"`` (``q_next = q_prev``).
    """
    f_prev = as_potential(f_prev)
    if branch == "repeat":
        q_next = np.asarray(q_prev, dtype=float).copy()
    else:
        chi2 = inverse_chi(f_prev, q_prev, R, grid, c_tilde)
        chi_n = chi2 if branch == "inverse" else companion_chi(chi2, shift)
        if branch not in ("inverse", "companion"):
            raise ValidationError(f"unknown branch {branch!r}")
        q_next = q_from_chi(chi_n, f_prev, R)
    return q_next, transform_potential(f_prev, R, q_next, grid)


# ---------------------------------------------------------------------------
# Coinciding constants: u route
# ---------------------------------------------------------------------------


def shift_from_closed_form_constant(C: float) -> float:
    """Companion shift reproducing the closed-form two-fold potential with constant ``C``.

    Valid for the linear-chi branch (``R = f0``, ``chi = 2 f0 t + 1``) on a
    grid starting at ``t = 0`` with ``C~ = 1``.
    """
    return -1.0 - C / 9.0


def chain_step_coinciding(step: TransformStep, shift: float = 0.0, branch: str = "companion",
                          c_tilde: float = 1.0, label: str = "") -> TransformStep:
    """Second step with the same constant ``R``, built from the first step alone.

    Parameters
    ----------
    step : TransformStep
        The first step ``f0 -> f1``.
    shift : float
        Free multiple of the inverse solution in the companion, in the
        normalization of :func:`companion_chi` (``K`` in
        ``chi~ = chi2 (int chi2^-2 + K)`` with ``chi2`` matched to
        ``u_a = -i C~/u1`` and ``|u1(t_start)| = 1``).
    branch : {"companion", "inverse", "repeat"}
        ``"inverse"`` uses ``u_a`` itself (``q2 = 1/q1``, result ``f0``);
        ``"repeat"`` reuses ``u1`` (``q2 = q1``), which is a solution of the
        ``f1`` equation only for a trivial first step.
    c_tilde : float
        Scale of ``u_a``; only ``c_tilde**2 * shift`` matters.

    Notes
    -----
    For two solutions ``u_a``, ``u_b`` of ``u' = -i f1 u + R conj(u)`` the
    quantity ``Im(conj(u_a) u_b)`` is constant, which plays the role of the
    chi Wronskian.  Writing ``u_b = u_a (x + i/|u_a|^2)`` gives
    ``x' = -2 R Im(u1^2)/C~^2`` and hence ``u_b`` in closed form:
    ``u_b = exp(ell1)/C~ * conj(a1) (1 - i z)``,
    ``z = exp(-2 ell1) (C~^2 shift - 1/q1(t0) - 2 R int Im(a1^2) exp(2 ell1))``.
    Nothing here divides by ``chi``, ``q`` or the potential, so the step is
    regular where the chi route breaks down.
    """
    grid = step.grid
    R = step.R
    f1 = step.f_next
    pair = step.pair
    a1 = pair.a
    ell = pair.log_mod - pair.log_mod[0]
    if branch == "repeat":
        gap = np.max(np.abs(f1.values - step.f_prev.samples(grid)))
        scale = max(1.0, np.max(np.abs(f1.values)))
        if gap > 1e-8 * scale:
            raise PreconditionError(
                f"reusing the first transformation function needs f1 = f0 (max gap {gap:.3g})"
            )
        new = UPair(grid, R, ell, np.stack([a1, np.conj(a1)], axis=-1))
        return TransformStep(f1, new, label or "repeat")
    if branch == "inverse":
        d = -1j * np.conj(a1)
        new = UPair(grid, R, -ell + np.log(c_tilde), np.stack([d, np.conj(d)], axis=-1))
        return TransformStep(f1, new, label or "inverse")
    if branch != "companion":
        raise ValidationError(f"unknown branch {branch!r}")
    q0 = float(np.real(-a1[0].imag / a1[0].real)) if a1[0].real != 0 else np.inf
    if q0 == 0:
        raise NumericalSingularityError("companion shift is undefined because q vanishes at the start", [grid.t_start])
    top = ell.max()
    with np.errstate(over="raise"):
        try:
            weight = np.exp(2.0 * (ell - top))
            integral = cumulative_integral(np.imag(a1 * a1) * weight, grid)
            base = (c_tilde**2 * shift - (0.0 if np.isinf(q0) else 1.0 / q0)) * np.exp(-2.0 * top)
            z = np.exp(-2.0 * (ell - top)) * (base - 2.0 * R * integral)
        except FloatingPointError as exc:
            raise NumericalSingularityError("companion solution overflows; shorten the grid") from exc
    d = np.conj(a1) * np.exp(-1j * np.arctan(z))
    log_mod = ell + np.log(np.hypot(1.0, z)) - np.log(c_tilde)
    new = UPair(grid, R, log_mod, np.stack([d, np.conj(d)], axis=-1))
    return TransformStep(f1, new, label or "companion")


# ---------------------------------------------------------------------------
# Chains of one-fold steps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainState:
    """Steps ``f0 -> f1 -> ... -> fn``; step ``k`` lives on ``f_{k-1}``."""

    steps: tuple

    def __post_init__(self):
        steps = tuple(self.steps)
        object.__setattr__(self, "steps", steps)
        if not steps:
            raise ValidationError("a chain needs at least one step")
        for prev, nxt in zip(steps[:-1], steps[1:]):
            if nxt.f_prev is not prev.f_next:
                raise ValidationError("consecutive steps are not linked")

    @property
    def n(self) -> int:
        return len(self.steps)

    @property
    def grid(self) -> TimeGrid:
        return self.steps[0].grid

    @property
    def potentials(self) -> list:
        return [self.steps[0].f_prev] + [s.f_next for s in self.steps]

    @property
    def constants(self) -> list:
        return [s.R for s in self.steps]

    @property
    def f0(self) -> PotentialFn:
        return self.steps[0].f_prev

    @property
    def fn(self) -> PotentialFn:
        return self.steps[-1].f_next

    def apply_values(self, psi: np.ndarray, E: complex) -> np.ndarray:
        for s in self.steps:
            psi = s.apply_values(psi, E)
        return psi

    def apply(self, psi: SpinSolution, gate: float = DEFAULT_SOLUTION_GATE, check: bool = True) -> SpinSolution:
        """``L_{0,n} psi`` by successive first-order factors."""
        if check:
            res = spin_residual(psi, self.f0)
            if res > gate:
                raise PreconditionError(f"input is not a solution of the source equation (residual {res:.3g})")
        return SpinSolution.from_psi(psi.grid, self.apply_values(psi.psi, psi.E), psi.xi, psi.energy)

    def factor_ops(self, order: int) -> list:
        """``[L_{n-1,n}, ..., L_{0,1}]`` as :class:`DiffOp`, coefficient jets to ``order``."""
        ops = []
        for s in reversed(self.steps):
            Wj = s.W_jet(order)
            eye = Jet.constant(np.eye(2, dtype=complex), order, 1)
            ops.append(DiffOp([-Wj, eye], name=s.label))
        return ops

    def operator(self, order: int) -> Product:
        return Product(self.factor_ops(order))


def iterate_chain(f0, pairs: Sequence[UPair], labels: Sequence[str] | None = None) -> ChainState:
    """Chain built by successive one-fold steps from transformation functions on ``f0``.

    Step ``k`` uses ``L_{0,k-1} U_k``; the images are propagated pointwise by
    ``y = v' - W v`` with ``v'`` from the current equation, and renormalized
    at every node so no overflow builds up.
    """
    f0 = as_potential(f0)
    if not pairs:
        raise ValidationError("need at least one transformation function")
    grid = pairs[0].grid
    cols = [p.direction.copy() for p in pairs]
    logs = [p.log_mod.copy() for p in pairs]
    Rs = [p.R for p in pairs]
    steps = []
    f = f0
    for k in range(len(pairs)):
        step = TransformStep(f, UPair.from_column(grid, Rs[k], cols[k], logs[k]),
                             labels[k] if labels else f"step{k + 1}")
        steps.append(step)
        for j in range(k + 1, len(pairs)):
            y = step.apply_values(cols[j], 1j * Rs[j])
            m = np.abs(y[:, 0])
            if np.any(m == 0):
                raise DegenerateChainError("transformation function annihilated", grid.t[m == 0])
            cols[j] = y / m[:, None]
            logs[j] = logs[j] + np.log(m)
        f = step.f_next
    return ChainState(tuple(steps))


# ---------------------------------------------------------------------------
# Crum-Krein determinants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WronskyBlocks:
    """``n x n`` Wronskians of ``{u_k}`` and ``{ut_k}``, column-scaled.

    Every column ``k`` is multiplied by ``exp(-ell_k)``, so the stored
    determinants equal the true ones times ``exp(-log_scale)``; ratios such
    as ``r1/p1`` are unaffected.
    """

    n: int
    p1: np.ndarray
    p2: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    log_scale: np.ndarray
    U_jets: tuple  # per k: Jet of exp(-ell_k) U_k, order n
    Rs: tuple
    grid: TimeGrid

    @property
    def D(self) -> np.ndarray:
        D = np.zeros((self.p1.size, 2, 2), dtype=complex)
        D[:, 0, 0] = self.r1 / self.p1
        D[:, 1, 1] = self.r2 / self.p2
        return D

    @property
    def delta_f(self) -> np.ndarray:
        """``f_n - f0 = -i (r1/p1 - r2/p2)`` (complex; imaginary part is error)."""
        return -1j * (self.r1 / self.p1 - self.r2 / self.p2)


def _wronskian_rows(jets: Sequence[np.ndarray], rows: Sequence[int]) -> np.ndarray:
    """Matrix ``M[:, i, k] = jets[k][rows[i]]``."""
    return np.stack([np.stack([j[r] for j in jets], axis=-1) for r in rows], axis=-2)


def _check_regular(p: np.ndarray, cols: np.ndarray, grid: TimeGrid, what: str):
    # Hadamard bound: |det| <= prod of column norms
    bound = np.prod(np.linalg.norm(cols, axis=-2), axis=-1)
    bad = ~np.isfinite(p) | (np.abs(p) <= 1e-13 * bound)
    if np.any(bad):
        raise DegenerateChainError(f"{what} vanishes", grid.t[bad])


def wronsky_blocks(pairs: Sequence[UPair], f0) -> WronskyBlocks:
    """Blocks ``p1, p2, r1, r2`` of the Wronsky matrix for transformation functions on ``f0``.

    Derivatives to order ``n`` come from :func:`derivative_stack`.
    """
    f0 = as_potential(f0)
    n = len(pairs)
    if n < 1:
        raise ValidationError("need at least one transformation function")
    if n > 6:
        raise ValidationError("chains longer than 6 are not supported")
    grid = pairs[0].grid
    fj = f0.jet(grid, max(n - 1, 0))
    U_jets = []
    for p in pairs:
        Lam = np.diag([1j * p.R, -1j * p.R])
        U_jets.append(derivative_stack(p.U_scaled(), fj, Lam, n))
    u = [J.data[:, :, 0, 0] for J in U_jets]
    ut = [J.data[:, :, 1, 0] for J in U_jets]
    rows_p = list(range(n))
    rows_r = list(range(n - 1)) + [n]
    M1, M2 = _wronskian_rows(u, rows_p), _wronskian_rows(ut, rows_p)
    p1, p2 = np.linalg.det(M1), np.linalg.det(M2)
    _check_regular(p1, M1, grid, "Wronskian of u")
    _check_regular(p2, M2, grid, "Wronskian of ut")
    r1 = np.linalg.det(_wronskian_rows(u, rows_r))
    r2 = np.linalg.det(_wronskian_rows(ut, rows_r))
    log_scale = np.sum([p.log_mod for p in pairs], axis=0)
    return WronskyBlocks(n, p1, p2, r1, r2, log_scale, tuple(U_jets), tuple(p.R for p in pairs), grid)


def wronsky_matrix(blocks: WronskyBlocks, replace: tuple[int, int] | None = None) -> np.ndarray:
    """Full ``2n x 2n`` matrix ``P`` (column-scaled), or ``P_ij`` when ``replace=(i, j)``.

    ``P_ij`` replaces row ``j`` of the last block row ``U_k^(n-1)`` by row
    ``i`` of ``U_k^(n)`` (indices 1-based as in the usual notation).
    """
    n = blocks.n
    N = blocks.p1.size
    P = np.zeros((N, 2 * n, 2 * n), dtype=complex)
    for k, J in enumerate(blocks.U_jets):
        for j in range(n):
            P[:, 2 * j:2 * j + 2, 2 * k:2 * k + 2] = J.data[j]
        if replace is not None:
            i, jj = replace
            P[:, 2 * (n - 1) + jj - 1, 2 * k:2 * k + 2] = J.data[n][:, i - 1, :]
    return P


def potential_n_fold(blocks: WronskyBlocks, f0, gate: float = REALITY_GATE):
    """``f_n = f0 - i (r1/p1 - r2/p2)`` as a sampled potential.

    Raises
    ------
    RealityViolationError
        The imaginary part exceeds ``gate`` (relative to ``max(1, |f_n|)``).
    """
    from .core import SampledPotential

    f0 = as_potential(f0)
    df = blocks.delta_f
    fn = f0.samples(blocks.grid) + df.real
    scale = max(1.0, float(np.max(np.abs(fn))))
    bad = np.abs(df.imag) > gate * scale
    if np.any(bad):
        raise RealityViolationError(
            f"transformed potential has imaginary part {np.max(np.abs(df.imag)):.3g}", blocks.grid.t[bad]
        )
    return SampledPotential(blocks.grid, fn)


def apply_L0n(blocks: WronskyBlocks, f0, psi: SpinSolution, gate: float = DEFAULT_SOLUTION_GATE,
              check: bool = True) -> SpinSolution:
    """``phi_j = |P_jE| / |P|`` for ``j = 1, 2``.

    ``P_jE`` borders ``P`` with the column ``(psi, psi', ..., psi^(n-1))``
    and the row ``(row j of U_k^(n), psi_j^(n))``.
    """
    f0 = as_potential(f0)
    if check:
        res = spin_residual(psi, f0)
        if res > gate:
            raise PreconditionError(f"input is not a solution of the source equation (residual {res:.3g})")
    n = blocks.n
    pj = spin_jet(psi, f0, n).data  # (n+1, N, 2)
    P = wronsky_matrix(blocks)
    detP = np.linalg.det(P)
    N = detP.size
    out = np.empty((N, 2), dtype=complex)
    for j in range(2):
        M = np.zeros((N, 2 * n + 1, 2 * n + 1), dtype=complex)
        M[:, : 2 * n, : 2 * n] = P
        for r in range(n):
            M[:, 2 * r:2 * r + 2, 2 * n] = pj[r]
        for k, J in enumerate(blocks.U_jets):
            M[:, 2 * n, 2 * k:2 * k + 2] = J.data[n][:, j, :]
        M[:, 2 * n, 2 * n] = pj[n][:, j]
        out[:, j] = np.linalg.det(M) / detP
    return SpinSolution.from_psi(psi.grid, out, psi.xi, psi.energy)


# ---------------------------------------------------------------------------
# Two-fold, distinct constants, closed forms on top of the q's
# ---------------------------------------------------------------------------


def b_from_q(q) -> np.ndarray:
    """``B = (1 - i q)/(1 + i q)`` (unimodular for real ``q``)."""
    # exp(-2i arctan q) is the same Moebius map and also covers q = +-inf
    return np.exp(-2j * np.arctan(np.asarray(q, dtype=float)))


def twofold_distinct_f(f0, R1: float, R2: float, q1, q2, grid: TimeGrid):
    """Two-fold potential for distinct constants from the two ``q``'s.

    ``f2 = f0 - i (R2^2 - R1^2) [R2 (B2 - B2*) - R1 (B1 - B1*)] / |R2 B2 - R1 B1|^2``
    with ``B_k = u_k/ut_k``.  This is ``-i (r1/p1 - r2/p2)`` written out for
    ``n = 2``: ``u_k' / u_k = -i f0 + R_k/B_k`` and
    ``u_k'' / u_k = R_k^2 - f0^2 - i f0'``.
    """
    from .core import SampledPotential

    f = as_potential(f0).samples(grid)
    if R1 == R2:
        return SampledPotential(grid, f)
    B1, B2 = b_from_q(q1), b_from_q(q2)
    den = np.abs(R2 * B2 - R1 * B1) ** 2
    if np.any(den == 0):
        raise NumericalSingularityError("two-fold potential is singular", grid.t[den == 0])
    num = R2 * (B2 - np.conj(B2)) - R1 * (B1 - np.conj(B1))
    f2 = f - 1j * (R2**2 - R1**2) * num / den
    return SampledPotential(grid, f2.real)


@dataclass(frozen=True)
class SecondOrderOp:
    """``L = d^2 + S1 d + S2`` with ``S = diag(s, conj(s))``."""

    s1: np.ndarray
    s2: np.ndarray
    f0: PotentialFn
    grid: TimeGrid

    @property
    def S1(self) -> np.ndarray:
        return _diag_pair(self.s1)

    @property
    def S2(self) -> np.ndarray:
        return _diag_pair(self.s2)

    def apply(self, psi: SpinSolution, gate: float = DEFAULT_SOLUTION_GATE, check: bool = True) -> SpinSolution:
        if check:
            res = spin_residual(psi, self.f0)
            if res > gate:
                raise PreconditionError(f"input is not a solution of the source equation (residual {res:.3g})")
        pj = spin_jet(psi, self.f0, 2).data
        out = pj[2] + np.einsum("nij,nj->ni", self.S1, pj[1]) + np.einsum("nij,nj->ni", self.S2, pj[0])
        return SpinSolution.from_psi(psi.grid, out, psi.xi, psi.energy)


def _diag_pair(s: np.ndarray) -> np.ndarray:
    S = np.zeros((s.size, 2, 2), dtype=complex)
    S[:, 0, 0] = s
    S[:, 1, 1] = np.conj(s)
    return S


def build_L02(f0, R1: float, R2: float, B1, B2, grid: TimeGrid) -> SecondOrderOp:
    """Second-order intertwiner for two distinct constants in terms of ``B_k``.

    ``s1 = (R1^2 - R2^2)/den``,
    ``s2 = i f0' + f0^2 + [R1 R2 (R2 B1* - R1 B2*) - i f0 (R2^2 - R1^2)]/den``,
    ``den = R2 B2* - R1 B1*``.
    """
    f0 = as_potential(f0)
    B1c, B2c = np.conj(np.asarray(B1)), np.conj(np.asarray(B2))
    den = R2 * B2c - R1 * B1c
    if np.any(den == 0):
        raise NumericalSingularityError("second-order intertwiner is singular", grid.t[den == 0])
    fj = f0.jet(grid, 1).data
    f, fd = fj[0], fj[1]
    s1 = (R1**2 - R2**2) / den
    s2 = 1j * fd + f * f + (R1 * R2 * (R2 * B1c - R1 * B2c) - 1j * f * (R2**2 - R1**2)) / den
    return SecondOrderOp(s1, s2, f0, grid)


__all__ = [
    "REALITY_GATE", "inverse_chi", "companion_chi", "chain_step_coinciding_chi",
    "shift_from_closed_form_constant", "chain_step_coinciding", "ChainState", "iterate_chain",
    "WronskyBlocks", "wronsky_blocks", "wronsky_matrix", "potential_n_fold", "apply_L0n",
    "b_from_q", "twofold_distinct_f", "SecondOrderOp", "build_L02",
]
