"""One-fold Darboux step for the spin equation.

A step with factorization constant ``R`` uses the matrix transformation
function ``U = [[u, u], [ut, -ut]]`` solving ``gamma U' + V U = U Lam`` with
``Lam = diag(iR, -iR)``.  Its columns are spinor solutions at energies
``+iR`` and ``-iR``; the first one, ``(u, ut)``, fixes everything:

    u' = -i f u + R ut,        ut' = R u + i f ut,        ut = conj(u) e^{iC}

``u`` grows like ``exp(R t)`` in general, so it is stored as a log-modulus
``ell`` plus a unit direction.  ``W = U' U^{-1} = diag(w, conj(w))`` with
``w = -i f + R ut/u`` and the new potential is ``f1 = f + 2 Im w``.  All
these quantities are independent of the modulus, so nothing downstream ever
needs ``exp(ell)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    GAMMA_INV,
    POTENTIAL_UNIT,
    ChiSolution,
    PotentialFn,
    SampledPotential,
    SpinSolution,
    TimeGrid,
    as_potential,
    cumulative_integral,
    derivative_stack,
    spin_residual,
)
from .errors import (
    ChiZeroCrossingError,
    NumericalSingularityError,
    PreconditionError,
    SingularCoefficientError,
    ValidationError,
)
from .jets import Jet, diag_jet

DEFAULT_SOLUTION_GATE = 1e-6


def _sign_changes(x: np.ndarray) -> np.ndarray:
    s = np.sign(x)
    return np.nonzero((s[1:] * s[:-1] < 0) | (s[1:] == 0))[0] + 1


def _zero_times(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    idx = np.concatenate([np.nonzero(x == 0)[0], _sign_changes(x)])
    return t[np.unique(idx)]


# ---------------------------------------------------------------------------
# q, the transformation function and W
# ---------------------------------------------------------------------------


def q_from_chi(chi: ChiSolution, f0, R: float) -> np.ndarray:
    """``q = R/f - f'/(2 f^2) - chi'/(f chi)`` on the grid of ``chi``.

    Raises
    ------
    SingularCoefficientError
        ``f0`` vanishes on the grid.
    ChiZeroCrossingError
        ``chi`` has a zero (or changes sign) on the grid.
    """
    f0 = as_potential(f0)
    t = chi.grid.t
    f = f0.samples(chi.grid)
    if np.any(f == 0) or _sign_changes(f).size:
        raise SingularCoefficientError("potential vanishes, q is undefined", _zero_times(f, t))
    c = np.asarray(chi.chi, dtype=float)
    if np.any(c == 0) or _sign_changes(c).size:
        raise ChiZeroCrossingError("chi crosses zero", _zero_times(c, t))
    fd = f0.jet(chi.grid, 1)[1] if f0.kind != "constant" else np.zeros_like(t)
    return R / f - fd / (2.0 * f * f) - chi.chi_dot / (f * c)


def _direction_from_q(q: np.ndarray) -> np.ndarray:
    """``a = (1 - i q)/sqrt(1 + q^2)``, the unit direction of ``u`` (phase removed)."""
    return np.exp(-1j * np.arctan(q))


@dataclass(frozen=True)
class UPair:
    """The pair ``(u, ut)`` in overflow-safe form.

    ``u = exp(log_mod) * direction[:, 0]`` and
    ``ut = exp(log_mod) * direction[:, 1]``, with unit-modulus directions.
    """

    grid: TimeGrid
    R: float
    log_mod: np.ndarray
    direction: np.ndarray  # (N, 2), |entries| = 1

    @property
    def phase_C(self) -> float:
        """``arg u + arg ut`` (constant), taken at the first node."""
        return float(np.angle(self.direction[0, 0] * self.direction[0, 1]))

    @property
    def u(self) -> np.ndarray:
        return np.exp(self.log_mod) * self.direction[:, 0]

    @property
    def u_tilde(self) -> np.ndarray:
        return np.exp(self.log_mod) * self.direction[:, 1]

    @property
    def B(self) -> np.ndarray:
        """``B = u/ut = (1 - i q)/(1 + i q)``; unimodular."""
        return self.direction[:, 0] / self.direction[:, 1]

    @property
    def a(self) -> np.ndarray:
        """Direction of ``u`` with the constant phase ``C/2`` removed."""
        return self.direction[:, 0] * np.exp(-0.5j * self.phase_C)

    @property
    def q(self) -> np.ndarray:
        """``q = tan(phi)`` with ``a = exp(-i phi)``; infinite where ``Re a = 0``."""
        a = self.a
        with np.errstate(divide="ignore", invalid="ignore"):
            return -a.imag / a.real

    def U_scaled(self) -> np.ndarray:
        """``exp(-log_mod) U``, shape ``(N, 2, 2)``."""
        d = self.direction
        U = np.empty((d.shape[0], 2, 2), dtype=complex)
        U[:, 0, 0] = U[:, 0, 1] = d[:, 0]
        U[:, 1, 0] = d[:, 1]
        U[:, 1, 1] = -d[:, 1]
        return U

    def normalized_at_start(self) -> "UPair":
        return UPair(self.grid, self.R, self.log_mod - self.log_mod[0], self.direction)

    @classmethod
    def from_column(cls, grid: TimeGrid, R: float, column: np.ndarray, log_scale=0.0) -> "UPair":
        """Build from a sampled column ``exp(-log_scale) * (u, ut)``.

        The column may carry any positive per-node rescaling; it is absorbed
        into ``log_mod``.
        """
        column = np.asarray(column, dtype=complex)
        m = np.abs(column[:, 0])
        if np.any(m == 0) or not np.all(np.isfinite(m)):
            bad = ~(np.isfinite(m) & (m > 0))
            raise NumericalSingularityError("transformation function vanishes", grid.t[bad])
        direction = column / m[:, None]
        return cls(grid, float(R), np.log(m) + np.broadcast_to(log_scale, m.shape), direction)


def build_u_pair(q, R: float, grid: TimeGrid, phase_C: float = 0.0) -> UPair:
    """``u = (1 - i q)/sqrt(1 + q^2) exp(R int (1 - q^2)/(1 + q^2)) e^{iC/2}``.

    ``ut`` has ``1 + i q`` in place of ``1 - i q``.  The exponent is kept as
    a log-modulus (lower limit ``grid.t_start``) so long grids never overflow.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (grid.n_points,):
        raise ValidationError(f"q must have {grid.n_points} samples, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise NumericalSingularityError("q is not finite", grid.t[~np.isfinite(q)])
    a = _direction_from_q(q)
    log_mod = float(R) * cumulative_integral((1.0 - q * q) / (1.0 + q * q), grid)
    ph = np.exp(0.5j * phase_C)
    direction = np.stack([a * ph, np.conj(a) * ph], axis=-1)
    return UPair(grid, float(R), log_mod, direction)


def build_W(q, R: float, f0, grid: TimeGrid) -> np.ndarray:
    """``W = diag(w, conj(w))``, ``w = -i f + R (1 + i q)^2/(1 + q^2)``; shape ``(N, 2, 2)``."""
    q = np.asarray(q, dtype=float)
    f = as_potential(f0).samples(grid)
    w = -1j * f + R * (1 + 1j * q) ** 2 / (1 + q * q)
    W = np.zeros((grid.n_points, 2, 2), dtype=complex)
    W[:, 0, 0] = w
    W[:, 1, 1] = np.conj(w)
    return W


def transform_potential(f0, R: float, q, grid: TimeGrid) -> SampledPotential:
    """``f1 = 4 R q/(1 + q^2) - f0`` as a sampled potential (spline derivatives)."""
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise NumericalSingularityError("q is not finite", grid.t[~np.isfinite(q)])
    f = as_potential(f0).samples(grid)
    return SampledPotential(grid, 4.0 * R * q / (1.0 + q * q) - f)


# ---------------------------------------------------------------------------
# A complete step
# ---------------------------------------------------------------------------


class TransformedPotential(SampledPotential):
    """Output potential of a :class:`TransformStep`.

    Node values are exact; node derivatives of any order are generated from
    the step's own differential equations (so they are as good as the input
    potential's).  Off-grid evaluation falls back to the spline.
    """

    kind = "transformed"

    def __init__(self, step: "TransformStep"):
        self._step = step
        self._cache: Jet | None = None
        super().__init__(step.grid, step.f_next_values(), node_jet=self._jet_for)

    def _jet_for(self, order: int) -> Jet:
        if self._cache is None or self._cache.order < order:
            self._cache = self._step.f_next_jet(order)
        return self._cache


@dataclass(frozen=True)
class TransformStep:
    """One Darboux step ``f_prev -> f_next`` with constant ``R``."""

    f_prev: PotentialFn
    pair: UPair
    label: str = ""
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    # -- basic data ---------------------------------------------------------

    @property
    def grid(self) -> TimeGrid:
        return self.pair.grid

    @property
    def R(self) -> float:
        return self.pair.R

    @property
    def Lam(self) -> np.ndarray:
        return np.diag([1j * self.R, -1j * self.R])

    @property
    def q(self) -> np.ndarray:
        return self.pair.q

    @property
    def u(self) -> np.ndarray:
        return self.pair.u

    @property
    def u_tilde(self) -> np.ndarray:
        return self.pair.u_tilde

    @property
    def phase_C(self) -> float:
        return self.pair.phase_C

    @property
    def w1(self) -> np.ndarray:
        d = self.pair.direction
        return -1j * self.f_prev.samples(self.grid) + self.R * d[:, 1] / d[:, 0]

    @property
    def W(self) -> np.ndarray:
        w = self.w1
        W = np.zeros((w.size, 2, 2), dtype=complex)
        W[:, 0, 0] = w
        W[:, 1, 1] = np.conj(w)
        return W

    def f_next_values(self) -> np.ndarray:
        return self.f_prev.samples(self.grid) + 2.0 * self.w1.imag

    @property
    def f_next(self) -> TransformedPotential:
        if "f_next" not in self._memo:
            self._memo["f_next"] = TransformedPotential(self)
        return self._memo["f_next"]

    # -- derivative jets ----------------------------------------------------

    def column_jet(self, order: int) -> Jet:
        """Jets of the scaled column ``(u, ut)`` (energy ``iR`` solution)."""
        fj = self.f_prev.jet(self.grid, max(order - 1, 0))
        return derivative_stack(self.pair.direction, fj, 1j * self.R, order)

    def U_jet(self, order: int) -> Jet:
        """Jets of ``exp(-log_mod) U`` from ``gamma U' + V U = U Lam``."""
        fj = self.f_prev.jet(self.grid, max(order - 1, 0))
        return derivative_stack(self.pair.U_scaled(), fj, self.Lam, order)

    def w_jet(self, order: int) -> Jet:
        col = self.column_jet(order + 1)
        u = Jet(col.data[..., 0])
        return u.d() / u.truncate(order)

    def W_jet(self, order: int) -> Jet:
        w = self.w_jet(order)
        return diag_jet(w, w.conj())

    def f_next_jet(self, order: int) -> Jet:
        w = self.w_jet(order)
        fp = self.f_prev.jet(self.grid, order)
        return Jet(fp.data + 2.0 * w.data.imag)

    # -- acting on solutions ------------------------------------------------

    def apply_values(self, psi: np.ndarray, E: complex) -> np.ndarray:
        """``L psi = psi' - W psi`` with ``psi'`` from the ``f_prev`` equation."""
        psi = np.asarray(psi, dtype=complex)
        f = self.f_prev.samples(self.grid)
        dpsi = np.einsum("ij,nj->ni", GAMMA_INV, E * psi - f[:, None] * (psi @ POTENTIAL_UNIT.T))
        w = self.w1
        out = np.empty_like(dpsi)
        out[:, 0] = dpsi[:, 0] - w * psi[:, 0]
        out[:, 1] = dpsi[:, 1] - np.conj(w) * psi[:, 1]
        return out


def make_step(f0, R: float, grid: TimeGrid, *, chi: ChiSolution | None = None, q=None,
              phase_C: float = 0.0, label: str = "") -> TransformStep:
    """Build a step from either a zero-free ``chi`` or a sampled ``q``."""
    f0 = as_potential(f0)
    if (chi is None) == (q is None):
        raise ValidationError("give exactly one of chi or q")
    if chi is not None:
        q = q_from_chi(chi, f0, R)
    return TransformStep(f0, build_u_pair(q, R, grid, phase_C), label)


def apply_L1(step: TransformStep, psi: SpinSolution, gate: float = DEFAULT_SOLUTION_GATE,
             check: bool = True) -> SpinSolution:
    """Map a solution of the ``f_prev`` equation to one of the ``f_next`` equation.

    Raises
    ------
    PreconditionError
        ``psi`` is not a solution of the ``f_prev`` equation (relative
        residual above ``gate``).
    """
    if psi.grid != step.grid:
        raise ValidationError("solution and step live on different grids")
    if check:
        res = spin_residual(psi, step.f_prev)
        if res > gate:
            raise PreconditionError(f"input is not a solution of the source equation (residual {res:.3g})")
    out = step.apply_values(psi.psi, psi.E)
    return SpinSolution.from_psi(step.grid, out, psi.xi, psi.energy)


# ---------------------------------------------------------------------------
# Constant background: closed forms
# ---------------------------------------------------------------------------


def u_const_f0(f0: float, R: float, grid: TimeGrid, init=(1 + 1j) / np.sqrt(2)) -> UPair:
    """Exact ``u`` for constant ``f0`` (phase ``C = 0``).

    With ``u = x + i y`` the step equation is ``[x, y]' = M [x, y]``,
    ``M = [[R, f0], [-f0, -R]]``, ``M^2 = -(f0^2 - R^2) I``, so
    ``exp(M t) = c(t) I + s(t) M`` with trigonometric, linear or hyperbolic
    ``c, s``.  The default start value gives ``q(t_start) = -1``.
    """
    t = grid.t - grid.t_start
    nu2 = f0 * f0 - R * R
    log_scale = 0.0
    if nu2 > 0:
        nu = np.sqrt(nu2)
        c, s = np.cos(nu * t), np.sin(nu * t) / nu
    elif nu2 < 0:
        # cosh and sinh with the common factor exp(nu t) moved into the log-modulus
        nu = np.sqrt(-nu2)
        e = np.exp(-2.0 * nu * t)
        c, s = 0.5 * (1.0 + e), 0.5 * (1.0 - e) / nu
        log_scale = nu * t
    else:
        c, s = np.ones_like(t), t
    x0, y0 = complex(init).real, complex(init).imag
    x = c * x0 + s * (R * x0 + f0 * y0)
    y = c * y0 + s * (-f0 * x0 - R * y0)
    u = x + 1j * y
    col = np.stack([u, np.conj(u)], axis=-1)
    return UPair.from_column(grid, R, col, log_scale)


__all__ = [
    "DEFAULT_SOLUTION_GATE", "q_from_chi", "UPair", "build_u_pair", "build_W", "transform_potential",
    "TransformedPotential", "TransformStep", "make_step", "apply_L1", "u_const_f0",
]
