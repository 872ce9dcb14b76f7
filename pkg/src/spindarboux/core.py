"""Grids, potentials and the ODE layer for the spin equation in Dirac form.

Conventions (hbar = 1)::

    spin equation     i A1' - f A1 = xi A2,   i A2' + f A2 = xi A1
    Dirac form        h Psi = E Psi,  h = gamma d/dt + f(t) * K,  E = xi
                      gamma = i sigma_1,  K = i sigma_2 = [[0, 1], [-1, 0]]
    pseudo-conjugation J = sigma_1

Every sampled function lives on a uniform :class:`TimeGrid`.  Derivatives of
solutions are produced from the differential equations themselves
(:func:`derivative_stack`), never by differencing samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline

from .errors import (
    CapabilityError,
    IntegrationDomainError,
    PreconditionError,
    SingularCoefficientError,
    ValidationError,
)
from .jets import Jet

# ---------------------------------------------------------------------------
# Named 2x2 constants
# ---------------------------------------------------------------------------

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)
GAMMA = 1j * SIGMA_X
GAMMA_INV = -1j * SIGMA_X
J = SIGMA_X
# potential matrix per unit f: V(t) = f(t) * POTENTIAL_UNIT = i sigma_2 f(t)
POTENTIAL_UNIT = 1j * SIGMA_Y


def lambda_matrix(R: float) -> np.ndarray:
    """Factorization constant ``diag(iR, -iR)``."""
    return np.diag([1j * R, -1j * R])


# ---------------------------------------------------------------------------
# Time grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_start, ..., t_end`` with ``n_points`` nodes."""

    t_start: float
    t_end: float
    n_points: int = 4001

    def __post_init__(self):
        if not (np.isfinite(self.t_start) and np.isfinite(self.t_end)):
            raise ValidationError("grid bounds must be finite")
        if self.t_end <= self.t_start:
            raise ValidationError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValidationError(f"n_points must be an integer >= 2, got {self.n_points}")

    @property
    def h(self) -> float:
        return (self.t_end - self.t_start) / (self.n_points - 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_points)

    def refined(self, factor: int = 2) -> "TimeGrid":
        """Same interval with the step divided by ``factor``."""
        return TimeGrid(self.t_start, self.t_end, (self.n_points - 1) * factor + 1)

    def __len__(self) -> int:
        return self.n_points


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------


class PotentialFn:
    """Real scalar potential ``f(t)`` with derivative access.

    Subclasses implement :meth:`derivative`.  ``max_order`` is the highest
    derivative the representation can supply (``None`` means unlimited).
    """

    kind = "abstract"
    max_order: int | None = None

    def derivative(self, t, order: int = 1) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, t) -> np.ndarray:
        return self.derivative(t, 0)

    def _check_order(self, order: int) -> None:
        if self.max_order is not None and order > self.max_order:
            raise CapabilityError(
                f"{self.kind} potential supplies derivatives up to order {self.max_order}, "
                f"order {order} was requested"
            )

    def jet(self, grid: "TimeGrid | np.ndarray", order: int) -> Jet:
        """Derivatives ``f, f', ..., f^(order)`` on the grid nodes."""
        self._check_order(order)
        t = grid.t if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
        return Jet(np.stack([np.broadcast_to(self.derivative(t, k), t.shape) for k in range(order + 1)]))

    def samples(self, grid: TimeGrid) -> np.ndarray:
        return np.broadcast_to(np.asarray(self(grid.t), dtype=float), (grid.n_points,)).copy()


class ConstantPotential(PotentialFn):
    kind = "constant"

    def __init__(self, value: float):
        self.value = float(value)

    def derivative(self, t, order: int = 1):
        t = np.asarray(t, dtype=float)
        return np.full(t.shape, self.value if order == 0 else 0.0)

    def __repr__(self) -> str:
        return f"ConstantPotential({self.value!r})"


def _as_polynomial(p) -> Polynomial:
    # Polynomial(Polynomial(...)) would build object-valued coefficients
    return Polynomial(p.coef) if isinstance(p, Polynomial) else Polynomial(np.asarray(p, dtype=float))


class RationalPotential(PotentialFn):
    """``f = N(t)/D(t)`` with polynomial numerator and denominator.

    Derivatives are exact: ``f^(k) = N_k / D^(k+1)`` with
    ``N_{k+1} = N_k' D - (k+1) N_k D'``.
    """

    kind = "rational"

    def __init__(self, numerator: Polynomial, denominator: Polynomial):
        self.numerator = _as_polynomial(numerator)
        self.denominator = _as_polynomial(denominator)
        self._numerators = [self.numerator]

    def _nk(self, k: int) -> Polynomial:
        d = self.denominator
        while len(self._numerators) <= k:
            j = len(self._numerators) - 1
            nj = self._numerators[j]
            self._numerators.append(nj.deriv() * d - (j + 1) * nj * d.deriv())
        return self._numerators[k]

    def derivative(self, t, order: int = 1):
        t = np.asarray(t, dtype=float)
        return self._nk(order)(t) / self.denominator(t) ** (order + 1)


class FunctionPotential(PotentialFn):
    """Closed form given as callables ``[f, f', f'', ...]``."""

    kind = "closed-form"

    def __init__(self, derivatives: Sequence[Callable[[np.ndarray], np.ndarray]], name: str = ""):
        self._funcs = list(derivatives)
        self.max_order = len(self._funcs) - 1
        self.name = name

    def derivative(self, t, order: int = 1):
        self._check_order(order)
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self._funcs[order](t), t.shape)


class SampledPotential(PotentialFn):
    """Potential known on grid nodes; cubic-spline interpolation off-grid.

    Spline derivatives lose accuracy (first derivative O(h^3), second
    O(h^2)).  When exact node derivatives are known (e.g. produced by a
    Darboux step) they can be attached as ``node_jet``, either a :class:`Jet`
    or a callable ``order -> Jet``; :meth:`jet` then uses them on the same
    grid at any order they support.
    """

    kind = "sampled"
    max_order = 3

    def __init__(self, grid: TimeGrid, values, node_jet=None):
        values = np.asarray(values)
        if values.shape != (grid.n_points,):
            raise ValidationError(f"expected {grid.n_points} samples, got shape {values.shape}")
        if np.iscomplexobj(values):
            values = values.real
        self.grid = grid
        self.values = values.astype(float)
        self._node_jet = node_jet
        self._spline = None

    @property
    def has_exact_jet(self) -> bool:
        return self._node_jet is not None

    def derivative(self, t, order: int = 1):
        self._check_order(order)
        if self._spline is None:
            self._spline = CubicSpline(self.grid.t, self.values)
        return self._spline(np.asarray(t, dtype=float), order)

    def jet(self, grid, order: int) -> Jet:
        same = isinstance(grid, TimeGrid) and grid == self.grid
        if same and self._node_jet is not None:
            nj = self._node_jet(order) if callable(self._node_jet) else self._node_jet
            if order > nj.order:
                raise CapabilityError(f"node jet carries {nj.order} derivatives, order {order} was requested")
            return Jet(np.real(nj.data[: order + 1]))
        if same and order == 0:
            return Jet(self.values[None, :].copy())
        return super().jet(grid, order)

    def samples(self, grid: TimeGrid) -> np.ndarray:
        if grid == self.grid:
            return self.values.copy()
        return super().samples(grid)


def as_potential(f) -> PotentialFn:
    if isinstance(f, PotentialFn):
        return f
    if np.isscalar(f):
        return ConstantPotential(float(f))
    raise TypeError(f"cannot interpret {type(f).__name__} as a potential")


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpinSolution:
    """Amplitudes ``(A1, A2)`` on a grid.

    ``energy`` is the Dirac eigenvalue ``E`` (the spin equation has
    ``E = xi``); it is kept separately so transformed solutions at other
    energies can be represented too.
    """

    grid: TimeGrid
    A1: np.ndarray
    A2: np.ndarray
    xi: float
    energy: float | None = None

    @property
    def E(self) -> float:
        return self.xi if self.energy is None else self.energy

    @property
    def psi(self) -> np.ndarray:
        """Stacked spinor, shape ``(N, 2)``."""
        return np.stack([self.A1, self.A2], axis=-1)

    @property
    def norm(self) -> np.ndarray:
        return np.abs(self.A1) ** 2 + np.abs(self.A2) ** 2

    def scaled(self, c: complex) -> "SpinSolution":
        return SpinSolution(self.grid, c * self.A1, c * self.A2, self.xi, self.energy)

    @classmethod
    def from_psi(cls, grid: TimeGrid, psi: np.ndarray, xi: float, energy: float | None = None):
        return cls(grid, np.asarray(psi[:, 0]), np.asarray(psi[:, 1]), xi, energy)


@dataclass(frozen=True)
class ChiSolution:
    grid: TimeGrid
    chi: np.ndarray
    chi_dot: np.ndarray

    def wronskian(self, other: "ChiSolution") -> np.ndarray:
        return self.chi * other.chi_dot - self.chi_dot * other.chi


# ---------------------------------------------------------------------------
# Integrators
# ---------------------------------------------------------------------------


def _checked(values: np.ndarray, t: np.ndarray, what: str) -> np.ndarray:
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise IntegrationDomainError(f"non-finite {what}", np.atleast_1d(t)[np.atleast_1d(bad)])
    return values


def _rk4_propagators(A0: np.ndarray, Am: np.ndarray, A1: np.ndarray, h: float) -> np.ndarray:
    """One-step RK4 maps for a linear system ``y' = A(t) y``.

    ``A0``, ``Am``, ``A1`` hold the coefficient matrix at the start, midpoint
    and end of every step, shape ``(steps, d, d)``.  The classical RK4 stages
    are linear in ``y``, so each step is ``y_{i+1} = P_i y_i`` and all
    ``P_i`` can be formed at once.
    """
    eye = np.eye(A0.shape[-1], dtype=A0.dtype)
    K1 = A0
    K2 = Am @ (eye + 0.5 * h * K1)
    K3 = Am @ (eye + 0.5 * h * K2)
    K4 = A1 @ (eye + h * K3)
    return eye + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)


def _propagate(P: np.ndarray, y0: np.ndarray) -> np.ndarray:
    """Apply step maps sequentially; ``y0`` has shape ``(d,)`` or ``(d, k)``."""
    out = np.empty((P.shape[0] + 1,) + y0.shape, dtype=np.result_type(P, y0))
    out[0] = y = y0
    for i in range(P.shape[0]):
        y = P[i] @ y
        out[i + 1] = y
    return out


def _coefficient_samples(fn, grid: TimeGrid, what: str):
    t = grid.t
    mid = t[:-1] + 0.5 * grid.h
    nodes = _checked(np.asarray(fn(t), dtype=float) * np.ones_like(t), t, what)
    mids = _checked(np.asarray(fn(mid), dtype=float) * np.ones_like(mid), mid, what)
    return nodes, mids


def _spin_matrix(f: np.ndarray, E: complex) -> np.ndarray:
    A = np.empty(f.shape + (2, 2), dtype=complex)
    A[..., 0, 0] = -1j * f
    A[..., 0, 1] = -1j * E
    A[..., 1, 0] = -1j * E
    A[..., 1, 1] = 1j * f
    return A


def integrate_spin_batch(f, xi: float, inits, grid: TimeGrid, energy: float | None = None) -> list:
    """Integrate several initial spinors at once; returns one solution per init."""
    f = as_potential(f)
    E = float(xi if energy is None else energy)
    Y0 = np.asarray(inits, dtype=complex)
    if Y0.ndim == 1:
        Y0 = Y0[None, :]
    if Y0.shape[-1] != 2:
        raise ValidationError("initial spinors must have two components")
    nodes, mids = _coefficient_samples(f, grid, "potential sample")
    P = _rk4_propagators(_spin_matrix(nodes[:-1], E), _spin_matrix(mids, E), _spin_matrix(nodes[1:], E), grid.h)
    out = _propagate(P, Y0.T)
    return [SpinSolution(grid, out[:, 0, k], out[:, 1, k], float(xi), energy) for k in range(Y0.shape[0])]


def integrate_spin(
    f,
    xi: float,
    init,
    grid: TimeGrid,
    energy: float | None = None,
) -> SpinSolution:
    """Integrate ``Psi' = -i [[f, E], [E, -f]] Psi`` with classical RK4.

    Parameters
    ----------
    f : PotentialFn or float
        Potential; evaluated on nodes and RK4 midpoints.
    xi : float
        Coupling.  The Dirac eigenvalue ``E`` defaults to ``xi``.
    init : sequence of two complex numbers
        ``(A1, A2)`` at ``grid.t_start``; returned exactly as the first sample.
    grid : TimeGrid
    energy : float, optional
        Eigenvalue ``E`` when it should differ from ``xi``.

    Returns
    -------
    SpinSolution
    """
    y0 = np.asarray(init, dtype=complex)
    if y0.shape != (2,):
        raise ValidationError(f"init must be a pair of amplitudes, got shape {y0.shape}")
    return integrate_spin_batch(f, xi, y0[None, :], grid, energy)[0]


def chi_coefficient(f0: PotentialFn, R: float, t) -> np.ndarray:
    """``k(t)`` in ``chi'' + k chi = 0``.

    ``k = f^2 + (ln f)''/2 - (R - f'/(2f))^2``.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f0(t), dtype=float) * np.ones_like(t)
    zero = f == 0
    if np.any(zero):
        raise SingularCoefficientError("potential vanishes in the chi equation", t[zero])
    sign = np.sign(f)
    crossing = np.nonzero(sign[1:] != sign[:-1])[0]
    if crossing.size:
        raise SingularCoefficientError("potential changes sign in the chi equation", t[crossing])
    f1 = f0.derivative(t, 1)
    f2 = f0.derivative(t, 2)
    lnf2 = f2 / f - (f1 / f) ** 2
    return f * f + 0.5 * lnf2 - (R - f1 / (2.0 * f)) ** 2


def integrate_chi(f0, R: float, grid: TimeGrid, init=(1.0, 0.0)) -> ChiSolution:
    """RK4 solution of the auxiliary second-order equation for ``chi``.

    ``init`` is ``(chi, chi')`` at ``grid.t_start``.
    """
    f0 = as_potential(f0)
    R = float(R)
    t = grid.t
    mid = t[:-1] + 0.5 * grid.h
    k_nodes = _checked(chi_coefficient(f0, R, t), t, "chi coefficient")
    k_mid = _checked(chi_coefficient(f0, R, mid), mid, "chi coefficient")

    def mat(k):
        A = np.zeros(k.shape + (2, 2))
        A[..., 0, 1] = 1.0
        A[..., 1, 0] = -k
        return A

    P = _rk4_propagators(mat(k_nodes[:-1]), mat(k_mid), mat(k_nodes[1:]), grid.h)
    out = _propagate(P, np.asarray(init, dtype=float).reshape(2))
    return ChiSolution(grid, out[:, 0], out[:, 1])


def chi_residual(chi: ChiSolution, f0, R: float, skip: int = 2) -> float:
    """Max residual of the chi equation, second derivative by a 5-point stencil.

    Used only as a validation check; ``skip`` nodes at each end are ignored.
    """
    f0 = as_potential(f0)
    c = chi.chi
    h = chi.grid.h
    d2 = (-c[4:] + 16 * c[3:-1] - 30 * c[2:-2] + 16 * c[1:-3] - c[:-4]) / (12 * h * h)
    k = chi_coefficient(f0, R, chi.grid.t[2:-2])
    res = np.abs(d2 + k * c[2:-2])
    lo = max(skip - 2, 0)
    hi = res.size - max(skip - 2, 0)
    return float(np.max(res[lo:hi]) / max(np.max(np.abs(c)), 1e-300))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


def cumulative_integral(g, grid: TimeGrid) -> np.ndarray:
    """``int_{t_start}^{t} g`` at every node, fourth-order accurate.

    Each panel ``[t_i, t_{i+1}]`` is integrated exactly for the cubic through
    its four nearest nodes (one-sided cubics on the end panels), which is
    Simpson-order accurate for every node, odd or even.  With only two or
    three nodes the trapezoid/Simpson rule is used instead.
    """
    g = np.asarray(g)
    n = grid.n_points
    if g.shape[0] != n:
        raise ValidationError(f"expected {n} samples, got {g.shape[0]}")
    if not np.all(np.isfinite(g)):
        raise ValidationError("integrand has non-finite samples")
    h = grid.h
    out = np.zeros_like(g, dtype=np.result_type(g, float))
    if n == 2:
        out[1] = 0.5 * h * (g[0] + g[1])
        return out
    if n == 3:
        out[1] = h * (5 * g[0] + 8 * g[1] - g[2]) / 12
        out[2] = h * (g[0] + 4 * g[1] + g[2]) / 3
        return out
    panels = np.empty((n - 1,) + g.shape[1:], dtype=out.dtype)
    panels[1:-1] = h * (-g[:-3] + 13 * g[1:-2] + 13 * g[2:-1] - g[3:]) / 24
    panels[0] = h * (9 * g[0] + 19 * g[1] - 5 * g[2] + g[3]) / 24
    panels[-1] = h * (9 * g[-1] + 19 * g[-2] - 5 * g[-3] + g[-4]) / 24
    out[1:] = np.cumsum(panels, axis=0)
    return out


# ---------------------------------------------------------------------------
# Derivatives from the first-order equation
# ---------------------------------------------------------------------------


def derivative_stack(values: np.ndarray, f_jet: Jet, Lam, order: int) -> Jet:
    """Derivatives of a solution of ``gamma X' + V X = X Lam``.

    ``X^(j+1) = gamma^{-1} (X^(j) Lam - sum_i C(j, i) V^(i) X^(j-i))``,
    which needs ``f`` up to order ``order - 1``.

    Parameters
    ----------
    values : array, shape (N, 2, m) or (N, 2)
        Samples of the solution (matrix or spinor).  The recurrence is
        pointwise linear, so any per-node rescaling of ``values`` carries
        through unchanged.
    f_jet : Jet
        Potential derivatives on the same nodes.
    Lam : (m, m) array or scalar
        Right eigenvalue matrix (scalar ``E`` for spinors).
    """
    values = np.asarray(values, dtype=complex)
    spinor = values.ndim == 2
    X0 = values[..., None] if spinor else values
    Lam = np.atleast_2d(np.asarray(Lam, dtype=complex))
    if order > 0 and f_jet.order < order - 1:
        raise CapabilityError(
            f"derivative order {order} needs potential derivatives up to {order - 1}, "
            f"only {f_jet.order} available"
        )
    fk = f_jet.data
    derivs = [X0]
    for j in range(order):
        acc = derivs[j] @ Lam
        for i in range(j + 1):
            acc = acc - comb(j, i) * fk[i][:, None, None] * (POTENTIAL_UNIT @ derivs[j - i])
        derivs.append(GAMMA_INV @ acc)
    data = np.stack(derivs)
    if spinor:
        data = data[..., 0]
    return Jet(data)


def spin_jet(sol: SpinSolution, f, order: int) -> Jet:
    """Derivatives of a spin solution generated from its own equation."""
    f = as_potential(f)
    fj = f.jet(sol.grid, max(order - 1, 0))
    return derivative_stack(sol.psi, fj, sol.E, order)


def spin_residual(sol: SpinSolution, f) -> float:
    """Relative residual of ``h Psi - E Psi`` with a 5-point derivative.

    A validation check only: the derivative is taken from the samples, so a
    genuine solution scores O(h^4) and anything else scores O(1).
    """
    f = as_potential(f)
    psi = sol.psi
    if sol.grid.n_points < 5:
        raise PreconditionError("residual check needs at least 5 nodes")
    h = sol.grid.h
    d1 = (-psi[4:] + 8 * psi[3:-1] - 8 * psi[1:-3] + psi[:-4]) / (12 * h)
    fv = f.samples(sol.grid)[2:-2]
    p = psi[2:-2]
    V = fv[:, None, None] * POTENTIAL_UNIT
    res = np.einsum("ij,nj->ni", GAMMA, d1) + np.einsum("nij,nj->ni", V, p) - sol.E * p
    scale = max(np.max(np.abs(psi)), 1e-300)
    return float(np.max(np.abs(res)) / scale)


__all__ = [
    "SIGMA_X", "SIGMA_Y", "SIGMA_Z", "IDENTITY", "GAMMA", "GAMMA_INV", "J", "POTENTIAL_UNIT",
    "lambda_matrix", "TimeGrid", "PotentialFn", "ConstantPotential", "RationalPotential",
    "FunctionPotential", "SampledPotential", "as_potential", "SpinSolution", "ChiSolution",
    "integrate_spin", "integrate_spin_batch", "chi_coefficient", "integrate_chi", "chi_residual", "cumulative_integral",
    "derivative_stack", "spin_jet", "spin_residual",
]
