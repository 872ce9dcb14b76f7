from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import Polynomial
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from spindarboux import (
    CapabilityError,
    ConstantPotential,
    FunctionPotential,
    IntegrationDomainError,
    RationalPotential,
    SampledPotential,
    SingularCoefficientError,
    SpinSolution,
    TimeGrid,
    ValidationError,
    chi_residual,
    cumulative_integral,
    derivative_stack,
    integrate_chi,
    integrate_spin,
    integrate_spin_batch,
    spin_jet,
    spin_residual,
)
from spindarboux.core import GAMMA, GAMMA_INV, J, POTENTIAL_UNIT, lambda_matrix

# ---------------------------------------------------------------------------
# Grid and matrices
# ---------------------------------------------------------------------------


def test_grid_basics():
    g = TimeGrid(0.0, 2.0, 5)
    assert g.h == 0.5
    np.testing.assert_allclose(g.t, [0, 0.5, 1, 1.5, 2])
    assert len(g.refined(2)) == 9
    assert g.refined(2).h == 0.25


@pytest.mark.parametrize("args", [(1.0, 1.0, 5), (2.0, 1.0, 5), (0.0, 1.0, 1), (0.0, np.inf, 5), (0.0, 1.0, 2.5)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(ValidationError):
        TimeGrid(*args)


def test_matrix_algebra():
    assert np.allclose(GAMMA @ GAMMA_INV, np.eye(2))
    assert np.allclose(J @ J, np.eye(2))
    assert np.allclose(POTENTIAL_UNIT, [[0, 1], [-1, 0]])
    assert np.allclose(lambda_matrix(0.3), np.diag([0.3j, -0.3j]))


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------


def test_rational_derivatives_match_sympy_free_expansion():
    # f = 1/(1 + t^2): f' = -2t/(1+t^2)^2, f'' = (6t^2 - 2)/(1+t^2)^3
    f = RationalPotential(Polynomial([1.0]), Polynomial([1.0, 0, 1.0]))
    t = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(f(t), 1 / (1 + t**2))
    np.testing.assert_allclose(f.derivative(t, 1), -2 * t / (1 + t**2) ** 2)
    np.testing.assert_allclose(f.derivative(t, 2), (6 * t**2 - 2) / (1 + t**2) ** 3)


@given(st.integers(0, 5))
def test_rational_derivatives_against_finite_differences(k):
    f = RationalPotential(Polynomial([1.0, -2.0, 0.5]), Polynomial([2.0, 0.0, 1.0]))
    t, h = 0.3, 1e-3
    fd = (f.derivative(t + h, k) - f.derivative(t - h, k)) / (2 * h)
    assert abs(fd - f.derivative(t, k + 1)) < 1e-4 * max(1.0, abs(f.derivative(t, k + 1)))


def test_constant_and_function_potentials():
    c = ConstantPotential(2.0)
    g = TimeGrid(0, 1, 11)
    assert np.all(c.samples(g) == 2.0)
    jet = c.jet(g, 3)
    assert np.all(jet.data[1:] == 0)
    fp = FunctionPotential([np.sin, np.cos], name="sin")
    np.testing.assert_allclose(fp.jet(g, 1).data[1], np.cos(g.t))
    with pytest.raises(CapabilityError):
        fp.jet(g, 2)


def test_sampled_potential_spline_and_capability():
    g = TimeGrid(0, 1, 201)
    s = SampledPotential(g, np.sin(g.t))
    assert s.kind == "sampled" and not s.has_exact_jet
    assert abs(s.derivative(0.5, 1) - np.cos(0.5)) < 1e-7
    with pytest.raises(CapabilityError):
        s.derivative(0.5, 4)
    with pytest.raises(ValidationError):
        SampledPotential(g, np.zeros(5))


# ---------------------------------------------------------------------------
# Spin integrator
# ---------------------------------------------------------------------------


def _expm_oracle(f0, E, init, t):
    M = -1j * np.array([[f0, E], [E, -f0]], dtype=complex)
    return np.array([expm(M * s) @ np.asarray(init, dtype=complex) for s in t])


@given(st.floats(-2, 2), st.floats(0.1, 2), st.complex_numbers(max_magnitude=2))
def test_constant_potential_matches_matrix_exponential(f0, xi, a2):
    g = TimeGrid(0.0, 5.0, 1001)
    init = (1.0, a2)
    sol = integrate_spin(f0, xi, init, g)
    want = _expm_oracle(f0, xi, init, g.t[::100])
    np.testing.assert_allclose(sol.psi[::100], want, atol=1e-8 * max(1.0, abs(a2)))


def test_time_dependent_potential_matches_solve_ivp():
    f = FunctionPotential([lambda t: np.cos(t) + 0.3 * t, lambda t: -np.sin(t) + 0.3])
    g = TimeGrid(0.0, 6.0, 2001)
    sol = integrate_spin(f, 0.8, (1.0, 0.0), g)

    def rhs(t, y):
        psi = y[:2] + 1j * y[2:]
        ft = np.cos(t) + 0.3 * t
        d = -1j * np.array([[ft, 0.8], [0.8, -ft]]) @ psi
        return np.concatenate([d.real, d.imag])

    ref = solve_ivp(rhs, (0, 6), [1, 0, 0, 0], t_eval=g.t, rtol=1e-12, atol=1e-13, method="DOP853")
    want = ref.y[:2] + 1j * ref.y[2:]
    np.testing.assert_allclose(sol.psi, want.T, atol=1e-8)


@given(st.floats(-3, 3), st.floats(0.05, 3))
def test_norm_conserved_for_real_potential(f0, xi):
    g = TimeGrid(0.0, 10.0, 2001)
    sol = integrate_spin(f0, xi, (0.6, 0.8j), g)
    assert np.max(np.abs(sol.norm - 1.0)) < 1e-8


def test_energy_parameter_defaults_to_coupling():
    g = TimeGrid(0, 1, 11)
    sol = integrate_spin(1.0, 0.5, (1, 0), g)
    assert sol.E == 0.5
    sol2 = integrate_spin(1.0, 0.5, (1, 0), g, energy=-0.25)
    assert sol2.E == -0.25


def test_batch_equals_single():
    g = TimeGrid(0, 3, 301)
    a, b = integrate_spin_batch(0.7, 1.0, [(1, 0), (0, 1)], g)
    np.testing.assert_allclose(a.psi, integrate_spin(0.7, 1.0, (1, 0), g).psi, atol=1e-14)
    np.testing.assert_allclose(b.psi, integrate_spin(0.7, 1.0, (0, 1), g).psi, atol=1e-14)


def test_fourth_order_convergence():
    errs = []
    for n in (201, 401):
        g = TimeGrid(0, 4, n)
        sol = integrate_spin(1.0, 1.0, (1, 0), g)
        errs.append(np.max(np.abs(sol.psi[-1] - _expm_oracle(1.0, 1.0, (1, 0), [4.0])[0])))
    assert 14 < errs[0] / errs[1] < 18


def test_non_finite_coefficient_reports_time():
    f = FunctionPotential([lambda t: 1.0 / (t - 0.5)])
    with np.errstate(divide="ignore"), pytest.raises(IntegrationDomainError) as exc:
        integrate_spin(f, 1.0, (1, 0), TimeGrid(0, 1, 11))
    assert exc.value.times


def test_spin_residual_separates_solutions_from_non_solutions():
    g = TimeGrid(0, 5, 1001)
    sol = integrate_spin(0.4, 1.0, (1, 0), g)
    assert spin_residual(sol, 0.4) < 1e-9
    fake = SpinSolution(g, np.cos(g.t), np.sin(g.t), 1.0)
    assert spin_residual(fake, 0.4) > 1e-2


# ---------------------------------------------------------------------------
# Derivative stacks
# ---------------------------------------------------------------------------


def test_spin_jet_matches_finite_differences():
    f = FunctionPotential([lambda t: 0.5 * np.sin(t), lambda t: 0.5 * np.cos(t), lambda t: -0.5 * np.sin(t)])
    g = TimeGrid(0, 2, 4001)
    sol = integrate_spin(f, 1.0, (1, 0.3j), g)
    jet = spin_jet(sol, f, 3)
    h = g.h
    i = 2000
    d1 = (sol.psi[i + 1] - sol.psi[i - 1]) / (2 * h)
    d2 = (sol.psi[i + 1] - 2 * sol.psi[i] + sol.psi[i - 1]) / h**2
    np.testing.assert_allclose(jet.data[1][i], d1, atol=1e-6)
    np.testing.assert_allclose(jet.data[2][i], d2, atol=1e-5)


def test_derivative_stack_is_homogeneous_under_rescaling():
    g = TimeGrid(0, 1, 21)
    fj = ConstantPotential(0.3).jet(g, 2)
    X = np.random.default_rng(0).normal(size=(21, 2, 2)) + 0j
    c = np.exp(np.linspace(0, 5, 21))[:, None, None]
    Lam = lambda_matrix(0.2)
    a = derivative_stack(X * c, fj, Lam, 3)
    b = derivative_stack(X, fj, Lam, 3)
    np.testing.assert_allclose(a.data, b.data * c[None], rtol=1e-12)


def test_derivative_stack_needs_enough_potential_derivatives():
    g = TimeGrid(0, 1, 11)
    with pytest.raises(CapabilityError):
        derivative_stack(np.ones((11, 2)), ConstantPotential(1).jet(g, 0), 1.0, 3)


# ---------------------------------------------------------------------------
# chi equation
# ---------------------------------------------------------------------------


def test_chi_constant_potential_is_harmonic():
    f0, R = 1.0, 0.6
    g = TimeGrid(0, 10, 2001)
    chi = integrate_chi(f0, R, g, (1.0, 0.0))
    nu = np.sqrt(f0**2 - R**2)
    np.testing.assert_allclose(chi.chi, np.cos(nu * g.t), atol=1e-9)
    np.testing.assert_allclose(chi.chi_dot, -nu * np.sin(nu * g.t), atol=1e-9)


def test_chi_linear_when_r_equals_f0():
    g = TimeGrid(0, 10, 1001)
    chi = integrate_chi(1.0, 1.0, g, (1.0, 2.0))
    np.testing.assert_allclose(chi.chi, 1 + 2 * g.t, atol=1e-10)


def test_chi_wronskian_constant_and_residual_small():
    f = FunctionPotential([lambda t: 2 + np.sin(t), np.cos, lambda t: -np.sin(t)])
    g = TimeGrid(0, 5, 2001)
    a = integrate_chi(f, 0.5, g, (1, 0))
    b = integrate_chi(f, 0.5, g, (0, 1))
    w = a.wronskian(b)
    assert np.max(np.abs(w - 1)) < 1e-9
    assert chi_residual(a, f, 0.5) < 1e-6


def test_chi_rejects_vanishing_or_sign_changing_potential():
    with pytest.raises(SingularCoefficientError):
        integrate_chi(0.0, 1.0, TimeGrid(0, 1, 11))
    f = FunctionPotential([lambda t: t - 0.55, lambda t: np.ones_like(t), lambda t: np.zeros_like(t)])
    with pytest.raises(SingularCoefficientError):
        integrate_chi(f, 1.0, TimeGrid(0, 1, 11))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 4, 5, 101])
def test_cumulative_integral_exact_for_low_degree(n):
    g = TimeGrid(0, 2, n)
    deg = 1 if n == 2 else (2 if n == 3 else 3)
    p = Polynomial(np.arange(1, deg + 2, dtype=float))
    np.testing.assert_allclose(cumulative_integral(p(g.t), g), p.integ()(g.t) - p.integ()(0), atol=1e-12)


def test_cumulative_integral_fourth_order():
    errs = []
    for n in (101, 201):
        g = TimeGrid(0, 3, n)
        errs.append(np.max(np.abs(cumulative_integral(np.exp(g.t), g) - (np.exp(g.t) - 1))))
    assert errs[0] / errs[1] > 14


def test_cumulative_integral_rejects_bad_input():
    g = TimeGrid(0, 1, 5)
    with pytest.raises(ValidationError):
        cumulative_integral(np.ones(4), g)
    with pytest.raises(ValidationError):
        cumulative_integral(np.array([1, 2, np.nan, 4, 5.0]), g)
