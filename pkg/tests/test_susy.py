from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spindarboux import (
    ChainState,
    ConstantPotential,
    HamiltonianOp,
    SpinSolution,
    TimeGrid,
    TransformStep,
    build_super_system,
    certify_system,
    coinciding_chain,
    factorization_residual,
    format_report,
    intertwining_residual,
    iterate_chain,
    onefold_linear_chi_step,
    pseudo_hermiticity_residual,
    residual_test_set,
    solution_tests,
    spin_residual,
    superalgebra_residuals,
    u_const_f0,
    windowed_polynomials,
)
from spindarboux.core import FunctionPotential

GRID = TimeGrid(0.0, 10.0, 801)


@pytest.fixture(scope="module")
def onefold_system():
    return build_super_system(ChainState((onefold_linear_chi_step(1 / np.sqrt(3), GRID),)))


@pytest.fixture(scope="module")
def twofold_system():
    return build_super_system(coinciding_chain(1.0, GRID))


def test_windowed_tests_vanish_at_the_ends():
    for jet in windowed_polynomials(GRID, 3, 4, seed=1):
        for k in range(3):
            assert np.all(np.abs(jet.data[k][[0, -1]]) < 1e-12)


def test_solution_tests_are_solutions():
    jets = solution_tests(0.7, 1.0, GRID)
    assert all(j.order == 6 for j in jets)
    sol = SpinSolution(GRID, jets[0].value[:, 0], jets[0].value[:, 1], 1.0)
    assert spin_residual(sol, 0.7) < 1e-6


def test_pseudo_hermiticity_for_any_real_potential():
    f = FunctionPotential([lambda t, k=k: np.cos(t + k * np.pi / 2) for k in range(7)])
    h = HamiltonianOp(f, GRID)
    tests = windowed_polynomials(GRID, 4, 6, seed=3)
    assert pseudo_hermiticity_residual(h, tests) < 1e-12


def test_onefold_identities(onefold_system):
    rep = certify_system(onefold_system, 1.0)
    assert rep["intertwining"] < 1e-6
    assert rep["factorization_h0"] < 1e-5 and rep["factorization_hn"] < 1e-5
    assert rep["commutator_Q1_H"] < 1e-5 and rep["commutator_Q2_H"] < 1e-5
    assert rep["anticommutator"] < 1e-5
    assert rep["Q1_squared_zero"] is True and rep["Q2_squared_zero"] is True


def test_twofold_identities(twofold_system):
    rep = certify_system(twofold_system, 1.0)
    assert rep["n"] == 2
    assert rep["intertwining"] < 1e-5
    assert max(rep["factorization_h0"], rep["factorization_hn"], rep["anticommutator"]) < 1e-4


def test_residuals_detect_a_wrong_partner(onefold_system):
    # swapping in the source Hamiltonian as partner must break intertwining
    side0, _, _ = residual_test_set(onefold_system, 1.0)
    wrong = intertwining_residual(onefold_system.L, onefold_system.h0, onefold_system.h0, side0)
    assert wrong > 1e-2


def test_residuals_detect_wrong_constants(twofold_system):
    side0, siden, _ = residual_test_set(twofold_system, 1.0)
    bad = dataclasses.replace(twofold_system, Rs=(1.0, 1.1))
    left, _ = factorization_residual(bad, side0)
    assert left > 1e-2


def test_superalgebra_nilpotency_is_structural(twofold_system):
    _, _, pairs = residual_test_set(twofold_system, 1.0)
    res = superalgebra_residuals(twofold_system, pairs[:2])
    assert res["Q1_squared_zero"] is True
    assert res["Q2_squared_zero"] is True


@settings(max_examples=8)
@given(st.floats(0.3, 0.95))
def test_constant_background_step_certifies(ratio):
    g = TimeGrid(0, 6, 401)
    step = TransformStep(ConstantPotential(1.0), u_const_f0(1.0, ratio, g), "L01")
    rep = certify_system(build_super_system(ChainState((step,))), 1.0)
    assert rep["intertwining"] < 1e-6 and rep["anticommutator"] < 1e-5


def test_three_step_chain_certifies():
    g = TimeGrid(0, 6, 401)
    chain = iterate_chain(1.0, [u_const_f0(1.0, R, g) for R in (0.4, 0.6, 0.8)])
    rep = certify_system(build_super_system(chain), 1.0)
    assert rep["n"] == 3 and rep["intertwining"] < 1e-5 and rep["anticommutator"] < 1e-4


def test_report_is_deterministic_and_formatted(onefold_system):
    a = certify_system(onefold_system, 1.0, seed=5)
    b = certify_system(onefold_system, 1.0, seed=5)
    assert a == b
    text = format_report(a)
    assert text.endswith("\n")
    lines = text.splitlines()
    assert lines[0] == "n: 1"
    assert "Q1_squared_zero: true" in lines
    assert all(": " in line for line in lines)
