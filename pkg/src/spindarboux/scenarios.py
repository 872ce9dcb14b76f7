"""Named scenario presets: population traces, field traces and certification suites.

Each preset has a parameter dictionary with defaults and a runner. Trace
runners return an ordered mapping ``column -> samples`` whose first column is
``t``. Certification runners return a flat residual report with gate values
and an overall verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .atom import (
    AtomParams,
    coinciding_chain,
    condit_roots,
    detuning_and_field,
    distinct_chain,
    impose_initial,
    monotone_p1,
    onefold_linear_chi_step,
    polynomial_field,
    population,
    closed_form_p2,
    rabi_pair,
    rabi_probability,
)
from .chains import ChainState, iterate_chain
from .core import ConstantPotential, TimeGrid, integrate_spin
from .darboux import DEFAULT_SOLUTION_GATE, TransformStep, u_const_f0
from .errors import ValidationError
from .susy import build_super_system, certify_system

INT_KEYS = ("n_points", "seed", "n")
LIST_KEYS = ("R",)


@dataclass(frozen=True)
class Preset:
    """A named scenario: defaults, accepted keys and the function that runs it."""

    name: str
    kind: str
    description: str
    defaults: dict
    runner: Callable[[dict], dict]
    n_values: tuple = field(default=())

    @property
    def keys(self) -> tuple:
        return tuple(self.defaults)


# ---------------------------------------------------------------------------
# Parameter handling
# ---------------------------------------------------------------------------


def _parse_value(key: str, value):
    if key in LIST_KEYS:
        if isinstance(value, str):
            parts = [p for p in value.replace(" ", "").split(",") if p]
        else:
            parts = list(np.atleast_1d(value))
        try:
            out = tuple(float(p) for p in parts)
        except ValueError as exc:
            raise ValidationError(f"{key} must be a comma-separated list of numbers") from exc
        if not out:
            raise ValidationError(f"{key} must not be empty")
        bad = [v for v in out if not np.isfinite(v)]
        if bad:
            raise ValidationError(f"{key} must be finite")
        return out
    if key in INT_KEYS:
        try:
            v = float(value)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{key} must be an integer") from exc
        if not np.isfinite(v) or v != int(v):
            raise ValidationError(f"{key} must be an integer")
        return int(v)
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{key} must be a number") from exc
    if not np.isfinite(v):
        raise ValidationError(f"{key} must be finite")
    return v


def resolve_params(preset: Preset, overrides: dict | None = None) -> dict:
    """Defaults updated by ``overrides``; unknown keys and non-finite values are rejected."""
    params = dict(preset.defaults)
    for key, value in (overrides or {}).items():
        if key not in params:
            allowed = ", ".join(sorted(params))
            raise ValidationError(f"unknown key {key!r} for scenario {preset.name!r} (allowed: {allowed})")
        params[key] = _parse_value(key, value)
    if params["n_points"] < 2:
        raise ValidationError("n_points must be at least 2")
    if params["t_end"] <= 0:
        raise ValidationError("t_end must be positive")
    if params["solution_gate"] <= 0:
        raise ValidationError("solution_gate must be positive")
    return params


def _grid(p: dict) -> TimeGrid:
    return TimeGrid(0.0, p["t_end"], p["n_points"])


# ---------------------------------------------------------------------------
# Trace runners
# ---------------------------------------------------------------------------


def _ground_population(chain: ChainState, xi: float, grid: TimeGrid, gate: float) -> np.ndarray:
    a, b = rabi_pair(chain.f0, xi, grid)
    return population(impose_initial(chain.apply(a, gate=gate), chain.apply(b, gate=gate)))


def run_rabi(p: dict) -> dict:
    grid = _grid(p)
    sol = integrate_spin(p["f0"], p["xi"], (1.0, 0.0), grid)
    return {
        "t": grid.t,
        "P": population(sol),
        "P_closed": rabi_probability(p["f0"], p["xi"], grid.t),
        "norm": sol.norm,
    }


def run_onefold(p: dict) -> dict:
    grid = _grid(p)
    f0 = p["xi"] / np.sqrt(3.0)
    step = onefold_linear_chi_step(f0, grid)
    chain = ChainState((step,))
    a, b = rabi_pair(chain.f0, p["xi"], grid)
    gate = p["solution_gate"]
    sol = impose_initial(chain.apply(a, gate=gate), chain.apply(b, gate=gate))
    n0 = sol.norm[0]
    return {
        "t": grid.t,
        "f1": step.f_next.values,
        "P": population(sol),
        "P_closed": monotone_p1(f0, grid.t),
        "norm": sol.norm / n0,
    }


def _field_trace(p: dict, with_polynomial: bool) -> dict:
    grid = _grid(p)
    chain = coinciding_chain(p["f0"], grid, C=p["C"], c_tilde=p["C_tilde"])
    tr = detuning_and_field(chain.fn, AtomParams(omega21=p["omega21"], E0=p["E0"]), grid)
    cols = {"t": grid.t, "f": tr.f, "delta": tr.delta, "omega": tr.omega, "E": tr.E}
    if with_polynomial and p["f0"] == -1.0 and p["C"] == 0.0 and p["omega21"] == 2.0:
        cols["E_polynomial"] = polynomial_field(grid.t, p["E0"])
    return cols


def run_fig1(p: dict) -> dict:
    return _field_trace(p, with_polynomial=False)


def run_fig2(p: dict) -> dict:
    return _field_trace(p, with_polynomial=True)


def _three_populations(f0: float, p: dict) -> dict:
    grid = _grid(p)
    xi, gate = p["xi"], p["solution_gate"]
    rabi = population(integrate_spin(f0, xi, (1.0, 0.0), grid))
    one = ChainState((onefold_linear_chi_step(f0, grid),))
    two = coinciding_chain(f0, grid, C=p["C"], c_tilde=p["C_tilde"])
    return {
        "t": grid.t,
        "rabi": rabi,
        "onefold": _ground_population(one, xi, grid, gate),
        "twofold": _ground_population(two, xi, grid, gate),
    }


def run_fig3(p: dict) -> dict:
    cols = _three_populations(np.sqrt(condit_roots(p["xi"])[0]), p)
    cols["twofold_closed"] = closed_form_p2(p["xi"], cols["t"])
    return cols


def run_fig4(p: dict) -> dict:
    return _three_populations(np.sqrt(condit_roots(p["xi"])[1]), p)


def run_fig5(p: dict) -> dict:
    return _three_populations(p["xi"] / np.sqrt(3.0), p)


def run_fig6(p: dict) -> dict:
    grid = _grid(p)
    R = p["R"]
    if len(R) != 2:
        raise ValidationError("R must hold exactly two constants")
    chain = distinct_chain(p["f0"], R[0], R[1], grid)
    a, b = rabi_pair(chain.f0, p["xi"], grid)
    gate = p["solution_gate"]
    sol = impose_initial(chain.apply(a, gate=gate), chain.apply(b, gate=gate))
    return {
        "t": grid.t,
        "f2": chain.fn.samples(grid),
        "P": population(sol),
        "norm": sol.norm / sol.norm[0],
    }


# ---------------------------------------------------------------------------
# Certification runners
# ---------------------------------------------------------------------------

DISTINCT_DEFAULT_R = {2: (0.5, 0.7), 3: (0.4, 0.6, 0.8)}


def certification_gates(n: int) -> dict:
    """Residual ceilings for an ``n``-fold system."""
    inter = 1e-6 if n == 1 else 1e-5
    fact = 1e-5 if n == 1 else 1e-4
    return {
        "pseudo_hermiticity_h0": 1e-10,
        "pseudo_hermiticity_hn": 1e-10,
        "intertwining": inter,
        "factorization_h0": fact,
        "factorization_hn": fact,
        "commutator_Q1_H": 1e-5,
        "commutator_Q2_H": 1e-5,
        "anticommutator": fact,
    }


def _certify(chain: ChainState, p: dict, preset: str) -> dict:
    system = build_super_system(chain)
    values = certify_system(system, p["xi"], p["seed"])
    gates = certification_gates(chain.n)
    report = {"preset": preset, "n_points": p["n_points"], "t_end": p["t_end"]}
    report.update(values)
    ok = bool(values["Q1_squared_zero"] and values["Q2_squared_zero"])
    for key, gate in gates.items():
        report[f"gate_{key}"] = gate
        ok = ok and values[key] < gate
    report["all_gates_pass"] = ok
    return report


def _check_n(p: dict, allowed: tuple, preset: str) -> int:
    n = p["n"]
    if n not in allowed:
        raise ValidationError(f"preset {preset!r} supports n in {allowed}, got {n}")
    return n


def certify_onefold_pi0(p: dict) -> dict:
    _check_n(p, (1,), "onefold-pi0")
    grid = _grid(p)
    step = onefold_linear_chi_step(p["xi"] / np.sqrt(3.0), grid)
    return _certify(ChainState((step,)), p, "onefold-pi0")


def certify_trivial(p: dict) -> dict:
    _check_n(p, (1,), "trivial")
    grid = _grid(p)
    R = p["R"]
    if len(R) != 1:
        raise ValidationError("R must hold exactly one constant")
    step = TransformStep(ConstantPotential(p["f0"]), u_const_f0(p["f0"], R[0], grid), "L01")
    return _certify(ChainState((step,)), p, "trivial")


def certify_coinciding(p: dict) -> dict:
    _check_n(p, (2,), "coinciding")
    grid = _grid(p)
    chain = coinciding_chain(p["f0"], grid, C=p["C"], c_tilde=p["C_tilde"])
    return _certify(chain, p, "coinciding")


def certify_distinct(p: dict) -> dict:
    n = _check_n(p, (2, 3), "distinct")
    grid = _grid(p)
    R = p["R"] if p["R"] else DISTINCT_DEFAULT_R[n]
    if len(R) != n or len(set(R)) != n:
        raise ValidationError(f"R must hold {n} distinct constants")
    pairs = [u_const_f0(p["f0"], r, grid) for r in R]
    chain = iterate_chain(ConstantPotential(p["f0"]), pairs)
    return _certify(chain, p, "distinct")


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


def _defaults(t_end: float, n_points: int = 4001, **extra) -> dict:
    d = {"t_end": float(t_end), "n_points": int(n_points), "solution_gate": DEFAULT_SOLUTION_GATE}
    d.update(extra)
    return d


def _certify_defaults(n: int, **extra) -> dict:
    return _defaults(10.0, 1601, xi=1.0, seed=0, n=n, **extra)


PRESETS: dict[str, Preset] = {
    p.name: p
    for p in [
        Preset("rabi", "trace", "Rabi oscillations on a constant detuning, numeric and closed form",
               _defaults(20.0, f0=1.0, xi=1.0), run_rabi),
        Preset("onefold", "trace", "one-fold monotone population at f0^2 = xi^2/3",
               _defaults(30.0, xi=1.0), run_onefold),
        Preset("fig1", "trace", "detuning and field of the two-fold coinciding-constant potential",
               _defaults(10.0, f0=1.0, C=0.0, C_tilde=1.0, omega21=1.0, E0=0.5), run_fig1),
        Preset("fig2", "trace", "polynomial field case of the two-fold coinciding-constant potential",
               _defaults(10.0, f0=-1.0, C=0.0, C_tilde=1.0, omega21=2.0, E0=0.7), run_fig2),
        Preset("fig3", "trace", "populations before and after one and two steps, f0^2 = xi^2 (1 + 2/sqrt 5)",
               _defaults(30.0, xi=1.0, C=0.0, C_tilde=1.0), run_fig3),
        Preset("fig4", "trace", "populations before and after one and two steps, f0^2 = xi^2 (1 - 2/sqrt 5)",
               _defaults(30.0, xi=1.0, C=0.0, C_tilde=1.0), run_fig4),
        Preset("fig5", "trace", "populations before and after one and two steps, f0^2 = xi^2/3",
               _defaults(30.0, xi=1.0, C=0.0, C_tilde=1.0), run_fig5),
        Preset("fig6", "trace", "two-fold distinct-constant population with a long plateau",
               _defaults(200.0, 40001, f0=1.0, R=(0.993, 0.995), xi=0.65), run_fig6),
        Preset("onefold-pi0", "certify", "one step with R = f0 and linear chi",
               _certify_defaults(1), certify_onefold_pi0, (1,)),
        Preset("trivial", "certify", "one step on a constant background",
               _certify_defaults(1, f0=1.0, R=(0.5,)), certify_trivial, (1,)),
        Preset("coinciding", "certify", "two steps with coinciding constants",
               _certify_defaults(2, f0=1.0, C=0.0, C_tilde=1.0), certify_coinciding, (2,)),
        Preset("distinct", "certify", "two or three steps with distinct constants on a constant background",
               _certify_defaults(2, f0=1.0, R=()), certify_distinct, (2, 3)),
    ]
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(name) from None


def trace_presets() -> list[str]:
    return [name for name, p in PRESETS.items() if p.kind == "trace"]


def certify_presets() -> list[str]:
    return [name for name, p in PRESETS.items() if p.kind == "certify"]


def run_preset(name: str, overrides: dict | None = None) -> dict:
    preset = get_preset(name)
    return preset.runner(resolve_params(preset, overrides))


__all__ = [
    "Preset", "PRESETS", "resolve_params", "get_preset", "trace_presets", "certify_presets", "run_preset",
    "certification_gates", "DISTINCT_DEFAULT_R",
]
