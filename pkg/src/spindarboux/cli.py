"""Command-line scenario runner.

Subcommands::

    spindarboux list
    spindarboux run <scenario> [<scenario> ...] [--parallel]
    spindarboux certify --preset <name> [--n N]

Parameters come from preset defaults, then an optional ``--config`` file of
``key=value`` lines, then repeatable ``--set key=value`` flags, then
``--grid-points`` / ``--t-end``. Traces are written as CSV files
``<out>/<scenario>.csv``; certification reports go to stdout and, with
``--out``, to ``<out>/certify-<preset>-n<N>.txt``.

Exit codes: 0 success, 1 certification gate failed, 2 invalid input,
3 numerical singularity, 64 unknown scenario.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import NumericalSingularityError, SpinDarbouxError, ValidationError
from .scenarios import PRESETS, certify_presets, get_preset, resolve_params, trace_presets
from .susy import format_report

EXIT_OK = 0
EXIT_GATE_FAILED = 1
EXIT_VALIDATION = 2
EXIT_SINGULAR = 3
EXIT_UNKNOWN_SCENARIO = 64


class UnknownScenarioError(KeyError):
    pass


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def parse_assignment(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise ValidationError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    key, value = key.strip(), value.strip()
    if not key:
        raise ValidationError(f"empty key in {text!r}")
    return key, value


def read_config(path: str | Path) -> dict:
    """Flat ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            key, value = parse_assignment(line)
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
        out[key] = value
    return out


def collect_overrides(args: argparse.Namespace) -> dict:
    overrides = {}
    if args.config:
        overrides.update(read_config(args.config))
    for item in args.set or []:
        key, value = parse_assignment(item)
        overrides[key] = value
    if args.grid_points is not None:
        overrides["n_points"] = args.grid_points
    if args.t_end is not None:
        overrides["t_end"] = args.t_end
    return overrides


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def format_number(x: float) -> str:
    """12 significant digits."""
    return f"{float(x):.11e}"


def write_trace(columns: dict, path: Path) -> None:
    """CSV with a header row, one row per grid point, UTF-8 and LF endings."""
    names = list(columns)
    data = [np.real_if_close(np.asarray(columns[n])) for n in names]
    for name, col in zip(names, data):
        if np.iscomplexobj(col):
            raise ValidationError(f"column {name!r} is complex")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([format_number(v) for v in row])


def list_scenarios() -> str:
    """Registry listing in a fixed order: trace presets first, then certification suites."""
    lines = ["scenarios:"]
    for name in trace_presets():
        lines.append(_describe(name))
    lines.append("certify presets:")
    for name in certify_presets():
        lines.append(_describe(name))
    return "\n".join(lines) + "\n"


def _describe(name: str) -> str:
    p = PRESETS[name]
    params = " ".join(f"{k}={_show(v)}" for k, v in p.defaults.items())
    extra = f" [n in {','.join(map(str, p.n_values))}]" if p.n_values else ""
    return f"  {name}: {p.description}{extra}\n      {params}"


def _show(v) -> str:
    if isinstance(v, tuple):
        return ",".join(f"{x:g}" for x in v) if v else "(default)"
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _lookup(name: str, kind: str):
    if name not in PRESETS or PRESETS[name].kind != kind:
        raise UnknownScenarioError(name)
    return PRESETS[name]


def run_scenario(name: str, overrides: dict, out_dir: str | Path) -> Path:
    """Run one trace preset and write its CSV; returns the file path."""
    preset = _lookup(name, "trace")
    columns = preset.runner(resolve_params(preset, overrides))
    path = Path(out_dir) / f"{name}.csv"
    write_trace(columns, path)
    return path


def _run_job(job: tuple) -> tuple[str, int, str]:
    name, overrides, out_dir = job
    try:
        path = run_scenario(name, overrides, out_dir)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit code below
        return name, _exit_code(exc), f"{type(exc).__name__}: {exc}"
    return name, EXIT_OK, str(path)


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, UnknownScenarioError):
        return EXIT_UNKNOWN_SCENARIO
    if isinstance(exc, NumericalSingularityError):
        return EXIT_SINGULAR
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, SpinDarbouxError):
        return EXIT_VALIDATION
    raise exc


def cmd_run(args: argparse.Namespace) -> int:
    names = list(args.scenarios)
    if names == ["all"]:
        names = trace_presets()
    for name in names:
        if name not in PRESETS or PRESETS[name].kind != "trace":
            print(f"error: unknown scenario {name!r}; see 'list'", file=sys.stderr)
            return EXIT_UNKNOWN_SCENARIO
    overrides = collect_overrides(args)
    jobs = [(name, overrides, args.out) for name in names]
    if args.parallel and len(jobs) > 1:
        with ProcessPoolExecutor() as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]
    status = EXIT_OK
    for name, code, msg in results:
        if code == EXIT_OK:
            print(f"{name}: wrote {msg}")
        else:
            print(f"{name}: error: {msg}", file=sys.stderr)
            status = max(status, code)
    return status


def cmd_certify(args: argparse.Namespace) -> int:
    preset = _lookup(args.preset, "certify")
    overrides = collect_overrides(args)
    if args.n is not None:
        overrides["n"] = args.n
    report = preset.runner(resolve_params(preset, overrides))
    text = format_report(report)
    sys.stdout.write(text)
    if args.out:
        path = Path(args.out) / f"certify-{args.preset}-n{report['n']}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    return EXIT_OK if report["all_gates_pass"] else EXIT_GATE_FAILED


def cmd_list(args: argparse.Namespace) -> int:
    sys.stdout.write(list_scenarios())
    return EXIT_OK


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid-points", type=int, default=None, help="number of grid points")
    p.add_argument("--t-end", type=float, default=None, help="end of the time interval (start is 0)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a parameter (repeatable)")
    p.add_argument("--config", metavar="FILE", help="file of key=value lines")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spindarboux", description="Spin-equation Darboux chain scenarios")
    sub = parser.add_subparsers(dest="command", required=True)

    p_list = sub.add_parser("list", help="show presets and their parameters")
    p_list.set_defaults(func=cmd_list)

    p_run = sub.add_parser("run", help="run trace scenarios and write CSV files")
    p_run.add_argument("scenarios", nargs="+", help="preset names, or 'all'")
    p_run.add_argument("--out", default="out", help="output directory (default: out)")
    p_run.add_argument("--parallel", action="store_true", help="run scenarios in worker processes")
    _add_param_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cert = sub.add_parser("certify", help="operator-identity residual report")
    p_cert.add_argument("--preset", required=True, help="certification suite name")
    p_cert.add_argument("--n", type=int, default=None, help="number of transformation steps")
    p_cert.add_argument("--out", default=None, help="also write the report to this directory")
    _add_param_flags(p_cert)
    p_cert.set_defaults(func=cmd_certify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnknownScenarioError as exc:
        print(f"error: unknown scenario {exc.args[0]!r}; see 'list'", file=sys.stderr)
        return EXIT_UNKNOWN_SCENARIO
    except SpinDarbouxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
