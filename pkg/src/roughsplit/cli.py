"""Command-line front end.

Commands::

    roughsplit ode-split       --preset nilpotent --n 16 --out DIR
    roughsplit rde-split       --preset geometric_bm --n 32 --seed 7 --out DIR
    roughsplit rpde-split      --preset zakai_1d --n 16 --seed 1 --out DIR
    roughsplit converge        --preset transport_check --n 4,8,16,32 --seed 7 --out DIR
    roughsplit transport-check --seed 7 --out DIR

Options may also come from ``--config FILE`` (``key=value`` lines; flags
win).  Every run writes ``manifest.txt``, which is itself a valid config
file for repeating the run.  Exit status: 0 success, 1 invalid input,
2 numerical divergence, 3 failed ``--assert`` check.
"""
from __future__ import annotations

import argparse
import os
import platform
import sys

import numpy as np

from . import __version__, kernels
from .errors import DivergenceError, RoughSplitError
from .noise import PRNG_ALGORITHM
from .presets import (APPLICATION_PARAMS, RDE_PARAMS, STOCHASTIC, build_application,
                      build_rde)
from .rde import convergence_table, flow_operator, split_solve_rde
from .viscosity import GridFunction
from .splitting import (format_manifest, parse_manifest, rpde_split_solve,
                        run_convergence_study)

COMMANDS = ("ode-split", "rde-split", "rpde-split", "converge", "transport-check")
ODE_PRESETS = ("commuting", "nilpotent")
RDE_ONLY = ("geometric_bm", "geometric_fbm")
# keys a config file may set, with their defaults
CONFIG_KEYS = {
    "command": None, "preset": None, "n": None, "seed": None, "scheme": "lie",
    "order": "PQ", "steps": "16", "char_steps": "8", "reference": "analytic",
    "n_ref": None, "eval": "at_T", "timing": "0", "out": None, "assert": "0",
}


class ValidationError(Exception):
    """Bad command-line or config input (exit status 1)."""


class AssertionFailed(Exception):
    """An ``--assert`` check failed (exit status 3)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _parser():
    p = _Parser(prog="roughsplit", description=__doc__.split("\n")[0])
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--preset")
    p.add_argument("--n", help="number of cells, or a comma list for converge")
    p.add_argument("--seed")
    p.add_argument("--scheme", choices=("lie", "strang"))
    p.add_argument("--order", choices=("PQ", "QP"))
    p.add_argument("--steps", help="level-2 sub-steps per ODE/RDE flow")
    p.add_argument("--char-steps", dest="char_steps",
                   help="characteristic sub-steps per transport step")
    p.add_argument("--reference", choices=("analytic", "fine_split", "fine_solve"))
    p.add_argument("--n-ref", dest="n_ref")
    p.add_argument("--eval", choices=("at_T", "sup_over_dissection"))
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="preset parameter override (repeatable)")
    p.add_argument("--config", help="key=value file; flags override its entries")
    p.add_argument("--out", help="output directory")
    p.add_argument("--timing", action="store_true", default=None,
                   help="record wall time in reports (breaks byte-reproducibility)")
    p.add_argument("--assert", dest="assert_", action="store_true", default=None,
                   help="fail with status 3 if an applicable acceptance check fails")
    p.add_argument("--version", action="version", version=f"roughsplit {__version__}")
    return p


def _merge(args):
    cfg = dict(CONFIG_KEYS)
    params = {}
    if args.config:
        try:
            with open(args.config) as fh:
                entries = parse_manifest(fh.read())
        except OSError as exc:
            raise ValidationError(f"--config: cannot read {args.config}: {exc}") from exc
        except ValueError as exc:
            raise ValidationError(f"--config: {exc}") from exc
        for k, v in entries.items():
            if k.startswith("info."):
                continue
            if k.startswith("param."):
                params[k[6:]] = v
            elif k in cfg:
                cfg[k] = v
            else:
                raise ValidationError(f"--config: unknown key {k!r}")
    for k in ("command", "preset", "n", "seed", "scheme", "order", "steps", "char_steps",
              "reference", "n_ref", "eval", "out"):
        v = getattr(args, k)
        if v is not None:
            cfg[k] = str(v)
    if args.timing:
        cfg["timing"] = "1"
    if args.assert_:
        cfg["assert"] = "1"
    for item in args.param:
        if "=" not in item:
            raise ValidationError(f"--param expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = v.strip()
    return cfg, params


def _int(cfg, key, flag=None):
    try:
        return int(cfg[key])
    except (TypeError, ValueError):
        raise ValidationError(
            f"--{flag or key.replace('_', '-')} must be an integer, got {cfg[key]!r}") from None


def _n_list(cfg, command):
    if cfg["n"] is None:
        raise ValidationError("--n is required")
    try:
        ns = [int(x) for x in str(cfg["n"]).split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"--n must be integers, got {cfg['n']!r}") from None
    if not ns or min(ns) < 1:
        raise ValidationError("--n values must be positive")
    if command != "converge" and len(ns) != 1:
        raise ValidationError(f"--n takes a single value for {command}")
    if command == "converge" and any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValidationError("--n list must be strictly increasing")
    return ns


def _validate(cfg, params):
    command = cfg["command"]
    if command is None:
        raise ValidationError(f"a command is required: one of {', '.join(COMMANDS)}")
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}")
    if command == "transport-check":
        cfg["preset"] = cfg["preset"] or "transport_check"
        cfg["n"] = cfg["n"] or "4,8,16,32,64"
    preset = cfg["preset"]
    if preset is None:
        raise ValidationError("--preset is required")
    allowed = {
        "ode-split": ODE_PRESETS,
        "rde-split": tuple(RDE_PARAMS),
        "rpde-split": tuple(APPLICATION_PARAMS),
        "converge": tuple(APPLICATION_PARAMS) + tuple(RDE_PARAMS),
        "transport-check": ("transport_check", "heat_transport"),
    }[command]
    if preset not in allowed:
        raise ValidationError(
            f"--preset {preset!r} is not available for {command}; choose {', '.join(allowed)}")
    if preset in STOCHASTIC and cfg["seed"] is None:
        raise ValidationError(f"--seed is required for the stochastic preset {preset!r}")
    if cfg["seed"] is not None:
        _int(cfg, "seed")
    if cfg["scheme"] not in ("lie", "strang"):
        raise ValidationError(f"--scheme must be lie or strang, got {cfg['scheme']!r}")
    if cfg["order"] not in ("PQ", "QP"):
        raise ValidationError(f"--order must be PQ or QP, got {cfg['order']!r}")
    if cfg["out"] is None:
        raise ValidationError("--out is required")
    table = RDE_PARAMS if preset in RDE_PARAMS else APPLICATION_PARAMS
    for k in params:
        if k not in table[preset]:
            raise ValidationError(
                f"--param {k}: preset {preset!r} takes {', '.join(table[preset])}")
    _n_list(cfg, "converge" if command == "transport-check" else command)
    for key in ("steps", "char_steps"):
        if _int(cfg, key) < 1:
            raise ValidationError(f"--{key.replace('_', '-')} must be >= 1")
    return command, preset


def _prepare_out(path):
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write-test")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise ValidationError(f"--out: directory {path!r} is not writable: {exc}") from exc


def _write(out, name, text):
    with open(os.path.join(out, name), "w", newline="") as fh:
        fh.write(text)


def _manifest(cfg, params, outputs, checks):
    entries = {k: cfg[k] for k in CONFIG_KEYS if cfg[k] is not None and k != "out"}
    for k in sorted(params):
        entries[f"param.{k}"] = params[k]
    entries["info.prng"] = PRNG_ALGORITHM
    entries["info.version.roughsplit"] = __version__
    entries["info.version.numpy"] = np.__version__
    entries["info.version.python"] = platform.python_version()
    entries["info.backend"] = kernels.BACKEND
    entries["info.outputs"] = ",".join(outputs)
    for name, ok in checks:
        entries[f"info.check.{name}"] = "pass" if ok else "FAIL"
    return format_manifest(entries)


def _seed(cfg):
    return None if cfg["seed"] is None else int(cfg["seed"])


def _run_split_rde(cfg, params, preset, ns):
    problem = build_rde(preset, _seed(cfg), params)
    n, steps = ns[0], _int(cfg, "steps")
    sol = split_solve_rde(problem, n, cfg["scheme"], cfg["order"], steps)
    # direct composition of the flows, for the identification check
    y = problem.y0
    t = np.arange(n + 1) * problem.horizon / n
    first, second = cfg["order"]
    for c in range(n):
        if cfg["scheme"] == "lie":
            y = flow_operator(first, problem, t[c], t[c + 1], y, steps)
            y = flow_operator(second, problem, t[c], t[c + 1], y, steps)
        else:
            mid = 0.5 * (t[c] + t[c + 1])
            y = flow_operator(first, problem, t[c], mid, y, steps)
            y = flow_operator(second, problem, t[c], t[c + 1], y, 2 * steps)
            y = flow_operator(first, problem, mid, t[c + 1], y, steps)
    checks = [("composition_identity", bool(np.array_equal(y, sol.values[-1])))]
    if problem.oracle is not None:
        err = float(np.linalg.norm(sol.values[-1] - problem.oracle(problem.horizon)))
        checks.append(("finite_error", bool(np.isfinite(err))))
    return {"solution.csv": sol.to_csv()}, checks


def _keeps_constants(problem):
    if not problem.rough_op.preserves_constants:
        return False
    for c in problem.deterministic_op.controls:
        _, _, react, src = c.coefficients(problem.grid)
        if c.f is not None or np.any(react) or np.any(src):
            return False
    return True


def _run_split_rpde(cfg, params, preset, ns):
    problem = build_application(preset, _seed(cfg), params)
    stats = {}
    sols = rpde_split_solve(problem, ns[0], cfg["scheme"], cfg["order"],
                            _int(cfg, "char_steps"), stats=stats)
    files = {"solution.csv": sols[-1].to_csv(), "driver.csv": problem.z.to_csv()}
    checks = []
    if problem.oracle is not None:
        err = sols[-1].sup_distance(problem.oracle(problem.horizon),
                                    problem.grid.interior_mask())
        checks.append(("error_below_5h", err <= 5 * problem.grid.h))
    if _keeps_constants(problem):
        const = GridFunction(problem.grid, np.full(problem.grid.n_points, 0.75))
        last = rpde_split_solve(problem, ns[0], cfg["scheme"], cfg["order"],
                                _int(cfg, "char_steps"), u0=const)[-1]
        checks.append(("constants_preserved", bool(np.all(last.values == 0.75))))
    files["stats.txt"] = format_manifest({"clamped_points": stats.get("clamped_points", 0)})
    return files, checks


def _run_converge(cfg, params, preset, ns, command):
    if preset in RDE_PARAMS:
        problem = build_rde(preset, _seed(cfg), params)
        kw = {"steps_per_substep": _int(cfg, "steps")}
    else:
        problem = build_application(preset, _seed(cfg), params)
        kw = {"char_steps": _int(cfg, "char_steps")}
    n_ref = None if cfg["n_ref"] is None else _int(cfg, "n_ref")
    report = run_convergence_study(problem, ns, cfg["reference"], cfg["eval"], n_ref,
                                   cfg["scheme"], cfg["order"], _seed(cfg),
                                   timing=cfg["timing"] == "1", **kw)
    checks = [("trend", report.trend_ok)]
    if preset in ("transport_check",) and cfg["reference"] == "analytic":
        checks.append(("strictly_decreasing", report.strictly_decreasing))
        if 32 in ns:
            err32 = report.err_T[list(ns).index(32)]
            checks.append(("error_n32_below_5h", bool(err32 <= 5 * problem.grid.h)))
    if preset == "nilpotent" and cfg["scheme"] == "lie":
        order = report.fitted_order()
        checks.append(("fitted_order_0.8_1.2", bool(0.8 <= order <= 1.2)))
    if preset == "heat_transport" and 64 in ns:
        checks.append(("error_n64_below_1e-2", bool(report.err_T[list(ns).index(64)] <= 1e-2)))
    files = {"report.csv": report.to_csv()}
    if preset in RDE_PARAMS:
        files["rde_table.csv"] = convergence_table(problem, ns, cfg["scheme"], cfg["order"],
                                                   _int(cfg, "steps"))
    return files, checks


def run(cfg, params):
    """Execute a validated config; returns ``(outputs, checks)``."""
    command, preset = _validate(cfg, params)
    ns = _n_list(cfg, "converge" if command == "transport-check" else command)
    _prepare_out(cfg["out"])
    if command in ("ode-split", "rde-split"):
        files, checks = _run_split_rde(cfg, params, preset, ns)
    elif command == "rpde-split":
        files, checks = _run_split_rpde(cfg, params, preset, ns)
    else:
        files, checks = _run_converge(cfg, params, preset, ns, command)
    for name, text in files.items():
        _write(cfg["out"], name, text)
    _write(cfg["out"], "manifest.txt", _manifest(cfg, params, sorted(files), checks))
    return files, checks


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
        cfg, params = _merge(args)
        files, checks = run(cfg, params)
        for name, ok in checks:
            print(f"{'PASS' if ok else 'FAIL'} {name}")
        if cfg["assert"] == "1" and not all(ok for _, ok in checks):
            raise AssertionFailed(", ".join(n for n, ok in checks if not ok))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 2
    except AssertionFailed as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return 3
    except RoughSplitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {', '.join(sorted(files))} and manifest.txt to {cfg['out']}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
