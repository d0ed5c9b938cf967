"""Splitting driver for rough PDEs and the convergence-study harness.

``rpde_split_solve`` composes, cell by cell over the dissection
``{k T / n}``, the deterministic viscosity step ``P`` (driven by the
``xi``-increment of the cell) and the rough transport step ``Q`` (driven by
``z`` restricted to the cell).  ``run_convergence_study`` runs it for a list
of ``n`` against an oracle or a reference run and tabulates sup errors.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, MeshError, NoOracleError
from .rde import RdeProblem, dissection, solve_rde, split_solve_rde, uniform_mesh
from .rough import Level2RoughPath
from .timechange import TimeChange
from .viscosity import (GridFunction, HJBOp, LinearParabolicOp, RoughTransportOp,
                        deterministic_step, plain_solve, rough_transport_step)

SCHEMES = ("lie", "strang")
ORDERS = ("PQ", "QP")
DEFAULT_CHAR_STEPS = 8


@dataclass
class RpdeProblem:
    """``du = F(x, u, Du, D^2 u) dxi + Lambda(x, u, Du) dz`` with ``u(0) = u0``."""
    deterministic_op: object
    rough_op: RoughTransportOp
    xi: TimeChange
    z: Level2RoughPath
    u0: GridFunction
    oracle: object = None  # callable t -> values on the grid
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.deterministic_op, (LinearParabolicOp, HJBOp)):
            raise TypeError("deterministic_op must be a LinearParabolicOp or HJBOp")
        if self.rough_op.dim != self.z.dim:
            raise DimensionMismatchError(
                f"rough operator has {self.rough_op.dim} channels, driver has {self.z.dim}")
        if self.z.start != 0.0 or self.z.end != self.xi.horizon:
            raise DimensionMismatchError("xi and z must live on the same [0, T]")

    @property
    def horizon(self):
        return self.xi.horizon

    @property
    def grid(self):
        return self.u0.grid


def _p_step(problem, u, s, t, n_sub):
    return deterministic_step(problem.deterministic_op, u, problem.xi, s, t, n_sub)


def _q_step(problem, u, s, t, char_steps, stats):
    if t == s:
        return u
    return rough_transport_step(problem.rough_op, u, problem.z.restrict(s, t),
                                char_steps, stats)


def rpde_split_solve(problem: RpdeProblem, n, scheme="lie", order="PQ",
                     char_steps=DEFAULT_CHAR_STEPS, n_sub=1, u0=None, stats=None):
    """Split iterates at the dissection times ``{k T / n}`` (``n + 1`` grid functions).

    Lie/PQ applies ``P`` then ``Q`` on every cell.  Strang/PQ applies ``P``
    on the first half cell, ``Q`` on the whole cell, then ``P`` on the
    second half; QP swaps the roles.  ``u0`` overrides the problem's data.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if scheme not in SCHEMES or order not in ORDERS:
        raise ValueError(f"unknown scheme/order {scheme}/{order}")
    times = dissection(problem.horizon, n)
    u = problem.u0 if u0 is None else u0
    out = [u]

    def step(which, u, s, t):
        if which == "P":
            return _p_step(problem, u, s, t, n_sub)
        return _q_step(problem, u, s, t, char_steps, stats)

    first, second = order[0], order[1]
    for c in range(n):
        lo, hi = times[c], times[c + 1]
        if scheme == "lie":
            u = step(second, step(first, u, lo, hi), lo, hi)
        else:
            mid = 0.5 * (lo + hi)
            u = step(first, u, lo, mid)
            u = step(second, u, lo, hi)
            u = step(first, u, mid, hi)
        out.append(u)
    return out


# --- convergence studies --------------------------------------------------

@dataclass
class ConvergenceReport:
    rows: list                 # (n, err_T, err_sup, seconds)
    reference: str
    seed: object = None
    scheme: str = "lie"
    order: str = "PQ"
    caveat: str = ""
    column: str = "err_T"      # column the trend checks read

    def __post_init__(self):
        ns = [r[0] for r in self.rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("report rows must have strictly increasing n")

    @property
    def n(self):
        return np.array([r[0] for r in self.rows])

    @property
    def err_T(self):
        return np.array([r[1] for r in self.rows])

    @property
    def err_sup(self):
        return np.array([r[2] for r in self.rows])

    def inversions(self, column=None):
        e = getattr(self, column or self.column)
        return int(np.sum(np.diff(e) >= 0))

    @property
    def strictly_decreasing(self):
        return self.inversions() == 0

    @property
    def trend_ok(self):
        """True unless the error fails to decrease at two or more refinements."""
        return self.inversions() <= 1

    def fitted_order(self, column=None):
        """Least-squares slope of ``-log(error)`` against ``log(n)``."""
        e = getattr(self, column or self.column)
        if np.any(e <= 0):
            return math.nan
        return float(-np.polyfit(np.log(self.n), np.log(e), 1)[0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "err_T", "err_sup", "seconds"])
        for n, et, es, sec in self.rows:
            w.writerow([int(n), repr(float(et)), repr(float(es)), repr(float(sec))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, reference="", **kw):
        rows = [r for r in csv.reader(io.StringIO(text)) if r][1:]
        return cls([(int(r[0]), float(r[1]), float(r[2]), float(r[3])) for r in rows],
                   reference, **kw)


def _values(sol):
    return sol.values if isinstance(sol, GridFunction) else np.asarray(sol)


def _check_n_list(n_list):
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise ValueError("n_list must be nonempty")
    if any(b <= a for a, b in zip(n_list, n_list[1:])) or n_list[0] < 1:
        raise ValueError("n_list must be increasing positive integers")
    base = n_list[0]
    bad = [n for n in n_list if n % base]
    if bad:
        raise MeshError(f"n={bad} are not multiples of the coarsest n={base}; "
                        "errors are compared on its dissection")
    return n_list, base


def _reference(problem, reference, eval_times, n_ref, scheme, order, n_list, solver_kw):
    """Reference values at ``eval_times`` and a description of where they came from."""
    n_min, n_max = n_list[0], n_list[-1]
    is_rpde = isinstance(problem, RpdeProblem)
    if reference == "analytic":
        if problem.oracle is None:
            raise NoOracleError(
                f"problem {problem.name or '(unnamed)'} has no closed-form oracle; "
                "use reference='fine_split' or 'fine_solve'")
        return [np.asarray(problem.oracle(t), dtype=np.float64) for t in eval_times], \
            "analytic oracle", ""
    if reference == "fine_split":
        if n_ref is None:
            n_ref = 8 * n_max
        if n_ref <= 4 * n_max or n_ref % n_min:
            raise MeshError(f"n_ref={n_ref} must exceed 4*max(n)={4 * n_max} "
                            f"and be a multiple of {n_min}")
        if is_rpde:
            sols = rpde_split_solve(problem, n_ref, scheme, order, **solver_kw)
        else:
            p = split_solve_rde(problem, n_ref, scheme, order, **solver_kw)
            sols = list(p.values)
        stride = n_ref // n_min
        return [_values(sols[k * stride]) for k in range(n_min + 1)], \
            f"fine split n_ref={n_ref}", "self-convergence against a finer split, not an oracle"
    if reference == "fine_solve":
        if is_rpde:
            return _unsplit_reference(problem, eval_times), "unsplit solve", ""
        steps = max(int(n_ref or 100_000), 1)
        steps = -(-steps // n_min) * n_min
        path = solve_rde(problem, steps, mesh=uniform_mesh(0.0, problem.horizon, steps))
        stride = steps // n_min
        return [path.values[k * stride] for k in range(n_min + 1)], \
            f"unsplit solve with {steps} steps", ""
    raise ValueError(f"unknown reference {reference!r}")


def _unsplit_reference(problem: RpdeProblem, eval_times):
    """Reference for RPDEs where one of the two operators is trivial."""
    det_zero = problem.deterministic_op.is_zero
    if problem.rough_op.is_zero:
        taus = problem.xi(np.asarray(eval_times, dtype=np.float64))
        return [_values(v) for v in plain_solve(problem.deterministic_op, problem.u0,
                                                taus, float(problem.xi(problem.horizon)))]
    if det_zero:
        return [_values(_q_step(problem, problem.u0, 0.0, t, DEFAULT_CHAR_STEPS, None))
                for t in eval_times]
    raise NoOracleError("an unsplit reference needs P or Q to be the identity")


def run_convergence_study(problem, n_list, reference="analytic", eval="at_T",
                          n_ref=None, scheme="lie", order="PQ", seed=None,
                          timing=False, mask=None, **solver_kw) -> ConvergenceReport:
    """Sup errors of the split solution for each ``n`` against a reference.

    Errors are taken on the dissection of the coarsest ``n`` and, for
    RPDEs, over the grid interior (see :meth:`Grid1D.interior_mask`).
    ``reference`` is ``"analytic"`` (the problem's oracle; a
    :class:`NoOracleError` if it has none), ``"fine_split"`` (the same
    split at ``n_ref``) or ``"fine_solve"`` (an unsplit solve).  The
    ``seconds`` column is wall time when ``timing`` is set and ``nan``
    otherwise, so default reports are reproducible byte for byte.
    """
    if eval not in ("at_T", "sup_over_dissection"):
        raise ValueError("eval must be 'at_T' or 'sup_over_dissection'")
    n_list, n_min = _check_n_list(n_list)
    eval_times = dissection(problem.horizon, n_min)
    ref, desc, caveat = _reference(problem, reference, eval_times, n_ref, scheme,
                                   order, n_list, solver_kw)
    is_rpde = isinstance(problem, RpdeProblem)
    if is_rpde and mask is None:
        mask = problem.grid.interior_mask()
    rows = []
    for n in n_list:
        t0 = time.perf_counter()
        if is_rpde:
            sols = [_values(s) for s in rpde_split_solve(problem, n, scheme, order, **solver_kw)]
        else:
            sols = list(split_solve_rde(problem, n, scheme, order, **solver_kw).values)
        sec = time.perf_counter() - t0 if timing else math.nan
        stride = n // n_min
        errs = []
        for k in range(n_min + 1):
            diff = sols[k * stride] - ref[k]
            if is_rpde:
                errs.append(float(np.max(np.abs(diff[mask]))))
            else:
                errs.append(float(np.linalg.norm(diff)))
        rows.append((n, errs[-1], max(errs), sec))
    column = "err_T" if eval == "at_T" else "err_sup"
    return ConvergenceReport(rows, desc, seed, scheme, order, caveat, column)


# --- manifests ------------------------------------------------------------

def format_manifest(entries: dict) -> str:
    """Plain ``key=value`` lines in the given order."""
    lines = []
    for k, v in entries.items():
        if "\n" in str(v) or "=" in str(k):
            raise ValueError(f"manifest entry {k!r} cannot be written on one line")
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> dict:
    """Inverse of :func:`format_manifest`; blank lines and ``#`` comments are skipped."""
    out = {}
    for num, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {num}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out
