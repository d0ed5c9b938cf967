"""ODE/RDE solvers for ``dy = V(y) dxi + W(y) dz`` and their Lie/Strang splittings.

The stepper is the level-2 (Davie) increment scheme

    y <- y + V(y) dxi + sum_i W_i(y) dz^i + sum_{i,j} (DW_i W_j)(y) M^{ji}

where ``M`` is the second level of ``z`` over the step.  Cross integrals
between ``xi`` and ``z`` are dropped; they do not affect first-order
consistency because ``xi`` has bounded variation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatchError, DivergenceError
from .paths import SampledPath
from .rough import Level2RoughPath, lift_level2, reparametrize_rough
from .timechange import TimeChange, compose, make_time_changes

DIVERGENCE_BOUND = 1e12
DEFAULT_STEPS_PER_SUBSTEP = 16


class AffineField:
    """``y -> A y + c``."""

    def __init__(self, matrix, offset=None, lipschitz_bound=None):
        self.matrix = np.atleast_2d(np.array(matrix, dtype=np.float64))
        e = self.matrix.shape[0]
        self.offset = (np.zeros(e) if offset is None
                       else np.array(offset, dtype=np.float64).reshape(e))
        self.lipschitz_bound = (float(np.linalg.norm(self.matrix, 2))
                                if lipschitz_bound is None else lipschitz_bound)

    @classmethod
    def zero(cls, dim):
        return cls(np.zeros((dim, dim)))

    @classmethod
    def constant(cls, offset):
        offset = np.atleast_1d(np.asarray(offset, dtype=np.float64))
        return cls(np.zeros((len(offset), len(offset))), offset)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __call__(self, y):
        return y @ self.matrix.T + self.offset

    def jacobian(self, y):
        return np.broadcast_to(self.matrix, y.shape + (self.dim,))

    def __repr__(self):
        return f"AffineField({self.matrix.tolist()}, {self.offset.tolist()})"


_FORMS = {
    # value, derivative of a*g(b*y + c)
    "sin": (np.sin, np.cos),
    "tanh": (np.tanh, lambda x: 1.0 / np.cosh(x) ** 2),
    "cos": (np.cos, lambda x: -np.sin(x)),
}


class NamedField:
    """Componentwise closed-form fields.

    ``form="poly"``: ``coeffs`` has shape (e, K) and
    ``W(y)_i = sum_k coeffs[i, k] y_i^k``.
    ``form in {"sin", "cos", "tanh"}``: ``coeffs`` rows are ``(a, b, c)`` and
    ``W(y)_i = a * form(b y_i + c)``.
    """

    def __init__(self, form, coeffs, lipschitz_bound=None):
        if form != "poly" and form not in _FORMS:
            raise ValueError(f"unknown field form {form!r}")
        self.form = form
        self.coeffs = np.atleast_2d(np.array(coeffs, dtype=np.float64))
        self.lipschitz_bound = lipschitz_bound

    @property
    def dim(self):
        return self.coeffs.shape[0]

    def _parts(self, y):
        if self.form == "poly":
            powers = np.arange(self.coeffs.shape[1])
            val = np.sum(self.coeffs * y[..., None] ** powers, axis=-1)
            dc = self.coeffs[:, 1:] * powers[1:]
            der = np.sum(dc * y[..., None] ** powers[:-1], axis=-1)
            return val, der
        g, dg = _FORMS[self.form]
        a, b, c = self.coeffs[:, 0], self.coeffs[:, 1], self.coeffs[:, 2]
        arg = b * y + c
        return a * g(arg), a * b * dg(arg)

    def __call__(self, y):
        return self._parts(y)[0]

    def jacobian(self, y):
        der = self._parts(y)[1]
        return der[..., :, None] * np.eye(self.dim)


class CallableField:
    """A field given by user callables ``f(y)`` and ``jac(y)`` (batched over leading axes)."""

    def __init__(self, f, jac, dim, lipschitz_bound=None):
        self.f, self.jac, self._dim = f, jac, dim
        self.lipschitz_bound = lipschitz_bound

    @property
    def dim(self):
        return self._dim

    def __call__(self, y):
        return self.f(y)

    def jacobian(self, y):
        return self.jac(y)


@dataclass
class RdeProblem:
    drift: object
    noise_fields: list
    xi: TimeChange
    z: Level2RoughPath
    y0: np.ndarray
    oracle: object = None  # callable t -> y(t) when a closed form is known
    name: str = ""

    def __post_init__(self):
        self.y0 = np.atleast_1d(np.array(self.y0, dtype=np.float64))
        self.noise_fields = list(self.noise_fields)
        if len(self.noise_fields) != self.z.dim:
            raise DimensionMismatchError(
                f"{len(self.noise_fields)} noise fields for a {self.z.dim}-dim driver")
        if self.drift is None:
            self.drift = AffineField.zero(len(self.y0))
        for f in [self.drift] + self.noise_fields:
            if f.dim != len(self.y0):
                raise DimensionMismatchError("field and state dimensions differ")
        if self.xi.horizon != self.z.end or self.z.start != 0.0:
            raise DimensionMismatchError("xi and z must live on the same [0, T]")

    @property
    def horizon(self):
        return self.xi.horizon

    @property
    def dim(self):
        return len(self.y0)

    def with_drivers(self, xi=None, z=None, y0=None):
        return RdeProblem(self.drift, self.noise_fields,
                          self.xi if xi is None else xi,
                          self.z if z is None else z,
                          self.y0 if y0 is None else y0, self.oracle, self.name)


def davie_increment(fields, y, dz, lvl2):
    """Noise part of one level-2 step for a batch of states ``y`` (..., e)."""
    w = [f(y) for f in fields]
    out = np.zeros_like(y)
    for i, wi in enumerate(w):
        if dz[i] != 0.0:
            out = out + wi * dz[i]
    for i, f in enumerate(fields):
        jac = None
        for j in range(len(fields)):
            m = lvl2[j, i]
            if m != 0.0:
                if jac is None:
                    jac = f.jacobian(y)
                out = out + np.einsum("...ab,...b->...a", jac, w[j]) * m
    return out


def _all_affine(fields):
    return all(isinstance(f, AffineField) for f in fields)


def integrate(drift, fields, y0, dxi, dz, lvl2, bound=DIVERGENCE_BOUND):
    """Run the stepper over given driver increments; returns states on the mesh."""
    y0 = np.array(y0, dtype=np.float64)
    nsteps = len(dxi)
    if _all_affine([drift] + list(fields)):
        e = len(y0)
        d = len(fields)
        bm = (np.stack([f.matrix for f in fields]) if d else np.zeros((0, e, e)))
        bo = (np.stack([f.offset for f in fields]) if d else np.zeros((0, e)))
        ys, bad = kernels.davie_affine(y0, drift.matrix, drift.offset,
                                       np.asarray(dxi, dtype=np.float64), bm, bo,
                                       np.ascontiguousarray(dz), np.ascontiguousarray(lvl2),
                                       bound)
        if bad >= 0:
            raise DivergenceError(f"solution left |y| <= {bound:g} at step {bad}", bad)
        return np.asarray(ys)
    ys = np.empty((nsteps + 1, len(y0)))
    y = ys[0] = y0
    for k in range(nsteps):
        ynew = y + drift(y) * dxi[k] if dxi[k] != 0.0 else y
        if fields:
            ynew = ynew + davie_increment(fields, y, dz[k], lvl2[k])
        y = ys[k + 1] = ynew
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > bound:
            raise DivergenceError(f"solution left |y| <= {bound:g} at step {k}", k)
    return ys


def uniform_mesh(s, t, steps):
    mesh = s + (t - s) * (np.arange(steps + 1) / steps)
    mesh[0], mesh[-1] = s, t
    return mesh


def solve_rde(problem: RdeProblem, steps: int, mesh=None) -> SampledPath:
    """Solve on a uniform mesh of ``steps`` intervals (or on ``mesh``)."""
    if mesh is None:
        if steps < 1:
            raise ValueError("steps must be >= 1")
        mesh = uniform_mesh(0.0, problem.horizon, steps)
    dxi = np.diff(problem.xi(mesh))
    dz, lvl2 = problem.z.increments_on(mesh)
    ys = integrate(problem.drift, problem.noise_fields, problem.y0, dxi, dz, lvl2)
    return SampledPath(mesh, ys)


def flow_operator(which, problem: RdeProblem, s, t, x, steps):
    """Apply P (drift along xi) or Q (noise fields along z) over ``[s, t]`` to ``x``."""
    x = np.atleast_1d(np.array(x, dtype=np.float64))
    if t == s:
        return x
    if t < s:
        raise ValueError("flow operators need s <= t")
    mesh = uniform_mesh(s, t, steps)
    e = problem.dim
    if which == "P":
        dxi = np.diff(problem.xi(mesh))
        ys = integrate(problem.drift, [], x, dxi, np.zeros((steps, 0)),
                       np.zeros((steps, 0, 0)))
    elif which == "Q":
        dz, lvl2 = problem.z.increments_on(mesh)
        ys = integrate(AffineField.zero(e), problem.noise_fields, x,
                       np.zeros(steps), dz, lvl2)
    else:
        raise ValueError(f"which must be 'P' or 'Q', got {which!r}")
    return ys[-1]


def dissection(horizon, n):
    return np.arange(n + 1) * horizon / n


def split_solve_rde(problem: RdeProblem, n, scheme="lie", order="PQ",
                    steps_per_substep=DEFAULT_STEPS_PER_SUBSTEP) -> SampledPath:
    """Splitting approximation sampled at the dissection ``{k T / n}``.

    Lie/PQ applies ``Q o P`` on every cell; QP swaps them.  Strang/PQ applies
    half of P (``xi`` on the first half cell), Q over the whole cell (with
    twice the sub-steps), then the other half of P; Strang/QP is the mirror
    image.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if order not in ("PQ", "QP") or scheme not in ("lie", "strang"):
        raise ValueError(f"unknown scheme/order {scheme}/{order}")
    first, second = order[0], order[1]
    k = steps_per_substep
    times = dissection(problem.horizon, n)
    ys = np.empty((n + 1, problem.dim))
    y = ys[0] = problem.y0
    for c in range(n):
        lo, hi = times[c], times[c + 1]
        if scheme == "lie":
            y = flow_operator(first, problem, lo, hi, y, k)
            y = flow_operator(second, problem, lo, hi, y, k)
        else:
            mid = 0.5 * (lo + hi)
            y = flow_operator(first, problem, lo, mid, y, k)
            y = flow_operator(second, problem, lo, hi, y, 2 * k)
            y = flow_operator(first, problem, mid, hi, y, k)
        ys[c + 1] = y
    return SampledPath(times, ys)


def split_drivers(problem: RdeProblem, n, scheme="lie", order="PQ") -> RdeProblem:
    """The problem with drivers ``(xi o a, z o b)`` whose solution the split reproduces."""
    a, b = make_time_changes(scheme, problem.horizon / n, problem.horizon)
    if order == "QP":
        a, b = b, a
    return problem.with_drivers(xi=compose(problem.xi, a),
                                z=reparametrize_rough(problem.z, b))


def split_driver_mesh(problem: RdeProblem, n, scheme, steps_per_substep):
    """Step mesh on which the reparametrized problem mimics the split exactly."""
    parts = 2 if scheme == "lie" else 4
    return uniform_mesh(0.0, problem.horizon, parts * n * steps_per_substep)


def identity_driver(horizon=1.0, dim=1):
    """Lift of ``t -> t (1, ..., 1)``: the smooth driver of the ODE examples."""
    return lift_level2(SampledPath([0.0, horizon], [[0.0] * dim, [horizon] * dim]))


def convergence_table(problem: RdeProblem, n_list, scheme="lie", order="PQ",
                      steps_per_substep=DEFAULT_STEPS_PER_SUBSTEP, ref_steps=100_000,
                      p=2.5):
    """CSV ``n,error_sup,error_pvar`` of split solutions against a fine unsplit solve.

    The reference uses at least ``ref_steps`` steps, rounded up so every
    dissection point is a step node.  ``error_sup`` is the uniform distance
    on ``D^n`` and ``error_pvar`` the ``p``-variation of the error path
    sampled on ``D^n``.
    """
    from math import lcm

    from .paths import p_variation, uniform_distance

    n_list = [int(n) for n in n_list]
    base = lcm(*n_list)
    steps = -(-int(ref_steps) // base) * base
    ref = solve_rde(problem, steps)
    lines = ["n,error_sup,error_pvar"]
    for n in n_list:
        split = split_solve_rde(problem, n, scheme, order, steps_per_substep)
        ref_on = ref.values[:: steps // n]
        diff = SampledPath(split.times, split.values - ref_on)
        esup = uniform_distance(split, SampledPath(split.times, ref_on))
        lines.append(f"{n},{esup!r},{p_variation(diff, p)!r}")
    return "\n".join(lines) + "\n"
