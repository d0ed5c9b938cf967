"""Monotone explicit viscosity solvers on a 1-D grid.

Two kinds of step are provided:

* :func:`deterministic_step` advances ``dv = F(x, v, Dv, D^2 v) dxi`` for a
  linear parabolic or HJB operator ``F`` by the stretched time
  ``xi(t) - xi(s)``, using central differences for the second-order term,
  upwind differences for the first-order term and automatic CFL sub-steps.
* :func:`rough_transport_step` applies the solution operator of
  ``du = (sigma u_x + nu u + g) dz`` over one interval by integrating the
  characteristics backwards along ``z`` and interpolating.

Both updates are monotone in the data, so they preserve pointwise order.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (DegenerateInputError, DimensionMismatchError, DivergenceError,
                     InvalidTimeChangeError, ResolutionError, TwoRouteMismatchError)
from .rde import DIVERGENCE_BOUND
from .rough import Level2RoughPath
from .timechange import TimeChange, decompose_c1var_plus

CFL_FACTOR = 0.9
MAX_SUBSTEPS = 10 ** 7
BOUNDARIES = ("periodic", "clamped")
_LOG_BOUND = math.log(DIVERGENCE_BOUND)


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``x_i = x_min + i h``, ``h = (x_max - x_min) / (n_points - 1)``.

    With ``boundary="periodic"`` the grid wraps with period ``n_points * h``
    (``x_max + h`` is identified with ``x_min``); with ``"clamped"`` values
    are extended by copying the end values.
    """
    x_min: float
    x_max: float
    n_points: int
    boundary: str = "periodic"

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise DegenerateInputError(f"boundary must be one of {BOUNDARIES}")
        if self.n_points < 3:
            raise DegenerateInputError("a grid needs at least 3 points")
        if not self.x_min < self.x_max:
            raise DegenerateInputError("x_min must be below x_max")

    @classmethod
    def periodic(cls, x_min, length, n_points):
        """Periodic grid of ``n_points`` cells covering ``[x_min, x_min + length)``."""
        return cls(float(x_min), float(x_min + length * (n_points - 1) / n_points),
                   int(n_points), "periodic")

    @property
    def h(self):
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def period(self):
        return self.n_points * self.h

    @property
    def x(self):
        return self.x_min + self.h * np.arange(self.n_points)

    @property
    def is_periodic(self):
        return self.boundary == "periodic"

    def interior_mask(self, margin=0.05):
        """All points for periodic grids; the points away from a ``margin`` fraction otherwise."""
        mask = np.ones(self.n_points, dtype=bool)
        if not self.is_periodic:
            cut = int(math.ceil(margin * self.n_points))
            mask[:cut] = False
            mask[self.n_points - cut:] = False
        return mask


class GridFunction:
    """Finite values on a :class:`Grid1D`; the value array is read-only."""

    def __init__(self, grid: Grid1D, values):
        v = np.array(values, dtype=np.float64).reshape(-1)
        if len(v) != grid.n_points:
            raise DimensionMismatchError(
                f"{len(v)} values for a grid of {grid.n_points} points")
        if not np.all(np.isfinite(v)):
            raise DegenerateInputError("grid function values must be finite")
        v.setflags(write=False)
        self.grid, self.values = grid, v

    @classmethod
    def from_function(cls, grid, f):
        return cls(grid, f(grid.x))

    @property
    def x(self):
        return self.grid.x

    def sup_distance(self, other, mask=None):
        diff = np.abs(self.values - np.asarray(getattr(other, "values", other)))
        return float(np.max(diff if mask is None else diff[mask]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "u"])
        for x, u in zip(self.x, self.values):
            w.writerow([repr(float(x)), repr(float(u))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, boundary="periodic"):
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if rows[0] != ["x", "u"]:
            raise DegenerateInputError("grid function CSV must have header x,u")
        data = np.array([[float(a) for a in r] for r in rows[1:]])
        grid = Grid1D(float(data[0, 0]), float(data[-1, 0]), len(data), boundary)
        return cls(grid, data[:, 1])

    def __repr__(self):
        return f"GridFunction(n={self.grid.n_points}, boundary={self.grid.boundary!r})"


def _on_grid(coef, x):
    """Evaluate a coefficient given as a scalar, a callable of ``x`` or a tabulated array."""
    if coef is None:
        return np.zeros_like(x)
    if callable(coef):
        return np.broadcast_to(np.asarray(coef(x), dtype=np.float64), x.shape).copy()
    arr = np.asarray(coef, dtype=np.float64)
    if arr.ndim == 0:
        return np.full_like(x, float(arr))
    if arr.shape != x.shape:
        raise DimensionMismatchError(
            f"tabulated coefficient has {arr.shape[0]} values, grid has {x.shape[0]}")
    return arr.copy()


def _lipschitz_check(name, vals, grid, bound):
    if bound is None:
        return
    dq = np.abs(np.diff(vals)) / grid.h
    if np.max(dq, initial=0.0) > bound * (1 + 1e-9) + 1e-12:
        raise DegenerateInputError(
            f"{name} has difference quotient {np.max(dq):.3g} above its bound {bound}")


class LinearParabolicOp:
    """``F(x, r, p, X) = sigma_bar(x)^2 X + b(x) p + reaction(x) r + source(x) + f(x, r)``.

    ``f`` is an optional general zeroth-order term; its Lipschitz constant in
    ``r`` must be supplied as ``f_lipschitz`` so the CFL bound covers it.
    ``lipschitz`` optionally bounds the spatial difference quotients of
    ``sigma_bar`` and ``b`` and is checked on every grid they are used on.
    """

    def __init__(self, sigma_bar=0.0, b=0.0, reaction=0.0, source=0.0, f=None,
                 f_lipschitz=None, lipschitz=None, name=""):
        if f is not None and f_lipschitz is None:
            raise DegenerateInputError("a general f needs f_lipschitz")
        self.sigma_bar, self.b = sigma_bar, b
        self.reaction, self.source = reaction, source
        self.f, self.f_lipschitz = f, (0.0 if f_lipschitz is None else float(f_lipschitz))
        self.lipschitz = lipschitz
        self.name = name

    def coefficients(self, grid):
        x = grid.x
        sb = _on_grid(self.sigma_bar, x)
        b = _on_grid(self.b, x)
        _lipschitz_check("sigma_bar", sb, grid, self.lipschitz)
        _lipschitz_check("b", b, grid, self.lipschitz)
        return sb ** 2, b, _on_grid(self.reaction, x), _on_grid(self.source, x)

    @property
    def controls(self):
        return [self]

    @property
    def is_zero(self):
        """True when every coefficient is the scalar 0 (so the step is the identity)."""
        coefs = (self.sigma_bar, self.b, self.reaction, self.source)
        return self.f is None and all(
            not callable(c) and np.ndim(c) == 0 and float(c) == 0.0 for c in coefs)

    def __repr__(self):
        return f"LinearParabolicOp({self.name or 'custom'})"


class HJBOp:
    """``F = min over controls alpha of L_alpha``, each ``L_alpha`` a :class:`LinearParabolicOp`."""

    def __init__(self, controls, labels=None, name=""):
        controls = list(controls)
        if not controls:
            raise DegenerateInputError("HJB operator needs at least one control")
        if any(c.f is not None for c in controls):
            raise DegenerateInputError("HJB controls take pointwise sources, not general f")
        self._controls = controls
        self.labels = list(labels) if labels is not None else list(range(len(controls)))
        self.name = name

    @property
    def controls(self):
        return self._controls

    @property
    def f(self):
        return None

    @property
    def is_zero(self):
        return all(c.is_zero for c in self._controls)

    @property
    def f_lipschitz(self):
        return 0.0

    def __repr__(self):
        return f"HJBOp({len(self._controls)} controls)"


def _stencils(op, grid):
    """Per-control arrays ``A, b, reaction, source`` stacked along axis 0."""
    parts = [c.coefficients(grid) for c in op.controls]
    return [np.stack(p) for p in zip(*parts)]


def cfl_rate(op, grid):
    """``1 / dt`` at which the explicit update stops being monotone."""
    a, b, c, _ = _stencils(op, grid)
    h = grid.h
    return float(np.max(2 * a / h ** 2 + np.abs(b) / h + np.abs(c)) + op.f_lipschitz)


def substep_count(dxi, rate, n_sub=1):
    """Number of uniform sub-steps for stretched time ``dxi``.

    The minimal count allowed by the CFL factor is rounded up to four
    significant binary digits.  Doubling ``dxi`` then doubles the count
    (once it is at least 8), so a solve cut at dyadic points performs the
    same arithmetic as the uncut solve, while the Courant number stays in
    ``[0.8, 0.9]`` of the monotonicity limit.
    """
    need = max(math.ceil(dxi * rate / CFL_FACTOR), int(n_sub), 1)
    if need <= 16:
        return need
    e = need.bit_length() - 4
    return -(-need >> e) << e


def _explicit(op, grid, u, dt, nsteps, coeffs):
    if nsteps == 0:
        return u
    a, b, c, src = coeffs
    h = grid.h
    cp = dt * (a / h ** 2 + np.maximum(b, 0.0) / h)
    cm = dt * (a / h ** 2 + np.maximum(-b, 0.0) / h)
    c0 = 1.0 - cp - cm + dt * c
    s = dt * src
    f = op.f
    clamp = f is None and not np.any(c)
    if f is None:
        return kernels.hjb_substeps(u, c0, cp, cm, s, int(nsteps), grid.is_periodic, clamp)
    x = grid.x
    for _ in range(nsteps):
        lin = kernels.hjb_substeps(u, c0, cp, cm, s, 1, grid.is_periodic, False)
        u = np.asarray(lin) + dt * np.asarray(f(x, u), dtype=np.float64)
    return u


def deterministic_step(op, u: GridFunction, xi: TimeChange, s, t, n_sub=1) -> GridFunction:
    """Advance ``u`` by the stretched time ``xi(t) - xi(s)``.

    The increment is covered by ``substep_count`` uniform explicit steps
    (at least ``n_sub``); an increment of zero returns ``u`` itself.
    """
    if t < s:
        raise DegenerateInputError("deterministic_step needs s <= t")
    dxi = float(xi(t)) - float(xi(s))
    if dxi < 0:
        raise InvalidTimeChangeError("time change decreases on [s, t]")
    return evolve(op, u, dxi, n_sub)


def evolve(op, u: GridFunction, dxi, n_sub=1) -> GridFunction:
    """Advance ``u`` by stretched time ``dxi`` (the core of :func:`deterministic_step`)."""
    if dxi == 0.0:
        return u
    grid = u.grid
    rate = cfl_rate(op, grid)
    if rate == 0.0:  # F vanishes identically
        return u
    m = substep_count(dxi, rate, n_sub)
    if m > MAX_SUBSTEPS:
        raise ResolutionError(
            f"CFL needs {m} sub-steps (limit {MAX_SUBSTEPS}); "
            "coarsen the grid or shorten the interval")
    v = _explicit(op, grid, u.values, dxi / m, m, _stencils(op, grid))
    return GridFunction(grid, v)


def apply_operator(op, u: GridFunction):
    """The discrete ``F(u)`` (rate of change) on the grid, including the min over controls."""
    a, b, c, src = _stencils(op, u.grid)
    h = u.grid.h
    v = u.values
    if u.grid.is_periodic:
        up, um = np.roll(v, -1), np.roll(v, 1)
    else:
        up = np.concatenate((v[1:], v[-1:]))
        um = np.concatenate((v[:1], v[:-1]))
    rate = (a * (up - 2 * v + um) / h ** 2 + np.maximum(b, 0) * (up - v) / h
            - np.maximum(-b, 0) * (v - um) / h + c * v + src)
    out = np.min(rate, axis=0)
    if op.f is not None:
        out = out + op.f(u.x, v)
    return out


# --- rough transport ------------------------------------------------------

def _coef_fn(coef):
    if callable(coef):
        return coef
    val = float(coef)
    return lambda x: np.full(np.shape(x), val)


def _derivative(coef, deriv, fd_step=1e-6):
    if deriv is not None:
        return _coef_fn(deriv)
    if not callable(coef):
        return lambda x: np.zeros(np.shape(x))
    return lambda x: (coef(x + fd_step) - coef(x - fd_step)) / (2 * fd_step)


class RoughTransportOp:
    """``Lambda_k(x, r, p) = sigma_k(x) p + nu_k(x) r + g_k(x)`` for channels ``k = 1..d``.

    Each coefficient is a float or a vectorized callable; derivatives may be
    given as ``dsigma``, ``dnu``, ``dg`` (same shapes) and otherwise are
    taken by central differences.  Coefficients do not depend on time.
    """

    def __init__(self, sigma, nu=None, g=None, dsigma=None, dnu=None, dg=None, name=""):
        sigma = list(sigma) if isinstance(sigma, (list, tuple)) else [sigma]
        d = len(sigma)

        def channels(c):
            if c is None:
                return [0.0] * d
            c = list(c) if isinstance(c, (list, tuple)) else [c]
            if len(c) != d:
                raise DimensionMismatchError(f"{len(c)} coefficients for {d} channels")
            return c

        nu, g = channels(nu), channels(g)
        dsigma, dnu, dg = (channels(x) if x is not None else [None] * d
                           for x in (dsigma, dnu, dg))
        self.dim = d
        self.sigma = [_coef_fn(c) for c in sigma]
        self.nu = [_coef_fn(c) for c in nu]
        self.g = [_coef_fn(c) for c in g]
        self.dsigma = [_derivative(c, dc) for c, dc in zip(sigma, dsigma)]
        self.dnu = [_derivative(c, dc) for c, dc in zip(nu, dnu)]
        self.dg = [_derivative(c, dc) for c, dc in zip(g, dg)]
        # scalar values when a coefficient and its derivative are both constant
        self._const = [[None if callable(c) or dc is not None else float(c)
                        for c, dc in zip(cs, dcs)]
                       for cs, dcs in ((sigma, dsigma), (nu, dnu), (g, dg))]
        self._zero = {"nu": all(not callable(c) and float(c) == 0.0 for c in nu),
                      "g": all(not callable(c) and float(c) == 0.0 for c in g),
                      "sigma": all(not callable(c) and float(c) == 0.0 for c in sigma)}
        self.name = name

    @classmethod
    def zero(cls, dim=1):
        return cls([0.0] * dim)

    @property
    def is_zero(self):
        return all(self._zero.values())

    @property
    def preserves_constants(self):
        return self._zero["nu"] and self._zero["g"]

    def __repr__(self):
        return f"RoughTransportOp({self.name or 'custom'}, d={self.dim})"


def interpolate_shifted(grid: Grid1D, w, disp, stats=None):
    """Monotone linear interpolation of ``w`` at ``x_i + disp_i``.

    The result at each point is clipped into the range of the two values it
    interpolates, so constants and whole-cell shifts are reproduced exactly.
    """
    n = grid.n_points
    s = disp / grid.h
    k = np.floor(s)
    theta = s - k
    idx = np.arange(n) + k.astype(np.int64)
    if grid.is_periodic:
        lo = np.mod(idx, n)
        hi = np.mod(idx + 1, n)
    else:
        below = idx < 0
        above = (idx > n - 1) | ((idx == n - 1) & (theta > 0.0))
        if stats is not None:
            stats["clamped_points"] = stats.get("clamped_points", 0) + int(np.sum(below | above))
        lo = np.clip(idx, 0, n - 1)
        hi = np.clip(idx + 1, 0, n - 1)
        theta = np.where(below | above, 0.0, theta)
    wl, wh = w[lo], w[hi]
    val = (1.0 - theta) * wl + theta * wh
    return np.minimum(np.maximum(val, np.minimum(wl, wh)), np.maximum(wl, wh))


def characteristics(op: RoughTransportOp, grid: Grid1D, z: Level2RoughPath, char_steps=8):
    """Displacement ``D``, log-factor ``I`` and forcing ``G`` per grid point over ``z``'s interval.

    Integrates, along the time-reversed path ``zr``, the system
    ``dD = -sigma(x + D) dzr``, ``dI = -nu(x + D) dzr``,
    ``dG = -exp(I) g(x + D) dzr`` with the level-2 increment scheme on the
    union of ``z``'s mesh and ``char_steps`` uniform steps.
    """
    x = grid.x
    n = len(x)
    zr = z.reversed()
    s, t = zr.start, zr.end
    mesh = np.union1d(zr.mesh, s + (t - s) * (np.arange(char_steps + 1) / char_steps))
    mesh = mesh[(mesh >= s) & (mesh <= t)]
    dz, lvl2 = zr.increments_on(mesh)
    live = np.flatnonzero(np.any(dz != 0, axis=1) | np.any(lvl2 != 0, axis=(1, 2)))
    steps = list(zip(live.tolist(), dz[live].tolist(), np.swapaxes(lvl2[live], 1, 2).tolist()))
    if all(c is not None for cs in op._const for c in cs):
        D, I, G = _uniform_characteristics(op, steps)
        return np.full(n, D), np.full(n, I), np.full(n, G)
    d = op.dim
    need_i = not op._zero["nu"]
    need_g = not op._zero["g"]
    moves = not op._zero["sigma"]
    D, I, G = np.zeros(n), np.zeros(n), np.zeros(n)
    coef = None
    for k, dzk, mk in steps:
        if coef is None or moves:
            X = x + D
            coef = ([f(X) for f in op.sigma], [f(X) for f in op.dsigma],
                    [f(X) for f in op.nu] if need_i else None,
                    [f(X) for f in op.dnu] if need_i else None,
                    [f(X) for f in op.g] if need_g else None,
                    [f(X) for f in op.dg] if need_g else None)
        sg, dsg, nu, dnu, g, dg = coef
        eI = np.exp(I) if need_g else None
        nD, nI, nG = D, I, G
        for i in range(d):
            dzi = dzk[i]
            if dzi != 0.0:
                nD = nD - sg[i] * dzi
                if need_i:
                    nI = nI - nu[i] * dzi
                if need_g:
                    nG = nG - eI * g[i] * dzi
            for j in range(d):
                m = mk[i][j]
                if m == 0.0:
                    continue
                nD = nD + dsg[i] * sg[j] * m
                if need_i:
                    nI = nI + dnu[i] * sg[j] * m
                if need_g:
                    nG = nG + eI * (dg[i] * sg[j] + (g[i] * nu[j] if need_i else 0.0)) * m
        D, I, G = nD, nI, nG
        # NaN fails every comparison, inf overflows the sum
        if not math.isfinite(float(np.sum(D))) or (
                need_i and not abs(I).max() <= _LOG_BOUND) or (
                need_g and not abs(G).max() <= DIVERGENCE_BOUND):
            raise DivergenceError(f"characteristics diverged at step {k}", k)
    return D, I, G


def _uniform_characteristics(op, steps):
    """Scalar ``(D, I, G)`` when every coefficient is constant in space."""
    sg, nu, g = op._const
    d = op.dim
    need_i = not op._zero["nu"]
    D = I = G = 0.0
    for k, dzk, mk in steps:
        eI = math.exp(I)
        nD, nI, nG = D, I, G
        for i in range(d):
            dzi = dzk[i]
            if dzi != 0.0:
                nD -= sg[i] * dzi
                nI -= nu[i] * dzi
                nG -= eI * g[i] * dzi
            if need_i:
                for j in range(d):
                    nG += eI * (g[i] * nu[j]) * mk[i][j]
        D, I, G = nD, nI, nG
        if not (math.isfinite(D) and abs(I) <= _LOG_BOUND and abs(G) <= DIVERGENCE_BOUND):
            raise DivergenceError(f"characteristics diverged at step {k}", k)
    return D, I, G


def rough_transport_step(op: RoughTransportOp, w: GridFunction, z: Level2RoughPath,
                         char_steps=8, stats=None) -> GridFunction:
    """Solution operator of ``du = Lambda(x, u, Du) dz`` over ``z``'s interval.

    Output at ``x`` is ``exp(I) w^(x + D) + G`` with ``(D, I, G)`` from
    :func:`characteristics` and ``w^`` the monotone interpolant of ``w``.
    When ``sigma`` is constant this is an exact shift of the interpolant.
    ``stats`` (a dict) accumulates ``clamped_points`` on clamped grids.
    """
    if z.dim != op.dim:
        raise DimensionMismatchError(f"operator has {op.dim} channels, driver {z.dim}")
    if op.is_zero:
        return w
    D, I, G = characteristics(op, w.grid, z, char_steps)
    if not np.any(D) and not np.any(I) and not np.any(G):
        return w
    val = interpolate_shifted(w.grid, w.values, D, stats)
    if op._zero["nu"] and op._zero["g"]:
        return GridFunction(w.grid, val)
    return GridFunction(w.grid, np.exp(I) * val + G)


# --- stretched time -------------------------------------------------------

def _second_time_derivative(op, u0):
    rate = apply_operator(op, u0)
    return np.max(np.abs(apply_operator(op, GridFunction(u0.grid, rate))))


def plain_solve(op, u0: GridFunction, taus, horizon, return_dt=False):
    """``w(tau)`` for sorted ``taus`` from one uniform explicit solve over ``[0, horizon]``.

    The step is ``horizon / substep_count(horizon, rate)``; a ``tau`` off the
    step grid is reached by one partial step from the node below it.
    """
    grid = u0.grid
    rate = cfl_rate(op, grid)
    dt = horizon / substep_count(horizon, rate) if rate > 0 else horizon
    coeffs = _stencils(op, grid)
    out = []
    cur, done = u0.values, 0
    for tau in taus:
        if rate == 0.0:
            out.append(u0)
            continue
        k = math.floor(tau / dt)
        if k * dt > tau:
            k -= 1
        cur = _explicit(op, grid, cur, dt, k - done, coeffs)
        done = k
        rest = tau - k * dt
        v = _explicit(op, grid, cur, rest, 1, coeffs) if rest > 0 else cur
        out.append(GridFunction(grid, v))
    return (out, dt) if return_dt else out


def stretch_solve(op, u0: GridFunction, xi: TimeChange, eval_times, n_sub=1,
                  return_info=False):
    """``v(t) = w(xi(t))`` where ``w`` solves ``dw/dtau = F(w)`` once on ``[0, T]``.

    Route A steps ``w`` on one uniform stretched-time grid over ``[0, T]``
    and finishes with a partial step to each ``xi(t)``.  Route B
    applies :func:`deterministic_step` over the ``xi``-increments between
    consecutive breakpoints of ``xi`` and eval times.  The two are explicit
    Euler solves on different step sequences, so they differ by at most the
    sum of their global truncation errors; a larger gap raises
    :class:`TwoRouteMismatchError`.
    """
    dec = decompose_c1var_plus(xi)
    if not dec.is_member:
        raise InvalidTimeChangeError(f"time change is not admissible: {dec.reason}")
    times = np.asarray(eval_times, dtype=np.float64)
    if np.any(np.diff(times) < 0) or np.any(times < 0) or np.any(times > xi.horizon):
        raise DegenerateInputError("eval times must be sorted and inside [0, T]")
    taus = np.asarray(xi(times), dtype=np.float64)
    rate = cfl_rate(op, u0.grid)
    route_a, dt = plain_solve(op, u0, taus, float(xi.horizon), return_dt=True)

    # route B
    bt, _ = xi.breakpoints()
    route_b = []
    u, last = u0, 0.0
    for t in times:
        nodes = bt[(bt > last) & (bt < t)]
        for a, b in zip(np.concatenate(([last], nodes)), np.concatenate((nodes, [t]))):
            u = deterministic_step(op, u, xi, a, b, n_sub)
        route_b.append(u)
        last = t

    utt = _second_time_derivative(op, u0)
    dt_max = CFL_FACTOR / rate if rate > 0 else 0.0
    tol = 2.0 * (0.5 * dt_max * float(np.max(taus, initial=0.0)) * utt) + 1e-12
    gap = max((a.sup_distance(b) for a, b in zip(route_a, route_b)), default=0.0)
    if gap > tol:
        raise TwoRouteMismatchError(
            f"stretched-time and dxi-weighted solves differ by {gap:.3g} > {tol:.3g}")
    if return_info:
        return route_a, {"tolerance": tol, "gap": gap, "dt": dt, "route_b": route_b}
    return route_a
