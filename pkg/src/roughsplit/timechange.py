"""Splitting clocks: the Lie/Strang time changes and nondecreasing reparametrizations.

Every :class:`TimeChange` is a continuous nondecreasing piecewise-linear map
of ``[0, T]`` onto itself.  The analytic kinds are evaluated in closed form;
``breakpoints()`` returns the nodes between which each kind is affine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateTimeChangeError, InvalidTimeChangeError,
                     MeshError)
from .paths import SampledPath, reparametrized_mesh

ANALYTIC_KINDS = ("identity", "lie_a", "lie_b", "strang_a", "strang_b")

#: Weight of the identity mixed into mollified clocks so that slopes stay
#: representably positive on flat stretches far wider than the kernel.
MOLLIFY_SLOPE_FLOOR = 1e-10


def _cells(t, horizon, n):
    """Cell index k with k*T/n <= t < (k+1)*T/n, robust to rounding."""
    k = np.floor(t * n / horizon)
    k = np.clip(k, 0, n - 1)
    k = np.where((k + 1) * horizon / n <= t, k + 1, k)
    k = np.where(k * horizon / n > t, k - 1, k)
    return np.clip(k, 0, n - 1)


@dataclass(frozen=True, eq=False)
class TimeChange:
    kind: str
    horizon: float
    n: int = 1
    path: SampledPath | None = None
    factor: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def delta(self) -> float:
        return self.horizon / self.n

    # --- constructors -------------------------------------------------
    @classmethod
    def identity(cls, horizon=1.0):
        return cls("identity", float(horizon))

    @classmethod
    def analytic(cls, kind, horizon, n):
        if kind not in ANALYTIC_KINDS:
            raise InvalidTimeChangeError(f"unknown time change kind {kind!r}")
        return cls(kind, float(horizon), int(n))

    @classmethod
    def sampled(cls, path: SampledPath, factor=1.0, **meta):
        if path.dim != 1:
            raise InvalidTimeChangeError("a time change is a scalar path")
        v = path.values[:, 0]
        if v[0] != 0.0 or v[-1] != path.horizon:
            raise InvalidTimeChangeError(
                f"time change must satisfy xi(0)=0, xi(T)=T; got "
                f"xi(0)={v[0]!r}, xi(T)={v[-1]!r}")
        if np.any(np.diff(v) < 0):
            raise InvalidTimeChangeError("time change must be nondecreasing")
        return cls("sampled", path.horizon, 1, path, float(factor), dict(meta))

    # --- evaluation ---------------------------------------------------
    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        T = self.horizon
        if self.kind == "sampled":
            out = np.interp(t, self.path.times, self.path.values[:, 0])
        elif self.kind == "identity":
            out = np.clip(t, 0.0, T)
        else:
            n = self.n
            k = _cells(t, T, n)
            lo = k * T / n
            w = (k + 1) * T / n - lo
            r = t - lo
            if self.kind == "lie_a":
                out = lo + np.minimum(2 * r, w)
            elif self.kind == "lie_b":
                out = lo + np.maximum(0.0, 2 * r - w)
            elif self.kind == "strang_a":
                out = (lo + 2 * np.minimum(r, w / 4)
                       + 2 * np.maximum(0.0, r - 3 * w / 4))
            else:  # strang_b
                out = lo + 2 * np.clip(r - w / 4, 0.0, w / 2)
            out = np.where(t <= 0, 0.0, np.where(t >= T, T, out))
        return float(out[0]) if scalar else out

    def breakpoints(self):
        """Nodes ``bt`` and values ``bv`` such that the map is affine in between."""
        T, n = self.horizon, self.n
        if self.kind == "sampled":
            return self.path.times, self.path.values[:, 0]
        if self.kind == "identity":
            bt = np.array([0.0, T])
        else:
            k = np.arange(n + 1)
            nodes = [k * T / n]
            lo, hi = k[:-1] * T / n, k[1:] * T / n
            if self.kind.startswith("lie"):
                nodes.append((lo + hi) / 2)
            else:
                nodes += [lo + (hi - lo) / 4, lo + 3 * (hi - lo) / 4]
            bt = np.unique(np.concatenate(nodes))
        return bt, self(bt)

    def as_path(self, mesh=None) -> SampledPath:
        if mesh is None:
            mesh = self.breakpoints()[0]
        return SampledPath(mesh, self(mesh))

    def to_csv(self, mesh=None) -> str:
        return self.as_path(mesh).to_csv()

    def __repr__(self):
        extra = f", n={self.n}" if self.kind in ANALYTIC_KINDS[1:] else ""
        return f"TimeChange({self.kind!r}, T={self.horizon}{extra})"


def _check_dissection(delta, horizon):
    n = horizon / delta
    nr = round(n)
    if nr < 1 or abs(n - nr) > 1e-9 * max(1.0, n):
        raise MeshError(f"delta={delta} does not divide T={horizon}")
    return int(nr)


def make_time_changes(scheme, delta, horizon=1.0):
    """Return the pair ``(a, b)`` of splitting clocks for ``scheme`` in {lie, strang}.

    ``a`` drives the first operator, ``b`` the second; on every cell of
    width ``delta`` exactly one of them moves at any time, at speed 2.
    """
    n = _check_dissection(delta, horizon)
    if scheme == "lie":
        return (TimeChange.analytic("lie_a", horizon, n),
                TimeChange.analytic("lie_b", horizon, n))
    if scheme == "strang":
        return (TimeChange.analytic("strang_a", horizon, n),
                TimeChange.analytic("strang_b", horizon, n))
    raise ValueError(f"unknown scheme {scheme!r}; expected 'lie' or 'strang'")


def compose(outer: TimeChange, inner: TimeChange) -> TimeChange:
    """The clock ``t -> outer(inner(t))``, sampled exactly on its breakpoints."""
    if outer.horizon != inner.horizon:
        raise InvalidTimeChangeError("horizons differ")
    mesh = reparametrized_mesh(inner, outer.breakpoints()[0])
    vals = outer(inner(mesh))
    vals[0], vals[-1] = 0.0, outer.horizon
    return TimeChange.sampled(SampledPath(mesh, vals))


@dataclass(frozen=True)
class Decomposition:
    is_member: bool
    mesh: np.ndarray
    density: np.ndarray       # per mesh interval, >= 0 where member
    singular: SampledPath     # cumulative singular mass
    witness: tuple | None = None
    reason: str = ""


def _mesh_and_values(xi, n_mesh):
    if isinstance(xi, SampledPath):
        if xi.dim != 1:
            raise InvalidTimeChangeError("a time change is a scalar path")
        return xi.times, xi.values[:, 0]
    bt, _ = xi.breakpoints()
    mesh = np.union1d(bt, np.linspace(0.0, xi.horizon, n_mesh + 1))
    return mesh, xi(mesh)


def decompose_c1var_plus(xi, n_mesh=1024) -> Decomposition:
    """Split a clock into a piecewise-constant density and a singular part.

    An interval whose discrete slope exceeds ``1/sqrt(width)`` is treated as
    carrying singular mass; all other increments count as density.
    ``xi`` may be a :class:`TimeChange` or a scalar :class:`SampledPath`
    (the latter need not be a member; that is what this checks).
    """
    mesh, v = _mesh_and_values(xi, n_mesh)
    dt = np.diff(mesh)
    inc = np.diff(v)
    slope = inc / dt
    T = mesh[-1]
    witness, reason = None, ""
    bad = np.nonzero(inc < 0)[0]
    if len(bad):
        k = int(bad[0])
        witness = (float(mesh[k]), float(mesh[k + 1]))
        reason = "decreasing"
    elif v[0] != 0.0:
        reason = "xi(0) != 0"
    elif v[-1] != T:
        reason = "xi(T) != T"
    flagged = slope > 1.0 / np.sqrt(dt)
    sing_inc = np.where(flagged, inc, 0.0)
    density = np.where(flagged, 0.0, slope)
    singular = SampledPath(mesh, np.concatenate(([0.0], np.cumsum(sing_inc))))
    return Decomposition(not reason, mesh, density, singular, witness, reason)


def mollify_increasing(xi: TimeChange, eps, base_intervals=128, refine=10,
                       kernel_nodes=481) -> TimeChange:
    """Gaussian smoothing of a clock, returned as a strictly increasing C^1 clock.

    The clock is continued with slope 1 outside ``[0, T]`` and convolved with
    a centred normal density of standard deviation ``eps`` (trapezoidal rule,
    kernel truncated at 6 eps) on a ``refine``-times refined mesh, then
    renormalized to fix both endpoints.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    dec = decompose_c1var_plus(xi)
    if not dec.is_member:
        raise InvalidTimeChangeError(f"not in C_0^{{1-var,+}}: {dec.reason}")
    T = xi.horizon
    bt, bv = xi.breakpoints()
    base = np.union1d(bt, np.linspace(0.0, T, base_intervals + 1))
    frac = np.arange(refine) / refine
    mesh = np.concatenate(
        [base[:-1, None] + np.diff(base)[:, None] * frac[None, :]]).ravel()
    mesh = np.unique(np.append(mesh, T))

    u = np.linspace(-6 * eps, 6 * eps, kernel_nodes)
    w = np.exp(-0.5 * (u / eps) ** 2)
    w[0] *= 0.5
    w[-1] *= 0.5
    w /= w.sum()

    def extended(s):
        return np.where(s < 0, s, np.where(s > T, s, np.interp(s, bt, bv)))

    sm = extended(mesh[:, None] - u[None, :]) @ w
    g = (sm - sm[0]) * (T / (sm[-1] - sm[0]))
    g = (1 - MOLLIFY_SLOPE_FLOOR) * g + MOLLIFY_SLOPE_FLOOR * mesh
    g[0], g[-1] = 0.0, T
    g = np.maximum.accumulate(g)
    return TimeChange.sampled(SampledPath(mesh, g), eps=eps, source=repr(xi))


def rescale_to_horizon(xi: SampledPath) -> TimeChange:
    """Normalize a nondecreasing clock so it ends at T; ``factor`` = xi(T)/T.

    Operator coefficients multiplied by ``factor`` compensate for the
    rescaling (``F d xi = (F * factor) d xi_tilde``).
    """
    if xi.dim != 1:
        raise InvalidTimeChangeError("a time change is a scalar path")
    v = xi.values[:, 0] - xi.values[0, 0]
    if xi.values[0, 0] != 0.0:
        raise InvalidTimeChangeError("time change must start at 0")
    if np.any(np.diff(v) < 0):
        raise InvalidTimeChangeError("time change must be nondecreasing")
    end = v[-1]
    if end <= 0 or not math.isfinite(end):
        raise DegenerateTimeChangeError("constant time change cannot be rescaled")
    T = xi.horizon
    scaled = v * (T / end)
    scaled[-1] = T
    return TimeChange.sampled(SampledPath(xi.times, scaled), factor=end / T)
