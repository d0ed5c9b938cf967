"""Level-2 rough paths: lifts of piecewise-linear paths, Chen's relation, metrics.

A :class:`Level2RoughPath` stores, for each interval of its mesh, the
increment ``v`` and the second-level tensor ``M = iint dz (x) dz``.  Values on
sub-intervals are obtained with a linear-chord rule: for a fraction ``lam``
of an interval the piece is ``(lam v, lam^2/2 v(x)v + lam A)`` with ``A`` the
interval's antisymmetric part.  That rule is exact for the canonical lift of
a linear segment (``A = 0``) and keeps Chen's relation exact in general.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ConcatenationError, DegenerateInputError, DimensionMismatchError
from .paths import SampledPath, reparametrized_mesh


@dataclass(frozen=True)
class Segment:
    """One element of the step-2 group over ``[start, end]``."""
    start: float
    end: float
    increment: np.ndarray
    second_level: np.ndarray

    @property
    def dim(self):
        return self.increment.shape[0]

    @property
    def area(self):
        m = self.second_level
        return 0.5 * (m - m.T)


def chen_concat(left: Segment, right: Segment) -> Segment:
    if left.end != right.start:
        raise ConcatenationError(
            f"left segment ends at {left.end!r}, right starts at {right.start!r}")
    if left.dim != right.dim:
        raise DimensionMismatchError("segments of different dimension")
    inc = left.increment + right.increment
    m = (left.second_level + right.second_level
         + np.outer(left.increment, right.increment))
    return Segment(left.start, right.end, inc, m)


def homogeneous_norm(increment, second_level):
    """``max(|v|, |Anti(M)|_F^(1/2))`` for arrays of shape (..., d) and (..., d, d)."""
    anti = 0.5 * (second_level - np.swapaxes(second_level, -1, -2))
    lvl1 = np.linalg.norm(increment, axis=-1)
    lvl2 = np.sqrt(np.sqrt(np.sum(anti ** 2, axis=(-1, -2))))
    return np.maximum(lvl1, lvl2)


class Level2RoughPath:
    """Increments and second-level tensors on a strictly increasing mesh."""

    def __init__(self, mesh, increments, second_level):
        mesh = np.array(mesh, dtype=np.float64)
        inc = np.array(increments, dtype=np.float64)
        lvl2 = np.array(second_level, dtype=np.float64)
        if inc.ndim == 1:
            inc = inc[:, None]
        if mesh.ndim != 1 or len(mesh) < 2:
            raise DegenerateInputError("mesh needs at least two times")
        if np.any(np.diff(mesh) <= 0):
            raise DegenerateInputError("mesh must be strictly increasing")
        n, d = inc.shape
        if n != len(mesh) - 1 or lvl2.shape != (n, d, d):
            raise DegenerateInputError(
                f"shape mismatch: mesh {mesh.shape}, increments {inc.shape}, "
                f"second level {lvl2.shape}")
        for a in (mesh, inc, lvl2):
            a.setflags(write=False)
        self.mesh, self.increments, self.second_level = mesh, inc, lvl2
        # running signature from mesh[0]
        s = np.zeros((n + 1, d))
        np.cumsum(inc, axis=0, out=s[1:])
        m = np.zeros((n + 1, d, d))
        np.cumsum(lvl2 + s[:-1, :, None] * inc[:, None, :], axis=0, out=m[1:])
        self._s, self._m = s, m

    @property
    def dim(self):
        return self.increments.shape[1]

    @property
    def start(self):
        return float(self.mesh[0])

    @property
    def end(self):
        return float(self.mesh[-1])

    def __len__(self):
        return len(self.increments)

    def segment(self, k) -> Segment:
        return Segment(float(self.mesh[k]), float(self.mesh[k + 1]),
                       self.increments[k].copy(), self.second_level[k].copy())

    def signature_at(self, times):
        """Level-1 and level-2 values of the path from ``start`` to each time."""
        t = np.clip(np.atleast_1d(np.asarray(times, dtype=np.float64)),
                    self.start, self.end)
        k = np.searchsorted(self.mesh, t, side="right") - 1
        k = np.clip(k, 0, len(self) - 1)
        lam = (t - self.mesh[k]) / (self.mesh[k + 1] - self.mesh[k])
        exact = t == self.mesh[k]
        lam = np.where(exact, 0.0, lam)
        v = self.increments[k]
        a = 0.5 * (self.second_level[k] - np.swapaxes(self.second_level[k], 1, 2))
        pv = lam[:, None] * v
        pm = (0.5 * lam[:, None, None] ** 2 * np.einsum("ni,nj->nij", v, v)
              + lam[:, None, None] * a)
        pm = np.where(exact[:, None, None], 0.0, pm)
        s0, m0 = self._s[k], self._m[k]
        s = s0 + pv
        m = m0 + pm + np.einsum("ni,nj->nij", s0, pv)
        return s, m

    def increments_on(self, mesh):
        """Increments and second-level tensors over consecutive nodes of ``mesh``."""
        s, m = self.signature_at(mesh)
        inc = np.diff(s, axis=0)
        lvl2 = m[1:] - m[:-1] - np.einsum("ni,nj->nij", s[:-1], inc)
        return inc, lvl2

    def between(self, s, t) -> Segment:
        inc, lvl2 = self.increments_on(np.array([s, t], dtype=np.float64))
        return Segment(float(s), float(t), inc[0], lvl2[0])

    def restrict(self, s, t) -> "Level2RoughPath":
        """The same rough path on ``[s, t]``, meshed by the interior nodes."""
        if not (self.start <= s < t <= self.end):
            raise DegenerateInputError(f"[{s}, {t}] not inside [{self.start}, {self.end}]")
        inner = self.mesh[(self.mesh > s) & (self.mesh < t)]
        mesh = np.concatenate(([s], inner, [t]))
        inc, lvl2 = self.increments_on(mesh)
        return Level2RoughPath(mesh, inc, lvl2)

    def refine(self, mesh) -> "Level2RoughPath":
        mesh = np.union1d(self.mesh, mesh)
        mesh = mesh[(mesh >= self.start) & (mesh <= self.end)]
        inc, lvl2 = self.increments_on(mesh)
        return Level2RoughPath(mesh, inc, lvl2)

    def endpoint(self) -> Segment:
        return Segment(self.start, self.end, self._s[-1].copy(), self._m[-1].copy())

    def level1_path(self) -> SampledPath:
        return SampledPath(self.mesh - self.start, self._s)

    def reversed(self) -> "Level2RoughPath":
        """Time reversal ``r -> z(start + end - r)`` on the mirrored mesh."""
        mesh = self.start + self.end - self.mesh[::-1]
        return Level2RoughPath(mesh, -self.increments[::-1],
                               np.swapaxes(self.second_level[::-1], 1, 2))

    def to_csv(self) -> str:
        d = self.dim
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t0", "t1"] + [f"inc_{i + 1}" for i in range(d)]
                   + [f"lvl2_{i + 1}{j + 1}" for i in range(d) for j in range(d)])
        for k in range(len(self)):
            row = [self.mesh[k], self.mesh[k + 1], *self.increments[k],
                   *self.second_level[k].ravel()]
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Level2RoughPath":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        header = rows[0]
        d = sum(1 for h in header if h.startswith("inc_"))
        data = np.array([[float(x) for x in r] for r in rows[1:]])
        mesh = np.append(data[:, 0], data[-1, 1])
        return cls(mesh, data[:, 2:2 + d], data[:, 2 + d:].reshape(-1, d, d))


def lift_level2(path: SampledPath) -> Level2RoughPath:
    """Canonical lift of the piecewise-linear interpolation of ``path``."""
    inc = np.diff(path.values, axis=0)
    return Level2RoughPath(path.times, inc, 0.5 * np.einsum("ni,nj->nij", inc, inc))


def reparametrize_rough(z: Level2RoughPath, tc) -> Level2RoughPath:
    """The rough path ``t -> z(tc(t))``; ``tc`` must live on ``[0, z.end]``."""
    if z.start != 0.0 or tc.horizon != z.end:
        raise DegenerateInputError("rough path and time change must share [0, T]")
    mesh = reparametrized_mesh(tc, z.mesh)
    inc, lvl2 = z.increments_on(tc(mesh))
    return Level2RoughPath(mesh, inc, lvl2)


def d0_distance(a: Level2RoughPath, b: Level2RoughPath) -> float:
    """``sup_t || a_{0,t}^{-1} (x) b_{0,t} ||`` over the union of both meshes."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimensions {a.dim} and {b.dim} differ")
    mesh = np.union1d(a.mesh, b.mesh)
    sa, ma = a.signature_at(mesh)
    sb, mb = b.signature_at(mesh)
    inc = sb - sa
    m = mb - ma - np.einsum("ni,nj->nij", sa, inc)
    return float(np.max(homogeneous_norm(inc, m)))
