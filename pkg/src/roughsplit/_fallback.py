"""Pure-Python/numpy implementations of the hot kernels.

These are the reference versions; ``_kernels.pyx`` mirrors them loop for
loop.  The two agree to rounding; the p-variation and grid kernels are
bit-identical because both evaluate sums in the same order.
"""
import numpy as np


def pvar_dp(values, p):
    """Return max over sub-sequences of sum |x_{k+1} - x_k|^p (not the root).

    ``values`` has shape (N, d).  O(N^2) time, O(N) memory.
    """
    x = np.asarray(values, dtype=np.float64)
    n = x.shape[0]
    cum = np.zeros(n)
    for j in range(1, n):
        dist = np.sqrt(np.sum((x[j] - x[:j]) ** 2, axis=1))
        cum[j] = np.max(cum[:j] + dist ** p)
    return float(cum[-1])


def hjb_substeps(u, c0, cp, cm, src, nsteps, periodic, clamp):
    """Run ``nsteps`` explicit monotone updates, minimised over controls.

    For every control k the update at node i is
    ``c0[k,i]*u[i] + cp[k,i]*u[i+1] + cm[k,i]*u[i-1]``, optionally clamped
    into the range of the three stencil values, plus ``src[k,i]``.
    """
    u = np.array(u, dtype=np.float64)
    for _ in range(nsteps):
        if periodic:
            up = np.roll(u, -1)
            um = np.roll(u, 1)
        else:
            up = np.concatenate((u[1:], u[-1:]))
            um = np.concatenate((u[:1], u[:-1]))
        if clamp:
            lo = np.minimum(np.minimum(u, up), um)
            hi = np.maximum(np.maximum(u, up), um)
        best = None
        for k in range(c0.shape[0]):
            val = c0[k] * u + cp[k] * up + cm[k] * um
            if clamp:
                val = np.minimum(np.maximum(val, lo), hi)
            val = val + src[k]
            best = val if best is None else np.minimum(best, val)
        u = best
    return u


def davie_affine(y0, a_mat, a_off, dxi, b_mats, b_offs, dz, lvl2, guard):
    """Level-2 increment scheme for affine drift and affine noise fields.

    Returns ``(ys, bad)`` where ``ys`` has one row per mesh point and
    ``bad`` is the first failing step index (or -1).
    """
    nsteps = dz.shape[0]
    d = b_mats.shape[0]
    e = y0.shape[0]
    ys = np.empty((nsteps + 1, e))
    y = np.array(y0, dtype=np.float64)
    ys[0] = y
    for k in range(nsteps):
        w = np.einsum("iab,b->ia", b_mats, y) + b_offs
        ynew = y + (a_mat @ y + a_off) * dxi[k]
        for i in range(d):
            ynew = ynew + w[i] * dz[k, i]
        for i in range(d):
            for j in range(d):
                m = lvl2[k, j, i]
                if m != 0.0:
                    ynew = ynew + (b_mats[i] @ w[j]) * m
        y = ynew
        ys[k + 1] = y
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > guard:
            return ys[: k + 2], k
    return ys, -1
