"""Seeded Gaussian drivers on dyadic meshes.

Random numbers come from numpy's counter-based ``Philox`` bit generator
(4x64, 10 rounds) keyed by ``(seed, stream)`` and transformed with
``Generator.standard_normal``.  Brownian paths use stream ``level`` for the
midpoints added at dyadic level ``level`` (level 0 is the endpoint), so a
finer sample with the same seed refines the same trajectory.  fBm uses the
single stream ``FBM_STREAM``.
"""
from __future__ import annotations

import numpy as np

from .errors import UnsupportedRegularityError
from .paths import SampledPath

PRNG_ALGORITHM = "numpy-Philox4x64-10(key=(seed,stream))+standard_normal"
FBM_STREAM = 2 ** 32
MAX_FBM_POINTS = 4096


def philox(seed, stream=0) -> np.random.Generator:
    key = np.array([int(seed) & (2 ** 64 - 1), int(stream) & (2 ** 64 - 1)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _brownian(d, horizon, levels, seed):
    w = np.zeros((2, d))
    w[1] = np.sqrt(horizon) * philox(seed, 0).standard_normal(d)
    for lev in range(1, levels + 1):
        gap = horizon / 2 ** (lev - 1)
        z = philox(seed, lev).standard_normal((len(w) - 1, d))
        mid = 0.5 * (w[:-1] + w[1:]) + 0.5 * np.sqrt(gap) * z
        out = np.empty((2 * len(w) - 1, d))
        out[0::2] = w
        out[1::2] = mid
        w = out
    return w


def fgn_covariance(n, hurst, dt):
    k = np.arange(n, dtype=np.float64)
    h2 = 2 * hurst
    gamma = 0.5 * (np.abs(k + 1) ** h2 - 2 * np.abs(k) ** h2 + np.abs(k - 1) ** h2)
    idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    return gamma[idx] * dt ** h2


def _fbm(d, horizon, levels, seed, hurst):
    n = 2 ** levels
    if n > MAX_FBM_POINTS:
        raise ValueError(f"fbm is limited to 2^m <= {MAX_FBM_POINTS} increments")
    z = philox(seed, FBM_STREAM).standard_normal((n, d))
    if hurst == 1:
        # fully correlated increments: a straight line with Gaussian slope
        inc = np.repeat(z[:1] * (horizon / n), n, axis=0)
    else:
        chol = np.linalg.cholesky(fgn_covariance(n, hurst, horizon / n))
        inc = chol @ z
    return np.vstack((np.zeros((1, d)), np.cumsum(inc, axis=0)))


def sample_noise(kind="brownian", d=1, horizon=1.0, levels=8, seed=0, hurst=None):
    """Sample a driver on the dyadic mesh ``{k T / 2^levels}``.

    ``kind`` is ``"brownian"`` or ``"fbm"`` (then ``hurst`` in (1/3, 1]).
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    times = np.linspace(0.0, horizon, 2 ** levels + 1)
    if kind == "brownian":
        vals = _brownian(d, horizon, levels, seed)
    elif kind == "fbm":
        if hurst is None or hurst <= 1 / 3:
            raise UnsupportedRegularityError(
                f"fbm needs Hurst parameter > 1/3 for a level-2 lift, got {hurst}")
        if hurst > 1:
            raise ValueError(f"Hurst parameter must be <= 1, got {hurst}")
        vals = _fbm(d, horizon, levels, seed, hurst)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return SampledPath(times, vals)
