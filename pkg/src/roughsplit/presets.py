"""Named problems: the RPDE applications and the ODE/RDE examples.

``build_application(preset, seed, params)`` returns an :class:`RpdeProblem`;
``build_rde(preset, seed, params)`` returns an :class:`RdeProblem`.  Every
preset documents its parameters and defaults in ``APPLICATION_PARAMS`` /
``RDE_PARAMS``; unknown parameter names are rejected.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, UnknownPresetError
from .noise import sample_noise
from .paths import SampledPath
from .rde import AffineField, RdeProblem, identity_driver
from .rough import lift_level2
from .splitting import RpdeProblem
from .timechange import TimeChange
from .viscosity import (Grid1D, GridFunction, HJBOp, LinearParabolicOp,
                        RoughTransportOp)

_PERIODIC_GRID = {"x_min": -1.0, "length": 2.0, "n_points": 512}

APPLICATION_PARAMS = {
    # periodic Gaussian bump (variance v0) carried by du = sigma u_x dB
    "transport_check": dict(_PERIODIC_GRID, horizon=1.0, levels=12, v0=0.05, sigma=1.0),
    # the same plus heat with A = sigma_bar^2
    "heat_transport": dict(_PERIODIC_GRID, horizon=1.0, levels=12, v0=0.05, sigma=1.0,
                           sigma_bar=0.5 ** 0.5),
    # signal dX = -kappa tanh(X) dt + s dW, observation dY = gamma tanh(X) dt + dV
    "zakai_1d": dict(x_min=-5.0, x_max=5.0, n_points=201, horizon=1.0, levels=10,
                     kappa=0.5, gamma=1.0, s=1.0, x0=0.5, prior_var=0.5),
    # min over controls {alpha} of alpha u_x, transported by sigma along B_{T-t}
    "hjb_control": dict(x_min=-2.0, length=4.0, n_points=512, horizon=1.0, levels=12,
                        controls="-1,1", sigma_bar=0.0, sigma=1.0),
    # LQ-type control with running cost alpha^2/2 and state-dependent transport
    "pathwise_control": dict(x_min=-3.0, x_max=3.0, n_points=241, horizon=1.0, levels=12,
                             controls="-1,-0.5,0,0.5,1", sigma_bar=0.2, sigma=0.5,
                             wobble=0.5),
}

RDE_PARAMS = {
    "commuting": dict(horizon=1.0),
    "nilpotent": dict(horizon=1.0),
    "geometric_bm": dict(horizon=1.0, levels=12, y0=1.0),
    "geometric_fbm": dict(horizon=1.0, levels=10, y0=1.0, hurst=0.6),
}

STOCHASTIC = {"transport_check", "heat_transport", "zakai_1d", "hjb_control",
              "pathwise_control", "geometric_bm", "geometric_fbm"}


def _params(table, preset, params):
    if preset not in table:
        raise UnknownPresetError(
            f"unknown preset {preset!r}; choose one of {', '.join(sorted(table))}")
    out = dict(table[preset])
    for k, v in (params or {}).items():
        if k not in out:
            raise DegenerateInputError(
                f"preset {preset!r} has no parameter {k!r} (known: {', '.join(out)})")
        out[k] = type(out[k])(v) if not isinstance(out[k], str) else str(v)
    return out


def _grid(p, boundary):
    if "length" in p:
        return Grid1D.periodic(p["x_min"], p["length"], int(p["n_points"]))
    return Grid1D(p["x_min"], p["x_max"], int(p["n_points"]), boundary)


def periodic_gaussian(x, var, period, scale_var=None, images=8):
    """Sum of Gaussian bumps of variance ``var`` centred at multiples of ``period``.

    With ``scale_var`` the bumps are scaled by ``sqrt(scale_var / var)``, which
    is the heat-flow evolution of the ``scale_var`` bump.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for m in range(-images, images + 1):
        out += np.exp(-(x - m * period) ** 2 / (2 * var))
    if scale_var is not None:
        out *= np.sqrt(scale_var / var)
    return out


def wrap(x, grid):
    """Map ``x`` into ``[x_min, x_min + period)``."""
    return grid.x_min + np.mod(np.asarray(x) - grid.x_min, grid.period)


def _brownian(seed, p, d=1):
    if seed is None:
        raise DegenerateInputError("a stochastic preset needs a seed")
    return sample_noise("brownian", d, p["horizon"], int(p["levels"]), int(seed))


def _controls(text):
    vals = [float(c) for c in str(text).split(",") if c.strip()]
    if not vals:
        raise DegenerateInputError("controls must list at least one value")
    return vals


def build_application(preset, seed=None, params=None) -> RpdeProblem:
    """Build one of the RPDE applications in ``APPLICATION_PARAMS``.

    ``transport_check``: zero deterministic operator, ``sigma`` transport; oracle
    ``u0(x + sigma B_t)``.  ``heat_transport``: adds ``A = sigma_bar^2``;
    oracle ``(heat_t u0)(x + sigma B_t)``.  ``zakai_1d``: the Stratonovich
    Zakai equation of the signal/observation pair in the table, driven by
    the simulated observation path.  ``hjb_control``: HJB with constant
    controls and a pure-gradient rough part driven by ``z_t = B_{T-t} - B_T``;
    for controls ``{-1, 1}`` and ``sigma_bar = 0`` the oracle is
    ``max(|x + sigma z_t| - t, 0)`` (wrapped to the period).
    ``pathwise_control``: controls with running cost ``alpha^2 / 2`` and
    transport coefficient ``sigma (1 + wobble cos x)``.
    """
    p = _params(APPLICATION_PARAMS, preset, params)
    T = p["horizon"]
    xi = TimeChange.identity(T)
    meta = {"preset": preset, **{k: p[k] for k in sorted(p)}}

    if preset in ("transport_check", "heat_transport"):
        grid = _grid(p, "periodic")
        v0, sig = p["v0"], p["sigma"]
        B = _brownian(seed, p)
        u0 = GridFunction(grid, periodic_gaussian(grid.x, v0, grid.period))
        rough = RoughTransportOp(sig, name="unit transport")
        if preset == "transport_check":
            det = LinearParabolicOp(name="zero")

            def oracle(t):
                shift = sig * B(t)[0, 0]
                return periodic_gaussian(wrap(grid.x + shift, grid), v0, grid.period)
        else:
            sb = p["sigma_bar"]
            det = LinearParabolicOp(sigma_bar=sb, name="heat")
            a = sb ** 2

            def oracle(t):
                shift = sig * B(t)[0, 0]
                return periodic_gaussian(wrap(grid.x + shift, grid), v0 + 2 * a * t,
                                         grid.period, scale_var=v0)
        return RpdeProblem(det, rough, xi, lift_level2(B), u0, oracle, preset, meta)

    if preset == "zakai_1d":
        grid = _grid(p, "clamped")
        kappa, gamma, s = p["kappa"], p["gamma"], p["s"]
        noise = _brownian(seed, p, d=2)       # (signal noise W, observation noise V)
        t, w, v = noise.times, noise.values[:, 0], noise.values[:, 1]
        x = np.empty_like(t)
        x[0] = p["x0"]
        dt = np.diff(t)
        for k in range(len(dt)):
            x[k + 1] = x[k] - kappa * np.tanh(x[k]) * dt[k] + s * (w[k + 1] - w[k])
        y = np.concatenate(([0.0], np.cumsum(gamma * np.tanh(x[:-1]) * dt))) + v
        obs = SampledPath(t, y)
        det = LinearParabolicOp(
            sigma_bar=s / np.sqrt(2.0),
            b=lambda x: kappa * np.tanh(x),
            reaction=lambda x: kappa / np.cosh(x) ** 2 - 0.5 * gamma ** 2 * np.tanh(x) ** 2,
            name="Kolmogorov forward")
        rough = RoughTransportOp(0.0, nu=lambda x: gamma * np.tanh(x),
                                 dnu=lambda x: gamma / np.cosh(x) ** 2, name="observation")
        var = p["prior_var"]
        u0 = GridFunction(grid, np.exp(-grid.x ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var))
        meta["signal_end"] = repr(float(x[-1]))
        return RpdeProblem(det, rough, xi, lift_level2(obs), u0, None, preset,
                           dict(meta, signal=SampledPath(t, x)))

    if preset in ("hjb_control", "pathwise_control"):
        B = _brownian(seed, p)
        # z_t = B_{T - t} - B_T on the mirrored mesh
        rev = SampledPath(T - B.times[::-1], B.values[::-1] - B.values[-1])
        z = lift_level2(rev)
        ctrl = _controls(p["controls"])
        sb = p["sigma_bar"]
        sig = p["sigma"]
        if preset == "hjb_control":
            grid = _grid(p, "periodic")
            det = HJBOp([LinearParabolicOp(sigma_bar=sb, b=a, name=f"alpha={a}") for a in ctrl],
                        labels=ctrl, name="HJB")
            rough = RoughTransportOp(sig, name="gradient transport")
            u0 = GridFunction(grid, np.abs(grid.x))
            oracle = None
            if sorted(ctrl) == [-1.0, 1.0] and sb == 0.0:
                def oracle(t):
                    shifted = wrap(grid.x + sig * rev(t)[0, 0], grid)
                    return np.maximum(np.abs(shifted) - t, 0.0)
            return RpdeProblem(det, rough, xi, z, u0, oracle, preset, meta)
        grid = _grid(p, "clamped")
        det = HJBOp([LinearParabolicOp(sigma_bar=sb, b=a, source=0.5 * a * a,
                                       name=f"alpha={a}") for a in ctrl],
                    labels=ctrl, name="LQ control")
        wob = p["wobble"]
        rough = RoughTransportOp(lambda x: sig * (1 + wob * np.cos(x)),
                                 dsigma=lambda x: -sig * wob * np.sin(x),
                                 name="state-dependent transport")
        u0 = GridFunction(grid, 0.5 * grid.x ** 2)
        return RpdeProblem(det, rough, xi, z, u0, None, preset, meta)

    raise UnknownPresetError(preset)  # pragma: no cover


def build_rde(preset, seed=None, params=None) -> RdeProblem:
    """Build one of the ODE/RDE examples in ``RDE_PARAMS``.

    ``commuting``: ``y' = A y + B y`` with commuting diagonal ``A, B``.
    ``nilpotent``: ``A = [[0,1],[0,0]]``, ``B = [[0,0],[1,0]]``, exact flow
    ``[[cosh t, sinh t], [sinh t, cosh t]]``.  Both are driven by
    ``xi = z = t``.  ``geometric_bm`` / ``geometric_fbm``: ``dy = y dz``
    along Brownian or fractional Brownian ``z``, oracle ``y0 exp(z_t)``.
    """
    p = _params(RDE_PARAMS, preset, params)
    T = p["horizon"]
    xi = TimeChange.identity(T)
    if preset == "commuting":
        a = np.diag([-1.0, -0.5])
        b = np.diag([0.5, 0.3])
        y0 = np.array([1.0, 2.0])
        lam = np.diag(a + b)
        return RdeProblem(AffineField(a), [AffineField(b)], xi, identity_driver(T, 1), y0,
                          lambda t: y0 * np.exp(lam * t), preset)
    if preset == "nilpotent":
        a = np.array([[0.0, 1.0], [0.0, 0.0]])
        b = np.array([[0.0, 0.0], [1.0, 0.0]])
        y0 = np.array([1.0, 0.0])

        def oracle(t):
            return np.array([[np.cosh(t), np.sinh(t)], [np.sinh(t), np.cosh(t)]]) @ y0
        return RdeProblem(AffineField(a), [AffineField(b)], xi, identity_driver(T, 1), y0,
                          oracle, preset)
    if seed is None:
        raise DegenerateInputError("a stochastic preset needs a seed")
    if preset == "geometric_bm":
        path = sample_noise("brownian", 1, T, int(p["levels"]), int(seed))
    else:
        path = sample_noise("fbm", 1, T, int(p["levels"]), int(seed), hurst=p["hurst"])
    y0 = np.array([p["y0"]])
    return RdeProblem(None, [AffineField([[1.0]])], xi, lift_level2(path), y0,
                      lambda t: y0 * np.exp(path(t)[0]), preset)
