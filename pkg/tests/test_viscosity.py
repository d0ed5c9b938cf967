import numpy as np
import pytest

from roughsplit.errors import (DegenerateInputError, DimensionMismatchError, DivergenceError,
                               InvalidTimeChangeError, ResolutionError)
from roughsplit.noise import sample_noise
from roughsplit.paths import SampledPath
from roughsplit.presets import build_application
from roughsplit.rough import lift_level2
from roughsplit.timechange import TimeChange, make_time_changes, mollify_increasing
from roughsplit.viscosity import (Grid1D, GridFunction, HJBOp, LinearParabolicOp,
                                  RoughTransportOp, apply_operator, cfl_rate,
                                  deterministic_step, evolve, rough_transport_step,
                                  stretch_solve, substep_count)

T = 1.0
ID = TimeChange.identity(T)
HEAT = LinearParabolicOp(sigma_bar=0.5 ** 0.5, name="heat")


def gaussian(x, var):
    return np.exp(-x ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var)


def heat_error(n_points, v0=0.1, tau=0.25):
    grid = Grid1D.periodic(-4.0, 8.0, n_points)
    u = GridFunction(grid, gaussian(grid.x, v0))
    out = evolve(HEAT, u, tau)
    return out.sup_distance(gaussian(grid.x, v0 + tau)), grid.h


def line_driver(b):
    return lift_level2(SampledPath([0.0, 1.0], [[0.0], [b]]))


def brownian_driver(seed, levels=8, d=1):
    return lift_level2(sample_noise("brownian", d, T, levels, seed))


def operators():
    """Every deterministic operator shape exercised by the presets, plus extras."""
    ops = [
        HEAT,
        LinearParabolicOp(b=lambda x: np.sin(3 * x), name="drift"),
        LinearParabolicOp(sigma_bar=lambda x: 0.3 + 0.2 * np.cos(x), b=0.7,
                          reaction=lambda x: -0.5 * x ** 2, source=lambda x: np.cos(x)),
        LinearParabolicOp(sigma_bar=0.4, f=lambda x, r: -np.tanh(r), f_lipschitz=1.0),
        HJBOp([LinearParabolicOp(b=a) for a in (-1.0, 1.0)]),
        HJBOp([LinearParabolicOp(sigma_bar=0.2, b=a, source=0.5 * a * a)
               for a in np.linspace(-1, 1, 5)]),
    ]
    for name in ("zakai_1d", "hjb_control", "pathwise_control", "heat_transport"):
        ops.append(build_application(name, 1).deterministic_op)
    return ops


def rough_operators():
    return [
        RoughTransportOp(1.0),
        RoughTransportOp(lambda x: 0.5 * (1 + 0.5 * np.cos(x))),
        RoughTransportOp(0.3, nu=lambda x: np.tanh(x), g=lambda x: 0.2 * np.sin(x)),
        RoughTransportOp([0.4, lambda x: 0.2 * x], nu=[0.0, 0.3]),
    ]


GRIDS = [Grid1D.periodic(-3.0, 6.0, 121), Grid1D(-3.0, 3.0, 121, "clamped")]


def test_heat_matches_gaussian_second_order():
    e1, h1 = heat_error(256)
    e2, h2 = heat_error(512)
    assert e2 <= 5 * h2 ** 2
    assert e1 / e2 > 3.0


def test_zero_increment_returns_input_object():
    grid = GRIDS[0]
    u = GridFunction(grid, np.sin(grid.x))
    a, _ = make_time_changes("lie", 0.25)
    # a is flat on the second half of every cell
    for op in operators()[:6]:
        assert deterministic_step(op, u, a, 0.125, 0.25) is u
        assert evolve(op, u, 0.0) is u


def test_decreasing_xi_rejected():
    grid = GRIDS[0]
    u = GridFunction(grid, np.zeros(grid.n_points))
    with pytest.raises(DegenerateInputError):
        deterministic_step(HEAT, u, ID, 0.5, 0.4)


def dp_oracle(grid, u0, t):
    """Discrete dynamic programming: min of u0 over grid points within distance t."""
    reach = int(np.floor(t / grid.h + 1e-9))
    n = grid.n_points
    vals = np.stack([u0[np.mod(np.arange(n) + j, n)] for j in range(-reach, reach + 1)])
    return vals.min(axis=0)


def test_hjb_against_dynamic_programming():
    grid = Grid1D.periodic(-2.0, 4.0, 512)
    op = HJBOp([LinearParabolicOp(b=-1.0), LinearParabolicOp(b=1.0)])
    u0 = GridFunction(grid, np.abs(grid.x))
    out = evolve(op, u0, 1.0)
    oracle = dp_oracle(grid, u0.values, 1.0)
    assert np.max(np.abs(out.values - oracle)) <= 3 * grid.h
    hopf_lax = np.maximum(np.abs(grid.x) - 1.0, 0.0)
    assert np.max(np.abs(oracle - hopf_lax)) <= grid.h


@pytest.mark.parametrize("grid", GRIDS, ids=["periodic", "clamped"])
def test_monotone_on_random_pairs(grid):
    rng = np.random.default_rng(5)
    for op in operators():
        for _ in range(5):
            u = rng.standard_normal(grid.n_points)
            v = u + np.abs(rng.standard_normal(grid.n_points)) * (rng.random(grid.n_points) < 0.5)
            su = evolve(op, GridFunction(grid, u), 0.05).values
            sv = evolve(op, GridFunction(grid, v), 0.05).values
            assert np.all(su <= sv)
    for op in rough_operators():
        z = brownian_driver(3, d=op.dim).restrict(0.25, 0.5)
        for _ in range(5):
            u = rng.standard_normal(grid.n_points)
            v = u + np.abs(rng.standard_normal(grid.n_points))
            su = rough_transport_step(op, GridFunction(grid, u), z).values
            sv = rough_transport_step(op, GridFunction(grid, v), z).values
            assert np.all(su <= sv)


@pytest.mark.parametrize("grid", GRIDS, ids=["periodic", "clamped"])
def test_constants_are_fixed_points(grid):
    c = GridFunction(grid, np.full(grid.n_points, -1.25))
    for op in (HEAT, LinearParabolicOp(sigma_bar=lambda x: 0.3 + 0.1 * x ** 2, b=np.sin),
               HJBOp([LinearParabolicOp(sigma_bar=0.2, b=a) for a in (-1, 0, 1)])):
        assert np.all(evolve(op, c, 0.3).values == -1.25)
    for op in rough_operators()[:2]:
        assert np.all(rough_transport_step(op, c, brownian_driver(4)).values == -1.25)


def test_max_principle():
    rng = np.random.default_rng(8)
    for grid in GRIDS:
        for op in (HEAT, LinearParabolicOp(sigma_bar=0.3, b=lambda x: np.cos(2 * x)),
                   HJBOp([LinearParabolicOp(b=a) for a in (-1.0, 0.5)])):
            u = GridFunction(grid, rng.standard_normal(grid.n_points))
            out = evolve(op, u, 0.2)
            assert np.max(np.abs(out.values)) <= np.max(np.abs(u.values))
            assert out.values.min() >= u.values.min() and out.values.max() <= u.values.max()


def test_singleton_hjb_equals_linear_bit_exact():
    grid = GRIDS[1]
    lin = LinearParabolicOp(sigma_bar=lambda x: 0.3 + 0.1 * np.sin(x), b=lambda x: x / 3,
                            reaction=-0.2, source=lambda x: np.cos(x))
    u = GridFunction(grid, np.exp(-grid.x ** 2))
    a = evolve(lin, u, 0.37)
    b = evolve(HJBOp([lin]), u, 0.37)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(apply_operator(lin, u), apply_operator(HJBOp([lin]), u))


def test_rate_and_substeps():
    grid = Grid1D.periodic(0.0, 1.0, 100)
    assert cfl_rate(HEAT, grid) == pytest.approx(1.0 / grid.h ** 2)
    assert substep_count(0.0, 10.0) == 1
    assert substep_count(1.0, 9.0) == 10
    m = substep_count(1.0, 9000.0)
    assert m >= 10000 and bin(m).rstrip("0").count("1") <= 4 and len(bin(m).rstrip("0")) <= 6
    assert substep_count(2.0, 9000.0) == 2 * m


def test_dyadic_cut_matches_uncut_solve():
    grid = Grid1D.periodic(-4.0, 8.0, 256)
    u = GridFunction(grid, gaussian(grid.x, 0.2))
    whole = evolve(HEAT, u, 0.5)
    halves = evolve(HEAT, evolve(HEAT, u, 0.25), 0.25)
    assert np.array_equal(whole.values, halves.values)


def test_resolution_error():
    grid = Grid1D(0.0, 1.0, 100_001, "clamped")
    u = GridFunction(grid, np.zeros(grid.n_points))
    with pytest.raises(ResolutionError):
        evolve(HEAT, u, 1.0)


def test_coefficient_validation():
    grid = GRIDS[0]
    with pytest.raises(DimensionMismatchError):
        LinearParabolicOp(b=np.ones(7)).coefficients(grid)
    with pytest.raises(DegenerateInputError):
        LinearParabolicOp(b=lambda x: np.sin(10 * x), lipschitz=1.0).coefficients(grid)
    with pytest.raises(DegenerateInputError):
        LinearParabolicOp(f=lambda x, r: r)
    with pytest.raises(DegenerateInputError):
        GridFunction(grid, np.full(grid.n_points, np.nan))


def test_gridfunction_csv_round_trip():
    grid = Grid1D(-1.0, 2.0, 31, "clamped")
    u = GridFunction(grid, np.cos(grid.x))
    back = GridFunction.from_csv(u.to_csv(), "clamped")
    assert back.grid == grid
    assert np.array_equal(back.values, u.values)


def test_periodic_grid_spacing():
    grid = Grid1D.periodic(-1.0, 2.0, 512)
    assert grid.h == pytest.approx(2.0 / 512, abs=1e-16)
    assert grid.period == pytest.approx(2.0, abs=1e-14)


# --- rough transport ------------------------------------------------------

def test_unit_transport_is_shift():
    grid = Grid1D.periodic(-1.0, 2.0, 512)
    w = GridFunction(grid, np.sin(np.pi * grid.x))
    for b in (0.3, -0.77, 1.9):
        out = rough_transport_step(RoughTransportOp(1.0), w, line_driver(b))
        assert out.sup_distance(np.sin(np.pi * (grid.x + b))) <= 5 * grid.h ** 2 * np.pi ** 2


def test_constant_driver_is_identity():
    grid = GRIDS[1]
    w = GridFunction(grid, np.cos(grid.x))
    flat = lift_level2(SampledPath([0.0, 0.2, 0.5], [[0.0], [0.3], [0.3]])).restrict(0.2, 0.5)
    for op in rough_operators()[:3]:
        assert rough_transport_step(op, w, flat) is w
    assert rough_transport_step(RoughTransportOp.zero(), w, line_driver(2.0)) is w


def test_zeroth_order_channel_is_exponential_factor():
    grid = GRIDS[0]
    w = GridFunction(grid, np.cos(grid.x) + 2)
    z = brownian_driver(6).restrict(0.0, 0.5)
    out = rough_transport_step(RoughTransportOp(0.0, nu=1.0), w, z)
    bst = z.endpoint().increment[0]
    np.testing.assert_allclose(out.values, np.exp(bst) * w.values, rtol=1e-13)


def test_forcing_channel_adds_increment():
    grid = GRIDS[0]
    w = GridFunction(grid, np.cos(grid.x))
    out = rough_transport_step(RoughTransportOp(0.0, g=2.0), w, line_driver(0.4))
    np.testing.assert_allclose(out.values, w.values + 0.8, atol=1e-14)


def test_whole_cell_translation_commutes():
    grid = Grid1D.periodic(0.0, 3.0, 96)
    rng = np.random.default_rng(2)
    u = rng.standard_normal(grid.n_points)
    z = brownian_driver(12)
    op = RoughTransportOp(0.8)
    for k in (1, 5, -17):
        a = rough_transport_step(op, GridFunction(grid, np.roll(u, k)), z).values
        b = np.roll(rough_transport_step(op, GridFunction(grid, u), z).values, k)
        assert np.array_equal(a, b)


def test_variable_sigma_matches_ode_flow():
    grid = Grid1D.periodic(-np.pi, 2 * np.pi, 400)
    sig = lambda x: 0.5 + 0.25 * np.sin(x)
    op = RoughTransportOp(sig, dsigma=lambda x: 0.25 * np.cos(x))
    w = GridFunction(grid, np.cos(grid.x))
    b = 0.6
    out = rough_transport_step(op, w, line_driver(b), char_steps=64)
    # characteristic: dX/dr = sigma(X) along the positive path, X(0) = x
    x = grid.x.copy()
    for _ in range(4000):
        k1 = sig(x)
        k2 = sig(x + 0.5 * b / 4000 * k1)
        x = x + b / 4000 * k2
    assert out.sup_distance(np.cos(x)) <= 5 * grid.h


def test_clamped_exit_is_counted():
    grid = Grid1D(-1.0, 1.0, 41, "clamped")
    w = GridFunction(grid, grid.x)
    stats = {}
    out = rough_transport_step(RoughTransportOp(1.0), w, line_driver(0.5), stats=stats)
    assert stats["clamped_points"] > 0
    assert out.values.max() == 1.0


def test_characteristic_divergence():
    grid = GRIDS[0]
    w = GridFunction(grid, np.ones(grid.n_points))
    with pytest.raises(DivergenceError):
        rough_transport_step(RoughTransportOp(0.0, nu=100.0), w, line_driver(1.0))


def test_channel_count_checked():
    grid = GRIDS[0]
    w = GridFunction(grid, np.ones(grid.n_points))
    with pytest.raises(DimensionMismatchError):
        rough_transport_step(RoughTransportOp([1.0, 1.0]), w, line_driver(1.0))
    with pytest.raises(DimensionMismatchError):
        RoughTransportOp([1.0, 1.0], nu=[0.0])


# --- stretched time -------------------------------------------------------

def heat_setup(n_points=128):
    grid = Grid1D.periodic(-4.0, 8.0, n_points)
    return grid, GridFunction(grid, gaussian(grid.x, 0.3))


def test_stretch_identity_equals_plain_solve():
    grid, u0 = heat_setup()
    times = [0.25, 0.5, 1.0]
    out, info = stretch_solve(HEAT, u0, ID, times, return_info=True)
    for t, v in zip(times, out):
        plain = evolve(HEAT, u0, t)
        assert v.sup_distance(plain) <= info["tolerance"]
        assert v.sup_distance(gaussian(grid.x, 0.3 + t)) <= 1e-3


def test_stretch_lie_a_matches_heat_at_horizon():
    grid, u0 = heat_setup()
    a, _ = make_time_changes("lie", 0.25)
    out, info = stretch_solve(HEAT, u0, a, [0.125, 0.25, 1.0], return_info=True)
    assert info["gap"] <= info["tolerance"]
    plain = evolve(HEAT, u0, 1.0)
    assert out[-1].sup_distance(plain) <= info["tolerance"]
    # a(0.125) = 0.25: the clock runs at double speed
    assert out[0].sup_distance(evolve(HEAT, u0, 0.25)) <= info["tolerance"]


def test_stretch_mollified_results_converge():
    grid, u0 = heat_setup()
    a, _ = make_time_changes("lie", 0.25)
    times = np.linspace(0, 1, 9)[1:]
    base = stretch_solve(HEAT, u0, a, times)
    dists = []
    for eps in (0.1, 0.05, 0.025):
        xi = mollify_increasing(a, eps)
        out = stretch_solve(HEAT, u0, xi, times)
        dists.append(max(x.sup_distance(y) for x, y in zip(out, base)))
    assert dists[0] > dists[1] > dists[2]


def test_stretch_rejects_non_member():
    grid, u0 = heat_setup()
    with pytest.raises(InvalidTimeChangeError):
        bad = TimeChange.sampled(SampledPath([0.0, 0.5, 0.7, 1.0], [0.0, 0.7, 0.6, 1.0]))
        stretch_solve(HEAT, u0, bad, [1.0])
