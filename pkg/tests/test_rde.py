import numpy as np
import pytest

from roughsplit.errors import DimensionMismatchError, DivergenceError
from roughsplit.noise import sample_noise
from roughsplit.paths import SampledPath, uniform_distance
from roughsplit.presets import build_rde
from roughsplit.rde import (AffineField, CallableField, NamedField, RdeProblem,
                            convergence_table, flow_operator, identity_driver, solve_rde,
                            split_driver_mesh, split_drivers, split_solve_rde, uniform_mesh)
from roughsplit.rough import lift_level2, reparametrize_rough
from roughsplit.timechange import TimeChange, make_time_changes

T = 1.0
XI = TimeChange.identity(T)


def smooth_driver(n=400):
    t = np.linspace(0, T, n + 1)
    return SampledPath(t, np.sin(3 * t) + 0.5 * t ** 2)


def test_pure_integrator():
    b = smooth_driver()
    pb = RdeProblem(None, [AffineField.constant([1.0])], XI, lift_level2(b), [0.0])
    sol = solve_rde(pb, 400, mesh=b.times)
    assert np.max(np.abs(sol.values[:, 0] - (b.values[:, 0] - b.values[0, 0]))) <= 1e-13


def test_geometric_equation_converges_to_exponential():
    b = smooth_driver(2000)
    pb = RdeProblem(None, [AffineField([[1.0]])], XI, lift_level2(b), [1.0])
    errs = []
    for steps in (50, 100, 200, 400):
        sol = solve_rde(pb, steps)
        errs.append(np.max(np.abs(sol.values[:, 0] - np.exp(b(sol.times)[:, 0]))))
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
    assert errs[-1] <= 1e-4


def test_linear_ode_first_order():
    pb = RdeProblem(AffineField([[1.0]]), [AffineField.zero(1)], XI, identity_driver(), [1.0])
    errs = [abs(solve_rde(pb, s).values[-1, 0] - np.e) for s in (100, 200, 400, 800)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 1.8) & (ratios < 2.2))


def test_named_and_callable_fields_agree():
    z = lift_level2(sample_noise("brownian", 1, T, 8, seed=5))
    named = NamedField("sin", [[0.7, 1.3, 0.2]])
    call = CallableField(lambda y: 0.7 * np.sin(1.3 * y + 0.2),
                         lambda y: (0.7 * 1.3 * np.cos(1.3 * y + 0.2))[..., None],
                         1)
    a = solve_rde(RdeProblem(None, [named], XI, z, [0.3]), 256)
    b = solve_rde(RdeProblem(None, [call], XI, z, [0.3]), 256)
    assert np.max(np.abs(a.values - b.values)) <= 1e-14


def test_affine_fast_path_matches_generic_loop():
    z = lift_level2(sample_noise("brownian", 2, T, 8, seed=2))
    rng = np.random.default_rng(0)
    mats = [rng.standard_normal((2, 2)) * 0.5 for _ in range(3)]
    aff = RdeProblem(AffineField(mats[0], [0.1, -0.2]),
                     [AffineField(mats[1]), AffineField(mats[2], [0.3, 0.0])], XI, z, [1.0, 0.5])
    gen = RdeProblem(
        AffineField(mats[0], [0.1, -0.2]),
        [CallableField(lambda y, m=m, c=c: y @ m.T + c,
                       lambda y, m=m: np.broadcast_to(m, y.shape + (2,)), 2)
         for m, c in ((mats[1], np.zeros(2)), (mats[2], np.array([0.3, 0.0])))],
        XI, z, [1.0, 0.5])
    assert np.max(np.abs(solve_rde(aff, 300).values - solve_rde(gen, 300).values)) <= 1e-12


def test_divergence_reports_step():
    pb = RdeProblem(AffineField([[1000.0]]), [AffineField.zero(1)], XI, identity_driver(), [1.0])
    with pytest.raises(DivergenceError) as info:
        solve_rde(pb, 10)
    assert info.value.step is not None


def test_dimension_checks():
    z = lift_level2(sample_noise("brownian", 2, T, 4, seed=0))
    with pytest.raises(DimensionMismatchError):
        RdeProblem(None, [AffineField([[1.0]])], XI, z, [1.0])


def test_trivial_flows():
    pb = build_rde("geometric_bm", 3)
    x = np.array([1.7])
    zero_drift = flow_operator("P", pb, 0.1, 0.6, x, 16)
    assert np.array_equal(zero_drift, x)
    assert np.array_equal(flow_operator("Q", pb, 0.4, 0.4, x, 16), x)


def test_flow_property():
    rng = np.random.default_rng(17)
    z = lift_level2(sample_noise("brownian", 2, T, 10, seed=9))
    fields = [AffineField(rng.standard_normal((2, 2)) * 0.6) for _ in range(2)]
    pb = RdeProblem(None, fields, XI, z, [1.0, 0.0])
    s, u, t, k = 0.2, 0.45, 0.7, 8
    for x in rng.standard_normal((3, 2)):
        composed = flow_operator("Q", pb, u, t, flow_operator("Q", pb, s, u, x, k), k)
        direct = flow_operator("Q", pb, s, t, x, k)
        exact = flow_operator("Q", pb, s, t, x, 4096)
        one = np.linalg.norm(direct - exact)
        assert np.linalg.norm(composed - direct) <= 2 * one + 1e-14


def test_commuting_split_only_stepper_error():
    pb = build_rde("commuting")
    k = 16
    for n in (1, 4, 16, 64):
        for scheme in ("lie", "strang"):
            split = split_solve_rde(pb, n, scheme, "PQ", k)
            err = np.linalg.norm(split.values[-1] - pb.oracle(T))
            stepper = np.linalg.norm(solve_rde(pb, n * k).values[-1] - pb.oracle(T))
            assert err <= 10 * stepper


def test_nilpotent_first_order():
    pb = build_rde("nilpotent")
    ns = np.array([8, 16, 32, 64, 128])
    ref = solve_rde(pb, 100_000).values[-1]
    errs = [np.linalg.norm(split_solve_rde(pb, n).values[-1] - ref) for n in ns]
    slope = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert 0.8 <= slope <= 1.2
    strang = [np.linalg.norm(split_solve_rde(pb, n, "strang").values[-1] - ref)
              for n in (8, 16, 32)]
    assert strang[-1] < errs[2]


@pytest.mark.parametrize("preset", ["nilpotent", "geometric_bm", "geometric_fbm"])
@pytest.mark.parametrize("scheme", ["lie", "strang"])
@pytest.mark.parametrize("order", ["PQ", "QP"])
def test_split_equals_reparametrized_drivers(preset, scheme, order):
    pb = build_rde(preset, 7)
    n, k = 8, 16
    split = split_solve_rde(pb, n, scheme, order, k)
    mesh = split_driver_mesh(pb, n, scheme, k)
    rep = solve_rde(split_drivers(pb, n, scheme, order), 0, mesh=mesh)
    on = rep(split.times)
    assert np.max(np.abs(on - split.values)) <= 1e-13


def test_split_cell_is_composition_bit_exact():
    pb = build_rde("geometric_bm", 7)
    n, k = 16, 16
    split = split_solve_rde(pb, n, "lie", "PQ", k)
    t = split.times
    for c in range(n):
        y = flow_operator("Q", pb, t[c], t[c + 1],
                          flow_operator("P", pb, t[c], t[c + 1], split.values[c], k), k)
        assert np.array_equal(y, split.values[c + 1])


def test_noise_only_reparametrization_consistency():
    pb = build_rde("geometric_bm", 4)
    delta = T / 8
    _, b = make_time_changes("lie", delta)
    zb = reparametrize_rough(pb.z, b)
    steps = 8 * 256
    plain = solve_rde(pb, steps)
    rep = solve_rde(pb.with_drivers(z=zb), 2 * steps)
    times = np.arange(9) * delta
    assert np.max(np.abs(rep(times) - plain(times))) <= 5 * np.max(
        np.abs(plain(times) - solve_rde(pb, 4 * steps)(times))) + 1e-12


def test_driver_approximations_converge():
    fine = sample_noise("brownian", 1, T, 14, seed=21)
    field = [AffineField([[0.8]])]
    ref = solve_rde(RdeProblem(AffineField([[-0.3]]), field, XI, lift_level2(fine), [1.0]),
                    2 ** 14)
    errs = []
    for m in (6, 7, 8, 9):
        coarse = sample_noise("brownian", 1, T, m, seed=21)
        sol = solve_rde(RdeProblem(AffineField([[-0.3]]), field, XI, lift_level2(coarse),
                                   [1.0]), 2 ** 14)
        errs.append(uniform_distance(sol, ref))
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:])), errs


def test_geometric_bm_split_error_decreases():
    pb = build_rde("geometric_bm", 7)
    errs = [abs(split_solve_rde(pb, n).values[-1, 0] - pb.oracle(T)[0])
            for n in (8, 16, 32, 64, 128)]
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:])), errs


def test_convergence_table_format():
    pb = build_rde("nilpotent")
    text = convergence_table(pb, [4, 8], ref_steps=1000)
    lines = text.splitlines()
    assert lines[0] == "n,error_sup,error_pvar"
    rows = [list(map(float, r.split(","))) for r in lines[1:]]
    assert [r[0] for r in rows] == [4, 8]
    assert rows[1][1] < rows[0][1]


def test_uniform_mesh_endpoints():
    m = uniform_mesh(0.1, 0.7, 3)
    assert m[0] == 0.1 and m[-1] == 0.7 and len(m) == 4
