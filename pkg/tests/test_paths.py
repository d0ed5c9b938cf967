import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_pl_path
from roughsplit.errors import DegenerateInputError, DimensionMismatchError, InvalidTimeChangeError
from roughsplit.paths import (PVAR_MAX_SAMPLES, SampledPath, p_variation, reparametrize,
                              uniform_distance)
from roughsplit.timechange import TimeChange, make_time_changes


def brute_pvar(values, p):
    """Max over all sub-sequences containing both endpoints (exponential; tiny inputs)."""
    n = len(values)
    best = 0.0
    for r in range(0, n - 1):
        for inner in itertools.combinations(range(1, n - 1), r):
            idx = (0,) + inner + (n - 1,)
            best = max(best, sum(np.linalg.norm(values[b] - values[a]) ** p
                                 for a, b in zip(idx, idx[1:])))
    return best ** (1 / p)


def test_line_has_unit_pvariation():
    line = SampledPath(np.linspace(0, 1, 11), np.linspace(0, 1, 11))
    for p in (1.0, 1.5, 2.0, 3.0):
        assert p_variation(line, p) == pytest.approx(1.0, abs=1e-14)


def test_zigzag_values():
    zz = SampledPath([0, 0.5, 1], [0, 1, 0])
    assert p_variation(zz, 1) == 2.0
    assert p_variation(zz, 2) == pytest.approx(np.sqrt(2), abs=1e-15)


def test_dp_matches_brute_force(rng):
    for _ in range(20):
        path = random_pl_path(rng, n=int(rng.integers(2, 9)))
        for p in (1.0, 1.7, 2.5):
            assert p_variation(path, p) == pytest.approx(brute_pvar(path.values, p), rel=1e-12)


def test_pvariation_nonincreasing_in_p(rng):
    for _ in range(10):
        path = random_pl_path(rng)
        vals = [p_variation(path, p) for p in (1, 1.5, 2, 3)]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_pvariation_errors():
    with pytest.raises(DegenerateInputError):
        p_variation(SampledPath([0.0], [1.0]), 2)
    with pytest.raises(ValueError):
        p_variation(SampledPath([0, 1], [0, 1]), 0.5)
    big = SampledPath(np.arange(PVAR_MAX_SAMPLES + 1.0), np.zeros(PVAR_MAX_SAMPLES + 1))
    with pytest.raises(DegenerateInputError):
        p_variation(big, 2)


def test_path_invariants():
    with pytest.raises(DegenerateInputError):
        SampledPath([0.1, 1.0], [0, 1])
    with pytest.raises(DegenerateInputError):
        SampledPath([0, 0.5, 0.5], [0, 1, 2])
    with pytest.raises(DegenerateInputError):
        SampledPath([0, 1], [0, 1, 2])
    p = SampledPath([0, 1], [[0, 1], [2, 3]])
    with pytest.raises(ValueError):
        p.values[0, 0] = 5.0


def test_csv_round_trip(rng):
    path = random_pl_path(rng, d=2)
    text = path.to_csv()
    assert text.splitlines()[0] == "t,x1,x2"
    back = SampledPath.from_csv(text)
    assert np.array_equal(back.times, path.times) and np.array_equal(back.values, path.values)
    assert back.to_csv() == text


def test_reparametrize_identity_bit_exact(rng):
    path = random_pl_path(rng)
    out = reparametrize(path, TimeChange.identity(1.0))
    assert np.array_equal(out(path.times), path.values)


def test_reparametrize_line_by_lie_a():
    line = SampledPath([0, 1], [0, 1])
    a, _ = make_time_changes("lie", 1.0, 1.0)
    out = reparametrize(line, a)
    assert np.array_equal(out.times, [0, 0.5, 1])
    assert np.array_equal(out.values[:, 0], [0, 1, 1])


@pytest.mark.parametrize("n", [4, 8])
def test_reparametrization_invariance(rng, n):
    for _ in range(10):
        path = random_pl_path(rng)
        for tc in make_time_changes("lie", 1.0 / n) + make_time_changes("strang", 1.0 / n):
            rp = reparametrize(path, tc)
            for p in (1.0, 2.0):
                assert p_variation(rp, p) == pytest.approx(p_variation(path, p), rel=1e-12)


def test_reparametrize_rejects_bad_clock():
    with pytest.raises(InvalidTimeChangeError):
        TimeChange.sampled(SampledPath([0, 1], [0, 0.5]))
    with pytest.raises(InvalidTimeChangeError):
        reparametrize(SampledPath([0, 2], [0, 1]), TimeChange.identity(1.0))


def test_uniform_distance_examples():
    line = SampledPath([0, 1], [0, 1])
    assert uniform_distance(line, line) == 0.0
    for n in (1, 2, 4, 8):
        a, _ = make_time_changes("lie", 1.0 / n)
        assert uniform_distance(line, a.as_path()) == 0.5 / n
    c = SampledPath([0, 1], [-2.5, -2.5])
    assert uniform_distance(SampledPath([0, 1], [0, 0]), c) == 2.5
    with pytest.raises(DimensionMismatchError):
        uniform_distance(line, SampledPath([0, 1], [[0, 0], [1, 1]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_uniform_distance_metric(seed):
    rng = np.random.default_rng(seed)
    times = np.linspace(0, 1, 7)
    a, b, c = (SampledPath(times, rng.standard_normal((7, 2))) for _ in range(3))
    dab, dba = uniform_distance(a, b), uniform_distance(b, a)
    assert dab == dba
    assert uniform_distance(a, c) <= dab + uniform_distance(b, c) + 1e-15
    assert uniform_distance(a, a) == 0.0
    assert dab > 0
