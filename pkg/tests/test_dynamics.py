import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from growmix import DiagonalGrowth, GrowthMixingSystem, MLMatrix
from growmix.dynamics import (
    Stability,
    asymptotic_rate,
    classify_stability,
    isolated_support,
    matrix_exponential,
    trajectory,
    write_trajectory_csv,
)
from growmix.errors import Overflow, ValidationError
from growmix.models import random_system

from oracles import closed_form_spab

seeds = st.integers(0, 2**32 - 1)


def eig_expm(M, t):
    w, V = np.linalg.eig(np.asarray(M, dtype=float) * t)
    return (V @ np.diag(np.exp(w)) @ np.linalg.inv(V)).real


def test_expm_zero():
    np.testing.assert_array_equal(matrix_exponential(np.zeros((3, 3)), 2.0), np.eye(3))


def test_expm_diagonal():
    E = matrix_exponential(np.diag([1.0, -1.0]), 1.0)
    np.testing.assert_allclose(E, np.diag([math.e, 1 / math.e]), rtol=1e-14, atol=0)


def test_expm_generator_closed_form():
    a, b = 1 + math.exp(-2), 1 - math.exp(-2)
    expected = 0.5 * np.array([[a, b], [b, a]])
    E = matrix_exponential([[-1.0, 1.0], [1.0, -1.0]], 1.0)
    assert np.max(np.abs(E - expected)) <= 1e-10 * np.max(np.abs(expected))


def test_expm_non_metzler():
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    t = 0.9
    expected = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    np.testing.assert_allclose(matrix_exponential(R, t), expected, atol=1e-14)


def test_expm_overflow():
    with pytest.raises(Overflow):
        matrix_exponential(np.array([[800.0]]), 1.0)


@pytest.mark.parametrize("t", [-1.0, math.inf, math.nan])
def test_expm_bad_time(t):
    with pytest.raises(ValidationError):
        matrix_exponential(np.eye(2), t)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), seeds, st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_semigroup(n, seed, t1, t2):
    M = np.random.default_rng(seed).normal(size=(n, n))
    lhs = matrix_exponential(M, t1 + t2)
    rhs = matrix_exponential(M, t1) @ matrix_exponential(M, t2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-8 * max(1.0, np.max(np.abs(lhs)))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.sampled_from(["GeneralML", "Reducible", "Lossy"]), seeds, st.floats(0.0, 5.0))
def test_expm_positivity_and_oracle(n, style, seed, t):
    F = random_system(n, style, seed).materialize(1.0).entries
    E = matrix_exponential(F, t)
    assert np.all(E >= 0)
    ref = eig_expm(F, t) if t else np.eye(n)
    assert np.max(np.abs(E - ref)) <= 1e-8 * max(1.0, np.max(np.abs(ref)))


def test_trajectory_uncoupled():
    d = np.array([0.3, -0.7])
    sys = GrowthMixingSystem(DiagonalGrowth(d), MLMatrix(np.zeros((2, 2))))
    x0 = np.array([2.0, 5.0])
    for t, x in trajectory(sys, 1.0, x0, [0.0, 0.5, 3.0]):
        np.testing.assert_allclose(x, np.exp(d * t) * x0, rtol=1e-13)


def test_trajectory_closed_form(two_site):
    F = two_site.materialize(1.0).entries
    x0 = np.array([1.0, 0.0])
    for t, x in trajectory(two_site, 1.0, x0, [0.1, 1.0, 10.0]):
        ref = eig_expm(F, t) @ x0
        assert np.max(np.abs(x - ref)) <= 1e-8 * np.max(np.abs(ref))
        assert np.all(x > 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), seeds)
def test_mass_conservation(n, seed):
    A = random_system(n, "ConservativeStochastic", seed).A
    sys = GrowthMixingSystem(DiagonalGrowth(np.zeros(n)), A)
    x0 = np.random.default_rng(seed).uniform(0.0, 1.0, n) + 0.01
    for _, x in trajectory(sys, 2.0, x0, [0.5, 1.0, 5.0, 20.0]):
        assert abs(x.sum() - x0.sum()) <= 1e-9 * x0.sum()


def test_rate_uniform_growth(swap_generator):
    sys = GrowthMixingSystem(DiagonalGrowth([0.4, 0.4]), swap_generator)
    assert asymptotic_rate(sys, 1.0, [1.0, 3.0], 50.0) == pytest.approx(0.4, abs=1e-6)
    assert asymptotic_rate(sys, 1.0, [1.0, 3.0], 50.0, window=None) == pytest.approx(0.4, abs=1e-6)


@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
def test_rate_two_site(two_site, m):
    assert abs(asymptotic_rate(two_site, m, [1.0, 1.0], 50.0) - closed_form_spab(m)) <= 1e-3


def test_rate_does_not_overflow(swap_generator):
    sys = GrowthMixingSystem(DiagonalGrowth([30.0, 30.0]), swap_generator)
    assert asymptotic_rate(sys, 1.0, [1.0, 1.0], 50.0) == pytest.approx(30.0, abs=1e-9)


def test_rate_depends_on_isolated_block():
    # Site 0 is an isolated source (rate 1) feeding site 1 (rate -0.5).
    A = MLMatrix([[0.0, 0.0], [1.0, 0.0]])
    sys = GrowthMixingSystem(DiagonalGrowth([1.0, -0.5]), A)
    assert isolated_support(sys, [1.0, 0.0]) == [0]
    assert isolated_support(sys, [0.0, 1.0]) == []
    full = asymptotic_rate(sys, 1.0, [1.0, 1.0], 50.0)
    starved = asymptotic_rate(sys, 1.0, [0.0, 1.0], 50.0)
    assert full == pytest.approx(1.0, abs=1e-3)
    assert starved == pytest.approx(-0.5, abs=1e-12)


def test_rate_validation(two_site):
    with pytest.raises(ValidationError):
        asymptotic_rate(two_site, 1.0, [0.0, 0.0], 10.0)
    with pytest.raises(ValidationError):
        asymptotic_rate(two_site, 1.0, [1.0, -1.0], 10.0)
    with pytest.raises(ValidationError):
        asymptotic_rate(two_site, 1.0, [1.0, 1.0], 10.0, window=20.0)


def test_classify_stability(swap_generator, two_site):
    assert classify_stability(GrowthMixingSystem(DiagonalGrowth([-1.0, -2.0]), swap_generator), 1.0) is Stability.STABLE
    for m in (0.0, 1.0, 100.0):
        assert classify_stability(two_site, m) is Stability.UNSTABLE
    assert classify_stability(GrowthMixingSystem(DiagonalGrowth([0.0, 0.0]), swap_generator), 3.0) is Stability.MARGINAL


def test_trajectory_csv(two_site):
    rows = trajectory(two_site, 1.0, [1.0, 0.0], [0.0, 0.1])
    buf = io.StringIO()
    write_trajectory_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,x1,x2"
    assert lines[1] == "0,1,0"
    values = [float(s) for s in lines[2].split(",")]
    assert values[0] == 0.1
    assert values[1:] == rows[1][1].tolist()


def test_trajectory_csv_path(tmp_path, two_site):
    path = tmp_path / "traj.csv"
    write_trajectory_csv(trajectory(two_site, 1.0, [1.0, 1.0], [0.0, 1.0, 2.0]), path)
    assert len(path.read_text().splitlines()) == 4
