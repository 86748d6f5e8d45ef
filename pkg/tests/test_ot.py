import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otcl import DiscreteMeasure, EuclideanGrid, FiniteSpace, GaussianMeasure, solve_ot_entropic, solve_ot_exact
from otcl.measures import discretize_gaussian
from otcl.ot import (InfeasibleTransport, oracle_ot_bruteforce, quantile_coupling, w2, w2_gaussian,
                     w2_gaussian_sq, w2_sq)

from conftest import random_metric_space, random_uniform_pair


def line3():
    return EuclideanGrid([np.array([0.0, 1.0, 2.0])])


def test_monotone_plan_example():
    sp = line3()
    mu, nu = DiscreteMeasure.uniform(sp, [0, 1]), DiscreteMeasure.uniform(sp, [1, 2])
    plan = solve_ot_exact(mu, nu)
    assert plan.cost == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(plan.matrix, [[0.5, 0], [0, 0.5]], atol=1e-12)
    assert plan.info["certified"]
    assert oracle_ot_bruteforce(mu, nu).cost == pytest.approx(1.0, abs=1e-12)
    assert w2(mu, nu) == pytest.approx(1.0, abs=1e-12)


def test_entropic_example():
    sp = line3()
    mu, nu = DiscreteMeasure.uniform(sp, [0, 1]), DiscreteMeasure.uniform(sp, [1, 2])
    plan = solve_ot_entropic(mu, nu, 1e-3 * sp.diameter() ** 2)
    assert plan.info["converged"]
    assert plan.cost == pytest.approx(1.0, rel=1e-2)
    assert plan.marginal_error() < 1e-8


def test_entropic_rejects_nonpositive_epsilon():
    sp = line3()
    mu = DiscreteMeasure.dirac(sp, 0)
    with pytest.raises(ValueError):
        solve_ot_entropic(mu, mu, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31))
def test_lp_matches_bruteforce(n, seed):
    rng = np.random.default_rng(seed)
    sp, _ = random_metric_space(rng, n + 3)
    mu, nu = random_uniform_pair(rng, sp, n)
    exact, brute = solve_ot_exact(mu, nu), oracle_ot_bruteforce(mu, nu)
    assert exact.cost == pytest.approx(brute.cost, abs=1e-9)
    assert exact.info["certified"]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_lp_matches_quantile_in_1d(seed):
    rng = np.random.default_rng(seed)
    sp = EuclideanGrid([np.sort(rng.uniform(-3, 3, size=12))])
    a = DiscreteMeasure.from_dense(sp, rng.dirichlet(np.ones(12)))
    b = DiscreteMeasure.from_dense(sp, rng.dirichlet(np.ones(12)))
    assert solve_ot_exact(a, b).cost == pytest.approx(quantile_coupling(a, b).cost, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_w2_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    sp, _ = random_metric_space(rng, 7)
    ms = []
    for _ in range(3):
        w = rng.dirichlet(np.ones(7)) * (rng.random(7) < 0.7) + 1e-3
        ms.append(DiscreteMeasure.from_dense(sp, w / w.sum()))
    a, b, c = ms
    assert w2_sq(a, b) == w2_sq(b, a)  # canonical ordering makes this exact
    assert w2(a, c) <= w2(a, b) + w2(b, c) + 1e-9
    assert w2_sq(a, a) == 0.0


def test_plan_marginals_and_transpose(rng):
    sp, _ = random_metric_space(rng, 6)
    a = DiscreteMeasure.from_dense(sp, rng.dirichlet(np.ones(6)))
    b = DiscreteMeasure.from_dense(sp, rng.dirichlet(np.ones(6)))
    p = solve_ot_exact(a, b)
    assert p.marginal_error() <= 1e-9
    q = solve_ot_exact(b, a)
    np.testing.assert_array_equal(q.matrix, p.matrix.T)


def test_infinite_distances():
    sp = FiniteSpace([[0, 1, math.inf], [1, 0, math.inf], [math.inf, math.inf, 0]], [1, 1, 1])
    a, b = DiscreteMeasure.dirac(sp, 0), DiscreteMeasure.dirac(sp, 2)
    assert w2_sq(a, b) == math.inf
    with pytest.raises(InfeasibleTransport):
        solve_ot_exact(a, b)
    # mass that can stay in its component is transported at finite cost
    c, d = DiscreteMeasure.uniform(sp, [0, 2]), DiscreteMeasure.uniform(sp, [1, 2])
    assert w2_sq(c, d) == pytest.approx(0.5)


def test_gaussian_closed_forms():
    n = GaussianMeasure.normal
    assert w2_gaussian(n(0, 1), n(2, 1)) ** 2 == 4.0
    assert w2_gaussian_sq(n(0, 1), n(0, 4)) == 1.0
    g1 = GaussianMeasure([0.0, 0.0], np.diag([1.0, 4.0]))
    g2 = GaussianMeasure([1.0, 0.0], np.diag([4.0, 1.0]))
    assert w2_gaussian_sq(g1, g2) == pytest.approx(1.0 + 1.0 + 1.0, abs=1e-12)


def test_gaussian_grid_oracle():
    sp = EuclideanGrid([np.linspace(-8, 10, 181)])
    a = discretize_gaussian(sp, GaussianMeasure.normal(0, 1))
    b = discretize_gaussian(sp, GaussianMeasure.normal(2, 1))
    assert quantile_coupling(a, b).cost == pytest.approx(4.0, rel=0.02)


def test_bruteforce_preconditions(rng):
    sp, _ = random_metric_space(rng, 5)
    with pytest.raises(ValueError):
        oracle_ot_bruteforce(DiscreteMeasure.uniform(sp, [0, 1]), DiscreteMeasure.uniform(sp, [2, 3, 4]))
