import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otcl import (Box, DiscreteMeasure, EnergySpec, EuclideanGrid, FiniteSpace, GaussianAnalytic, GaussianMeasure,
                  MixtureOmega, QuadraticFunction, WassersteinCurve, barycenter_fixed_support,
                  check_blaschke_santalo, check_cd, check_evi_integral, check_evi_jensen_bound, check_jensen_bcd,
                  check_logbm, closed_form_curve, gaussian_barycenter, i_k)
from otcl.checks import GeodesicUnavailable, StartConditionError

from conftest import line_space

N = GaussianMeasure.normal
GAMMA = GaussianAnalytic(1, "gaussian")
LEB = GaussianAnalytic(1, "lebesgue")
BOLTZ = EnergySpec.boltzmann()


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(1e-6, 3), st.floats(1e-6, 3))
def test_i_k_positive_increasing(K, s, ds):
    assert i_k(K, s) > 0
    assert i_k(K, s + ds) > i_k(K, s)


def test_i_k_values():
    assert i_k(0, 2.0) == 2.0
    assert i_k(1, 1.0) == pytest.approx(math.e - 1)
    assert i_k(1e-300, 1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        i_k(1, -1)


def test_cd_gaussian_examples():
    rep = check_cd(LEB, N(0, 1), N(2, 1), 0)
    assert rep.passed and len(rep.rows) == 17
    assert max(abs(r.margin) for r in rep.rows) <= 1e-10
    assert all(r.lhs == pytest.approx(-0.5 * math.log(2 * math.pi * math.e)) for r in rep.rows)
    rep = check_cd(GAMMA, N(-1, 1), N(1, 1), 1)
    for r in rep.rows:
        assert r.lhs == pytest.approx(0.5 * (2 * r.label["t"] - 1) ** 2, abs=1e-14)
    assert abs(rep.min_margin) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(0.25, 4), st.floats(-3, 3), st.floats(0.25, 4), st.floats(0, 1))
def test_cd_margin_monotone_in_k(m0, v0, m1, v1, dk):
    a = check_cd(GAMMA, N(m0, v0), N(m1, v1), 1.0, 9)
    b = check_cd(GAMMA, N(m0, v0), N(m1, v1), 1.0 - dk, 9)
    assert a.passed
    for ra, rb in zip(a.rows, b.rows):
        assert rb.margin >= ra.margin - 1e-12


def test_cd_finite_line_passes():
    sp = line_space(9)
    a = DiscreteMeasure.uniform(sp, [0, 4])
    b = DiscreteMeasure.uniform(sp, [4, 8])
    rep = check_cd(sp, a, b, 0.0, [0, 0.25, 0.5, 0.75, 1])
    assert rep.status == "pass"
    assert "plan" in rep.params


def test_cd_missing_midpoint():
    sp = FiniteSpace([[0, 1, 2], [1, 0, 1], [2, 1, 0]], [1, 1, 1])
    with pytest.raises(GeodesicUnavailable):
        check_cd(sp, DiscreteMeasure.dirac(sp, 0), DiscreteMeasure.dirac(sp, 2), 0.0, [0, 0.5, 1])


def test_cd_vacuous_on_infinite_entropy():
    sp = FiniteSpace([[0, 1], [1, 0]], [1, 0])
    rep = check_cd(sp, DiscreteMeasure.dirac(sp, 1), DiscreteMeasure.dirac(sp, 0), 0.0)
    assert rep.status == "vacuous" and rep.rows == []


def test_cd_failure_is_reported_as_missing_certificate():
    # three points on a line, masses that must split: a large K cannot be certified
    sp = line_space(9)
    rep = check_cd(sp, DiscreteMeasure.dirac(sp, 0), DiscreteMeasure.dirac(sp, 8), 5.0, [0, 0.5, 1])
    assert rep.status == "fail"
    assert any("no certificate" in n for n in rep.notes)
    assert rep.witness["t"] == 0.5


def test_bcd_gaussian_equality():
    om = MixtureOmega([(0.5, N(-1, 1)), (0.5, N(1, 1))])
    b = gaussian_barycenter(om)
    rep = check_jensen_bcd(GAMMA, om, 1.0, b)
    assert rep.passed
    assert rep.rows[0].lhs == 0.0
    assert abs(rep.rows[0].margin) <= 1e-12


@pytest.mark.parametrize("t", [0.25, 0.5, 0.75])
def test_bcd_two_point_reduction(t):
    sp = line_space(17)
    a = DiscreteMeasure.uniform(sp, [0, 8])
    b = DiscreteMeasure.uniform(sp, [4, 16])
    om = MixtureOmega([(1 - t, a), (t, b)])
    bcd = check_jensen_bcd(sp, om, 0.0, barycenter_fixed_support(om, np.arange(sp.n)))
    cd = check_cd(sp, a, b, 0.0, [t])
    assert bcd.rows[0].margin == pytest.approx(cd.rows[0].margin, abs=1e-9)


def test_evi_ou_and_time_shift():
    curve = closed_form_curve(N(2, 1), "closed_form_ou", np.linspace(0, 2, 10))
    rep = check_evi_integral(curve, GaussianMeasure.standard(1), BOLTZ, 1.0, GAMMA)
    assert rep.passed and len(rep.rows) == 55
    shifted = check_evi_integral(curve.shifted(3.0), GaussianMeasure.standard(1), BOLTZ, 1.0, GAMMA)
    np.testing.assert_allclose([r.margin for r in shifted.rows], [r.margin for r in rep.rows], atol=1e-12)


@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
def test_evi_talagrand_constant_curve(m):
    curve = WassersteinCurve(np.linspace(0, 1, 6), [GaussianMeasure.standard(1)] * 6)
    rep = check_evi_integral(curve, N(m, 1), BOLTZ, 1.0, GAMMA)
    assert max(abs(r.margin) for r in rep.rows) <= 1e-10


def test_evi_jensen_bound():
    om = MixtureOmega([(0.5, N(-1, 1)), (0.5, N(1, 1))])
    b = gaussian_barycenter(om)
    const = WassersteinCurve(np.linspace(0, 1, 5), [b.measure] * 5)
    rep = check_evi_jensen_bound(const, om, BOLTZ, 1.0, 0.0, b.objective, GAMMA)
    assert max(abs(r.margin) for r in rep.rows) <= 1e-12
    rep = check_evi_jensen_bound(const, om, BOLTZ, 1.0, 0.5, b.objective, GAMMA)
    assert rep.rows[0].extra["epsilon_term"] == math.inf
    assert rep.rows[2].margin == pytest.approx(0.5 / (2 * i_k(1.0, 0.5)), abs=1e-12)
    far = WassersteinCurve([0.0, 1.0], [N(3, 1)] * 2)
    with pytest.raises(StartConditionError):
        check_evi_jensen_bound(far, om, BOLTZ, 1.0, 0.0, b.objective, GAMMA)
    with pytest.raises(StartConditionError):
        check_evi_jensen_bound(const, om, BOLTZ, 1.0, 0.0, None, GAMMA)


def test_logbm_examples():
    grid = EuclideanGrid([np.linspace(0, 3, 4)])
    rep = check_logbm(grid, [Box.interval(0, 1), Box.interval(0, 3)], [0.5, 0.5])
    assert rep.rows[0].margin == pytest.approx(2 - math.sqrt(3), abs=1e-12)
    rep = check_logbm(grid, [Box.interval(0, 2), Box.interval(0, 2)], [0.3, 0.7])
    assert abs(rep.rows[0].margin) <= 1e-12
    rep = check_logbm(grid, [Box.interval(-1, 2)], [1.0])
    assert abs(rep.rows[0].margin) <= 1e-12


def test_logbm_finite_and_grid():
    sp = line_space(9)
    rep = check_logbm(sp, [[0, 1], [4, 5, 6]], [0.5, 0.5])
    assert rep.passed and rep.params["method"] == "exhaustive tuple enumeration"
    grid = EuclideanGrid([np.linspace(0, 4, 9)])
    rep = check_logbm(grid, [[0, 1, 2], [6, 7, 8]], [0.5, 0.5])
    assert rep.passed and rep.budget <= grid.half_pitch + 1e-12
    with pytest.raises(ValueError):
        check_logbm(grid, [[0], [1]], [0.5, 0.6])


def test_logbm_gaussian_reference_boxes():
    grid = EuclideanGrid([np.linspace(-2, 2, 5)], reference="gaussian")
    rep = check_logbm(grid, [Box.interval(-1, 0), Box.interval(0, 2)], [0.5, 0.5])
    assert rep.passed


def test_blaschke_santalo_examples():
    r = check_blaschke_santalo(GAMMA, [QuadraticFunction(), QuadraticFunction()])
    assert abs(r.rows[0].margin) <= 1e-12
    r = check_blaschke_santalo(GAMMA, [QuadraticFunction(c=1.3), QuadraticFunction(c=-1.3)])
    assert abs(r.rows[0].margin) <= 1e-12
    f = lambda x: -0.25 * np.sum(np.atleast_2d(x) ** 2, axis=-1)  # noqa: E731
    r = check_blaschke_santalo(GAMMA, [f, f])
    assert r.rows[0].margin == pytest.approx(1 / 3, abs=1e-9)
    assert any("conditional on sampled constraint" in n for n in r.notes)


def test_blaschke_santalo_constraint_failure():
    r = check_blaschke_santalo(GAMMA, [QuadraticFunction(c=0.1), QuadraticFunction()])
    assert r.status == "constraint_failed"
    assert r.witness
    with pytest.raises(ValueError):
        check_blaschke_santalo(LEB, [QuadraticFunction()])


def test_blaschke_santalo_finite_space():
    sp = line_space(5)
    vals = -0.1 * np.ones(5)
    r = check_blaschke_santalo(sp, [vals, vals], assume_bcd1=True)
    assert r.params["constraint_method"] == "exhaustive"
    assert r.rows[0].lhs == pytest.approx((5 * math.exp(-0.1)) ** 2)
