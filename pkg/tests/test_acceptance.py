"""Acceptance gate: thirteen criteria at their stated tolerances.

Each test records one PASS/FAIL line; ``conftest.py`` prints them at the end
of the session.  Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import json
import math
import time

import numpy as np

from otcl import (Box, DiscreteMeasure, EnergySpec, EuclideanGrid, FlowSpec, GaussianAnalytic, GaussianMeasure,
                  MixtureOmega, QuadraticFunction, WassersteinCurve, barycenter_fixed_support,
                  check_blaschke_santalo, check_cd, check_evi_integral, check_evi_jensen_bound, check_jensen_bcd,
                  check_logbm, closed_form_curve, gaussian_barycenter, heat_flow_gaussian, i_k, jko_trajectory,
                  solve_ot_exact)
from otcl.config import run_config
from otcl.measures import discretize_gaussian
from otcl.ot import oracle_ot_bruteforce, quantile_coupling, w2_gaussian

from conftest import line_space, random_metric_space, random_uniform_pair

RESULTS = []
N = GaussianMeasure.normal
GAMMA = GaussianAnalytic(1, "gaussian")
LEB = GaussianAnalytic(1, "lebesgue")
BOLTZ = EnergySpec.boltzmann()


def record(number, title, ok, detail, elapsed):
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail} ({elapsed:.2f} s)"
    RESULTS.append((number, line))
    print(line)
    assert ok, line


def test_c01_ot_exactness():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 7))
        sp, _ = random_metric_space(rng, n + int(rng.integers(0, 4)), dim=int(rng.integers(1, 4)))
        mu, nu = random_uniform_pair(rng, sp, n)
        worst = max(worst, abs(solve_ot_exact(mu, nu).cost - oracle_ot_bruteforce(mu, nu).cost))
    dt = time.perf_counter() - t0
    record(1, "OT exactness vs brute force", worst <= 1e-9 and dt < 10,
           f"200 instances, max |LP - brute| = {worst:.2e}", dt)


def test_c02_monotone_oracle():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 16))
        sp = EuclideanGrid([np.sort(rng.uniform(-5, 5, size=n))])
        a = DiscreteMeasure.from_dense(sp, rng.dirichlet(np.ones(n)))
        b = DiscreteMeasure.from_dense(sp, rng.dirichlet(np.ones(n)))
        worst = max(worst, abs(solve_ot_exact(a, b).cost - quantile_coupling(a, b).cost))
    dt = time.perf_counter() - t0
    record(2, "1-D LP vs quantile coupling", worst <= 1e-9 and dt < 5,
           f"100 instances, max diff = {worst:.2e}", dt)


def test_c03_gaussian_w2():
    t0 = time.perf_counter()
    exact = (w2_gaussian(N(0, 1), N(2, 1)) ** 2 == 4.0, w2_gaussian(N(0, 1), N(0, 4)) ** 2 == 1.0)
    sp = EuclideanGrid([np.linspace(-8, 10, 401)])
    rel = []
    for (a, b), want in [(((0, 1), (2, 1)), 4.0), (((0, 1), (0, 4)), 1.0)]:
        mu, nu = discretize_gaussian(sp, N(*a)), discretize_gaussian(sp, N(*b))
        rel.append(abs(solve_ot_exact(mu, nu).cost - want) / want)
    dt = time.perf_counter() - t0
    record(3, "Gaussian W2 closed forms and grid LP", all(exact) and max(rel) <= 0.02 and dt < 30,
           f"closed forms exact={all(exact)}, 401-atom LP rel err = {max(rel):.2e}", dt)


def test_c04_cd_equality():
    t0 = time.perf_counter()
    rep = check_cd(LEB, N(0, 1), N(2, 1), 0.0, 17)
    worst = max(abs(r.margin) for r in rep.rows)
    dt = time.perf_counter() - t0
    record(4, "CD(0,inf) translated Gaussians", len(rep.rows) == 17 and worst <= 1e-10 and rep.passed,
           f"17 t-values, max |margin| = {worst:.2e}", dt)


def _instance5():
    om = MixtureOmega([(0.5, N(-1, 1)), (0.5, N(1, 1))])
    return om, gaussian_barycenter(om, tol=1e-12)


def test_c05_bcd_equality():
    t0 = time.perf_counter()
    om, b = _instance5()
    rep = check_jensen_bcd(GAMMA, om, 1.0, b)
    ok_bary = (b.info["converged"] and b.info["residual"] <= 1e-12
               and abs(b.measure.mean[0]) <= 1e-12 and abs(b.measure.cov[0, 0] - 1) <= 1e-12)
    m = rep.rows[0].margin
    dt = time.perf_counter() - t0
    record(5, "BCD(1,inf) Gaussian equality", ok_bary and abs(m) <= 1e-8,
           f"barycenter N({b.measure.mean[0]:.1g},{b.measure.cov[0, 0]:.12g}), margin = {m:.2e}", dt)


def test_c06_random_bcd():
    rng = np.random.default_rng(606)
    t0 = time.perf_counter()
    worst = math.inf
    for _ in range(100):
        k = int(rng.integers(1, 6))
        lam = rng.dirichlet(np.ones(k))
        lam = lam / lam.sum()
        comps = [(l, N(rng.uniform(-3, 3), rng.uniform(0.25, 4))) for l in lam]
        om = MixtureOmega(comps)
        worst = min(worst, check_jensen_bcd(GAMMA, om, 1.0, gaussian_barycenter(om)).min_margin)
    dt = time.perf_counter() - t0
    record(6, "random Gaussian mixtures BCD(1,inf)", worst >= -1e-8 and dt < 10,
           f"100 mixtures, min margin = {worst:.3e}", dt)


def test_c07_integral_evi():
    rng = np.random.default_rng(707)
    t0 = time.perf_counter()
    times = np.linspace(0, 2, 10)
    zs = [GaussianMeasure.standard(1), N(1, 1), N(0, 2)]
    worst = math.inf
    for _ in range(50):
        curve = closed_form_curve(N(rng.uniform(-3, 3), rng.uniform(0.25, 4)), "closed_form_ou", times)
        for z in zs:
            worst = min(worst, check_evi_integral(curve, z, BOLTZ, 1.0, GAMMA).min_margin)
    const = WassersteinCurve(times, [GaussianMeasure.standard(1)] * times.size, "constant")
    talagrand = [check_evi_integral(const, z, BOLTZ, 1.0, GAMMA) for z in zs]
    # translates of the reference are Talagrand equality cases; N(0,2) is strict
    eq = max(abs(r.margin) for rep in talagrand[:2] for r in rep.rows)
    strict = talagrand[2].min_margin
    dt = time.perf_counter() - t0
    record(7, "integral EVI_1 along OU flows", worst >= -1e-8 and eq <= 1e-10 and strict >= -1e-10,
           f"150 flows x 55 pairs, min margin = {worst:.2e}; Talagrand equality rows max |margin| = {eq:.1e}",
           dt)


def test_c08_evi_jensen_chain():
    t0 = time.perf_counter()
    om, b = _instance5()
    times = np.linspace(0, 2, 9)
    curve = closed_form_curve(b.measure, "closed_form_ou", times)
    reps = {e: check_evi_jensen_bound(curve, om, BOLTZ, 1.0, e, b.objective, GAMMA) for e in (0.0, 0.1, 1.0)}
    worst = 0.0
    for e in (0.1, 1.0):
        for r0, re in zip(reps[0.0].rows, reps[e].rows):
            t = r0.label["t"]
            if t > 0:
                worst = max(worst, abs((re.margin - r0.margin) - e / (2 * i_k(1.0, t))))
            elif re.margin != math.inf:
                worst = math.inf
    c5 = check_jensen_bcd(GAMMA, om, 1.0, b).rows[0].margin
    reproduces = abs(reps[0.0].rows[0].margin - c5) <= 1e-10
    dt = time.perf_counter() - t0
    record(8, "epsilon-Jensen bound chain", worst <= 1e-10 and reproduces and all(r.passed for r in reps.values()),
           f"max |delta - eps/(2 I_1(t))| = {worst:.1e}, eps=0 margin {reps[0.0].rows[0].margin:.1e}", dt)


def test_c09_two_point_reduction():
    rng = np.random.default_rng(909)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        n = 4 * int(rng.integers(3, 7)) + 1
        sp = line_space(n)
        sp = type(sp)(sp.dist * rng.uniform(0.2, 2.0), rng.uniform(0.5, 2.0, size=n),
                      [(i, j, t, k) for (i, j, t), k in sp.midpoints.items()])
        slots = np.arange(0, n, 4)
        k = int(rng.integers(1, min(4, slots.size) + 1))
        a = DiscreteMeasure.from_dense(sp, _on(sp.n, rng.choice(slots, k, replace=False), rng))
        b = DiscreteMeasure.from_dense(sp, _on(sp.n, rng.choice(slots, k, replace=False), rng))
        K = float(rng.uniform(-1, 1))
        for t in (0.25, 0.5, 0.75):
            om = MixtureOmega([(1 - t, a), (t, b)])
            bcd = check_jensen_bcd(sp, om, K, barycenter_fixed_support(om, np.arange(sp.n)))
            cd = check_cd(sp, a, b, K, [t])
            worst = max(worst, abs(bcd.rows[0].margin - cd.rows[0].margin))
    dt = time.perf_counter() - t0
    record(9, "two-point BCD reduces to CD", worst <= 1e-9, f"20 spaces x 3 t, max diff = {worst:.2e}", dt)


def _on(n, atoms, rng):
    w = np.zeros(n)
    w[atoms] = rng.dirichlet(np.ones(len(atoms)))
    return w


def test_c10_log_brunn_minkowski():
    rng = np.random.default_rng(1010)
    t0 = time.perf_counter()
    grid = EuclideanGrid([np.linspace(-1, 4, 11)])
    m = check_logbm(grid, [Box.interval(0, 1), Box.interval(0, 3)], [0.5, 0.5]).rows[0].margin
    ok_example = abs(m - (2 - math.sqrt(3))) <= 1e-9
    worst = math.inf
    for _ in range(50):
        k = int(rng.integers(2, 5))
        lo = rng.uniform(-3, 3, size=k)
        boxes = [Box.interval(l, l + w) for l, w in zip(lo, rng.uniform(0.1, 4, size=k))]
        lam = rng.dirichlet(np.ones(k))
        lam[-1] = 1.0 - lam[:-1].sum()
        rep = check_logbm(grid, boxes, lam)
        worst = min(worst, rep.min_margin) if rep.passed else -math.inf
    eq = max(abs(check_logbm(grid, [Box.interval(-1, 2)] * 2, [l, 1 - l]).rows[0].margin) for l in (0.2, 0.5, 0.9))
    dt = time.perf_counter() - t0
    record(10, "log-Brunn-Minkowski", ok_example and worst >= 0 and eq <= 1e-12,
           f"example margin = {m:.12f}, 50 random min margin = {worst:.2e}, E1=E2 max |margin| = {eq:.1e}", dt)


def test_c11_blaschke_santalo():
    rng = np.random.default_rng(1111)
    t0 = time.perf_counter()
    a = 0.8
    quarter = lambda x: -0.25 * np.sum(np.atleast_2d(x) ** 2, axis=-1)  # noqa: E731
    zero = lambda x: np.zeros(np.atleast_2d(x).shape[0])  # noqa: E731
    plus = lambda x: np.full(np.atleast_2d(x).shape[0], a)  # noqa: E731
    minus = lambda x: np.full(np.atleast_2d(x).shape[0], -a)  # noqa: E731
    margins = [check_blaschke_santalo(GAMMA, fs).rows[0].margin
               for fs in ([zero, zero], [plus, minus], [quarter, quarter])]
    ok_examples = all(abs(m - want) <= 1e-6 for m, want in zip(margins, (0.0, 0.0, 1 / 3)))
    passed = 0
    for _ in range(20):
        k = int(rng.integers(2, 4))
        q = rng.uniform(0.05, 2.0, size=k)
        b = rng.normal(size=k)
        a_mat = np.eye(k) - 1.0 / k + np.diag(q)
        c_total = -0.5 * b @ np.linalg.solve(a_mat, b) - rng.uniform(1e-6, 1.0)
        fs = [QuadraticFunction(c_total / k, (bi,), qi) for bi, qi in zip(b, q)]
        rep = check_blaschke_santalo(GAMMA, fs, seed=int(rng.integers(1 << 31)))
        passed += rep.passed
    dt = time.perf_counter() - t0
    record(11, "functional Blaschke-Santalo", ok_examples and passed == 20,
           f"example margins = {[round(m, 9) for m in margins]}, random quadratic instances passed {passed}/20", dt)


def test_c12_jko_consistency():
    t0 = time.perf_counter()
    h = 0.02
    sp = EuclideanGrid([np.arange(-5, 5 + h / 2, h)])
    mu0 = discretize_gaussian(sp, N(0, 1))
    tau, steps = 1e-2, 10
    curve = jko_trajectory(sp, mu0, FlowSpec(BOLTZ, 0.0, "jko", tau, steps))
    errs = [math.sqrt(quantile_coupling(m, discretize_gaussian(sp, heat_flow_gaussian(N(0, 1), t))).cost)
            for t, m in zip(curve.times, curve.measures)]
    energies = np.array(curve.info["energies"])
    monotone = bool(np.all(np.diff(energies) <= 0))
    dt = time.perf_counter() - t0
    record(12, "JKO tracks the heat flow", max(errs) <= 0.05 and monotone and dt < 60,
           f"max W2 error = {max(errs):.4f}, energies non-increasing = {monotone}", dt)


def test_c13_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = {
        "space": {"type": "grid", "range": [[-3, 3, 25]]},
        "measures": {"a": {"type": "gaussian", "mean": [-1], "cov": [[0.5]]},
                     "b": {"type": "gaussian", "mean": [1], "cov": [[0.7]]},
                     "d": {"type": "uniform", "support": [3, 4, 5]}},
        "omegas": {"w": {"components": [{"lambda": 0.4, "measure": "a"}, {"lambda": 0.6, "measure": "b"}]}},
        "energies": {"quad": {"kind": "potential", "builtin": "quadratic", "params": {"scale": 0.5}}},
        "seed": 11,
        "tasks": [
            {"op": "ot", "mu": "a", "nu": "b"},
            {"op": "ot", "mu": "a", "nu": "b", "solver": "entropic", "epsilon": 0.05},
            {"op": "barycenter", "omega": "w", "solver": "sinkhorn", "epsilon": 0.05},
            {"op": "check_cd", "mu0": "a", "mu1": "b", "K": 0, "t_grid": 9},
            {"op": "check_bcd", "omega": "w", "K": 0},
            {"op": "flow", "start": "d", "energy": "quad", "tau": 0.1, "steps": 3},
            {"op": "check_logbm", "sets": [[0, 1, 2], [10, 11]], "lambdas": [0.5, 0.5]},
        ],
    }
    gauss = {
        "space": {"type": "gaussian", "dim": 1, "reference": "gaussian"},
        "measures": {"a": {"type": "gaussian", "mean": [0.5], "cov": [[2.0]]}},
        "seed": 5,
        "tasks": [{"op": "check_bs", "functions": [{"quadratic": {"q": 0.5, "b": [0.3]}},
                                                     {"quadratic": {"q": 1.0, "c": -0.2}}]},
                  {"op": "check_evi", "curve": {"start": "a", "scheme": "closed_form_ou", "times": [0, 0.5, 1]},
                   "z": "a", "K": 1}],
    }
    identical = True
    for i, c in enumerate((cfg, gauss)):
        path = tmp_path / f"cfg{i}.json"
        path.write_text(json.dumps(c))
        codes = [run_config(str(path), tmp_path / f"run{i}_{r}", parallel=(r == 1)) for r in range(2)]
        first, second = tmp_path / f"run{i}_0", tmp_path / f"run{i}_1"
        names = sorted(p.name for p in first.iterdir())
        identical &= codes[0] == codes[1] and names == sorted(p.name for p in second.iterdir())
        identical &= all((first / n).read_bytes() == (second / n).read_bytes() for n in names)
    dt = time.perf_counter() - t0
    record(13, "determinism of config reruns", bool(identical), f"byte-identical reports = {bool(identical)}", dt)
