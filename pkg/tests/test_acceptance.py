"""Acceptance battery.

One test per criterion; each prints a single "criterion NN PASS/FAIL: ..." line
(collected again in the terminal summary by conftest).  Tolerances are part of
the criteria and are not to be loosened here.
"""

import math

import numpy as np
import pytest

import evoheat as eh
from evoheat.geometry import Scenario

from helpers import random_static_graph

MATRIX_REL_TOL = 1e-12
SLACK = 1e-8

CATALOG = [
    Scenario(kind="static_circle", T=1.0, params={"n": 64}),
    Scenario(kind="conformal_circle", T=1.0, params={"n": 64}),
    Scenario(kind="product_torus", T=1.0, params={"nx": 32, "ny": 32}),
    Scenario(kind="shrinking_sphere_analogue", T=1.0, params={}),
    Scenario(kind="pinching_circle", T=1.0, params={"n": 128}),
    Scenario(kind="oscillating_metric", T=1.0, params={"n": 64}),
]
H_M = [(0.1, 1), (0.1, 4), (0.02, 1), (0.02, 4)]


@pytest.fixture(scope="module")
def matrix_runs():
    """Chain families for every catalog scenario and (h, m) pair, random data."""
    runs = []
    for idx, spec in enumerate(CATALOG):
        G = eh.build_scenario(spec)
        rng = np.random.default_rng(100 + idx)
        u0 = eh.DiscreteFunction(rng.standard_normal(G.n_vertices), 0.0)
        for h, m in H_M:
            chain = eh.run_interpolated(G, u0, h, m, rel_tol=MATRIX_REL_TOL)
            c0 = eh.volume_growth_bound(G, chain.times())
            runs.append((spec, G, u0, chain, c0))
    return runs


def test_criterion_01_energy_estimate(matrix_runs, criterion_line):
    failures = []
    for spec, G, u0, chain, c0 in matrix_runs:
        rep = eh.energy_estimate(chain, G, u0, c0, slack=SLACK)
        if not rep.passed:
            failures.append((spec.kind, chain.h, chain.m, rep))
    ok = criterion_line(
        1, not failures,
        "energy estimate on 6 scenarios x h in {0.1, 0.02} x m in {1, 4}, slack 1e-8")
    assert ok, failures


def test_criterion_02_pinching_stress(criterion_line):
    # drive the largest |d/dt log conductance| through 10, 100, 1000 by placing
    # the pinch amplitude so the rate is attained at the half-edge sample nearest
    # the pinch point at t = T
    n, T, q = 128, 1.0, 2.0
    dx = 2 * math.pi / n
    shape_at_half_edge = ((1 + math.cos(dx / 2)) / 2) ** q
    failures = []
    for speed in (10.0, 100.0, 1000.0):
        rho = speed / (1.0 + T * speed)
        amp = rho / shape_at_half_edge
        spec = Scenario(kind="pinching_circle", T=T,
                        params={"n": n, "amplitude": amp, "sharpness": q})
        G = eh.build_scenario(spec)

        grid = np.linspace(0.0, T, 2001)
        logc = np.log(np.array([eh.edge_conductances(G, float(t)) for t in grid]))
        realized = float(np.max(np.diff(logc, axis=0) / np.diff(grid)[:, None]))
        rate_ok = 0.8 * speed <= realized <= speed * (1 + 1e-6)

        u0 = eh.DiscreteFunction(np.random.default_rng(42).standard_normal(n), 0.0)
        chain = eh.run_interpolated(G, u0, 0.05, m=2, rel_tol=MATRIX_REL_TOL)
        c0 = eh.volume_growth_bound(G, chain.times())
        rep = eh.energy_estimate(chain, G, u0, c0, slack=SLACK)
        if not (rate_ok and c0 == 0.0 and rep.passed and rep.margin >= 0.0):
            failures.append((speed, realized, c0, rep))
    ok = criterion_line(
        2, not failures,
        "pinching: certified growth bound stays 0, margins stay >= 0 "
        "at conductance log-speeds 10, 100, 1000")
    assert ok, failures


def test_criterion_03_maximum_principle(matrix_runs, criterion_line):
    failures = []
    for spec, G, u0, chain, c0 in matrix_runs:
        rep = eh.extremum_check(chain, u0)
        if not rep.passed:
            failures.append((spec.kind, chain.h, chain.m, rep))
    ok = criterion_line(
        3, not failures,
        "maximum principle on the matrix, violation <= 1e-12 * (max|u0| + 1)")
    assert ok, failures


def test_criterion_04_contraction_pairs(criterion_line):
    h, m = 0.1, 2
    times = np.array([j * (h / m) for j in range(21)])
    failures = []
    for idx, spec in enumerate(CATALOG):
        G = eh.build_scenario(spec)
        c0 = eh.volume_growth_bound(G, times)
        rng = np.random.default_rng(500 + idx)
        for pair in range(10):
            u0 = eh.DiscreteFunction(rng.standard_normal(G.n_vertices), 0.0)
            v0 = eh.DiscreteFunction(rng.standard_normal(G.n_vertices), 0.0)
            rep = eh.contraction_check(G, u0, v0, h, m, c0,
                                       slack=SLACK, rel_tol=MATRIX_REL_TOL)
            if not rep.passed:
                failures.append((spec.kind, pair, rep))
    ok = criterion_line(
        4, not failures,
        "contraction and linearity on 10 random pairs per scenario "
        "(tol 1e-9 * data norms)")
    assert ok, failures


def test_criterion_05_convergence_order(criterion_line):
    spec = Scenario(kind="static_circle", T=1.0, params={"n": 64})
    G = eh.build_scenario(spec)
    u0 = eh.make_initial_data(G, {"profile": "harmonic", "k": 1})
    oracle = eh.semidiscrete_oracle(G, u0, 1.0, n_steps=4800)
    h_list = [0.1, 0.05, 0.025, 0.0125]
    rows = []
    prev = None
    for h in h_list:
        chain = eh.run_interpolated(G, u0, h, m=1, rel_tol=MATRIX_REL_TOL)
        err = eh.chain_error_vs_oracle(chain, G, oracle)
        order = None
        if prev is not None:
            order = math.log(prev[1] / err) / math.log(prev[0] / h)
        rows.append(eh.ConvergenceRow(h=h, m=1, error=err, observed_order=order))
        prev = (h, err)
    order = eh.fit_order(rows)
    ok = criterion_line(
        5, (oracle.self_check < 1e-10 and rows[-1].error < rows[0].error
            and order is not None and 0.8 <= order <= 1.2),
        f"first-order convergence to the reference flow "
        f"(fitted order {order:.3f}, oracle self-check {oracle.self_check:.2e})")
    assert ok, rows


def test_criterion_06_weak_residual_shrinks(criterion_line):
    spec = Scenario(kind="conformal_circle", T=1.0, params={"n": 64})
    G = eh.build_scenario(spec)
    u0 = eh.make_initial_data(G, {"profile": "harmonic", "k": 1})
    fns = eh.default_test_catalog(G, 1.0)
    res = {}
    for h in (0.1, 0.0125):
        chain = eh.run_interpolated(G, u0, h, m=1, rel_tol=MATRIX_REL_TOL)
        res[h] = {r.name: r.residual for r in eh.weak_residual(chain, G, fns)}
    shrunk = {name: res[0.0125][name] < res[0.1][name] for name in res[0.1]}
    ok = criterion_line(
        6, all(shrunk.values()),
        "weak-form residual shrinks from h = 0.1 to h = 0.0125 "
        "on all 4 catalog test functions")
    assert ok, res


def test_criterion_07_initial_attainment(criterion_line):
    spec = Scenario(kind="static_circle", T=1.0, params={"n": 64})
    G = eh.build_scenario(spec)
    u0 = eh.make_initial_data(G, {"profile": "harmonic", "k": 1})
    dists = []
    for h in (0.1, 0.05, 0.025, 0.0125):
        chain = eh.run_interpolated(G, u0, h, m=1, rel_tol=MATRIX_REL_TOL)
        dists.append(eh.initial_attainment_check(chain, G, u0, h))
    decreasing = all(a > b for a, b in zip(dists, dists[1:]))

    h = 0.1
    A = eh.operator_at(G, h, h)
    x = eh.dense_solve(A, A.mass * u0.values)
    dense_dist = eh.weighted_l2(x - u0.values, eh.vertex_weights(G, h))
    agree = abs(dists[0] - dense_dist) <= 1e-9
    ok = criterion_line(
        7, decreasing and agree,
        "attainment distance decreases over the h-sweep and matches "
        "the dense one-step solve to 1e-9")
    assert ok, (dists, dense_dist)


def test_criterion_08_interpolation_norms(criterion_line):
    spec = Scenario(kind="oscillating_metric", T=1.0, params={"n": 64})
    G = eh.build_scenario(spec)
    u0 = eh.DiscreteFunction(np.random.default_rng(8).standard_normal(64), 0.0)
    chain = eh.run_interpolated(G, u0, 0.05, m=4, rel_tol=MATRIX_REL_TOL)
    c0 = eh.volume_growth_bound(G, chain.times())
    rep = eh.energy_estimate(chain, G, u0, c0, slack=SLACK)
    shifted = eh.l2h1_interp_norm(chain.produced(), G, dt=chain.delta)
    dg = eh.degiorgi_family(G, chain.discrete_sequence(), chain.h, chain.m,
                            rel_tol=MATRIX_REL_TOL)
    resolvent = eh.l2h1_interp_norm(dg, G, dt=chain.delta)
    ratio = resolvent / shifted
    ok = criterion_line(
        8, rep.passed and ratio >= 1.0 - 1e-9,
        f"shifted-chain l2h1 stays within the energy bound; "
        f"resolvent/shifted ratio {ratio:.4f} >= 1")
    assert ok, (rep, ratio)


def test_criterion_09_dense_agreement(criterion_line):
    worst = 0.0
    for seed in range(20):
        G = random_static_graph(seed)
        rng = np.random.default_rng(seed + 900)
        u0 = eh.DiscreteFunction(rng.standard_normal(G.n_vertices), 0.0)
        h = float(rng.uniform(0.05, 0.5))
        step = eh.euler_step(G, h, h, u0, rel_tol=1e-14)
        A = eh.operator_at(G, h, h)
        dense = eh.dense_solve(A, A.mass * u0.values)
        rel = np.linalg.norm(step.values - dense) / np.linalg.norm(dense)
        worst = max(worst, rel)
    ok = criterion_line(
        9, worst <= 1e-12,
        f"iterative step matches the dense solve on 20 random graphs, n <= 8 "
        f"(worst relative gap {worst:.2e})")
    assert ok, worst


def test_criterion_10_truncation_contraction(criterion_line):
    spec = Scenario(kind="conformal_circle", T=1.0, params={"n": 64})
    G = eh.build_scenario(spec)
    u0 = eh.DiscreteFunction(np.random.default_rng(11).standard_cauchy(64), 0.0)
    w0 = eh.vertex_weights(G, 0.0)
    failures = []
    for h in (0.1, 0.02):
        chain_full = eh.run_interpolated(G, u0, h, m=1, rel_tol=MATRIX_REL_TOL)
        c0 = eh.volume_growth_bound(G, chain_full.times())
        bound_factor = math.exp(c0 * chain_full.horizon)
        for level in (1.0, 2.0, 4.0, 8.0, 16.0, 32.0):
            u0n = eh.truncate(u0, level)
            trunc_err = eh.weighted_l2_sq(u0.values - u0n.values, w0)
            chain_n = eh.run_interpolated(G, u0n, h, m=1, rel_tol=MATRIX_REL_TOL)
            diff_sup = max(
                eh.weighted_l2_sq(sf.values - sn.values, eh.vertex_weights(G, sf.time))
                for sf, sn in zip(chain_full.samples, chain_n.samples))
            diff_l2h1 = sum(
                chain_full.delta * eh.dirichlet_energy(G, sf.time, sf.values - sn.values)
                for sf, sn in zip(chain_full.produced(), chain_n.produced()))
            bound = bound_factor * trunc_err
            if not (diff_sup <= bound * (1 + SLACK)
                    and diff_l2h1 <= bound * (1 + SLACK)):
                failures.append((h, level, trunc_err, diff_sup, diff_l2h1, bound))
    ok = criterion_line(
        10, not failures,
        "truncated-data run differences obey the contraction bound "
        "at levels 1..32 for h in {0.1, 0.02}")
    assert ok, failures
