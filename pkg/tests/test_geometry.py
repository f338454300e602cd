"""Graph construction conventions, growth bounds, decay rates, tabulated input."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

import evoheat as eh
from evoheat.geometry import Scenario, ScenarioError

from helpers import build

# Circle conventions frozen by hand for N = 4 equispaced vertices on length 2*pi:
# vertex weight a*dx with a = 1, conductance 1/(dx*a) with dx = pi/2.
QUARTER_WEIGHT = 1.5707963267948966  # 2*pi/4
QUARTER_COND = 0.6366197723675814  # 4/(2*pi)
# Relative one-step volume decay of w(t) = exp(-2t)*w(0) at h = 0.1:
# (1 - exp(-0.2)) / 0.1, worked out by hand.
DECAY_RATE_EXP2 = 1.8126924692201818


def test_static_circle_conventions():
    G = build("static_circle", n=4)
    assert G.n_vertices == 4
    assert G.n_edges == 4
    assert_allclose(eh.vertex_weights(G, 0.0), QUARTER_WEIGHT, rtol=1e-15)
    assert_allclose(eh.edge_conductances(G, 0.7), QUARTER_COND, rtol=1e-15)
    # total volume is the circumference
    assert_allclose(eh.vertex_weights(G, 0.3).sum(), 2 * math.pi, rtol=1e-14)


def test_conformal_exponential_weights():
    # a(t, x) = exp(t), so at t = 1 every weight is e * 2*pi/4
    G = build("conformal_circle", n=4, amp=0.0, growth=1.0)
    assert_allclose(eh.vertex_weights(G, 1.0), math.e * QUARTER_WEIGHT, rtol=1e-14)
    assert_allclose(eh.edge_conductances(G, 1.0), QUARTER_COND / math.e, rtol=1e-14)


def test_negative_time_frozen():
    G = build("conformal_circle", n=8, amp=0.4, omega=2.0)
    assert np.array_equal(eh.vertex_weights(G, -0.3), eh.vertex_weights(G, 0.0))
    assert np.array_equal(eh.edge_conductances(G, -1.0), eh.edge_conductances(G, 0.0))


def test_time_beyond_horizon_rejected():
    G = build("static_circle", n=4, T=0.5)
    with pytest.raises(ValueError):
        eh.vertex_weights(G, 0.6)


def test_edges_sorted_and_valid():
    G = build("product_torus", nx=3, ny=4)
    assert G.n_vertices == 12
    assert G.n_edges == 24
    assert np.all(G.edges[:, 0] < G.edges[:, 1])


def test_octahedron_shape():
    G = build("shrinking_sphere_analogue", radius0=2.0)
    assert G.n_vertices == 6
    assert G.n_edges == 12
    area = 4 * math.pi * 4.0
    assert_allclose(eh.vertex_weights(G, 0.0).sum(), area, rtol=1e-14)
    # weights shrink linearly, conductances do not move
    assert_allclose(eh.vertex_weights(G, 1.0), (area / 6) * 0.5, rtol=1e-14)
    assert np.array_equal(eh.edge_conductances(G, 1.0), eh.edge_conductances(G, 0.0))


def test_dirichlet_energy_hand_value():
    G = build("static_circle", n=4)
    u = np.array([1.0, 0.0, 0.0, 0.0])
    # two edges see the unit jump
    assert_allclose(eh.dirichlet_energy(G, 0.0, u), 2 * QUARTER_COND, rtol=1e-14)
    assert eh.dirichlet_energy(G, 0.0, np.full(4, 3.7)) == 0.0


def test_volume_growth_bound_static_is_zero():
    G = build("static_circle", n=8)
    assert eh.volume_growth_bound(G, np.linspace(0.0, 1.0, 11)) == 0.0


def test_volume_growth_bound_exponential_exact():
    # log w is linear in t with slope exactly 1, any grid recovers it
    G = build("conformal_circle", n=8, amp=0.0, growth=1.0)
    got = eh.volume_growth_bound(G, np.array([0.0, 0.13, 0.5, 0.77, 1.0]))
    assert_allclose(got, 1.0, rtol=1e-12)


def test_volume_growth_bound_shrinking_is_zero():
    G = build("pinching_circle", n=16, amplitude=0.6)
    assert eh.volume_growth_bound(G, np.linspace(0.0, 1.0, 21)) == 0.0


def test_volume_growth_bound_refinement_monotone():
    G = build("conformal_circle", n=16, amp=0.5, omega=3.0, k_spatial=1)
    coarse = eh.volume_growth_bound(G, np.linspace(0.0, 1.0, 5))
    fine = eh.volume_growth_bound(G, np.linspace(0.0, 1.0, 9))
    assert coarse <= fine + 1e-12


def test_volume_growth_bound_grid_validation():
    G = build("static_circle", n=4)
    with pytest.raises(ValueError):
        eh.volume_growth_bound(G, np.array([0.0]))
    with pytest.raises(ValueError):
        eh.volume_growth_bound(G, np.array([0.0, 0.5, 0.5]))


def test_volume_decay_rate_hand_value():
    G = build("conformal_circle", n=8, amp=0.0, growth=-2.0)
    rate = eh.volume_decay_rate(G, 0.3, 0.1)
    assert_allclose(rate, DECAY_RATE_EXP2, rtol=1e-12)


_G_DECAY = build("conformal_circle", n=12, amp=0.4, omega=2.0, k_spatial=1)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.8), st.floats(0.01, 0.2))
def test_volume_decay_mass_identity(t, h):
    rate = eh.volume_decay_rate(_G_DECAY, t, h)
    w_now = eh.vertex_weights(_G_DECAY, t)
    w_next = eh.vertex_weights(_G_DECAY, t + h)
    assert_allclose(rate * w_now * h, w_now - w_next, rtol=1e-12, atol=1e-15)
    assert_allclose(np.sum(rate * w_now * h), np.sum(w_now - w_next), rtol=1e-12, atol=1e-14)


def test_scenario_roundtrip():
    spec = Scenario(kind="pinching_circle", T=0.5, params={"n": 32, "amplitude": 0.7})
    again = Scenario.from_dict(spec.to_dict())
    assert again == spec


@pytest.mark.parametrize(
    "kind, params",
    [
        ("static_circle", {"n": 2}),
        ("conformal_circle", {"amp": 1.0}),
        ("conformal_circle", {"bogus": 3}),
        ("product_torus", {"nx": 2}),
        ("oscillating_metric", {"amp": -1.5}),
        ("no_such_kind", {}),
    ],
)
def test_bad_scenarios_rejected(kind, params):
    with pytest.raises(ScenarioError):
        build(kind, **params)


def test_nonpositive_horizon_rejected():
    with pytest.raises(ScenarioError):
        build("static_circle", T=0.0, n=4)


def test_pinching_past_collapse_rejected():
    with pytest.raises(ScenarioError, match="pinch"):
        build("pinching_circle", T=2.0, n=16, amplitude=0.9)


def test_sphere_past_collapse_rejected():
    with pytest.raises(ScenarioError):
        build("shrinking_sphere_analogue", T=1.0, radius0=1.0)


def test_all_catalog_kinds_build():
    for kind in eh.SCENARIO_KINDS:
        if kind == "custom_tabulated":
            continue
        G = build(kind, T=0.5)
        assert G.horizon == 0.5
        assert np.all(eh.vertex_weights(G, 0.25) > 0)


def _table_doc():
    return {
        "n_vertices": 3,
        "edges": [[0, 1], [1, 2], [0, 2]],
        "times": [0.0, 1.0],
        "weights": [[1.0, 2.0, 4.0], [4.0, 2.0, 1.0]],
        "conductances": [[1.0, 1.0, 0.0], [3.0, 1.0, 2.0]],
    }


def test_tabulated_interpolation():
    G = eh.tabulated_graph(_table_doc())
    assert G.horizon == 1.0
    # weights interpolate geometrically, conductances linearly
    assert_allclose(eh.vertex_weights(G, 0.5), [2.0, 2.0, 2.0], rtol=1e-14)
    assert_allclose(eh.edge_conductances(G, 0.5), [2.0, 1.0, 1.0], rtol=1e-14)
    assert_allclose(eh.vertex_weights(G, 1.0), [4.0, 2.0, 1.0], rtol=1e-15)


def test_tabulated_roundtrip_through_json():
    doc = json.loads(json.dumps(_table_doc()))
    G = eh.tabulated_graph(doc)
    assert G.n_edges == 3


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d["weights"][1].append(1.0), "weights"),
        (lambda d: d["weights"][0].__setitem__(0, 0.0), "weights"),
        (lambda d: d["conductances"][0].__setitem__(1, -1.0), "conductances"),
        (lambda d: d["times"].__setitem__(1, 0.0), "times"),
        (lambda d: d["times"].__setitem__(0, 0.5), "times"),
        (lambda d: d["edges"].__setitem__(0, [0, 0]), "edge"),
        (lambda d: d["edges"].__setitem__(0, [0, 7]), "edge"),
        (lambda d: d.pop("times"), "times"),
    ],
)
def test_tabulated_rejects_malformed(mutate, fragment):
    doc = _table_doc()
    mutate(doc)
    with pytest.raises(ScenarioError, match=fragment):
        eh.tabulated_graph(doc)


def test_disconnected_graph_rejected():
    with pytest.raises(ScenarioError, match="connect"):
        eh.TimeWeightedGraph.static(
            np.ones(4), np.array([[0, 1], [2, 3]]), np.ones(2), 1.0
        )
