"""Shared test fixtures: seeded random graphs and scenario shortcuts."""

import numpy as np

import evoheat as eh
from evoheat.geometry import Scenario


def build(kind, T=1.0, **params):
    return eh.build_scenario(Scenario(kind=kind, T=T, params=params))


def random_static_graph(seed, n_min=2, n_max=8, horizon=1.0):
    """Connected graph with random weights/conductances (some conductances zero)."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    edges = set()
    for i in range(1, n):
        edges.add((int(rng.integers(0, i)), i))  # spanning tree
    for _ in range(int(rng.integers(0, n))):
        i, j = sorted(int(v) for v in rng.choice(n, size=2, replace=False))
        edges.add((i, j))
    edges = sorted(edges)
    weights = rng.uniform(0.5, 2.0, n)
    cond = rng.uniform(0.1, 2.0, len(edges))
    cond[rng.uniform(size=len(cond)) < 0.25] = 0.0
    return eh.TimeWeightedGraph.static(weights, np.array(edges), cond, horizon)


def random_operator(seed):
    G = random_static_graph(seed)
    rng = np.random.default_rng(seed + 10_000)
    h = float(rng.uniform(0.01, 0.5))
    return eh.operator_at(G, 0.0, h)
