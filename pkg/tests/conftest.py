import copy
import json

import numpy as np
import pytest

from cpsimpact.attack_graph import AttackGraph
from cpsimpact.geometry import HPolytope
from cpsimpact.scenario import build_scenario, read_scenario


def random_polytope(rng, n, m=None, radius=1.0):
    """Random bounded full-dimensional polytope containing the origin."""
    m = m or 3 * n + 2
    while True:
        G = rng.standard_normal((m, n))
        g = radius * (0.3 + rng.random(m))
        P = HPolytope(G, g)
        if P.is_bounded():
            return P


def random_vpoints(rng, n, k=None):
    k = k or 2 * n + 3
    return rng.standard_normal((k, n))


def random_graph(rng, n_nodes=None, labels=("N", "A", "B")):
    n = n_nodes or int(rng.integers(1, 5))
    nodes = [f"v{k}" for k in range(n)]
    triples = [(s, d, lab) for s in nodes for d in nodes for lab in labels]
    edges = set()
    for s in nodes:
        # at least one outgoing edge per node
        edges.add((s, nodes[int(rng.integers(n))], labels[int(rng.integers(len(labels)))]))
    for t in triples:
        if rng.random() < 0.2:
            edges.add(t)
    return AttackGraph(nodes, sorted(edges))


def toy_raw(bound=0.4, n_max=1, n_min=1):
    """Scalar plant x+ = 0.5 x + u + v with an attacked actuator.

    With K = L = 0, |v| <= 0.2 and |a| <= bound, one attack step from
    |x| <= X stays in |x| <= 1 iff 0.5 X + bound + 0.2 <= 1, so for
    ``n_max = 1`` the safe set is |x| <= min(1, 2 (0.8 - bound)).  With
    L = 0 the estimation error reaches 0.4, so the detector bound is loose
    enough that honest residuals never alarm.
    """
    return {
        "name": "toy",
        "plant": {
            "A": [[0.5]], "B": [[1.0]], "C": [[1.0]],
            "X": {"lb": [-1], "ub": [1]},
            "U": {"lb": [-1], "ub": [1]},
            "Y": {"lb": [-10], "ub": [10]},
            "V": {"inf_norm": 0.2},
            "W": {"inf_norm": 0.01},
        },
        "gains": {"K": [[0.0]], "L": [[0.0]]},
        "detector": {"R": {"inf_norm": 0.5}},
        "e_max": 0.5,
        "channels": [{"inputs": [1], "bounds": [-bound, bound],
                      "dwell": {"n_max": n_max, "n_min": n_min}}],
    }


@pytest.fixture
def toy():
    return build_scenario(toy_raw())


@pytest.fixture(scope="session")
def fixture_raw():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = read_scenario(name)
        return copy.deepcopy(cache[name])
    return get


@pytest.fixture
def tmp_scenario(tmp_path):
    def write(raw, name="sc.json"):
        p = tmp_path / name
        p.write_text(json.dumps(raw))
        return p
    return write


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
