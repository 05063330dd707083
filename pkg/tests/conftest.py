import random

import pytest
from hypothesis import HealthCheck, settings

from fspm_bridge.geometry import Rotate, Scale, Translate, compose_transforms
from fspm_bridge.graph import EdgeType, ExchangeGraph, GraphEdge, GraphNode
from fspm_bridge.values import PropValue

settings.register_profile(
    "ci", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


def random_affine(rng: random.Random, scale_lo: float = 0.3,
                  scale_hi: float = 3.0) -> tuple:
    """Random invertible affine matrix (rotations, translations, scalings).

    Deep-chain round-trip tests pass a narrow scaling range; compounding
    wide scalings over many levels is genuinely ill-conditioned and would
    test float arithmetic, not the traversal."""
    steps = []
    for _ in range(rng.randint(1, 3)):
        kind = rng.choice(("t", "r", "s"))
        if kind == "t":
            steps.append(Translate((rng.uniform(-5, 5), rng.uniform(-5, 5),
                                    rng.uniform(-5, 5))))
        elif kind == "r":
            axis = (rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))
            if all(abs(a) < 1e-3 for a in axis):
                axis = (0.0, 0.0, 1.0)
            steps.append(Rotate(axis, rng.uniform(-180, 180)))
        else:
            steps.append(Scale((rng.uniform(scale_lo, scale_hi),
                                rng.uniform(scale_lo, scale_hi),
                                rng.uniform(scale_lo, scale_hi))))
    return compose_transforms(steps)


def random_value(rng: random.Random) -> PropValue:
    kind = rng.choice(("int", "double", "bool", "string", "vec3", "matrix4",
                       "doublelist"))
    if kind == "int":
        return PropValue.of_int(rng.randint(-10**9, 10**9))
    if kind == "double":
        return PropValue.of_double(rng.uniform(-1e3, 1e3))
    if kind == "bool":
        return PropValue.of_bool(rng.random() < 0.5)
    if kind == "string":
        alphabet = "abcdefgh <>&\"'\n\txyzüß#"
        return PropValue.of_string("".join(rng.choice(alphabet)
                                           for _ in range(rng.randint(0, 12))))
    if kind == "vec3":
        return PropValue.of_vec3([rng.uniform(-10, 10) for _ in range(3)])
    if kind == "matrix4":
        return PropValue.of_matrix4([rng.uniform(-10, 10) for _ in range(16)])
    return PropValue.of_doublelist([rng.uniform(-10, 10)
                                    for _ in range(rng.randint(0, 6))])


def random_graph(rng: random.Random, max_nodes: int = 14) -> ExchangeGraph:
    """Random valid local-mode graph: a scale-respecting tree with mixed
    edge types, random properties and transforms."""
    n = rng.randint(1, max_nodes)
    nodes = [GraphNode(1, "root", "Plant", 0,
                       {"tag": random_value(rng)},
                       local_transform=random_affine(rng) if rng.random() < 0.5 else None)]
    edges = []
    has_successor: set[int] = set()
    for i in range(2, n + 1):
        parent = nodes[rng.randrange(len(nodes))]
        choices = [EdgeType.BRANCH, EdgeType.DECOMPOSITION]
        if parent.id not in has_successor:
            choices.append(EdgeType.SUCCESSOR)
        etype = rng.choice(choices)
        if etype == EdgeType.SUCCESSOR:
            has_successor.add(parent.id)
        scale = parent.scale + 1 if etype == EdgeType.DECOMPOSITION else parent.scale
        props = {f"p{rng.randint(0, 3)}": random_value(rng)
                 for _ in range(rng.randint(0, 3))}
        nodes.append(GraphNode(i, rng.choice(("stem", "leaf", "organ", "")),
                               rng.choice(("Metamer", "Cylinder", "Patch")),
                               scale, props,
                               local_transform=random_affine(rng) if rng.random() < 0.6 else None))
        edges.append(GraphEdge(parent.id, i, etype))
    return ExchangeGraph(1, nodes, edges)


def renumbered(graph: ExchangeGraph, rng: random.Random) -> ExchangeGraph:
    """Same graph under a random id permutation."""
    ids = list(graph.nodes)
    new_ids = [i + 1 for i in range(len(ids))]
    rng.shuffle(new_ids)
    mapping = dict(zip(ids, new_ids))
    nodes = [GraphNode(mapping[n.id], n.name, n.type_name, n.scale, n.properties,
                       n.local_transform, n.global_transform)
             for n in graph.nodes.values()]
    edges = [GraphEdge(mapping[e.src], mapping[e.dst], e.etype) for e in graph.edges]
    rng.shuffle(nodes)
    rng.shuffle(edges)
    return ExchangeGraph(mapping[graph.root], nodes, edges, graph.transform_mode)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(1234)
