import copy
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_graph, renumbered
from fspm_bridge.errors import (
    DuplicateId,
    InvalidGraph,
    ScaleViolation,
    SelfLoop,
    UnknownEndpoint,
    UnknownNode,
)
from fspm_bridge.graph import (
    EdgeType,
    ExchangeGraph,
    GraphBuilder,
    GraphEdge,
    GraphNode,
    canonical_diff,
    canonical_equal,
)
from fspm_bridge.values import PropValue


def node(i, scale=0, name="n", type_name="Node", **props):
    return GraphNode(i, name, type_name, scale,
                     {k: PropValue.of_string(v) for k, v in props.items()})


@pytest.fixture
def tiny():
    return ExchangeGraph(1, [node(1), node(2, 1)],
                         [GraphEdge(1, 2, EdgeType.DECOMPOSITION)])


class TestConstruction:
    def test_single_root_node(self):
        g = ExchangeGraph(1, [node(1)], [])
        assert g.node_count == 1
        assert g.validate() == []

    def test_decomposition_scale_plus_one_ok(self, tiny):
        assert tiny.validate() == []

    def test_decomposition_scale_violation(self):
        with pytest.raises(ScaleViolation):
            ExchangeGraph(1, [node(1), node(2, 2)],
                          [GraphEdge(1, 2, EdgeType.DECOMPOSITION)])

    def test_duplicate_id(self):
        with pytest.raises(DuplicateId):
            ExchangeGraph(1, [node(1), node(1)], [])

    def test_add_node_duplicate(self, tiny):
        with pytest.raises(DuplicateId):
            tiny.add_node(node(2))

    def test_unknown_endpoint(self, tiny):
        with pytest.raises(UnknownEndpoint):
            tiny.add_edge(GraphEdge(1, 99, EdgeType.BRANCH))

    def test_self_loop(self, tiny):
        with pytest.raises(SelfLoop):
            tiny.add_edge(GraphEdge(2, 2, EdgeType.BRANCH))

    def test_add_leaves_original_untouched(self, tiny):
        g2 = tiny.add_node(node(3, 0))
        assert 3 in g2 and 3 not in tiny

    def test_builder(self):
        b = GraphBuilder()
        b.add_node(node(1))
        b.add_node(node(2, 1))
        b.add_edge(1, 2, EdgeType.DECOMPOSITION)
        assert b.build(1).validate() == []


class TestValidate:
    def test_isolated_node_single_unreachable_entry(self):
        g = ExchangeGraph(1, [node(1), node(2)], [])
        report = g.validate()
        assert len(report) == 1
        assert report[0].kind == "unreachable"
        assert "node 2" in report[0].subject

    def test_successor_fanout(self):
        g = ExchangeGraph(1, [node(1), node(2), node(3)],
                          [GraphEdge(1, 2, EdgeType.SUCCESSOR),
                           GraphEdge(1, 3, EdgeType.SUCCESSOR)])
        kinds = [v.kind for v in g.validate()]
        assert kinds == ["successor-fanout"]

    def test_root_incoming(self):
        g = ExchangeGraph(1, [node(1), node(2)],
                          [GraphEdge(1, 2, EdgeType.BRANCH),
                           GraphEdge(2, 1, EdgeType.BRANCH)])
        assert "root-incoming" in [v.kind for v in g.validate()]

    def test_scale_violation_reported_in_relaxed_graph(self):
        g = ExchangeGraph(1, [node(1), node(2, 2)],
                          [GraphEdge(1, 2, EdgeType.DECOMPOSITION)], strict=False)
        assert [v.kind for v in g.validate()] == ["scale-violation"]

    def test_root_missing(self):
        g = ExchangeGraph(5, [node(1)], [], strict=False)
        assert "root-missing" in [v.kind for v in g.validate()]

    def test_dangling_edge_reported(self):
        g = ExchangeGraph(1, [node(1)], [GraphEdge(1, 9, EdgeType.BRANCH)],
                          strict=False)
        assert "dangling-edge" in [v.kind for v in g.validate()]

    def test_self_loop_reported(self):
        g = ExchangeGraph(1, [node(1), node(2)],
                          [GraphEdge(1, 2, EdgeType.BRANCH),
                           GraphEdge(2, 2, EdgeType.BRANCH)], strict=False)
        assert "self-loop" in [v.kind for v in g.validate()]


class TestChildren:
    def test_successor_before_branch(self):
        g = ExchangeGraph(1, [node(1), node(3), node(5)],
                          [GraphEdge(1, 5, EdgeType.BRANCH),
                           GraphEdge(1, 3, EdgeType.SUCCESSOR)])
        assert g.children(1) == [3, 5]

    def test_leaf_has_no_children(self, tiny):
        assert tiny.children(2) == []

    def test_decomposition_filter_ascending(self):
        nodes = [node(1), node(9, 1), node(4, 1), node(6, 1)]
        edges = [GraphEdge(1, i, EdgeType.DECOMPOSITION) for i in (9, 4, 6)]
        g = ExchangeGraph(1, nodes, edges)
        assert g.children(1, EdgeType.DECOMPOSITION) == [4, 6, 9]

    def test_unknown_node(self, tiny):
        with pytest.raises(UnknownNode):
            tiny.children(42)

    def test_two_calls_agree(self, rng):
        g = random_graph(rng)
        for node_id in g.nodes:
            assert g.children(node_id) == g.children(node_id)


class TestCanonicalEqual:
    def test_deep_copy_equal(self, rng):
        g = random_graph(rng)
        assert canonical_equal(g, copy.deepcopy(g), 0.0)

    def test_renumbered_equal(self):
        g = ExchangeGraph(1, [node(1), node(2, name="a"), node(3, name="b")],
                          [GraphEdge(1, 2, EdgeType.SUCCESSOR),
                           GraphEdge(2, 3, EdgeType.BRANCH)])
        h = ExchangeGraph(7, [node(7), node(5, name="a"), node(2, name="b")],
                          [GraphEdge(7, 5, EdgeType.SUCCESSOR),
                           GraphEdge(5, 2, EdgeType.BRANCH)])
        assert canonical_equal(g, h, 0.0)

    def test_color_difference_named(self):
        g = ExchangeGraph(1, [node(1), node(2, color="brown")],
                          [GraphEdge(1, 2, EdgeType.SUCCESSOR)])
        h = ExchangeGraph(1, [node(1), node(2, color="green")],
                          [GraphEdge(1, 2, EdgeType.SUCCESSOR)])
        diff = canonical_diff(g, h, 0.0)
        assert diff is not None and "color" in diff

    def test_float_tolerance(self):
        def with_value(x):
            return ExchangeGraph(1, [GraphNode(1, "r", "N", 0,
                                               {"v": PropValue.of_double(x)})], [])
        assert canonical_equal(with_value(1.0), with_value(1.0 + 1e-12), 1e-9)
        assert not canonical_equal(with_value(1.0), with_value(1.001), 1e-9)
        assert not canonical_equal(with_value(1.0), with_value(1.0 + 1e-12), 0.0)

    def test_invalid_graph_rejected(self):
        bad = ExchangeGraph(1, [node(1), node(2)], [])
        with pytest.raises(InvalidGraph):
            canonical_equal(bad, bad, 0.0)

    def test_edge_type_difference(self, tiny):
        other = ExchangeGraph(1, [node(1), node(2, 0)],
                              [GraphEdge(1, 2, EdgeType.BRANCH)])
        assert not canonical_equal(tiny, other, 0.0)


@given(seed=st.integers(0, 10**9))
def test_random_build_sequences_are_valid(seed):
    g = random_graph(random.Random(seed))
    assert g.validate() == []


@given(seed=st.integers(0, 10**9))
def test_canonical_equal_reflexive_symmetric_renumber_invariant(seed):
    rng = random.Random(seed)
    g = random_graph(rng)
    h = renumbered(g, rng)
    assert canonical_equal(g, g, 0.0)
    assert canonical_equal(g, h, 0.0)
    assert canonical_equal(h, g, 0.0)


@given(seed=st.integers(0, 10**9))
def test_edge_insertion_order_invariant(seed):
    rng = random.Random(seed)
    g = random_graph(rng)
    edges = list(g.edges)
    rng.shuffle(edges)
    h = ExchangeGraph(g.root, g.nodes.values(), edges, g.transform_mode)
    assert canonical_equal(g, h, 0.0)


class TestCanonicalEqualOnDags:
    """Decomposed plants are DAGs (parts are reachable both through the
    composite and through mirrored sibling edges); comparison must track
    the shared structure."""

    @staticmethod
    def decomposed(seed, steps=5):
        import tempfile
        from pathlib import Path

        from fspm_bridge import toy
        from fspm_bridge.pipeline import decompose_scale, load_scheme

        d = toy.write_demo_configs(Path(tempfile.mkdtemp()))
        scheme = load_scheme(d / "metamer_scheme.xml")
        return decompose_scale(toy.growth_export(toy.grow(seed, steps)), scheme)

    def test_renumber_invariance_on_dag(self, rng):
        g = self.decomposed(3)
        assert canonical_equal(g, renumbered(g, rng), 0.0)

    def test_sharing_difference_detected(self):
        # same node multiset, different sharing: two parents pointing at
        # one child vs each parent owning its own identical child
        a, b = node(2, name="arm"), node(3, name="arm")
        shared_child = node(4, name="tip")
        g_shared = ExchangeGraph(1, [node(1), a, b, shared_child],
                                 [GraphEdge(1, 2, EdgeType.SUCCESSOR),
                                  GraphEdge(1, 3, EdgeType.BRANCH),
                                  GraphEdge(2, 4, EdgeType.BRANCH),
                                  GraphEdge(3, 4, EdgeType.BRANCH)])
        g_split = ExchangeGraph(1, [node(1), a, b, node(4, name="tip"),
                                    node(5, name="tip")],
                                [GraphEdge(1, 2, EdgeType.SUCCESSOR),
                                 GraphEdge(1, 3, EdgeType.BRANCH),
                                 GraphEdge(2, 4, EdgeType.BRANCH),
                                 GraphEdge(3, 5, EdgeType.BRANCH)])
        assert not canonical_equal(g_shared, g_split, 0.0)

    def test_wire_roundtrip_of_dag(self):
        from fspm_bridge.xeg import parse_xeg, serialize_xeg

        g = self.decomposed(8, steps=7)
        assert canonical_equal(parse_xeg(serialize_xeg(g)), g, 0.0)

    def test_cycle_terminates(self):
        # nothing forbids a branch cycle below the root; comparison and
        # serialization must terminate on it
        from fspm_bridge.xeg import parse_xeg, serialize_xeg

        g = ExchangeGraph(1, [node(1), node(2, name="a"), node(3, name="b")],
                          [GraphEdge(1, 2, EdgeType.SUCCESSOR),
                           GraphEdge(2, 3, EdgeType.BRANCH),
                           GraphEdge(3, 2, EdgeType.BRANCH)])
        assert g.validate() == []
        assert canonical_equal(g, copy.deepcopy(g), 0.0)
        assert canonical_equal(parse_xeg(serialize_xeg(g)), g, 0.0)
