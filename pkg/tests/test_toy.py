import pytest

from fspm_bridge import toy
from fspm_bridge.errors import MissingFineScale
from fspm_bridge.graph import EdgeType, ExchangeGraph, GraphEdge, GraphNode
from fspm_bridge.pipeline import decompose_scale, load_scheme
from fspm_bridge.values import PropValue
from fspm_bridge.xeg import serialize_xeg


@pytest.fixture(scope="module")
def scheme(tmp_path_factory):
    d = toy.write_demo_configs(tmp_path_factory.mktemp("cfg"))
    return load_scheme(d / "metamer_scheme.xml")


class TestGrowth:
    def test_first_step_single_metamer_no_branch(self):
        state = toy.growth_step(toy.GrowthState(seed=0))
        assert len(state.metamers) == 1
        assert state.metamers[0].attach == EdgeType.SUCCESSOR

    def test_three_steps_give_four_metamers(self):
        state = toy.grow(seed=0, steps=3)
        assert len(state.metamers) == 4
        kinds = [m.attach for m in state.metamers]
        assert kinds.count(EdgeType.BRANCH) == 1
        branch = next(m for m in state.metamers if m.attach == EdgeType.BRANCH)
        assert branch.parent == 2  # carried by the third main metamer

    def test_same_seed_identical_xeg(self):
        a = serialize_xeg(toy.growth_export(toy.grow(42, 10)))
        b = serialize_xeg(toy.growth_export(toy.grow(42, 10)))
        assert a == b

    def test_different_seeds_differ(self):
        a = serialize_xeg(toy.growth_export(toy.grow(1, 4)))
        b = serialize_xeg(toy.growth_export(toy.grow(2, 4)))
        assert a != b

    def test_documented_length_formula_scale(self):
        state = toy.grow(seed=5, steps=9)
        lengths = [m.internode_length for m in state.metamers
                   if m.attach == EdgeType.SUCCESSOR]
        # 0.2 * 0.95^i with +-15% jitter
        for i, length in enumerate(lengths):
            base = 0.2 * 0.95 ** state.metamers[i].index
            assert 0.8 * base < length < 1.2 * base


class TestGrowthExport:
    def test_empty_state_root_only(self):
        g = toy.growth_export(toy.GrowthState(seed=0))
        assert g.node_count == 1 and g.edge_count == 0
        assert g.nodes[g.root].type_name == "Plant"

    def test_one_metamer_census(self):
        g = toy.growth_export(toy.grow(0, 1))
        assert g.node_count == 2 and g.edge_count == 1
        assert g.edges[0].etype == EdgeType.SUCCESSOR

    def test_branching_census(self):
        g = toy.growth_export(toy.grow(0, 3))
        assert g.node_count == 5
        etypes = sorted(e.etype for e in g.edges)
        assert etypes.count(EdgeType.SUCCESSOR) == 3
        assert etypes.count(EdgeType.BRANCH) == 1

    def test_export_is_valid_and_local(self):
        g = toy.growth_export(toy.grow(3, 12))
        assert g.validate() == []
        assert g.transform_mode == "local"

    def test_metamer_properties_present(self):
        g = toy.growth_export(toy.grow(0, 1))
        m = next(n for n in g.nodes.values() if n.type_name == "Metamer")
        for key in ("internode_length", "internode_radius", "petiole_length",
                    "petiole_radius", "leaf_sx", "leaf_sy", "color", "water_content"):
            assert m.prop(key) is not None
        assert m.prop("color").value == "brown"


def fine_graph(steps=3, seed=0, scheme=None):
    return decompose_scale(toy.growth_export(toy.grow(seed, steps)), scheme)


class TestWaterHandler:
    def test_single_internode_base_pressure(self, scheme):
        g = fine_graph(1, scheme=scheme)
        out = toy.water_handler(g, {}, toy.WaterParams(100.0, 10.0))
        internode = next(n for n in out.nodes.values() if n.name == "internode")
        assert internode.prop("pressure").value == 100.0

    def test_chain_pressures(self, scheme):
        # two plain steps: metamers 0-1 in a successor chain
        g = fine_graph(2, scheme=scheme)
        out = toy.water_handler(g, {}, toy.WaterParams(100.0, 10.0))
        pressures = sorted(n.prop("pressure").value
                           for n in out.nodes.values() if n.name == "internode")
        assert pressures == [90.0, 100.0]

    def test_colors_only_internodes(self, scheme):
        out = toy.water_handler(fine_graph(3, scheme=scheme), {})
        for n in out.nodes.values():
            if n.name == "internode":
                assert n.prop("color").value == "green"
            elif n.name in ("petiole", "leaf"):
                assert n.prop("color") is None

    def test_census_untouched(self, scheme):
        g = fine_graph(4, scheme=scheme)
        out = toy.water_handler(g, {})
        assert (out.node_count, out.edge_count) == (g.node_count, g.edge_count)

    def test_missing_fine_scale(self):
        with pytest.raises(MissingFineScale):
            toy.water_handler(toy.growth_export(toy.grow(0, 2)), {})


class TestStatusHandler:
    def test_census_and_temperature(self):
        g = ExchangeGraph(1, [GraphNode(i, f"n{i}", "N", 0) for i in range(1, 6)],
                          [GraphEdge(i, i + 1, EdgeType.BRANCH) for i in range(1, 5)])
        status = toy.status_handler(g, {"temperature": PropValue.of_float(212.0)})
        assert status == "ok: 5 nodes, 4 edges, step env 212"

    def test_root_only_no_env(self):
        g = ExchangeGraph(1, [GraphNode(1, "r", "N", 0)], [])
        assert toy.status_handler(g, {}) == "ok: 1 nodes, 0 edges, step env -"

    def test_deterministic(self, scheme):
        g = fine_graph(2, scheme=scheme)
        env = {"temperature": PropValue.of_double(21.5)}
        assert toy.status_handler(g, env) == toy.status_handler(g, env)


class TestColorHandler:
    def test_recolors_internodes(self, scheme):
        out = toy.color_handler(fine_graph(2, scheme=scheme), {}, "blue")
        for n in out.nodes.values():
            if n.name == "internode":
                assert n.prop("color").value == "blue"

    def test_no_internodes_is_identity(self):
        g = toy.growth_export(toy.grow(0, 1))
        assert toy.color_handler(g, {}) is g


class TestFineDepths:
    def test_branch_depths(self, scheme):
        g = fine_graph(3, scheme=scheme)  # metamers 0,1,2 chain + branch 3 on 2
        depths = toy.fine_depths(g)
        internodes = {n.name: n.id for n in g.nodes.values()}
        by_metamer = {}
        for n in g.nodes.values():
            if n.name == "internode":
                comp = next(e.src for e in g.in_edges(n.id)
                            if e.etype == EdgeType.DECOMPOSITION)
                by_metamer[g.nodes[comp].name] = depths[n.id]
        assert by_metamer == {"metamer0": 0, "metamer1": 1, "metamer2": 2,
                              "metamer3": 3}
