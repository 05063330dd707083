"""End-to-end acceptance suite.

One test per criterion, each at its stated tolerance and time budget,
printing a PASS line when it holds.  Run with -s to see the lines.
"""

import random
import socket
import time

import pytest

from conftest import random_affine
from fspm_bridge import protocol, toy
from fspm_bridge.cli import main
from fspm_bridge.errors import ModeRejected
from fspm_bridge.geometry import (
    Dictionary,
    DictionaryEntry,
    RULES,
    globalize,
    localize,
    signature,
    surface_area,
    translate_signature,
)
from fspm_bridge.graph import (
    EdgeType,
    ExchangeGraph,
    GraphEdge,
    GraphNode,
    canonical_diff,
    canonical_equal,
)
from fspm_bridge.pipeline import (
    UnitRule,
    UpscaleSpec,
    convert_env,
    decompose_scale,
    load_pipeline,
    load_scheme,
    load_upscale_spec,
    upscale_properties,
)
from fspm_bridge.protocol import TargetServer, client_run, decode_frame, encode_frame
from fspm_bridge.values import PropValue
from fspm_bridge.xeg import parse_xeg, serialize_xeg

from test_protocol import messages_equal, random_message


@pytest.fixture(scope="module")
def configs(tmp_path_factory):
    return toy.write_demo_configs(tmp_path_factory.mktemp("acceptance-cfg"))


def report(name: str):
    print(f"ACCEPTANCE PASS: {name}")


def test_identity_roundtrip(configs):
    """Random growth states up to 200 metamers survive export -> serialize
    -> parse -> import pipeline -> inverse pipeline -> serialize within
    1e-9, each case under 5 s."""
    imp = load_pipeline(configs / "import_roundtrip.xml")
    exp = load_pipeline(configs / "export_roundtrip.xml")
    from fspm_bridge.pipeline import run_pipeline

    cases = [(0, 0), (1, 1), (2, 8), (3, 40), (4, 150)]  # 150 steps = 200 metamers
    for seed, steps in cases:
        started = time.perf_counter()
        state = toy.grow(seed, steps)
        assert len(state.metamers) <= 200
        g = toy.growth_export(state)
        text = serialize_xeg(g)
        parsed = parse_xeg(text)
        mid = run_pipeline(parsed, imp, toy.default_env(0))
        back = run_pipeline(mid.graph, exp, mid.env)
        assert canonical_diff(back.graph, g, 1e-9) is None
        final_text = serialize_xeg(back.graph)
        assert canonical_equal(parse_xeg(final_text), g, 1e-9)
        elapsed = time.perf_counter() - started
        assert elapsed < 5.0, f"case {steps} steps took {elapsed:.2f}s"
    report("identity round-trip (5 sizes up to 200 metamers, 1e-9, <5s each)")


def test_retroactive_loop(capsys):
    """cmd_demo_roundtrip over 5 steps: all internodes green, exact
    pressures, unchanged census, under 10 s including process spawns."""
    started = time.perf_counter()
    code = main(["demo-roundtrip", "--steps", "5"])
    elapsed = time.perf_counter() - started
    out = capsys.readouterr().out
    assert code == 0, out
    assert "FAIL" not in out
    assert elapsed < 10.0, f"demo took {elapsed:.2f}s"
    with capsys.disabled():
        report(f"retroactive loop (5 steps, exact pressures, {elapsed:.2f}s)")


def test_decompose_upscale_inverse(configs):
    """1000 random metamer graphs: census restored exactly, forwarded
    properties exact, sum/mean checked against a brute-force oracle."""
    scheme = load_scheme(configs / "metamer_scheme.xml")
    spec_first = load_upscale_spec(configs / "upscale.xml")
    rng = random.Random(2024)
    aggregate_scheme_checked = 0
    for case in range(1000):
        steps = rng.randint(1, 12)
        g = toy.growth_export(toy.grow(seed=case, steps=steps))
        fine = decompose_scale(g, scheme)
        restored = upscale_properties(fine, scheme, spec_first)
        assert restored.node_count == g.node_count
        assert restored.edge_count == g.edge_count
        assert canonical_equal(restored, g, 0.0)

        # brute-force oracle for sum and mean over the water_content field
        if case % 10 == 0:
            spec_num = UpscaleSpec({"water_content": rng.choice(("sum", "mean"))})
            op = spec_num.ops["water_content"]
            seeded = fine
            expected: dict[int, float] = {}
            for comp in fine.nodes.values():
                if comp.type_name != "Metamer":
                    continue
                parts = fine.children(comp.id, EdgeType.DECOMPOSITION)
                values = []
                updates = {}
                for pid in parts:
                    v = rng.uniform(-5, 5)
                    updates[pid] = fine.nodes[pid].with_properties(
                        water_content=PropValue.of_double(v))
                    values.append(v)
                seeded = seeded.replace_nodes(updates)
                fine = seeded
                if values:
                    total = 0.0
                    for v in values:  # brute force, element by element
                        total += v
                    expected[comp.id] = total if op == "sum" else total / len(values)
            up = upscale_properties(seeded, scheme,
                                    UpscaleSpec({"water_content": op,
                                                 **{k: "first" for k in spec_first.ops
                                                    if k != "water_content"}}))
            for comp_id, want in expected.items():
                got = up.nodes[comp_id].prop("water_content").value
                assert got == pytest.approx(want, rel=1e-12)
            aggregate_scheme_checked += 1
    assert aggregate_scheme_checked == 100
    report("decompose/upscale inverse (1000 graphs, census + tol-0 properties, "
           "sum/mean vs brute force)")


def test_geometry_translation_and_transform_roundtrip():
    """1000 random parallelograms in both forms: area within rel 1e-9 and
    corners preserved; globalize/localize round-trip within 1e-9 on random
    20-deep transform chains."""
    dictionary = Dictionary(
        [DictionaryEntry("Parallelogram", "tri2", "TriangleSet",
                         RULES["parallelogram_tri2"]),
         DictionaryEntry("Parallelogram", "tri4", "TriangleSet",
                         RULES["parallelogram_tri4"])])
    rng = random.Random(77)
    for _ in range(1000):
        origin = tuple(rng.uniform(-100, 100) for _ in range(3))
        u = tuple(rng.uniform(-10, 10) for _ in range(3))
        v = tuple(rng.uniform(-10, 10) for _ in range(3))
        sig = signature("Parallelogram",
                        ("origin", PropValue.of_vec3(origin)),
                        ("u", PropValue.of_vec3(u)),
                        ("v", PropValue.of_vec3(v)))
        area = surface_area(sig)
        corners = {origin,
                   tuple(origin[i] + u[i] for i in range(3)),
                   tuple(origin[i] + u[i] + v[i] for i in range(3)),
                   tuple(origin[i] + v[i] for i in range(3))}
        for form in ("tri2", "tri4"):
            ts = translate_signature(sig, dictionary, form)[0]
            assert surface_area(ts) == pytest.approx(area, rel=1e-9)
            flat = ts.arg("vertices").value
            pts = [tuple(flat[3 * i: 3 * i + 3]) for i in range(len(flat) // 3)]
            if form == "tri2":
                assert set(pts) == corners and len(pts) == 4
            else:
                assert corners <= set(pts)

    for case in range(60):
        chain_rng = random.Random(9000 + case)
        nodes = [GraphNode(1, "root", "N", 0,
                           local_transform=random_affine(chain_rng, 0.7, 1.4))]
        edges = []
        for i in range(2, 22):  # 20 edges deep
            nodes.append(GraphNode(i, f"n{i}", "N", 0,
                                   local_transform=random_affine(chain_rng, 0.7, 1.4)))
            edges.append(GraphEdge(i - 1, i, EdgeType.SUCCESSOR))
        g = ExchangeGraph(1, nodes, edges)
        assert canonical_equal(localize(globalize(g)), g, 1e-9)
    report("geometry translation (1000 parallelograms x 2 forms, rel 1e-9) and "
           "20-deep globalize/localize round-trips")


def test_unit_conversion():
    """The published conversion example is exact; forward-then-inverse is
    identity within rel 1e-6 across the rule's range."""
    rule = UnitRule("temperature", "double", "float", 1.8, 32.0)
    out = convert_env({"temperature": PropValue.of_double(100.0)}, [rule])
    assert out["temperature"].value == 212.0
    out = convert_env({"temperature": PropValue.of_double(0.0)}, [rule])
    assert out["temperature"].value == 32.0
    rng = random.Random(5)
    for _ in range(500):
        celsius = rng.uniform(-80.0, 400.0)
        fwd = convert_env({"temperature": PropValue.of_double(celsius)}, [rule])
        back = convert_env(fwd, [rule], "inverse")
        assert back["temperature"].value == pytest.approx(celsius, rel=1e-6, abs=1e-4)
    report("unit conversion (100C -> 212F and 0C -> 32F exact, inverse within 1e-6)")


def test_protocol_suite(configs):
    """Codec bijection over 10^4 randomized messages; non-retroactive runs
    leave state byte-identical; negative tests return the documented codes."""
    rng = random.Random(31337)
    for _ in range(10_000):
        msg = random_message(rng)
        data = encode_frame(msg)
        back, consumed = decode_frame(data)
        assert consumed == len(data)
        assert messages_equal(msg, back)
        assert encode_frame(back) == data

    with TargetServer(toy.status_handler, protocol.NON_RETROACTIVE) as srv:
        spec = protocol.ServerSpec("127.0.0.1", srv.port, protocol.NON_RETROACTIVE)
        networked = client_run([spec], toy.GrowthModel(11), 4, toy.default_env)
        offline = client_run([], toy.GrowthModel(11), 4, toy.default_env)
        assert serialize_xeg(networked.final_graph) == serialize_xeg(offline.final_graph)

        with pytest.raises(ModeRejected):
            client_run([protocol.ServerSpec("127.0.0.1", srv.port,
                                            protocol.RETROACTIVE)],
                       toy.GrowthModel(0), 1)

    # out-of-order step, driven at socket level
    with TargetServer(toy.status_handler, protocol.NON_RETROACTIVE) as srv:
        sock = socket.create_connection(("127.0.0.1", srv.port), timeout=5)
        sock.settimeout(5)
        protocol.send_frame(sock, protocol.hello(protocol.NON_RETROACTIVE))
        assert protocol.read_frame(sock).kind == "hello_ok"
        g = toy.growth_export(toy.grow(0, 1))
        protocol.send_frame(sock, protocol.step(3, {}, g))
        reply = protocol.read_frame(sock)
        assert reply.kind == "error" and reply.code == "OutOfOrderStep"
        sock.close()
    report("protocol suite (10^4-message codec bijection, offline byte-identity, "
           "negative paths)")
