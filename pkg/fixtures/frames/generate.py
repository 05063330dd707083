"""Regenerate the golden frame fixtures.

The .bin files are the interop contract between the two protocol
implementations; both test suites decode them and re-encode byte-for-byte.
Float values stay non-special and inside [1e-4, 1e16) where the two
languages' shortest-decimal printers agree.

Run from the repository root: python fixtures/frames/generate.py
"""

import json
from pathlib import Path

from fspm_bridge import protocol
from fspm_bridge.geometry import Rotate, Translate, compose_transforms
from fspm_bridge.graph import EdgeType, ExchangeGraph, GraphEdge, GraphNode
from fspm_bridge.values import PropValue

HERE = Path(__file__).parent


def sample_graph() -> ExchangeGraph:
    root = GraphNode(1, "plant", "Plant", 0)
    metamer = GraphNode(
        2, "metamer0", "Metamer", 1,
        {
            "age": PropValue.of_int(7),
            "internode_length": PropValue.of_double(0.1875),
            "alive": PropValue.of_bool(True),
            "color": PropValue.of_string('brown & "dusty" <ok>'),
            "tip": PropValue.of_vec3((0.5, -1.25, 2.5)),
            "pose": PropValue.of_matrix4(compose_transforms(
                [Rotate((0.0, 0.0, 1.0), 30.0), Translate((0.25, 0.0, 1.5))])),
            "samples": PropValue.of_doublelist((0.125, 0.375, 100.0)),
        },
        local_transform=compose_transforms([Translate((0.0, 0.0, 0.1875))]),
    )
    return ExchangeGraph(1, [root, metamer],
                         [GraphEdge(1, 2, EdgeType.SUCCESSOR)])


def update_graph() -> ExchangeGraph:
    root = GraphNode(1, "plant", "Plant", 0)
    part = GraphNode(2, "internode", "Cylinder", 1,
                     {"color": PropValue.of_string("green"),
                      "pressure": PropValue.of_double(87.5)})
    return ExchangeGraph(1, [root, part],
                         [GraphEdge(1, 2, EdgeType.BRANCH)])


MESSAGES = {
    "hello.bin": protocol.hello("retroactive"),
    "hello_ok.bin": protocol.hello_ok(),
    "step.bin": protocol.step(
        3,
        {
            "temperature": PropValue.of_double(21.5),
            "pressure": PropValue.of_float(101.25),
            "count": PropValue.of_int(7),
            "wet": PropValue.of_bool(True),
            "label": PropValue.of_string('a<b>&"\tc'),
        },
        sample_graph()),
    "step_ok.bin": protocol.step_ok("ok: 5 nodes, 4 edges, step env 212"),
    "step_update.bin": protocol.step_update(update_graph()),
    "error.bin": protocol.error("OutOfOrderStep", "expected step 2, got 5"),
    "bye.bin": protocol.bye(),
}


def main():
    manifest = {}
    for name, msg in MESSAGES.items():
        data = protocol.encode_frame(msg)
        (HERE / name).write_bytes(data)
        entry = {"kind": msg.kind, "payload_bytes": len(data) - 4}
        if msg.mode:
            entry["mode"] = msg.mode
        if msg.index is not None:
            entry["index"] = msg.index
        if msg.status is not None:
            entry["status"] = msg.status
        if msg.code is not None:
            entry["code"] = msg.code
            entry["detail"] = msg.detail
        if msg.env:
            entry["env"] = {k: {"type": v.kind, "value": protocol.format_value(v)}
                            for k, v in sorted(msg.env.items())}
        if msg.graph is not None:
            entry["graph_nodes"] = msg.graph.node_count
            entry["graph_edges"] = msg.graph.edge_count
        manifest[name] = entry
    (HERE / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(MESSAGES)} fixtures + manifest.json to {HERE}")


if __name__ == "__main__":
    main()
