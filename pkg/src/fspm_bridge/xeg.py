"""Parser and serializer for the XML-based physical exchange graph (XEG).

Schema (version 1.0):

    <graph root="1" version="1.0">
      <node id="1" name="stem" type="Cylinder" scale="0">
        <property name="radius" type="double" value="0.05"/>
        <transform kind="local" value="m00 m01 ... m33"/>
      </node>
      <edge src_id="1" dst_id="2" type="successor"/>
    </graph>

Property types: int, double, bool, string, vec3, matrix4, doublelist.
Transform values are 16 whitespace-separated numbers, row-major.  Matrices
act on column vectors.  Encoding is UTF-8 without BOM, '.' decimal point.

Canonical form, produced by serialize_xeg: nodes in depth-first canonical
traversal order with ids renumbered 1..n in that order, then edges sorted
by (source id, edge class, target id); properties sorted by name; floats
as shortest round-trippable decimals; 2-space indentation, LF endings, one
trailing newline.  Only the transform kind matching the graph's transform
mode is emitted, so the mode is recoverable from the document: a document
with local transforms (or none) parses as a local-mode graph, one with
global transforms as global-mode; mixing kinds is a schema error.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from fspm_bridge.errors import FormatError, SchemaError, SemanticError, XegSyntaxError
from fspm_bridge.graph import (
    GLOBAL,
    LOCAL,
    EdgeType,
    ExchangeGraph,
    GraphEdge,
    GraphNode,
    edge_rank,
)
from fspm_bridge.values import GRAPH_KINDS, PropValue, format_number, format_value, parse_value

XEG_VERSION = "1.0"

_GRAPH_ATTRS = {"root", "version"}
_NODE_ATTRS = {"id", "name", "type", "scale"}
_PROPERTY_ATTRS = {"name", "type", "value"}
_TRANSFORM_ATTRS = {"kind", "value"}
_EDGE_ATTRS = {"src_id", "dst_id", "type"}

# XML 1.0 cannot carry most C0 control characters, even escaped.
_XML_OK = {0x09, 0x0A, 0x0D}


def _escape(s: str) -> str:
    s = (s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
         .replace('"', "&quot;"))
    return s.replace("\t", "&#9;").replace("\n", "&#10;").replace("\r", "&#13;")


def attr_text(s: str, where: str) -> str:
    for ch in s:
        cp = ord(ch)
        if cp < 0x20 and cp not in _XML_OK:
            raise FormatError(f"{where}: control character U+{cp:04X} cannot be "
                              "represented in an XML document")
    return _escape(s)


# -- serialization -------------------------------------------------------------


def serialize_xeg(graph: ExchangeGraph) -> str:
    """Canonical XEG text for a valid graph (see module docstring)."""
    return "\n".join(xeg_lines(graph)) + "\n"


def xeg_lines(graph: ExchangeGraph, indent: int = 0) -> list[str]:
    """Canonical document as a list of lines, for file output or embedding."""
    graph.require_valid()
    for e in graph.edges:
        if e.etype not in EdgeType.ALL:
            raise FormatError(f"edge {e.src}->{e.dst}: foreign edge type {e.etype!r} "
                              "cannot be serialized; map edge types first")
    order = graph.canonical_order()
    new_id = {old: i + 1 for i, old in enumerate(order)}
    pad = "  " * indent
    lines = [f'{pad}<graph root="{new_id[graph.root]}" version="{XEG_VERSION}">']
    for old in order:
        lines.extend(_node_lines(graph, graph.nodes[old], new_id[old], pad))
    for e in sorted(graph.edges, key=lambda e: (new_id[e.src], edge_rank(e.etype), new_id[e.dst])):
        lines.append(f'{pad}  <edge src_id="{new_id[e.src]}" dst_id="{new_id[e.dst]}" '
                     f'type="{e.etype}"/>')
    lines.append(f"{pad}</graph>")
    return lines


def _node_lines(graph: ExchangeGraph, node: GraphNode, node_id: int, pad: str) -> list[str]:
    where = f"node {node.id}"
    head = (f'{pad}  <node id="{node_id}" name="{attr_text(node.name, where)}" '
            f'type="{attr_text(node.type_name, where)}" scale="{node.scale}"')
    transform = (node.local_transform if graph.transform_mode == LOCAL
                 else node.global_transform)
    if not node.properties and transform is None:
        return [head + "/>"]
    lines = [head + ">"]
    for name in sorted(node.properties):
        pv = node.properties[name]
        if pv.kind not in GRAPH_KINDS:
            raise FormatError(f"{where}: property {name!r} has kind {pv.kind!r}, "
                              "which is not a graph property type")
        lines.append(f'{pad}    <property name="{attr_text(name, where)}" '
                     f'type="{pv.kind}" value="{attr_text(format_value(pv), where)}"/>')
    if transform is not None:
        value = " ".join(format_number(x) for x in transform)
        lines.append(f'{pad}    <transform kind="{graph.transform_mode}" value="{value}"/>')
    lines.append(f"{pad}  </node>")
    return lines


# -- parsing -------------------------------------------------------------------


def parse_xeg(text: str, lenient: bool = False,
              warnings: list[str] | None = None) -> ExchangeGraph:
    """Parse an XEG document into a validated graph.

    Strict mode (default) rejects unknown elements and attributes with
    SchemaError; lenient mode records them in ``warnings`` and continues.
    A document whose graph breaks a model invariant raises SemanticError
    listing every violation.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise XegSyntaxError(f"malformed XML at line {exc.position[0]}, "
                             f"column {exc.position[1]}: {exc.msg}",
                             exc.position) from exc
    return graph_from_element(root, lenient=lenient, warnings=warnings)


def graph_from_element(root: ET.Element, lenient: bool = False,
                       warnings: list[str] | None = None) -> ExchangeGraph:
    sink = warnings if warnings is not None else []
    if root.tag != "graph":
        raise SchemaError(f"document element must be <graph>, got <{root.tag}>")
    _check_attrs(root, _GRAPH_ATTRS, "graph", lenient, sink)
    version = _require(root, "version", "graph")
    if version != XEG_VERSION:
        _problem(f"unsupported version {version!r} (expected {XEG_VERSION!r})",
                 lenient, sink)
    root_id = _parse_int(_require(root, "root", "graph"), "graph root attribute")

    nodes: list[GraphNode] = []
    seen_ids: set[int] = set()
    edges: list[GraphEdge] = []
    modes: set[str] = set()
    for child in root:
        if child.tag == "node":
            node = _parse_node(child, lenient, sink, modes)
            if node.id in seen_ids:
                raise SchemaError(f"duplicate node id {node.id}")
            seen_ids.add(node.id)
            nodes.append(node)
        elif child.tag == "edge":
            edges.append(_parse_edge(child, lenient, sink))
        else:
            _problem(f"unknown element <{child.tag}> in <graph>", lenient, sink)
        _reject_text(child)
    _reject_text(root)

    for e in edges:
        for endpoint in (e.src, e.dst):
            if endpoint not in seen_ids:
                raise SchemaError(f"edge {e.src}->{e.dst} references unknown node "
                                  f"id {endpoint}")
    if root_id not in seen_ids:
        raise SchemaError(f"graph root attribute references unknown node id {root_id}")

    mode = GLOBAL if GLOBAL in modes else LOCAL
    graph = ExchangeGraph(root_id, nodes, edges, mode, strict=False)
    report = graph.validate()
    if report:
        raise SemanticError("graph violates model invariants: "
                            + "; ".join(str(v) for v in report))
    return graph


def _parse_node(elem: ET.Element, lenient: bool, sink: list[str],
                modes: set[str]) -> GraphNode:
    _check_attrs(elem, _NODE_ATTRS, "node", lenient, sink)
    node_id = _parse_int(_require(elem, "id", "node"), "node id")
    where = f"node {node_id}"
    name = _require(elem, "name", where)
    type_name = _require(elem, "type", where)
    scale = _parse_int(_require(elem, "scale", where), f"{where} scale")
    if node_id <= 0:
        raise SchemaError(f"{where}: id must be positive")
    if scale < 0:
        raise SchemaError(f"{where}: scale must be >= 0")

    properties: dict[str, PropValue] = {}
    local_t = global_t = None
    for child in elem:
        if child.tag == "property":
            _check_attrs(child, _PROPERTY_ATTRS, f"{where} property", lenient, sink)
            pname = _require(child, "name", f"{where} property")
            ptype = _require(child, "type", f"{where} property {pname!r}")
            pvalue = _require(child, "value", f"{where} property {pname!r}")
            if ptype not in GRAPH_KINDS:
                raise SchemaError(f"{where}: property {pname!r} has unknown type "
                                  f"{ptype!r}")
            if pname in properties:
                raise SchemaError(f"{where}: duplicate property {pname!r}")
            try:
                properties[pname] = parse_value(ptype, pvalue)
            except ValueError as exc:
                raise SchemaError(f"{where}: property {pname!r}: {exc}") from exc
        elif child.tag == "transform":
            _check_attrs(child, _TRANSFORM_ATTRS, f"{where} transform", lenient, sink)
            kind = _require(child, "kind", f"{where} transform")
            if kind not in (LOCAL, GLOBAL):
                raise SchemaError(f"{where}: transform kind must be local or global, "
                                  f"got {kind!r}")
            modes.add(kind)
            if len(modes) > 1:
                raise SchemaError("document mixes local and global transforms")
            try:
                matrix = PropValue.of_matrix4(_require(child, "value", f"{where} transform").split())
            except ValueError as exc:
                raise SchemaError(f"{where}: transform: {exc}") from exc
            if kind == LOCAL:
                if local_t is not None:
                    raise SchemaError(f"{where}: duplicate local transform")
                local_t = matrix.value
            else:
                if global_t is not None:
                    raise SchemaError(f"{where}: duplicate global transform")
                global_t = matrix.value
        else:
            _problem(f"unknown element <{child.tag}> in {where}", lenient, sink)
        _reject_text(child)
    return GraphNode(node_id, name, type_name, scale, properties, local_t, global_t)


def _parse_edge(elem: ET.Element, lenient: bool, sink: list[str]) -> GraphEdge:
    _check_attrs(elem, _EDGE_ATTRS, "edge", lenient, sink)
    src = _parse_int(_require(elem, "src_id", "edge"), "edge src_id")
    dst = _parse_int(_require(elem, "dst_id", "edge"), "edge dst_id")
    etype = _require(elem, "type", f"edge {src}->{dst}")
    if etype not in EdgeType.ALL:
        _problem(f"edge {src}->{dst}: unknown edge type {etype!r}", lenient, sink)
    return GraphEdge(src, dst, etype)


def _check_attrs(elem: ET.Element, allowed: set[str], where: str,
                 lenient: bool, sink: list[str]) -> None:
    for attr in elem.attrib:
        if attr not in allowed:
            _problem(f"unknown attribute {attr!r} on <{elem.tag}> ({where})",
                     lenient, sink)


def _require(elem: ET.Element, attr: str, where: str) -> str:
    value = elem.get(attr)
    if value is None:
        raise SchemaError(f"{where}: missing required attribute {attr!r}")
    return value


def _parse_int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise SchemaError(f"{where}: not an integer: {text!r}") from exc


def _problem(message: str, lenient: bool, sink: list[str]) -> None:
    if lenient:
        sink.append(message)
    else:
        raise SchemaError(message)


def _reject_text(elem: ET.Element) -> None:
    for text in (elem.text, elem.tail):
        if text is not None and text.strip():
            raise SchemaError(f"unexpected text content {text.strip()!r} near <{elem.tag}>")
