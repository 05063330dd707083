"""Geometry semantics: placement transforms and graphic-type translation.

Conventions (locked by the kernel tests): right-handed coordinates,
column-vector points, row-major 16-tuple matrices, angles in degrees at
API boundaries.  ``compose_transforms([a, b])`` applies ``a`` first, i.e.
returns the matrix product b.a.

Graphic types are exchanged as signatures: a type name plus an ordered
list of named argument values.  A dictionary maps a source type to one or
more target signatures through a named, built-in argument-computation
rule; rules are fixed code, the dictionary file only selects them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable
import xml.etree.ElementTree as ET

from fspm_bridge import mat4
from fspm_bridge.errors import (
    BadArgs,
    ConfigError,
    GeometryError,
    NoEntry,
    NonAffine,
    SingularParentTransform,
    UnsupportedType,
    WrongMode,
    ZeroAxis,
)
from fspm_bridge.graph import GLOBAL, IDENTITY16, LOCAL, ExchangeGraph, GraphNode
from fspm_bridge.values import DOUBLE, DOUBLELIST, VEC3, PropValue


# -- transform chains ----------------------------------------------------------


@dataclass(frozen=True)
class Translate:
    v: tuple[float, float, float]


@dataclass(frozen=True)
class Rotate:
    axis: tuple[float, float, float]
    angle_deg: float


@dataclass(frozen=True)
class Scale:
    v: tuple[float, float, float]


@dataclass(frozen=True)
class RawMatrix:
    m: tuple


TransformStep = Translate | Rotate | Scale | RawMatrix


def step_matrix(step: TransformStep) -> tuple:
    if isinstance(step, Translate):
        return mat4.translation(*step.v)
    if isinstance(step, Scale):
        return mat4.scaling(*step.v)
    if isinstance(step, Rotate):
        try:
            return mat4.rotation(*step.axis, step.angle_deg)
        except ValueError as exc:
            raise ZeroAxis(str(exc)) from exc
    if isinstance(step, RawMatrix):
        if len(step.m) != 16:
            raise NonAffine("raw matrix needs 16 entries")
        if not mat4.is_affine(step.m):
            raise NonAffine("raw matrix bottom row must be 0 0 0 1")
        return tuple(float(x) for x in step.m)
    raise GeometryError(f"unknown transform step {step!r}")


def compose_transforms(chain) -> tuple:
    """Product of the chain applied in order: the first element acts on
    local coordinates first (result = m_n . ... . m_1 for column vectors)."""
    return mat4.compose([step_matrix(s) for s in chain])


# -- local <-> global placement over the graph ----------------------------------


def _frame_parent(graph: ExchangeGraph, node_id: int) -> int | None:
    """The node whose placement defines this node's frame.

    Source of the first incoming successor/branch edge when there is one;
    a node entered only by decomposition edges sits in the frame of its
    composite; the root (no incoming edges) sits in the world frame.
    """
    incoming = graph.in_edges(node_id)
    if not incoming:
        return None
    return incoming[0].src  # in_edges sorts successor < branch < decomposition


def _parent_order(graph: ExchangeGraph) -> list[int]:
    """Node ids ordered so every node appears after its frame parent."""
    order: list[int] = []
    state: dict[int, int] = {}  # 0 in progress, 1 done
    for start in graph.nodes:
        chain = []
        node_id: int | None = start
        while node_id is not None and node_id not in state:
            state[node_id] = 0
            chain.append(node_id)
            node_id = _frame_parent(graph, node_id)
        if node_id is not None and state[node_id] == 0:
            raise GeometryError(f"cyclic topology around node {node_id}; cannot "
                                "resolve placement frames")
        for n in reversed(chain):
            state[n] = 1
            order.append(n)
    return order


def globalize(graph: ExchangeGraph) -> ExchangeGraph:
    """Rewrite local placements as global ones in one traversal.

    global(n) = global(frame_parent(n)) . local(n); a missing local
    transform counts as identity.  The result is in global mode with
    local transforms cleared.
    """
    if graph.transform_mode != LOCAL:
        raise WrongMode("globalize expects a graph in local transform mode")
    graph.require_valid()
    globals_: dict[int, tuple] = {}
    for node_id in _parent_order(graph):
        node = graph.nodes[node_id]
        local = node.local_transform if node.local_transform is not None else IDENTITY16
        parent = _frame_parent(graph, node_id)
        globals_[node_id] = local if parent is None else mat4.multiply(globals_[parent], local)
    nodes = [
        GraphNode(n.id, n.name, n.type_name, n.scale, n.properties,
                  None, globals_[n.id])
        for n in graph.nodes.values()
    ]
    return ExchangeGraph(graph.root, nodes, graph.edges, GLOBAL)


def localize(graph: ExchangeGraph) -> ExchangeGraph:
    """Exact inverse of globalize: local(n) = global(frame_parent)^-1 . global(n)."""
    if graph.transform_mode != GLOBAL:
        raise WrongMode("localize expects a graph in global transform mode")
    graph.require_valid()
    locals_: dict[int, tuple] = {}
    for node_id in _parent_order(graph):
        node = graph.nodes[node_id]
        g = node.global_transform if node.global_transform is not None else IDENTITY16
        parent = _frame_parent(graph, node_id)
        if parent is None:
            locals_[node_id] = g
            continue
        parent_node = graph.nodes[parent]
        pg = (parent_node.global_transform
              if parent_node.global_transform is not None else IDENTITY16)
        try:
            inv = mat4.invert_affine(pg)
        except ValueError as exc:
            raise SingularParentTransform(
                f"node {parent}: global transform is singular") from exc
        locals_[node_id] = mat4.multiply(inv, g)
    nodes = [
        GraphNode(n.id, n.name, n.type_name, n.scale, n.properties,
                  locals_[n.id], None)
        for n in graph.nodes.values()
    ]
    return ExchangeGraph(graph.root, nodes, graph.edges, LOCAL)


# -- type signatures -------------------------------------------------------------


@dataclass(frozen=True)
class GeometrySignature:
    """A graphic type name with ordered, named argument values."""

    type_name: str
    args: tuple  # of (name, PropValue)

    def arg(self, name: str) -> PropValue:
        for key, value in self.args:
            if key == name:
                return value
        raise BadArgs(f"{self.type_name}: missing argument {name!r}")


def signature(type_name: str, *args: tuple[str, PropValue]) -> GeometrySignature:
    return GeometrySignature(type_name, tuple(args))


# -- translation rules ------------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    """Argument-computation procedure with its expected input layout."""

    name: str
    arg_spec: tuple  # of (name, kind)
    apply: Callable[..., list[GeometrySignature]]


def _extract(sig: GeometrySignature, rule: Rule) -> list:
    values = []
    for name, kind in rule.arg_spec:
        pv = sig.arg(name)
        if pv.kind != kind:
            raise BadArgs(f"{sig.type_name}: argument {name!r} must be {kind}, "
                          f"got {pv.kind}")
        values.append(pv.value)
    return values


def _vadd(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def _vsub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _vcross(a, b):
    return (a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0])


def _vnorm(a) -> float:
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def _triangle_set(vertices, triangles) -> GeometrySignature:
    flat_v = [x for p in vertices for x in p]
    flat_i = [float(i) for tri in triangles for i in tri]
    return signature("TriangleSet",
                     ("vertices", PropValue.of_doublelist(flat_v)),
                     ("indices", PropValue.of_doublelist(flat_i)))


def _parallelogram_corners(origin, u, v):
    return [origin, _vadd(origin, u), _vadd(_vadd(origin, u), v), _vadd(origin, v)]


def _rule_parallelogram_tri2(origin, u, v):
    corners = _parallelogram_corners(origin, u, v)
    return [_triangle_set(corners, [(0, 1, 2), (0, 2, 3)])]


def _rule_parallelogram_tri4(origin, u, v):
    corners = _parallelogram_corners(origin, u, v)
    centroid = tuple(sum(p[i] for p in corners) / 4.0 for i in range(3))
    return [_triangle_set(corners + [centroid],
                          [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)])]


def _rule_cylinder_rename(radius, length):
    return [signature("Cylinder",
                      ("radius", PropValue.of_double(radius)),
                      ("height", PropValue.of_double(length)))]


# Synthetic leaf blade: flat 4x4 control grid in the xy plane, length along
# x in [0, 1], width along y, scaled by the two leaf scale factors.
_LEAF_PROFILE = (0.2, 1.0, 1.0, 0.3)


def _leaf_ctrl(sx: float, sy: float) -> list[float]:
    flat = []
    for i in range(4):
        for j in range(4):
            x = (i / 3.0) * sx
            y = (j / 3.0 - 0.5) * _LEAF_PROFILE[i] * sy
            flat.extend((x, y, 0.0))
    return flat


def _rule_leafpatch_ctrl(sx, sy):
    return [signature("BezierPatch",
                      ("ctrl", PropValue.of_doublelist(_leaf_ctrl(sx, sy))))]


def _rule_bezierpatch_passthrough(ctrl):
    if len(ctrl) != 48:
        raise BadArgs(f"BezierPatch control grid must hold 16 points, got "
                      f"{len(ctrl)} values")
    return [signature("BezierPatch", ("ctrl", PropValue.of_doublelist(ctrl)))]


def _bezier_point(ctrl, u: float, v: float):
    def bernstein(t):
        mt = 1.0 - t
        return (mt * mt * mt, 3 * t * mt * mt, 3 * t * t * mt, t * t * t)

    bu = bernstein(u)
    bv = bernstein(v)
    p = [0.0, 0.0, 0.0]
    for i in range(4):
        for j in range(4):
            w = bu[i] * bv[j]
            base = 3 * (4 * i + j)
            p[0] += w * ctrl[base]
            p[1] += w * ctrl[base + 1]
            p[2] += w * ctrl[base + 2]
    return tuple(p)


_TESS_CELLS = 8  # fixed tessellation density for patch -> mesh translation


def _rule_bezierpatch_tri(ctrl):
    if len(ctrl) != 48:
        raise BadArgs(f"BezierPatch control grid must hold 16 points, got "
                      f"{len(ctrl)} values")
    n = _TESS_CELLS
    vertices = [_bezier_point(ctrl, i / n, j / n)
                for i in range(n + 1) for j in range(n + 1)]
    triangles = []
    for i in range(n):
        for j in range(n):
            a = i * (n + 1) + j
            b = a + 1
            c = a + (n + 1)
            d = c + 1
            triangles.append((a, b, d))
            triangles.append((a, d, c))
    return [_triangle_set(vertices, triangles)]


RULES: dict[str, Rule] = {
    "parallelogram_tri2": Rule("parallelogram_tri2",
                               (("origin", VEC3), ("u", VEC3), ("v", VEC3)),
                               _rule_parallelogram_tri2),
    "parallelogram_tri4": Rule("parallelogram_tri4",
                               (("origin", VEC3), ("u", VEC3), ("v", VEC3)),
                               _rule_parallelogram_tri4),
    "cylinder_rename": Rule("cylinder_rename",
                            (("radius", DOUBLE), ("length", DOUBLE)),
                            _rule_cylinder_rename),
    "leafpatch_ctrl": Rule("leafpatch_ctrl",
                           (("sx", DOUBLE), ("sy", DOUBLE)),
                           _rule_leafpatch_ctrl),
    "bezierpatch_passthrough": Rule("bezierpatch_passthrough",
                                    (("ctrl", DOUBLELIST),),
                                    _rule_bezierpatch_passthrough),
    "bezierpatch_tri": Rule("bezierpatch_tri",
                            (("ctrl", DOUBLELIST),),
                            _rule_bezierpatch_tri),
}


# -- the dictionary ---------------------------------------------------------------


@dataclass(frozen=True)
class DictionaryEntry:
    source_type: str
    form_id: str
    target_type: str
    rule: Rule


class Dictionary:
    """Translation table between two graphics vocabularies."""

    def __init__(self, entries, default_form: dict[str, str] | None = None):
        self.entries: dict[tuple[str, str], DictionaryEntry] = {}
        for entry in entries:
            key = (entry.source_type, entry.form_id)
            if key in self.entries:
                raise ConfigError(f"duplicate dictionary entry {key}")
            self.entries[key] = entry
        self.default_form = dict(default_form or {})
        for source, form in self.default_form.items():
            if (source, form) not in self.entries:
                raise ConfigError(f"default form {form!r} for {source!r} has no entry")

    def lookup(self, source_type: str, form: str | None = None) -> DictionaryEntry:
        if form is None:
            form = self.default_form.get(source_type)
            if form is None:
                raise NoEntry(f"no default translation form for type {source_type!r}")
        entry = self.entries.get((source_type, form))
        if entry is None:
            raise NoEntry(f"no dictionary entry for type {source_type!r} "
                          f"form {form!r}")
        return entry

    def covers(self, source_type: str) -> bool:
        return any(s == source_type for s, _ in self.entries)


def translate_signature(sig: GeometrySignature, dictionary: Dictionary,
                        form: str | None = None) -> list[GeometrySignature]:
    """Translate one source signature into >= 1 target signatures."""
    entry = dictionary.lookup(sig.type_name, form)
    out = entry.rule.apply(*_extract(sig, entry.rule))
    for target in out:
        if target.type_name != entry.target_type:
            raise ConfigError(f"rule {entry.rule.name!r} produced {target.type_name!r}, "
                              f"entry promises {entry.target_type!r}")
    return out


def parse_dictionary(text: str) -> Dictionary:
    """Load a dictionary file:

    <dictionary>
      <entry source="Parallelogram" form="tri2" target="TriangleSet"
             rule="parallelogram_tri2" default="true"/>
    </dictionary>
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ConfigError(f"malformed dictionary file: {exc}") from exc
    if root.tag != "dictionary":
        raise ConfigError(f"expected <dictionary>, got <{root.tag}>")
    entries = []
    defaults: dict[str, str] = {}
    for child in root:
        if child.tag != "entry":
            raise ConfigError(f"unknown element <{child.tag}> in dictionary")
        source = child.get("source")
        form = child.get("form")
        target = child.get("target")
        rule_name = child.get("rule")
        if not (source and form and target and rule_name):
            raise ConfigError("dictionary entry needs source, form, target and rule")
        rule = RULES.get(rule_name)
        if rule is None:
            raise ConfigError(f"unknown argument rule {rule_name!r}")
        entries.append(DictionaryEntry(source, form, target, rule))
        if child.get("default") == "true":
            if source in defaults:
                raise ConfigError(f"two default forms for type {source!r}")
            defaults[source] = form
    return Dictionary(entries, defaults)


# -- node-level signature plumbing (used by the pipeline's geometry stage) ---------


def signature_from_node(node: GraphNode, rule: Rule) -> GeometrySignature:
    """Pull the rule's declared arguments out of a node's property map."""
    args = []
    for name, kind in rule.arg_spec:
        pv = node.prop(name)
        if pv is None:
            raise BadArgs(f"node {node.id} ({node.type_name}): missing geometry "
                          f"argument {name!r}")
        if pv.kind != kind:
            raise BadArgs(f"node {node.id}: geometry argument {name!r} must be "
                          f"{kind}, got {pv.kind}")
        args.append((name, pv))
    return GeometrySignature(node.type_name, tuple(args))


def apply_signature_to_node(node: GraphNode, consumed: GeometrySignature,
                            produced: GeometrySignature) -> GraphNode:
    """Swap a node's graphic type: consumed args out, produced args in."""
    taken = {name for name, _ in consumed.args}
    properties = {k: v for k, v in node.properties.items() if k not in taken}
    for name, pv in produced.args:
        properties[name] = pv
    return GraphNode(node.id, node.name, produced.type_name, node.scale,
                     properties, node.local_transform, node.global_transform)


# -- areas (verification oracle for translations) -----------------------------------


def surface_area(sig: GeometrySignature) -> float:
    """Surface area of a recognized signature.

    Cylinder reports the lateral area; BezierPatch is approximated by the
    bilinear quad mesh over its control grid.
    """
    if sig.type_name == "Parallelogram":
        u = sig.arg("u").value
        v = sig.arg("v").value
        return _vnorm(_vcross(u, v))
    if sig.type_name == "TriangleSet":
        flat = sig.arg("vertices").value
        idx = sig.arg("indices").value
        pts = [tuple(flat[3 * i: 3 * i + 3]) for i in range(len(flat) // 3)]
        total = 0.0
        for t in range(len(idx) // 3):
            a, b, c = (pts[int(idx[3 * t + k])] for k in range(3))
            total += 0.5 * _vnorm(_vcross(_vsub(b, a), _vsub(c, a)))
        return total
    if sig.type_name == "Cylinder":
        radius = sig.arg("radius").value
        try:
            length = sig.arg("height").value
        except BadArgs:
            length = sig.arg("length").value
        return 2.0 * math.pi * radius * length
    if sig.type_name == "BezierPatch":
        ctrl = sig.arg("ctrl").value
        if len(ctrl) != 48:
            raise BadArgs("BezierPatch control grid must hold 16 points")
        pts = [tuple(ctrl[3 * k: 3 * k + 3]) for k in range(16)]
        total = 0.0
        for i in range(3):
            for j in range(3):
                a = pts[4 * i + j]
                b = pts[4 * i + j + 1]
                c = pts[4 * (i + 1) + j]
                d = pts[4 * (i + 1) + j + 1]
                total += 0.5 * _vnorm(_vcross(_vsub(b, a), _vsub(d, a)))
                total += 0.5 * _vnorm(_vcross(_vsub(d, a), _vsub(c, a)))
        return total
    raise UnsupportedType(f"no area formula for type {sig.type_name!r}")
