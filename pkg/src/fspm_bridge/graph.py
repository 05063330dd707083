"""The mediating data model: a single-rooted multiscale property graph.

Nodes carry typed properties, an integer scale (0 = coarsest, larger =
finer) and optionally a local or global placement matrix; edges carry one
of three canonical type tags:

    successor      same-axis continuation (at most one per node)
    branch         lateral axis
    decomposition  link to a finer-scale part; scale(dst) = scale(src) + 1

Foreign edge vocabularies (for example "refinement") may ride on edges as
plain strings while a payload is in transit through the pipeline; only the
three canonical tags are part of the mediating model itself.

Graph values are treated as immutable after construction: the update
operations return new graphs that share unchanged node records.  Two
sibling orders exist and serve different purposes:

* ``children()`` lists a node's children successor-first, then branch,
  then decomposition, ascending node id within each class.  This is the
  per-graph deterministic order every traversal and diff uses.
* Comparison and serialization order siblings by content: first a
  structural hash that ignores float values (so rounding noise cannot
  reorder anything), then a bit-exact content hash, then the id.  Two
  graphs that differ only in node numbering therefore line up, and ids
  only break ties between fully identical siblings, where the choice
  cannot be observed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

from fspm_bridge.errors import (
    DuplicateId,
    GraphError,
    InvalidGraph,
    ScaleViolation,
    SelfLoop,
    UnknownEndpoint,
    UnknownNode,
)
from fspm_bridge.values import PropValue, format_value, values_close, floats_close

LOCAL = "local"
GLOBAL = "global"

IDENTITY16 = (
    1.0, 0.0, 0.0, 0.0,
    0.0, 1.0, 0.0, 0.0,
    0.0, 0.0, 1.0, 0.0,
    0.0, 0.0, 0.0, 1.0,
)


class EdgeType:
    """Canonical edge-type tags of the mediating model."""

    SUCCESSOR = "successor"
    BRANCH = "branch"
    DECOMPOSITION = "decomposition"

    ALL = (SUCCESSOR, BRANCH, DECOMPOSITION)


_EDGE_RANK = {
    EdgeType.SUCCESSOR: 0,
    EdgeType.BRANCH: 1,
    EdgeType.DECOMPOSITION: 2,
}


def edge_rank(etype: str) -> tuple[int, str]:
    """Sort class of an edge tag; foreign tags order after canonical ones."""
    return (_EDGE_RANK.get(etype, 3), etype if etype not in _EDGE_RANK else "")


@dataclass(frozen=True)
class GraphNode:
    id: int
    name: str
    type_name: str
    scale: int
    properties: dict[str, PropValue] = field(default_factory=dict)
    local_transform: tuple | None = None
    global_transform: tuple | None = None

    def __post_init__(self):
        if not isinstance(self.id, int) or self.id <= 0:
            raise GraphError(f"node id must be a positive integer, got {self.id!r}")
        if self.scale < 0:
            raise GraphError(f"node {self.id}: scale must be >= 0, got {self.scale}")
        for attr, t in (("local_transform", self.local_transform),
                        ("global_transform", self.global_transform)):
            if t is None:
                continue
            if len(t) != 16:
                raise GraphError(f"node {self.id}: {attr} needs 16 entries")
            if not isinstance(t, tuple):
                object.__setattr__(self, attr, tuple(float(x) for x in t))

    def prop(self, name: str) -> PropValue | None:
        return self.properties.get(name)

    def with_properties(self, **named: PropValue) -> "GraphNode":
        merged = dict(self.properties)
        merged.update(named)
        return replace(self, properties=merged)


@dataclass(frozen=True)
class GraphEdge:
    src: int
    dst: int
    etype: str


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind} [{self.subject}]: {self.message}"


class ExchangeGraph:
    """Immutable-after-build graph value.

    ``strict`` construction enforces the add-time contracts (SelfLoop,
    UnknownEndpoint, ScaleViolation).  Non-strict construction stores the
    input as-is so that ``validate`` can report the problems instead; the
    parser uses it to turn file-level invariant breaks into report entries
    rather than crashes.  Duplicate node ids are rejected either way.
    """

    __slots__ = ("root", "nodes", "edges", "transform_mode", "_out", "_in", "_keys")

    def __init__(self, root: int, nodes, edges, transform_mode: str = LOCAL,
                 strict: bool = True):
        if transform_mode not in (LOCAL, GLOBAL):
            raise GraphError(f"transform_mode must be local or global, got {transform_mode!r}")
        node_map: dict[int, GraphNode] = {}
        for n in nodes:
            if n.id in node_map:
                raise DuplicateId(f"node id {n.id} already present")
            node_map[n.id] = n
        edge_list = []
        for e in edges:
            if strict:
                _check_edge(node_map, e)
            edge_list.append(e)
        self.root = root
        self.nodes = node_map
        self.edges = tuple(edge_list)
        self.transform_mode = transform_mode
        out: dict[int, list[GraphEdge]] = {}
        incoming: dict[int, list[GraphEdge]] = {}
        for e in self.edges:
            out.setdefault(e.src, []).append(e)
            incoming.setdefault(e.dst, []).append(e)
        for lst in out.values():
            lst.sort(key=lambda e: (edge_rank(e.etype), e.dst))
        for lst in incoming.values():
            lst.sort(key=lambda e: (edge_rank(e.etype), e.src))
        self._out = out
        self._in = incoming
        self._keys: dict[int, tuple[str, str]] | None = None

    # -- queries ------------------------------------------------------------

    def node(self, node_id: int) -> GraphNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node with id {node_id}") from None

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.nodes

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def out_edges(self, node_id: int) -> list[GraphEdge]:
        self.node(node_id)
        return list(self._out.get(node_id, ()))

    def in_edges(self, node_id: int) -> list[GraphEdge]:
        self.node(node_id)
        return list(self._in.get(node_id, ()))

    def children(self, node_id: int, etype: str | None = None) -> list[int]:
        """Child ids: successor first, then branch, then decomposition;
        ascending id within each class."""
        edges = self.out_edges(node_id)
        if etype is not None:
            edges = [e for e in edges if e.etype == etype]
        return [e.dst for e in edges]

    def effective_transform(self, node_id: int) -> tuple:
        """The authoritative placement of a node; identity when absent."""
        n = self.node(node_id)
        t = n.local_transform if self.transform_mode == LOCAL else n.global_transform
        return IDENTITY16 if t is None else t

    # -- updates (copy-on-write) ---------------------------------------------

    def add_node(self, node: GraphNode) -> "ExchangeGraph":
        if node.id in self.nodes:
            raise DuplicateId(f"node id {node.id} already present")
        return ExchangeGraph(self.root, list(self.nodes.values()) + [node],
                             self.edges, self.transform_mode)

    def add_edge(self, edge: GraphEdge) -> "ExchangeGraph":
        _check_edge(self.nodes, edge)
        return ExchangeGraph(self.root, self.nodes.values(),
                             self.edges + (edge,), self.transform_mode)

    def replace_nodes(self, replacements: dict[int, GraphNode]) -> "ExchangeGraph":
        """New graph with the given nodes swapped in (ids must be unchanged)."""
        for node_id, node in replacements.items():
            if node_id != node.id:
                raise GraphError(f"replacement changes id {node_id} -> {node.id}")
            if node_id not in self.nodes:
                raise UnknownNode(f"no node with id {node_id}")
        merged = dict(self.nodes)
        merged.update(replacements)
        return ExchangeGraph(self.root, merged.values(), self.edges, self.transform_mode)

    def with_transform_mode(self, mode: str) -> "ExchangeGraph":
        return ExchangeGraph(self.root, self.nodes.values(), self.edges, mode)

    # -- validation ----------------------------------------------------------

    def validate(self) -> list[Violation]:
        """Report every broken invariant; an empty report means valid.

        Kinds: root-missing, root-incoming (the graph would have a second
        entry point), dangling-edge, self-loop, scale-violation,
        successor-fanout, unreachable.  An isolated node yields a single
        unreachable entry.  Duplicate ids cannot survive construction and
        are reported at build time instead.
        """
        report: list[Violation] = []
        if self.root not in self.nodes:
            report.append(Violation("root-missing", f"node {self.root}",
                                    "root id is not a node of the graph"))
        elif self._in.get(self.root):
            e = self._in[self.root][0]
            report.append(Violation("root-incoming", f"edge {e.src}->{e.dst}",
                                    "root must not have incoming edges"))
        for e in self.edges:
            where = f"edge {e.src}->{e.dst}"
            if e.src not in self.nodes or e.dst not in self.nodes:
                report.append(Violation("dangling-edge", where,
                                        "edge endpoint is not a node of the graph"))
                continue
            if e.src == e.dst:
                report.append(Violation("self-loop", where, "edge connects a node to itself"))
            if e.etype == EdgeType.DECOMPOSITION:
                s0 = self.nodes[e.src].scale
                s1 = self.nodes[e.dst].scale
                if s1 != s0 + 1:
                    report.append(Violation(
                        "scale-violation", where,
                        f"decomposition must go one scale finer, got {s0} -> {s1}"))
        for node_id in self.nodes:
            succ = [e for e in self._out.get(node_id, ()) if e.etype == EdgeType.SUCCESSOR]
            if len(succ) > 1:
                report.append(Violation("successor-fanout", f"node {node_id}",
                                        f"{len(succ)} successor children, at most 1 allowed"))
        if self.root in self.nodes:
            seen = {self.root}
            stack = [self.root]
            while stack:
                for e in self._out.get(stack.pop(), ()):
                    if e.dst in self.nodes and e.dst not in seen:
                        seen.add(e.dst)
                        stack.append(e.dst)
            for node_id in sorted(self.nodes):
                if node_id not in seen:
                    report.append(Violation("unreachable", f"node {node_id}",
                                            "not reachable from the root"))
        return report

    def require_valid(self) -> "ExchangeGraph":
        report = self.validate()
        if report:
            raise InvalidGraph("; ".join(str(v) for v in report[:5]))
        return self

    # -- canonical order -----------------------------------------------------

    def canonical_key(self, node_id: int) -> tuple[str, str]:
        """(structural hash, full content hash) of the subgraph at a node.

        The structural hash ignores float values, so bit-level float noise
        between two computations of the same graph cannot reorder
        siblings; the content hash breaks the remaining ties bit-exactly.
        """
        if self._keys is None:
            self._keys = _content_keys(self)
        return self._keys[node_id]

    def canonical_out_edges(self, node_id: int) -> list[GraphEdge]:
        """Out-edges ordered by (edge class, child keys, child id)."""
        return sorted(self._out.get(node_id, ()),
                      key=lambda e: (edge_rank(e.etype), self.canonical_key(e.dst), e.dst))

    def canonical_order(self) -> list[int]:
        """Node ids in depth-first pre-order, canonical sibling order,
        first visit only.  Requires a valid graph (everything reachable)."""
        order: list[int] = []
        seen: set[int] = set()
        stack = [self.root]
        while stack:
            node_id = stack.pop()
            if node_id in seen:
                continue
            seen.add(node_id)
            order.append(node_id)
            for e in reversed(self.canonical_out_edges(node_id)):
                if e.dst not in seen:
                    stack.append(e.dst)
        return order


def _check_edge(nodes: dict[int, GraphNode], e: GraphEdge) -> None:
    if e.src == e.dst:
        raise SelfLoop(f"edge {e.src}->{e.dst} connects a node to itself")
    if e.src not in nodes:
        raise UnknownEndpoint(f"edge source {e.src} is not a node of the graph")
    if e.dst not in nodes:
        raise UnknownEndpoint(f"edge target {e.dst} is not a node of the graph")
    if e.etype == EdgeType.DECOMPOSITION:
        s0, s1 = nodes[e.src].scale, nodes[e.dst].scale
        if s1 != s0 + 1:
            raise ScaleViolation(
                f"decomposition edge {e.src}->{e.dst} must go one scale finer, "
                f"got scale {s0} -> {s1}")


class GraphBuilder:
    """Mutable accumulator for bulk construction; checks on build."""

    def __init__(self, transform_mode: str = LOCAL):
        self.transform_mode = transform_mode
        self._nodes: list[GraphNode] = []
        self._ids: set[int] = set()
        self._edges: list[GraphEdge] = []

    def add_node(self, node: GraphNode) -> None:
        if node.id in self._ids:
            raise DuplicateId(f"node id {node.id} already present")
        self._ids.add(node.id)
        self._nodes.append(node)

    def add_edge(self, src: int, dst: int, etype: str) -> None:
        self._edges.append(GraphEdge(src, dst, etype))

    def build(self, root: int, strict: bool = True) -> ExchangeGraph:
        return ExchangeGraph(root, self._nodes, self._edges,
                             self.transform_mode, strict=strict)


# -- operation-style wrappers -------------------------------------------------


def add_node(graph: ExchangeGraph, node: GraphNode) -> ExchangeGraph:
    return graph.add_node(node)


def add_edge(graph: ExchangeGraph, edge: GraphEdge) -> ExchangeGraph:
    return graph.add_edge(edge)


def validate(graph: ExchangeGraph) -> list[Violation]:
    return graph.validate()


def children(graph: ExchangeGraph, node_id: int, etype: str | None = None) -> list[int]:
    return graph.children(node_id, etype)


# -- canonical comparison ------------------------------------------------------


# value kinds whose content is excluded from the structural hash: float
# noise must not be able to reorder siblings
_FLOAT_KINDS = frozenset({"double", "float", "vec3", "matrix4", "doublelist"})


def _payload_material(graph: ExchangeGraph, node: GraphNode) -> tuple[str, str]:
    """(structural, full) hash material for one node's own payload."""
    structural_props = []
    full_props = []
    for k in sorted(node.properties):
        pv = node.properties[k]
        if pv.kind in _FLOAT_KINDS:
            size = len(pv.value) if isinstance(pv.value, tuple) else 1
            structural_props.append(f"{k}={pv.kind}#{size}")
        else:
            structural_props.append(f"{k}={pv.kind}:{format_value(pv)}")
        full_props.append(f"{k}={pv.kind}:{format_value(pv)}")
    t = graph.effective_transform(node.id)
    tf = ",".join(format_value(PropValue("double", x)) for x in t)
    head = f"n|{node.type_name}|{node.scale}|{node.name}|"
    return (head + ";".join(structural_props),
            head + ";".join(full_props) + f"|{tf}")


def _content_keys(graph: ExchangeGraph) -> dict[int, tuple[str, str]]:
    """(structural, full) hash per node over payload + ordered child keys.

    Iterative post-order; a child revisited while still on the stack (a
    cycle) contributes a fixed marker so the computation terminates.
    """
    keys: dict[int, tuple[str, str]] = {}
    on_path: set[int] = set()
    stack: list[tuple[int, bool]] = [(node_id, False) for node_id in sorted(graph.nodes, reverse=True)]
    while stack:
        node_id, expanded = stack.pop()
        if expanded:
            on_path.discard(node_id)
            if node_id in keys:
                continue
            entries = []
            for e in graph._out.get(node_id, ()):
                child_s, child_f = keys.get(e.dst, ("cycle", "cycle"))
                entries.append((edge_rank(e.etype), e.etype, child_s, child_f))
            entries.sort()
            structural, full = _payload_material(graph, graph.nodes[node_id])
            structural += "".join(f"|e:{etype}:{s}" for _, etype, s, _ in entries)
            full += "".join(f"|e:{etype}:{f}" for _, etype, _, f in entries)
            keys[node_id] = (
                hashlib.sha256(structural.encode("utf-8")).hexdigest(),
                hashlib.sha256(full.encode("utf-8")).hexdigest(),
            )
            continue
        if node_id in keys or node_id in on_path:
            continue
        on_path.add(node_id)
        stack.append((node_id, True))
        for e in graph._out.get(node_id, ()):
            if e.dst in graph.nodes and e.dst not in keys and e.dst not in on_path:
                stack.append((e.dst, False))
    return keys


def _compare_payload(g1: ExchangeGraph, g2: ExchangeGraph, n1: GraphNode,
                     n2: GraphNode, tol: float, path: str) -> str | None:
    if n1.type_name != n2.type_name:
        return f"{path}: type {n1.type_name!r} != {n2.type_name!r}"
    if n1.scale != n2.scale:
        return f"{path}: scale {n1.scale} != {n2.scale}"
    if n1.name != n2.name:
        return f"{path}: name {n1.name!r} != {n2.name!r}"
    k1, k2 = set(n1.properties), set(n2.properties)
    if k1 != k2:
        missing = sorted(k1 ^ k2)
        return f"{path}: property set differs (only one side has {missing})"
    for k in sorted(k1):
        if not values_close(n1.properties[k], n2.properties[k], tol):
            return (f"{path}: property {k!r} differs: "
                    f"{format_value(n1.properties[k])} != {format_value(n2.properties[k])}")
    t1 = g1.effective_transform(n1.id)
    t2 = g2.effective_transform(n2.id)
    for a, b in zip(t1, t2):
        if not floats_close(a, b, tol):
            return f"{path}: transform differs"
    return None


def canonical_diff(g1: ExchangeGraph, g2: ExchangeGraph, float_tol: float = 1e-9) -> str | None:
    """First difference between two graphs up to node renumbering, or None.

    Both graphs must be valid.  Compares node payloads (type, scale, name,
    properties, authoritative transform with float tolerance) and edge
    structure along lockstep canonical traversals; node ids are ignored.
    """
    g1.require_valid()
    g2.require_valid()
    if g1.transform_mode != g2.transform_mode:
        return f"transform mode {g1.transform_mode} != {g2.transform_mode}"
    if g1.node_count != g2.node_count:
        return f"node count {g1.node_count} != {g2.node_count}"
    if g1.edge_count != g2.edge_count:
        return f"edge count {g1.edge_count} != {g2.edge_count}"
    pair12: dict[int, int] = {}
    pair21: dict[int, int] = {}
    stack: list[tuple[int, int, str]] = [(g1.root, g2.root, "root")]
    while stack:
        a, b, path = stack.pop()
        if a in pair12 or b in pair21:
            if pair12.get(a) != b or pair21.get(b) != a:
                return f"{path}: structure sharing differs"
            continue
        pair12[a] = b
        pair21[b] = a
        d = _compare_payload(g1, g2, g1.nodes[a], g2.nodes[b], float_tol, path)
        if d is not None:
            return d
        ea = g1.canonical_out_edges(a)
        eb = g2.canonical_out_edges(b)
        if len(ea) != len(eb):
            return f"{path}: child count {len(ea)} != {len(eb)}"
        for i, (x, y) in enumerate(zip(ea, eb)):
            if x.etype != y.etype:
                return f"{path}: child {i} edge type {x.etype!r} != {y.etype!r}"
        for x, y in reversed(list(zip(ea, eb))):
            child = g1.nodes[x.dst]
            label = child.name or child.type_name
            stack.append((x.dst, y.dst, f"{path} > {label}"))
    return None


def canonical_equal(g1: ExchangeGraph, g2: ExchangeGraph, float_tol: float = 1e-9) -> bool:
    """True when the two graphs carry identical information (ids aside)."""
    return canonical_diff(g1, g2, float_tol) is None
