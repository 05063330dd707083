"""Staged transformation machinery between exporters and target models.

A pipeline is an ordered list of graph-to-graph stages configured from
files; one pipeline file fully determines a direction of exchange.
Exporters emit plain local-mode graphs; every dictionary, edge map and
decomposition scheme is applied on the import side, while the data moves
toward the model that needs it.

Stage kinds: map_edge_types, globalize, localize, translate_geometry,
convert_env, decompose_scale, upscale_properties.  Environment variables
ride alongside the graph so convert_env can rewrite them in the same run;
all other stages leave them untouched.
"""

from __future__ import annotations

import math
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from fspm_bridge import geometry
from fspm_bridge.errors import (
    AdapterFailure,
    ConfigError,
    MissingFineScale,
    NoAdapter,
    OperatorTypeMismatch,
    PipelineError,
    StageError,
    TemplateArity,
    TypeMismatch,
    UnknownCompositeType,
    UnmappedEdgeType,
)
from fspm_bridge.graph import (
    GLOBAL,
    IDENTITY16,
    EdgeType,
    ExchangeGraph,
    GraphEdge,
    GraphNode,
)
from fspm_bridge.mat4 import compose, invert_affine, multiply
from fspm_bridge.values import BOOL, DOUBLE, FLOAT, INT, PropValue, quantize32

Env = dict[str, PropValue]


# -- exporter registry ----------------------------------------------------------


_EXPORTERS: dict[str, Callable[[object], ExchangeGraph]] = {}


def register_exporter(model_kind: str, exporter: Callable[[object], ExchangeGraph]) -> None:
    _EXPORTERS[model_kind] = exporter


def export_to_eg(source_state, model_kind: str | None = None) -> ExchangeGraph:
    """Walk a source model once and return its local-mode exchange graph."""
    kind = model_kind or getattr(source_state, "model_kind", None)
    if kind is None or kind not in _EXPORTERS:
        raise NoAdapter(f"no exporter registered for model kind {kind!r}")
    try:
        graph = _EXPORTERS[kind](source_state)
    except Exception as exc:
        raise AdapterFailure(f"exporter for {kind!r} failed: {exc}") from exc
    graph.require_valid()
    return graph


# -- edge-type mapping ------------------------------------------------------------


class EdgeTypeMap:
    """Bijection between a foreign edge vocabulary and the canonical tags."""

    def __init__(self, pairs: dict[str, str]):
        for native in pairs.values():
            if native not in EdgeType.ALL:
                raise ConfigError(f"edge map target {native!r} is not a canonical tag")
        if len(set(pairs.values())) != len(pairs):
            raise ConfigError("edge map is not invertible: two foreign names share a tag")
        self.forward = dict(pairs)
        self.inverse = {v: k for k, v in pairs.items()}


def identity_edge_map() -> EdgeTypeMap:
    return EdgeTypeMap({t: t for t in EdgeType.ALL})


def map_edge_types(graph: ExchangeGraph, m: EdgeTypeMap, direction: str) -> ExchangeGraph:
    """Rewrite edge tags; 'in' maps foreign names to canonical tags, 'out'
    the other way.  Any tag missing from the map aborts."""
    table = m.forward if direction == "in" else m.inverse
    if direction not in ("in", "out"):
        raise PipelineError(f"direction must be 'in' or 'out', got {direction!r}")
    edges = []
    for e in graph.edges:
        if e.etype not in table:
            raise UnmappedEdgeType(e.etype)
        edges.append(GraphEdge(e.src, e.dst, table[e.etype]))
    return ExchangeGraph(graph.root, graph.nodes.values(), edges,
                         graph.transform_mode, strict=False)


# -- unit conversion ----------------------------------------------------------------


_NUMERIC = (INT, DOUBLE, FLOAT)


@dataclass(frozen=True)
class UnitRule:
    """target = cast(a * source + b), invertible because a != 0."""

    field_name: str
    source_kind: str
    target_kind: str
    a: float
    b: float

    def __post_init__(self):
        if self.a == 0.0:
            raise ConfigError(f"unit rule for {self.field_name!r}: a must be nonzero")
        for kind in (self.source_kind, self.target_kind):
            if kind not in _NUMERIC:
                raise ConfigError(f"unit rule for {self.field_name!r}: kind {kind!r} "
                                  "is not numeric")


def _cast(x: float, kind: str) -> PropValue:
    if kind == INT:
        return PropValue(INT, int(x))
    if kind == FLOAT:
        return PropValue(FLOAT, quantize32(x))
    return PropValue(DOUBLE, float(x))


def convert_env(env: Env, rules, direction: str = "forward",
                warnings: list[str] | None = None) -> Env:
    """Apply unit rules to an environment map.

    Fields without a rule pass through unchanged; a rule whose field is
    absent is skipped with a warning.  A value whose tag disagrees with
    the rule raises TypeMismatch.
    """
    if direction not in ("forward", "inverse"):
        raise PipelineError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    out = dict(env)
    for rule in rules:
        pv = out.get(rule.field_name)
        if pv is None:
            if warnings is not None:
                warnings.append(f"unit rule for {rule.field_name!r}: field absent, skipped")
            continue
        expect = rule.source_kind if direction == "forward" else rule.target_kind
        if pv.kind != expect:
            raise TypeMismatch(f"field {rule.field_name!r}: expected {expect}, "
                               f"got {pv.kind}")
        x = float(pv.value)
        if direction == "forward":
            out[rule.field_name] = _cast(rule.a * x + rule.b, rule.target_kind)
        else:
            out[rule.field_name] = _cast((x - rule.b) / rule.a, rule.source_kind)
    return out


# -- decomposition schemes ------------------------------------------------------------


Param = float | str  # literal or the name of a composite property


@dataclass(frozen=True)
class TemplateStep:
    kind: str  # translate | rotate | scale
    params: tuple  # 3 Params, or 4 for rotate (ax, ay, az, angle)


@dataclass(frozen=True)
class PartTemplate:
    part_name: str
    target_type: str
    place: tuple = ()  # TemplateSteps posing the part in the composite frame
    forward: tuple = ()  # (composite field, part field) pairs


@dataclass(frozen=True)
class DecompositionScheme:
    composite_type: str
    parts: tuple
    intra_edges: tuple  # (src part index, dst part index, etype)
    attach_from: int
    attach_to: int

    def __post_init__(self):
        n = len(self.parts)
        if n == 0:
            raise ConfigError("scheme needs at least one part")
        for i, j, etype in self.intra_edges:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ConfigError(f"intra edge ({i}, {j}) references invalid parts")
            if etype not in EdgeType.ALL:
                raise ConfigError(f"intra edge type {etype!r} is not canonical")
            if j == self.attach_to and etype in (EdgeType.SUCCESSOR, EdgeType.BRANCH):
                raise ConfigError("the attach-to part cannot also be an intra "
                                  "successor/branch target")
        if not (0 <= self.attach_from < n and 0 <= self.attach_to < n):
            raise ConfigError("attach indices reference invalid parts")


def _resolve_param(p: Param, composite: GraphNode) -> float:
    if isinstance(p, str):
        pv = composite.prop(p)
        if pv is None:
            raise TemplateArity(f"composite {composite.id}: template references "
                                f"missing property {p!r}")
        if pv.kind not in (INT, DOUBLE, FLOAT):
            raise TemplateArity(f"composite {composite.id}: template property {p!r} "
                                f"must be numeric, got {pv.kind}")
        return float(pv.value)
    return p


def _part_pose(part: PartTemplate, composite: GraphNode) -> tuple:
    steps = []
    for step in part.place:
        params = [_resolve_param(p, composite) for p in step.params]
        if step.kind == "translate":
            steps.append(geometry.Translate(tuple(params)))
        elif step.kind == "scale":
            steps.append(geometry.Scale(tuple(params)))
        elif step.kind == "rotate":
            steps.append(geometry.Rotate(tuple(params[:3]), params[3]))
        else:
            raise ConfigError(f"unknown template step kind {step.kind!r}")
    return geometry.compose_transforms(steps)


def decompose_scale(graph: ExchangeGraph, scheme: DecompositionScheme) -> ExchangeGraph:
    """Add the finer scale below every composite node of the scheme's type.

    Parts are instantiated one scale finer, joined to the composite by
    decomposition edges and to each other by the scheme's intra edges;
    successor/branch edges between composites are mirrored between the
    designated attach parts.  Coarse nodes and edges are all retained.
    A graph without any composite of the type is returned unchanged.
    """
    graph.require_valid()
    composites = [n for n in graph.nodes.values() if n.type_name == scheme.composite_type]
    if not composites:
        return graph
    composites.sort(key=lambda n: n.id)

    poses: dict[int, list] = {}
    part_ids: dict[int, list[int]] = {}
    next_id = max(graph.nodes) + 1
    new_nodes: list[GraphNode] = []
    new_edges: list[GraphEdge] = []
    is_global = graph.transform_mode == GLOBAL

    for comp in composites:
        poses[comp.id] = [_part_pose(p, comp) for p in scheme.parts]
        ids = []
        for _ in scheme.parts:
            ids.append(next_id)
            next_id += 1
        part_ids[comp.id] = ids

    comp_ids = set(part_ids)
    intra_target: dict[int, int] = {}  # dst part index -> src part index
    for i, j, etype in scheme.intra_edges:
        if etype in (EdgeType.SUCCESSOR, EdgeType.BRANCH) and j not in intra_target:
            intra_target[j] = i

    for comp in composites:
        parent = _topological_parent(graph, comp.id)
        mirrored_parent = parent if parent in comp_ids else None
        comp_local = comp.local_transform if comp.local_transform is not None else IDENTITY16
        comp_global = comp.global_transform if comp.global_transform is not None else IDENTITY16
        for i, part in enumerate(scheme.parts):
            pose = poses[comp.id][i]
            if is_global:
                local_t, global_t = None, multiply(comp_global, pose)
            else:
                global_t = None
                if i == scheme.attach_to and mirrored_parent is not None:
                    anchor = poses[mirrored_parent][scheme.attach_from]
                    local_t = multiply(invert_affine(anchor),
                                       multiply(comp_local, pose))
                elif i in intra_target:
                    local_t = multiply(invert_affine(poses[comp.id][intra_target[i]]),
                                       pose)
                else:
                    local_t = pose
            props = {}
            for src_field, dst_field in part.forward:
                pv = comp.prop(src_field)
                if pv is not None:
                    props[dst_field] = pv
            new_nodes.append(GraphNode(part_ids[comp.id][i], part.part_name,
                                       part.target_type, comp.scale + 1, props,
                                       local_t, global_t))
            new_edges.append(GraphEdge(comp.id, part_ids[comp.id][i],
                                       EdgeType.DECOMPOSITION))
        for i, j, etype in scheme.intra_edges:
            new_edges.append(GraphEdge(part_ids[comp.id][i], part_ids[comp.id][j], etype))

    for e in graph.edges:
        if (e.etype in (EdgeType.SUCCESSOR, EdgeType.BRANCH)
                and e.src in comp_ids and e.dst in comp_ids):
            new_edges.append(GraphEdge(part_ids[e.src][scheme.attach_from],
                                       part_ids[e.dst][scheme.attach_to], e.etype))

    return ExchangeGraph(graph.root,
                         list(graph.nodes.values()) + new_nodes,
                         list(graph.edges) + new_edges,
                         graph.transform_mode)


def _topological_parent(graph: ExchangeGraph, node_id: int) -> int | None:
    for e in graph.in_edges(node_id):
        if e.etype in (EdgeType.SUCCESSOR, EdgeType.BRANCH):
            return e.src
    return None


# -- property upscaling ------------------------------------------------------------------


UPSCALE_OPERATORS = ("sum", "mean", "min", "max", "first", "and", "or")


@dataclass(frozen=True)
class UpscaleSpec:
    """field name -> aggregation operator; unlisted fields are dropped."""

    ops: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for name, op in self.ops.items():
            if op not in UPSCALE_OPERATORS:
                raise ConfigError(f"unknown upscale operator {op!r} for field {name!r}")


def _aggregate(op: str, values: list[PropValue], field_name: str) -> PropValue:
    kinds = {pv.kind for pv in values}
    if op == "first":
        return values[0]
    if op in ("and", "or"):
        if kinds != {BOOL}:
            raise OperatorTypeMismatch(f"{op} over field {field_name!r} needs bool "
                                       f"values, got {sorted(kinds)}")
        result = all(pv.value for pv in values) if op == "and" else any(pv.value for pv in values)
        return PropValue(BOOL, result)
    if not kinds <= {INT, DOUBLE, FLOAT}:
        raise OperatorTypeMismatch(f"{op} over field {field_name!r} needs numeric "
                                   f"values, got {sorted(kinds)}")
    if len(kinds) != 1:
        raise OperatorTypeMismatch(f"{op} over field {field_name!r}: mixed value "
                                   f"kinds {sorted(kinds)}")
    kind = kinds.pop()
    raw = [pv.value for pv in values]
    if op == "sum":
        return _cast(sum(raw), kind)
    if op == "mean":
        return PropValue(DOUBLE, math.fsum(float(x) for x in raw) / len(raw))
    if op == "min":
        return _cast(min(raw), kind)
    return _cast(max(raw), kind)


def upscale_properties(graph: ExchangeGraph, scheme: DecompositionScheme,
                       spec: UpscaleSpec,
                       warnings: list[str] | None = None) -> ExchangeGraph:
    """Remove the fine scale added by decompose_scale, aggregating the
    listed fields of each composite's parts back onto the composite.

    A graph with no composite of the scheme's type passes through
    unchanged (the inverse of decompose_scale's no-op), unless it carries
    a fine scale under some other type, which means the wrong scheme was
    supplied."""
    graph.require_valid()
    composites = [n for n in graph.nodes.values() if n.type_name == scheme.composite_type]
    if not composites:
        if any(e.etype == EdgeType.DECOMPOSITION for e in graph.edges):
            raise UnknownCompositeType(
                f"graph has a fine scale, but no node of composite type "
                f"{scheme.composite_type!r}")
        return graph
    fine: set[int] = set()
    replaced: dict[int, GraphNode] = {}
    dropped: set[str] = set()
    any_fine = False
    for comp in sorted(composites, key=lambda n: n.id):
        part_ids = graph.children(comp.id, EdgeType.DECOMPOSITION)
        if not part_ids:
            continue
        any_fine = True
        for pid in part_ids:
            if graph.children(pid, EdgeType.DECOMPOSITION):
                raise PipelineError(f"part node {pid} has its own finer scale; "
                                    "upscale one scale at a time")
        fine.update(part_ids)
        parts = [graph.nodes[pid] for pid in part_ids]
        props = dict(comp.properties)
        seen_fields: set[str] = set()
        for part in parts:
            seen_fields.update(part.properties)
        for field_name in sorted(seen_fields):
            op = spec.ops.get(field_name)
            if op is None:
                dropped.add(field_name)
                continue
            values = [p.properties[field_name] for p in parts if field_name in p.properties]
            props[field_name] = _aggregate(op, values, field_name)
        replaced[comp.id] = GraphNode(comp.id, comp.name, comp.type_name, comp.scale,
                                      props, comp.local_transform, comp.global_transform)
    if not any_fine:
        raise MissingFineScale(f"no composite of type {scheme.composite_type!r} "
                               "has decomposition children")
    if warnings is not None:
        for name in sorted(dropped):
            warnings.append(f"upscale dropped fine-scale field {name!r} (no operator)")
    nodes = [replaced.get(n.id, n) for n in graph.nodes.values() if n.id not in fine]
    edges = [e for e in graph.edges if e.src not in fine and e.dst not in fine]
    return ExchangeGraph(graph.root, nodes, edges, graph.transform_mode)


# -- pipeline configuration and execution ----------------------------------------------


@dataclass(frozen=True)
class Stage:
    kind: str
    params: dict


@dataclass(frozen=True)
class PipelineConfig:
    direction: str
    stages: tuple


@dataclass
class PipelineResult:
    graph: ExchangeGraph
    env: Env
    timings: list  # (stage kind, seconds)
    warnings: list


STAGE_KINDS = ("map_edge_types", "globalize", "localize", "translate_geometry",
               "convert_env", "decompose_scale", "upscale_properties")


def run_pipeline(graph: ExchangeGraph, config: PipelineConfig,
                 env: Env | None = None) -> PipelineResult:
    """Apply the configured stages in order; the first failure aborts with
    a StageError naming the stage."""
    result = PipelineResult(graph, dict(env or {}), [], [])
    for stage in config.stages:
        started = time.perf_counter()
        try:
            _apply_stage(stage, result)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(stage.kind, exc) from exc
        result.timings.append((stage.kind, time.perf_counter() - started))
    return result


def _apply_stage(stage: Stage, result: PipelineResult) -> None:
    p = stage.params
    if stage.kind == "map_edge_types":
        result.graph = map_edge_types(result.graph, p["map"], p["direction"])
    elif stage.kind == "globalize":
        result.graph = geometry.globalize(result.graph)
    elif stage.kind == "localize":
        result.graph = geometry.localize(result.graph)
    elif stage.kind == "translate_geometry":
        result.graph = translate_graph_geometry(result.graph, p["dictionary"],
                                                p.get("forms", {}))
    elif stage.kind == "convert_env":
        result.env = convert_env(result.env, p["rules"], p["direction"], result.warnings)
    elif stage.kind == "decompose_scale":
        result.graph = decompose_scale(result.graph, p["scheme"])
    elif stage.kind == "upscale_properties":
        result.graph = upscale_properties(result.graph, p["scheme"], p["spec"],
                                          result.warnings)
    else:
        raise ConfigError(f"unknown stage kind {stage.kind!r}")


def translate_graph_geometry(graph: ExchangeGraph, dictionary: geometry.Dictionary,
                             forms: dict[str, str] | None = None) -> ExchangeGraph:
    """Rewrite every node whose type the dictionary covers; pure topology
    nodes (types without entries) pass through untouched."""
    forms = forms or {}
    replacements: dict[int, GraphNode] = {}
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        if not dictionary.covers(node.type_name):
            continue
        entry = dictionary.lookup(node.type_name, forms.get(node.type_name))
        sig = geometry.signature_from_node(node, entry.rule)
        produced = geometry.translate_signature(sig, dictionary,
                                                forms.get(node.type_name))
        if len(produced) != 1:
            raise PipelineError(
                f"node {node.id}: translation of {node.type_name!r} yields "
                f"{len(produced)} signatures; the graph stage supports exactly one")
        replacements[node_id] = geometry.apply_signature_to_node(node, sig, produced[0])
    return graph.replace_nodes(replacements) if replacements else graph


# -- configuration files -----------------------------------------------------------------


def _config_root(path: Path, expected: str) -> ET.Element:
    try:
        root = ET.fromstring(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except ET.ParseError as exc:
        raise ConfigError(f"{path}: malformed XML: {exc}") from exc
    if root.tag != expected:
        raise ConfigError(f"{path}: expected <{expected}>, got <{root.tag}>")
    return root


def _attr(elem: ET.Element, name: str, path: Path) -> str:
    value = elem.get(name)
    if value is None:
        raise ConfigError(f"{path}: <{elem.tag}> needs attribute {name!r}")
    return value


def load_edge_map(path: Path) -> EdgeTypeMap:
    root = _config_root(path, "edgemap")
    pairs = {}
    for child in root:
        if child.tag != "pair":
            raise ConfigError(f"{path}: unknown element <{child.tag}>")
        pairs[_attr(child, "foreign", path)] = _attr(child, "native", path)
    return EdgeTypeMap(pairs)


def load_unit_rules(path: Path) -> list[UnitRule]:
    root = _config_root(path, "units")
    rules = []
    for child in root:
        if child.tag != "rule":
            raise ConfigError(f"{path}: unknown element <{child.tag}>")
        try:
            rules.append(UnitRule(_attr(child, "field", path),
                                  _attr(child, "source", path),
                                  _attr(child, "target", path),
                                  float(_attr(child, "a", path)),
                                  float(_attr(child, "b", path))))
        except ValueError as exc:
            raise ConfigError(f"{path}: bad unit rule: {exc}") from exc
    return rules


def load_upscale_spec(path: Path) -> UpscaleSpec:
    root = _config_root(path, "upscale")
    ops = {}
    for child in root:
        if child.tag != "field":
            raise ConfigError(f"{path}: unknown element <{child.tag}>")
        ops[_attr(child, "name", path)] = _attr(child, "op", path)
    return UpscaleSpec(ops)


def _parse_param(text: str, path: Path) -> Param:
    if text.startswith("@"):
        return text[1:]
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{path}: parameter must be a number or @property, "
                          f"got {text!r}") from exc


_STEP_PARAMS = {
    "translate": ("x", "y", "z"),
    "scale": ("x", "y", "z"),
    "rotate": ("ax", "ay", "az", "angle"),
}


def load_scheme(path: Path) -> DecompositionScheme:
    root = _config_root(path, "scheme")
    composite = _attr(root, "composite", path)
    parts: list[PartTemplate] = []
    names: dict[str, int] = {}
    intra: list[tuple[int, int, str]] = []
    attach: tuple[int, int] | None = None
    for child in root:
        if child.tag == "part":
            name = _attr(child, "name", path)
            if name in names:
                raise ConfigError(f"{path}: duplicate part {name!r}")
            place: list[TemplateStep] = []
            forward: list[tuple[str, str]] = []
            for sub in child:
                if sub.tag == "forward":
                    src = _attr(sub, "from", path)
                    forward.append((src, sub.get("to", src)))
                elif sub.tag == "place":
                    for step in sub:
                        if step.tag not in _STEP_PARAMS:
                            raise ConfigError(f"{path}: unknown placement step "
                                              f"<{step.tag}>")
                        params = tuple(_parse_param(_attr(step, a, path), path)
                                       for a in _STEP_PARAMS[step.tag])
                        place.append(TemplateStep(step.tag, params))
                else:
                    raise ConfigError(f"{path}: unknown element <{sub.tag}> in part")
            names[name] = len(parts)
            parts.append(PartTemplate(name, _attr(child, "type", path),
                                      tuple(place), tuple(forward)))
        elif child.tag == "intra":
            intra.append((child.get("src", ""), child.get("dst", ""),
                          _attr(child, "type", path)))
        elif child.tag == "attach":
            if attach is not None:
                raise ConfigError(f"{path}: duplicate <attach>")
            attach = (child.get("from", ""), child.get("to", ""))
        else:
            raise ConfigError(f"{path}: unknown element <{child.tag}>")
    if attach is None:
        raise ConfigError(f"{path}: scheme needs an <attach from=... to=.../> element")

    def part_index(name: str) -> int:
        if name not in names:
            raise ConfigError(f"{path}: unknown part name {name!r}")
        return names[name]

    return DecompositionScheme(
        composite, tuple(parts),
        tuple((part_index(i), part_index(j), et) for i, j, et in intra),
        part_index(attach[0]), part_index(attach[1]))


def load_pipeline(path: Path) -> PipelineConfig:
    """Load a pipeline file; referenced maps, dictionaries, schemes and
    specs are resolved relative to the file and loaded eagerly."""
    path = Path(path)
    root = _config_root(path, "pipeline")
    direction = root.get("direction", "import")
    base = path.parent
    stages: list[Stage] = []
    for child in root:
        if child.tag != "stage":
            raise ConfigError(f"{path}: unknown element <{child.tag}>")
        kind = _attr(child, "kind", path)
        if kind not in STAGE_KINDS:
            raise ConfigError(f"{path}: unknown stage kind {kind!r}")
        params: dict = {}
        if kind == "map_edge_types":
            params["map"] = load_edge_map(base / _attr(child, "map", path))
            params["direction"] = _attr(child, "direction", path)
            if params["direction"] not in ("in", "out"):
                raise ConfigError(f"{path}: map stage direction must be in or out")
        elif kind == "translate_geometry":
            params["dictionary"] = geometry.parse_dictionary(
                (base / _attr(child, "dictionary", path)).read_text(encoding="utf-8"))
            forms = {}
            for sub in child:
                if sub.tag != "form":
                    raise ConfigError(f"{path}: unknown element <{sub.tag}> in stage")
                forms[_attr(sub, "source", path)] = _attr(sub, "form", path)
            params["forms"] = forms
        elif kind == "convert_env":
            params["rules"] = load_unit_rules(base / _attr(child, "rules", path))
            params["direction"] = child.get("direction", "forward")
            if params["direction"] not in ("forward", "inverse"):
                raise ConfigError(f"{path}: convert_env direction must be forward "
                                  "or inverse")
        elif kind == "decompose_scale":
            params["scheme"] = load_scheme(base / _attr(child, "scheme", path))
        elif kind == "upscale_properties":
            params["scheme"] = load_scheme(base / _attr(child, "scheme", path))
            params["spec"] = load_upscale_spec(base / _attr(child, "spec", path))
        stages.append(Stage(kind, params))
    return PipelineConfig(direction, tuple(stages))
