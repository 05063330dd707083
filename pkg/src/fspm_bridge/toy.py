"""Built-in deterministic models exercising the whole architecture.

The growth model stands in for a metamer-scale structural simulator, the
water and status handlers for elementary-scale target models.  All
formulas here are synthetic; they exist to produce deterministic,
structurally rich plants (branching, multiple scales, all three graphic
types), not biology.  Dimensions of metamer ``index`` for seed ``s``:

    internode length = 0.20 * 0.95^index * j     j = jitter(s, index)
    internode radius = 0.02 * 0.97^index * j'    drawn uniformly from
    petiole   length = 0.10 * 0.96^index * j''   [0.85, 1.15) per field
    petiole   radius = 0.006                     (no jitter)
    leaf scale x/y   = 0.9 * 0.97^index * j'''

Every third metamer of the main axis carries a one-metamer branch.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from pathlib import Path

from fspm_bridge.errors import MissingFineScale, PipelineError
from fspm_bridge.geometry import Rotate, Translate, compose_transforms
from fspm_bridge.graph import EdgeType, ExchangeGraph, GraphBuilder, GraphNode
from fspm_bridge.pipeline import export_to_eg, register_exporter
from fspm_bridge.values import PropValue

MODEL_KIND = "toy-growth"

GOLDEN_ANGLE = 137.5
BRANCH_TILT = 50.0


@dataclass(frozen=True)
class Metamer:
    index: int
    parent: int | None  # metamer index; None = attached to the plant root
    attach: str  # successor | branch
    internode_length: float
    internode_radius: float
    petiole_length: float
    petiole_radius: float
    leaf_sx: float
    leaf_sy: float
    color: str = "brown"
    water_content: float = 0.0
    pressure: float | None = None


@dataclass(frozen=True)
class GrowthState:
    seed: int
    step: int = 0
    metamers: tuple = ()

    model_kind = MODEL_KIND


def _jitter(seed: int, index: int):
    return random.Random(seed * 1_000_003 + index * 7_919)


def _new_metamer(seed: int, index: int, parent: int | None, attach: str) -> Metamer:
    rng = _jitter(seed, index)
    return Metamer(
        index=index,
        parent=parent,
        attach=attach,
        internode_length=0.20 * 0.95 ** index * rng.uniform(0.85, 1.15),
        internode_radius=0.02 * 0.97 ** index * rng.uniform(0.85, 1.15),
        petiole_length=0.10 * 0.96 ** index * rng.uniform(0.85, 1.15),
        petiole_radius=0.006,
        leaf_sx=0.9 * 0.97 ** index * rng.uniform(0.85, 1.15),
        leaf_sy=0.9 * 0.97 ** index * rng.uniform(0.85, 1.15),
    )


def growth_step(state: GrowthState) -> GrowthState:
    """Append one metamer to the main axis; every third one carries a
    single-metamer branch."""
    metamers = list(state.metamers)
    main = [m for m in metamers if m.attach == EdgeType.SUCCESSOR]
    parent = main[-1].index if main else None
    nxt = len(metamers)
    metamers.append(_new_metamer(state.seed, nxt, parent, EdgeType.SUCCESSOR))
    if (len(main) + 1) % 3 == 0:
        metamers.append(_new_metamer(state.seed, nxt + 1, nxt, EdgeType.BRANCH))
    return GrowthState(state.seed, state.step + 1, tuple(metamers))


def grow(seed: int, steps: int) -> GrowthState:
    state = GrowthState(seed)
    for _ in range(steps):
        state = growth_step(state)
    return state


ROOT_ID = 1


def _metamer_node_id(index: int) -> int:
    return index + 2


def growth_export(state: GrowthState) -> ExchangeGraph:
    """Local-mode graph: scale-0 plant root, scale-1 metamer chain."""
    builder = GraphBuilder()
    builder.add_node(GraphNode(ROOT_ID, "plant", "Plant", 0))
    by_index = {m.index: m for m in state.metamers}
    for m in state.metamers:
        props = {
            "internode_length": PropValue.of_double(m.internode_length),
            "internode_radius": PropValue.of_double(m.internode_radius),
            "petiole_length": PropValue.of_double(m.petiole_length),
            "petiole_radius": PropValue.of_double(m.petiole_radius),
            "leaf_sx": PropValue.of_double(m.leaf_sx),
            "leaf_sy": PropValue.of_double(m.leaf_sy),
            "color": PropValue.of_string(m.color),
            "water_content": PropValue.of_double(m.water_content),
        }
        if m.pressure is not None:
            props["pressure"] = PropValue.of_double(m.pressure)
        rise = by_index[m.parent].internode_length if m.parent is not None else 0.0
        steps = [Translate((0.0, 0.0, rise)), Rotate((0.0, 0.0, 1.0), GOLDEN_ANGLE)]
        if m.attach == EdgeType.BRANCH:
            steps.append(Rotate((0.0, 1.0, 0.0), BRANCH_TILT))
        builder.add_node(GraphNode(_metamer_node_id(m.index), f"metamer{m.index}",
                                   "Metamer", 1, props,
                                   local_transform=compose_transforms(steps)))
        src = ROOT_ID if m.parent is None else _metamer_node_id(m.parent)
        builder.add_edge(src, _metamer_node_id(m.index), m.attach)
    return builder.build(ROOT_ID)


class GrowthModel:
    """Source-model adapter: steps the growth state, exports it, and
    absorbs retroactive updates back into the metamer records."""

    model_kind = MODEL_KIND

    def __init__(self, seed: int = 0):
        self.state = GrowthState(seed)

    def step(self) -> None:
        self.state = growth_step(self.state)

    def export(self) -> ExchangeGraph:
        return export_to_eg(self.state, self.model_kind)

    def install(self, graph: ExchangeGraph) -> None:
        updates: dict[int, dict] = {}
        for node in graph.nodes.values():
            if node.type_name != "Metamer":
                continue
            if not node.name.startswith("metamer"):
                raise PipelineError(f"cannot match returned node {node.name!r} "
                                    "to a metamer record")
            try:
                index = int(node.name[len("metamer"):])
            except ValueError as exc:
                raise PipelineError(f"bad metamer node name {node.name!r}") from exc
            fields = {}
            color = node.prop("color")
            if color is not None and color.kind == "string":
                fields["color"] = color.value
            water = node.prop("water_content")
            if water is not None and water.kind == "double":
                fields["water_content"] = water.value
            pressure = node.prop("pressure")
            if pressure is not None and pressure.kind == "double":
                fields["pressure"] = pressure.value
            updates[index] = fields
        metamers = []
        for m in self.state.metamers:
            if m.index in updates:
                metamers.append(replace(m, **updates[m.index]))
            else:
                metamers.append(m)
        self.state = replace(self.state, metamers=tuple(metamers))


register_exporter(MODEL_KIND, growth_export)


# -- target-model handlers ---------------------------------------------------------


@dataclass(frozen=True)
class WaterParams:
    base_pressure: float = 100.0
    loss_per_node: float = 10.0

    def __post_init__(self):
        if self.loss_per_node < 0:
            raise ValueError("loss_per_node must be >= 0")


def _fine_nodes(graph: ExchangeGraph) -> set[int]:
    return {e.dst for e in graph.edges if e.etype == EdgeType.DECOMPOSITION}


def fine_depths(graph: ExchangeGraph) -> dict[int, int]:
    """Successor/branch path length from the fine-scale attachment roots."""
    fine = _fine_nodes(graph)
    depths: dict[int, int] = {}
    roots = [n for n in fine
             if not any(e.etype in (EdgeType.SUCCESSOR, EdgeType.BRANCH)
                        for e in graph.in_edges(n))]
    queue = [(n, 0) for n in sorted(roots)]
    while queue:
        node_id, depth = queue.pop(0)
        if node_id in depths:
            continue
        depths[node_id] = depth
        for e in graph.out_edges(node_id):
            if e.etype in (EdgeType.SUCCESSOR, EdgeType.BRANCH) and e.dst in fine:
                queue.append((e.dst, depth + 1))
    return depths


def water_handler(graph: ExchangeGraph, env, params: WaterParams = WaterParams()) -> ExchangeGraph:
    """Retroactive target model: writes xylem pressure onto every
    fine-scale internode and turns it green; everything else untouched."""
    fine = _fine_nodes(graph)
    internodes = [n for n in graph.nodes.values()
                  if n.id in fine and n.name == "internode"]
    if not internodes:
        raise MissingFineScale("graph carries no fine-scale internode nodes; "
                               "run the decomposition stage first")
    depths = fine_depths(graph)
    replacements = {}
    for node in internodes:
        pressure = params.base_pressure - params.loss_per_node * depths[node.id]
        replacements[node.id] = node.with_properties(
            pressure=PropValue.of_double(pressure),
            color=PropValue.of_string("green"))
    return graph.replace_nodes(replacements)


def status_handler(graph: ExchangeGraph, env) -> str:
    """Non-retroactive target model: reports what it received."""
    temp = env.get("temperature")
    shown = f"{temp.value:g}" if temp is not None and temp.kind in ("double", "float", "int") else "-"
    return f"ok: {graph.node_count} nodes, {graph.edge_count} edges, step env {shown}"


def color_handler(graph: ExchangeGraph, env, color: str = "green") -> ExchangeGraph:
    """Retroactive handler matching the foreign target-server contract:
    recolors every internode node and returns the graph otherwise as-is."""
    replacements = {}
    for node in graph.nodes.values():
        if node.name == "internode":
            replacements[node.id] = node.with_properties(
                color=PropValue.of_string(color))
    return graph.replace_nodes(replacements) if replacements else graph


# -- canned configuration ------------------------------------------------------------


_SCHEME_MIRROR = """<scheme composite="Metamer">
  <part name="internode" type="Cylinder">
    <forward from="internode_radius"/>
    <forward from="internode_length"/>
    <forward from="color"/>
    <forward from="water_content"/>
    <forward from="pressure"/>
    <place>
      <translate x="0" y="0" z="0"/>
    </place>
  </part>
  <part name="petiole" type="Cylinder">
    <forward from="petiole_radius"/>
    <forward from="petiole_length"/>
    <place>
      <translate x="0" y="0" z="@internode_length"/>
      <rotate ax="0" ay="1" az="0" angle="65"/>
    </place>
  </part>
  <part name="leaf" type="LeafPatch">
    <forward from="leaf_sx"/>
    <forward from="leaf_sy"/>
    <place>
      <translate x="0" y="0" z="@internode_length"/>
      <rotate ax="0" ay="1" az="0" angle="65"/>
      <translate x="0" y="0" z="@petiole_length"/>
      <rotate ax="0" ay="1" az="0" angle="-40"/>
    </place>
  </part>
  <intra src="internode" dst="petiole" type="branch"/>
  <intra src="petiole" dst="leaf" type="successor"/>
  <attach from="internode" to="internode"/>
</scheme>
"""

_SCHEME_GRAPHIC = """<scheme composite="Metamer">
  <part name="internode" type="Cylinder">
    <forward from="internode_radius" to="radius"/>
    <forward from="internode_length" to="length"/>
    <forward from="color"/>
    <place>
      <translate x="0" y="0" z="0"/>
    </place>
  </part>
  <part name="petiole" type="Cylinder">
    <forward from="petiole_radius" to="radius"/>
    <forward from="petiole_length" to="length"/>
    <place>
      <translate x="0" y="0" z="@internode_length"/>
      <rotate ax="0" ay="1" az="0" angle="65"/>
    </place>
  </part>
  <part name="leaf" type="LeafPatch">
    <forward from="leaf_sx" to="sx"/>
    <forward from="leaf_sy" to="sy"/>
    <place>
      <translate x="0" y="0" z="@internode_length"/>
      <rotate ax="0" ay="1" az="0" angle="65"/>
      <translate x="0" y="0" z="@petiole_length"/>
      <rotate ax="0" ay="1" az="0" angle="-40"/>
    </place>
  </part>
  <intra src="internode" dst="petiole" type="branch"/>
  <intra src="petiole" dst="leaf" type="successor"/>
  <attach from="internode" to="internode"/>
</scheme>
"""

_UPSCALE = """<upscale>
  <field name="internode_length" op="first"/>
  <field name="internode_radius" op="first"/>
  <field name="petiole_length" op="first"/>
  <field name="petiole_radius" op="first"/>
  <field name="leaf_sx" op="first"/>
  <field name="leaf_sy" op="first"/>
  <field name="color" op="first"/>
  <field name="water_content" op="sum"/>
  <field name="pressure" op="mean"/>
</upscale>
"""

_EDGEMAP_IDENTITY = """<edgemap>
  <pair foreign="successor" native="successor"/>
  <pair foreign="branch" native="branch"/>
  <pair foreign="decomposition" native="decomposition"/>
</edgemap>
"""

_UNITS = """<units>
  <rule field="temperature" source="double" target="float" a="1.8" b="32"/>
</units>
"""

_DICTIONARY = """<dictionary>
  <entry source="Parallelogram" form="tri2" target="TriangleSet" rule="parallelogram_tri2" default="true"/>
  <entry source="Parallelogram" form="tri4" target="TriangleSet" rule="parallelogram_tri4"/>
  <entry source="Cylinder" form="rename" target="Cylinder" rule="cylinder_rename" default="true"/>
  <entry source="LeafPatch" form="ctrl" target="BezierPatch" rule="leafpatch_ctrl" default="true"/>
  <entry source="BezierPatch" form="mesh" target="TriangleSet" rule="bezierpatch_tri"/>
</dictionary>
"""

_IMPORT_ROUNDTRIP = """<pipeline direction="import">
  <stage kind="map_edge_types" direction="in" map="edgemap_identity.xml"/>
  <stage kind="decompose_scale" scheme="metamer_scheme.xml"/>
  <stage kind="globalize"/>
</pipeline>
"""

_EXPORT_ROUNDTRIP = """<pipeline direction="export">
  <stage kind="localize"/>
  <stage kind="upscale_properties" scheme="metamer_scheme.xml" spec="upscale.xml"/>
  <stage kind="map_edge_types" direction="out" map="edgemap_identity.xml"/>
</pipeline>
"""

_EXPORT_WATER = """<pipeline direction="export">
  <stage kind="convert_env" rules="units.xml" direction="forward"/>
  <stage kind="decompose_scale" scheme="metamer_scheme.xml"/>
</pipeline>
"""

_IMPORT_WATER = """<pipeline direction="import">
  <stage kind="upscale_properties" scheme="metamer_scheme.xml" spec="upscale.xml"/>
</pipeline>
"""

_IMPORT_GRAPHIC = """<pipeline direction="import">
  <stage kind="map_edge_types" direction="in" map="edgemap_identity.xml"/>
  <stage kind="decompose_scale" scheme="graphic_scheme.xml"/>
  <stage kind="translate_geometry" dictionary="dictionary.xml"/>
  <stage kind="globalize"/>
</pipeline>
"""

CONFIG_FILES = {
    "metamer_scheme.xml": _SCHEME_MIRROR,
    "graphic_scheme.xml": _SCHEME_GRAPHIC,
    "upscale.xml": _UPSCALE,
    "edgemap_identity.xml": _EDGEMAP_IDENTITY,
    "units.xml": _UNITS,
    "dictionary.xml": _DICTIONARY,
    "import_roundtrip.xml": _IMPORT_ROUNDTRIP,
    "export_roundtrip.xml": _EXPORT_ROUNDTRIP,
    "export_water.xml": _EXPORT_WATER,
    "import_water.xml": _IMPORT_WATER,
    "import_graphic.xml": _IMPORT_GRAPHIC,
}


def write_demo_configs(directory: Path) -> Path:
    """Materialize the canned configuration files; returns the directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in CONFIG_FILES.items():
        (directory / name).write_text(text, encoding="utf-8")
    return directory


def default_env(step: int):
    """Per-step environment for the demos: a slowly warming Celsius value."""
    return {"temperature": PropValue.of_double(20.0 + step)}
