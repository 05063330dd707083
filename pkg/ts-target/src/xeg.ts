/**
 * The XML exchange-graph document.
 *
 *   <graph root="1" version="1.0">
 *     <node id="1" name="plant" type="Plant" scale="0">
 *       <property name="radius" type="double" value="0.05"/>
 *       <transform kind="local" value="m00 m01 ... m33"/>
 *     </node>
 *     <edge src_id="1" dst_id="2" type="successor"/>
 *   </graph>
 *
 * Nodes are emitted ascending by id with properties sorted by name; edges
 * follow, sorted by (src, edge class, dst). Incoming documents from the
 * peer are already in its canonical form (ids 1..n in traversal order),
 * so re-serializing a parsed document reproduces its bytes.
 */

import { XmlElement, escapeAttr, parseXml } from "./xml.js";
import { GRAPH_KINDS, Value, formatNumber, formatValue, parseValue } from "./values.js";

export const EDGE_TYPES = ["successor", "branch", "decomposition"] as const;
export type EdgeType = (typeof EDGE_TYPES)[number];

export interface GraphNode {
  id: number;
  name: string;
  type: string;
  scale: number;
  props: Map<string, Value>;
  /** 16 numbers, row-major; the kind is the graph's transform mode */
  transform?: number[];
}

export interface GraphEdge {
  src: number;
  dst: number;
  etype: EdgeType;
}

export interface Graph {
  root: number;
  mode: "local" | "global";
  nodes: Map<number, GraphNode>;
  edges: GraphEdge[];
}

export class XegError extends Error {}

function intAttr(el: XmlElement, name: string, where: string): number {
  const raw = el.attrs[name];
  if (raw === undefined) throw new XegError(`${where}: missing attribute ${name}`);
  const x = Number.parseInt(raw, 10);
  if (!/^[+-]?\d+$/.test(raw.trim()) || Number.isNaN(x)) {
    throw new XegError(`${where}: ${name} is not an integer: ${raw}`);
  }
  return x;
}

function strAttr(el: XmlElement, name: string, where: string): string {
  const raw = el.attrs[name];
  if (raw === undefined) throw new XegError(`${where}: missing attribute ${name}`);
  return raw;
}

export function graphFromElement(root: XmlElement): Graph {
  if (root.name !== "graph") {
    throw new XegError(`document element must be <graph>, got <${root.name}>`);
  }
  if (strAttr(root, "version", "graph") !== "1.0") {
    throw new XegError(`unsupported version ${root.attrs.version}`);
  }
  const rootId = intAttr(root, "root", "graph");
  const nodes = new Map<number, GraphNode>();
  const edges: GraphEdge[] = [];
  const modes = new Set<"local" | "global">();

  for (const child of root.children) {
    if (child.name === "node") {
      const id = intAttr(child, "id", "node");
      const where = `node ${id}`;
      if (id <= 0) throw new XegError(`${where}: id must be positive`);
      if (nodes.has(id)) throw new XegError(`duplicate node id ${id}`);
      const scale = intAttr(child, "scale", where);
      if (scale < 0) throw new XegError(`${where}: scale must be >= 0`);
      const node: GraphNode = {
        id,
        name: strAttr(child, "name", where),
        type: strAttr(child, "type", where),
        scale,
        props: new Map(),
      };
      for (const sub of child.children) {
        if (sub.name === "property") {
          const pname = strAttr(sub, "name", where);
          const ptype = strAttr(sub, "type", `${where} property ${pname}`);
          if (!GRAPH_KINDS.has(ptype)) {
            throw new XegError(`${where}: property ${pname} has unknown type ${ptype}`);
          }
          if (node.props.has(pname)) {
            throw new XegError(`${where}: duplicate property ${pname}`);
          }
          try {
            node.props.set(pname, parseValue(ptype, strAttr(sub, "value", where)));
          } catch (err) {
            throw new XegError(`${where}: property ${pname}: ${(err as Error).message}`);
          }
        } else if (sub.name === "transform") {
          const kind = strAttr(sub, "kind", where);
          if (kind !== "local" && kind !== "global") {
            throw new XegError(`${where}: transform kind must be local or global`);
          }
          modes.add(kind);
          if (modes.size > 1) throw new XegError("document mixes local and global transforms");
          if (node.transform) throw new XegError(`${where}: duplicate transform`);
          const numbers = parseValue("matrix4", strAttr(sub, "value", where));
          node.transform = numbers.value as number[];
        } else {
          throw new XegError(`${where}: unknown element <${sub.name}>`);
        }
      }
      nodes.set(id, node);
    } else if (child.name === "edge") {
      const src = intAttr(child, "src_id", "edge");
      const dst = intAttr(child, "dst_id", "edge");
      const etype = strAttr(child, "type", `edge ${src}->${dst}`);
      if (!(EDGE_TYPES as readonly string[]).includes(etype)) {
        throw new XegError(`edge ${src}->${dst}: unknown edge type ${etype}`);
      }
      edges.push({ src, dst, etype: etype as EdgeType });
    } else {
      throw new XegError(`unknown element <${child.name}> in <graph>`);
    }
    if (child.text) throw new XegError(`unexpected text content near <${child.name}>`);
  }
  if (root.text) throw new XegError("unexpected text content in <graph>");

  for (const e of edges) {
    for (const end of [e.src, e.dst]) {
      if (!nodes.has(end)) {
        throw new XegError(`edge ${e.src}->${e.dst} references unknown node id ${end}`);
      }
    }
    if (e.src === e.dst) throw new XegError(`edge ${e.src}->${e.dst} is a self loop`);
    if (e.etype === "decomposition") {
      const s0 = nodes.get(e.src)!.scale;
      const s1 = nodes.get(e.dst)!.scale;
      if (s1 !== s0 + 1) {
        throw new XegError(`decomposition edge ${e.src}->${e.dst} must go one scale finer`);
      }
    }
  }
  if (!nodes.has(rootId)) {
    throw new XegError(`graph root attribute references unknown node id ${rootId}`);
  }
  const graph: Graph = {
    root: rootId,
    mode: modes.has("global") ? "global" : "local",
    nodes,
    edges,
  };
  validate(graph);
  return graph;
}

function validate(g: Graph): void {
  const out = new Map<number, GraphEdge[]>();
  let rootIncoming = false;
  for (const e of g.edges) {
    const list = out.get(e.src) ?? [];
    list.push(e);
    out.set(e.src, list);
    if (e.dst === g.root) rootIncoming = true;
  }
  if (rootIncoming) throw new XegError("root must not have incoming edges");
  for (const [id, list] of out) {
    if (list.filter((e) => e.etype === "successor").length > 1) {
      throw new XegError(`node ${id} has more than one successor child`);
    }
  }
  const seen = new Set<number>([g.root]);
  const stack = [g.root];
  while (stack.length) {
    for (const e of out.get(stack.pop()!) ?? []) {
      if (!seen.has(e.dst)) {
        seen.add(e.dst);
        stack.push(e.dst);
      }
    }
  }
  for (const id of g.nodes.keys()) {
    if (!seen.has(id)) throw new XegError(`node ${id} is not reachable from the root`);
  }
}

export function parseGraphDocument(text: string): Graph {
  return graphFromElement(parseXml(text));
}

const EDGE_RANK: Record<EdgeType, number> = { successor: 0, branch: 1, decomposition: 2 };

export function graphLines(g: Graph, indent: number): string[] {
  const pad = "  ".repeat(indent);
  const lines = [`${pad}<graph root="${g.root}" version="1.0">`];
  const ids = [...g.nodes.keys()].sort((a, b) => a - b);
  for (const id of ids) {
    const n = g.nodes.get(id)!;
    const head =
      `${pad}  <node id="${n.id}" name="${escapeAttr(n.name)}" ` +
      `type="${escapeAttr(n.type)}" scale="${n.scale}"`;
    if (n.props.size === 0 && !n.transform) {
      lines.push(`${head}/>`);
      continue;
    }
    lines.push(`${head}>`);
    for (const pname of [...n.props.keys()].sort()) {
      const pv = n.props.get(pname)!;
      lines.push(
        `${pad}    <property name="${escapeAttr(pname)}" type="${pv.kind}" ` +
        `value="${escapeAttr(formatValue(pv))}"/>`);
    }
    if (n.transform) {
      lines.push(
        `${pad}    <transform kind="${g.mode}" ` +
        `value="${n.transform.map(formatNumber).join(" ")}"/>`);
    }
    lines.push(`${pad}  </node>`);
  }
  const edges = [...g.edges].sort((a, b) =>
    a.src - b.src || EDGE_RANK[a.etype] - EDGE_RANK[b.etype] || a.dst - b.dst);
  for (const e of edges) {
    lines.push(`${pad}  <edge src_id="${e.src}" dst_id="${e.dst}" type="${e.etype}"/>`);
  }
  lines.push(`${pad}</graph>`);
  return lines;
}

export function serializeGraphDocument(g: Graph): string {
  return graphLines(g, 0).join("\n") + "\n";
}
