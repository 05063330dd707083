/**
 * Protocol messages and the length-prefixed frame codec.
 *
 * Frame: 4-byte big-endian payload length, then that many bytes of UTF-8
 * XML holding one <message> element. Payload cap 256 MiB.
 */

import { XmlElement, escapeAttr, parseXml } from "./xml.js";
import { ENV_KINDS, Value, formatValue, parseValue } from "./values.js";
import { Graph, graphFromElement, graphLines } from "./xeg.js";

export const MAX_FRAME = 256 * 1024 * 1024;

export const KINDS = [
  "hello", "hello_ok", "step", "step_ok", "step_update", "error", "bye",
] as const;
export type MessageKind = (typeof KINDS)[number];

export interface Message {
  kind: MessageKind;
  mode?: "retroactive" | "non_retroactive";
  index?: number;
  env: Map<string, Value>;
  graph?: Graph;
  status?: string;
  code?: string;
  detail?: string;
}

export class ProtocolError extends Error {}

export function message(kind: MessageKind, fields: Partial<Message> = {}): Message {
  return { kind, env: new Map(), ...fields };
}

export function encodeMessage(msg: Message): string {
  const attrs = [`kind="${msg.kind}"`];
  if (msg.kind === "hello") {
    if (msg.mode !== "retroactive" && msg.mode !== "non_retroactive") {
      throw new ProtocolError("hello needs a mode");
    }
    attrs.push(`mode="${msg.mode}"`);
  }
  if (msg.kind === "step") {
    if (msg.index === undefined || msg.index < 0) {
      throw new ProtocolError("step needs a non-negative index");
    }
    attrs.push(`index="${msg.index}"`);
  }
  if (msg.kind === "step_ok") attrs.push(`status="${escapeAttr(msg.status ?? "")}"`);
  if (msg.kind === "error") {
    attrs.push(`code="${escapeAttr(msg.code ?? "")}"`);
    attrs.push(`detail="${escapeAttr(msg.detail ?? "")}"`);
  }
  const head = `<message ${attrs.join(" ")}`;
  const lines: string[] = [`${head}>`];
  if (msg.kind === "step") {
    for (const name of [...msg.env.keys()].sort()) {
      const pv = msg.env.get(name)!;
      lines.push(
        `  <env name="${escapeAttr(name)}" type="${pv.kind}" ` +
        `value="${escapeAttr(formatValue(pv))}"/>`);
    }
  }
  if (msg.kind === "step" || msg.kind === "step_update") {
    if (!msg.graph) throw new ProtocolError(`${msg.kind} needs a graph`);
    lines.push(...graphLines(msg.graph, 1));
  }
  if (lines.length === 1) return `${head}/>\n`;
  lines.push("</message>");
  return lines.join("\n") + "\n";
}

export function parseMessage(text: string): Message {
  let root: XmlElement;
  try {
    root = parseXml(text);
  } catch (err) {
    throw new ProtocolError(`payload is not well-formed XML: ${(err as Error).message}`);
  }
  if (root.name !== "message") {
    throw new ProtocolError(`payload element must be <message>, got <${root.name}>`);
  }
  const kind = root.attrs.kind as MessageKind;
  if (!(KINDS as readonly string[]).includes(kind)) {
    throw new ProtocolError(`unknown message kind ${JSON.stringify(root.attrs.kind)}`);
  }
  const msg = message(kind);
  if (kind === "hello") {
    const mode = root.attrs.mode;
    if (mode !== "retroactive" && mode !== "non_retroactive") {
      throw new ProtocolError(`bad hello mode ${JSON.stringify(mode)}`);
    }
    msg.mode = mode;
  }
  if (kind === "step") {
    const raw = root.attrs.index ?? "";
    if (!/^\d+$/.test(raw)) throw new ProtocolError("step index missing or not an integer");
    msg.index = Number.parseInt(raw, 10);
  }
  if (kind === "step_ok") msg.status = root.attrs.status ?? "";
  if (kind === "error") {
    msg.code = root.attrs.code ?? "";
    msg.detail = root.attrs.detail ?? "";
  }
  const graphs: XmlElement[] = [];
  for (const child of root.children) {
    if (child.name === "env") {
      const { name, type, value } = child.attrs;
      if (kind !== "step" || name === undefined || type === undefined || value === undefined) {
        throw new ProtocolError("misplaced or incomplete <env> element");
      }
      if (!ENV_KINDS.has(type)) {
        throw new ProtocolError(`env variable ${name}: unknown type ${type}`);
      }
      try {
        msg.env.set(name, parseValue(type, value));
      } catch (err) {
        throw new ProtocolError(`env variable ${name}: ${(err as Error).message}`);
      }
    } else if (child.name === "graph") {
      graphs.push(child);
    } else {
      throw new ProtocolError(`unknown element <${child.name}> in message`);
    }
  }
  if (kind === "step" || kind === "step_update") {
    if (graphs.length !== 1) {
      throw new ProtocolError(`${kind} needs exactly one embedded graph, got ${graphs.length}`);
    }
    try {
      msg.graph = graphFromElement(graphs[0]);
    } catch (err) {
      throw new ProtocolError(`embedded graph: ${(err as Error).message}`);
    }
  } else if (graphs.length > 0) {
    throw new ProtocolError(`${kind} must not carry a graph`);
  }
  return msg;
}

export function encodeFrame(msg: Message): Buffer {
  const payload = Buffer.from(encodeMessage(msg), "utf-8");
  if (payload.length > MAX_FRAME) {
    throw new ProtocolError(`payload of ${payload.length} bytes exceeds the cap`);
  }
  const header = Buffer.alloc(4);
  header.writeUInt32BE(payload.length, 0);
  return Buffer.concat([header, payload]);
}

export class Truncated extends ProtocolError {}
export class Oversize extends ProtocolError {}

/** Decode one frame from the head of the buffer; null when more bytes are
 * needed to complete it. */
export function decodeFrame(data: Buffer): { msg: Message; consumed: number } | null {
  if (data.length < 4) return null;
  const length = data.readUInt32BE(0);
  if (length > MAX_FRAME) {
    throw new Oversize(`frame announces ${length} bytes, cap is ${MAX_FRAME}`);
  }
  if (data.length < 4 + length) return null;
  const text = data.subarray(4, 4 + length).toString("utf-8");
  return { msg: parseMessage(text), consumed: 4 + length };
}
