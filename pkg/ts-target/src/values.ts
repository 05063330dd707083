/**
 * Typed property values as they appear on the wire. Numbers print in the
 * peer's canonical style: shortest round-trip decimal, with a trailing
 * ".0" on integral doubles. Inside [1e-4, 1e16) this matches the peer
 * byte-for-byte; outside it the value still round-trips exactly, only the
 * spelling may differ (exponent formatting), which the parsers on both
 * sides accept.
 */

export type Kind =
  | "int" | "double" | "float" | "bool" | "string"
  | "vec3" | "matrix4" | "doublelist";

export const GRAPH_KINDS: ReadonlySet<string> = new Set(
  ["int", "double", "bool", "string", "vec3", "matrix4", "doublelist"]);
export const ENV_KINDS: ReadonlySet<string> = new Set([...GRAPH_KINDS, "float"]);

export interface Value {
  kind: Kind;
  value: number | boolean | string | number[];
}

export function formatNumber(x: number): string {
  if (Number.isNaN(x)) return "nan";
  if (x === Infinity) return "inf";
  if (x === -Infinity) return "-inf";
  if (Number.isInteger(x) && Math.abs(x) < 1e16) {
    if (Object.is(x, -0)) return "-0.0";
    return x.toFixed(1);
  }
  return x.toString();
}

export function parseNumber(text: string): number {
  const t = text.trim();
  if (t === "inf" || t === "Infinity") return Infinity;
  if (t === "-inf" || t === "-Infinity") return -Infinity;
  if (t === "nan" || t === "-nan") return NaN;
  if (t === "") throw new Error("empty number");
  const x = Number(t);
  if (Number.isNaN(x)) throw new Error(`not a number: ${JSON.stringify(text)}`);
  return x;
}

function parseNumberList(text: string, expected?: number): number[] {
  const parts = text.split(/\s+/).filter((p) => p.length > 0);
  if (expected !== undefined && parts.length !== expected) {
    throw new Error(`expected ${expected} numbers, got ${parts.length}`);
  }
  return parts.map(parseNumber);
}

export function parseValue(kind: string, text: string): Value {
  switch (kind) {
    case "int": {
      if (!/^[+-]?\d+$/.test(text.trim())) {
        throw new Error(`not an integer: ${JSON.stringify(text)}`);
      }
      return { kind, value: Number.parseInt(text, 10) };
    }
    case "double":
      return { kind, value: parseNumber(text) };
    case "float":
      return { kind, value: Math.fround(parseNumber(text)) };
    case "bool":
      if (text === "true") return { kind, value: true };
      if (text === "false") return { kind, value: false };
      throw new Error(`bool must be true or false, got ${JSON.stringify(text)}`);
    case "string":
      return { kind, value: text };
    case "vec3":
      return { kind, value: parseNumberList(text, 3) };
    case "matrix4":
      return { kind, value: parseNumberList(text, 16) };
    case "doublelist":
      return { kind, value: parseNumberList(text) };
    default:
      throw new Error(`unknown value kind ${JSON.stringify(kind)}`);
  }
}

export function formatValue(v: Value): string {
  switch (v.kind) {
    case "int":
      return String(v.value);
    case "double":
    case "float":
      return formatNumber(v.value as number);
    case "bool":
      return v.value ? "true" : "false";
    case "string":
      return v.value as string;
    default:
      return (v.value as number[]).map(formatNumber).join(" ");
  }
}
