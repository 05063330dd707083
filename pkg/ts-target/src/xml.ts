/**
 * Minimal hand-rolled XML parser: elements, attributes, self-closing tags,
 * comments, an optional declaration, and character/entity references in
 * attribute values. This is all the exchange format needs; there is no
 * namespace, DTD or CDATA support on purpose.
 */

export interface XmlElement {
  name: string;
  attrs: Record<string, string>;
  children: XmlElement[];
  /** concatenated non-whitespace text content, normally empty */
  text: string;
}

export class XmlError extends Error {
  constructor(message: string, public readonly offset: number) {
    super(`${message} (at offset ${offset})`);
  }
}

const NAME_START = /[A-Za-z_:]/;
const NAME_CHAR = /[A-Za-z0-9_:.-]/;

class Cursor {
  pos = 0;
  constructor(public readonly src: string) {}

  peek(): string {
    return this.src[this.pos] ?? "";
  }

  eof(): boolean {
    return this.pos >= this.src.length;
  }

  skipWs(): void {
    while (!this.eof() && /\s/.test(this.src[this.pos])) this.pos++;
  }

  expect(text: string): void {
    if (!this.src.startsWith(text, this.pos)) {
      throw new XmlError(`expected ${JSON.stringify(text)}`, this.pos);
    }
    this.pos += text.length;
  }

  name(): string {
    const start = this.pos;
    if (!NAME_START.test(this.peek())) {
      throw new XmlError("expected a name", this.pos);
    }
    this.pos++;
    while (!this.eof() && NAME_CHAR.test(this.peek())) this.pos++;
    return this.src.slice(start, this.pos);
  }
}

function decodeEntities(raw: string, offset: number): string {
  return raw.replace(/&([^;]{0,12});?/g, (match, body: string) => {
    if (!match.endsWith(";")) {
      throw new XmlError(`unterminated entity ${JSON.stringify(match)}`, offset);
    }
    switch (body) {
      case "amp": return "&";
      case "lt": return "<";
      case "gt": return ">";
      case "quot": return '"';
      case "apos": return "'";
    }
    if (body.startsWith("#x") || body.startsWith("#X")) {
      const code = Number.parseInt(body.slice(2), 16);
      if (Number.isNaN(code)) throw new XmlError(`bad character reference &${body};`, offset);
      return String.fromCodePoint(code);
    }
    if (body.startsWith("#")) {
      const code = Number.parseInt(body.slice(1), 10);
      if (Number.isNaN(code)) throw new XmlError(`bad character reference &${body};`, offset);
      return String.fromCodePoint(code);
    }
    throw new XmlError(`unknown entity &${body};`, offset);
  });
}

function skipMisc(c: Cursor): void {
  for (;;) {
    c.skipWs();
    if (c.src.startsWith("<?", c.pos)) {
      const end = c.src.indexOf("?>", c.pos);
      if (end < 0) throw new XmlError("unterminated declaration", c.pos);
      c.pos = end + 2;
    } else if (c.src.startsWith("<!--", c.pos)) {
      const end = c.src.indexOf("-->", c.pos);
      if (end < 0) throw new XmlError("unterminated comment", c.pos);
      c.pos = end + 3;
    } else {
      return;
    }
  }
}

function parseAttrs(c: Cursor): Record<string, string> {
  const attrs: Record<string, string> = {};
  for (;;) {
    c.skipWs();
    const ch = c.peek();
    if (ch === ">" || ch === "/" || ch === "") return attrs;
    const key = c.name();
    c.skipWs();
    c.expect("=");
    c.skipWs();
    const quote = c.peek();
    if (quote !== '"' && quote !== "'") {
      throw new XmlError("attribute value must be quoted", c.pos);
    }
    c.pos++;
    const start = c.pos;
    const end = c.src.indexOf(quote, c.pos);
    if (end < 0) throw new XmlError("unterminated attribute value", start);
    const raw = c.src.slice(start, end);
    if (raw.includes("<")) throw new XmlError("'<' in attribute value", start);
    c.pos = end + 1;
    if (key in attrs) throw new XmlError(`duplicate attribute ${key}`, start);
    attrs[key] = decodeEntities(raw, start);
  }
}

function parseElement(c: Cursor): XmlElement {
  c.expect("<");
  const name = c.name();
  const attrs = parseAttrs(c);
  const element: XmlElement = { name, attrs, children: [], text: "" };
  c.skipWs();
  if (c.peek() === "/") {
    c.expect("/>");
    return element;
  }
  c.expect(">");
  for (;;) {
    const textStart = c.pos;
    const lt = c.src.indexOf("<", c.pos);
    if (lt < 0) throw new XmlError(`unclosed element <${name}>`, textStart);
    const text = c.src.slice(c.pos, lt);
    if (text.trim()) element.text += decodeEntities(text, textStart).trim();
    c.pos = lt;
    if (c.src.startsWith("<!--", c.pos)) {
      const end = c.src.indexOf("-->", c.pos);
      if (end < 0) throw new XmlError("unterminated comment", c.pos);
      c.pos = end + 3;
      continue;
    }
    if (c.src.startsWith("</", c.pos)) {
      c.expect("</");
      const closing = c.name();
      if (closing !== name) {
        throw new XmlError(`mismatched close tag </${closing}> for <${name}>`, c.pos);
      }
      c.skipWs();
      c.expect(">");
      return element;
    }
    element.children.push(parseElement(c));
  }
}

export function parseXml(text: string): XmlElement {
  const c = new Cursor(text);
  skipMisc(c);
  if (c.peek() !== "<") throw new XmlError("expected an element", c.pos);
  const root = parseElement(c);
  skipMisc(c);
  if (!c.eof()) throw new XmlError("trailing content after document element", c.pos);
  return root;
}

export function escapeAttr(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/\t/g, "&#9;")
    .replace(/\n/g, "&#10;")
    .replace(/\r/g, "&#13;");
}
