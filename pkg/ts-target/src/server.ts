/**
 * Retroactive target-model server: one session at a time, lockstep steps.
 *
 * Behavior mirrors the peer's contract exactly: a hello with the wrong
 * mode gets a ModeRejected error and the connection stays open; a step
 * before hello gets BadHandshake; a step with the wrong index gets
 * OutOfOrderStep and the expected index is unchanged; a payload that does
 * not parse gets MalformedMessage and the session survives; bye is
 * acknowledged by closing the socket. The handler recolors every node
 * named "internode" (or echoes the graph back unchanged in echo mode).
 */

import * as net from "node:net";

import {
  Message,
  Oversize,
  decodeFrame,
  encodeFrame,
  message,
} from "./messages.js";
import { Graph } from "./xeg.js";

export interface ServerConfig {
  port: number;
  host?: string;
  /** echo mode returns the received graph unchanged */
  echo?: boolean;
  colorValue?: string;
}

export function applyColor(graph: Graph, color: string): Graph {
  for (const node of graph.nodes.values()) {
    if (node.name === "internode") {
      node.props.set("color", { kind: "string", value: color });
    }
  }
  return graph;
}

function reply(socket: net.Socket, msg: Message): void {
  socket.write(encodeFrame(msg));
}

function errorReply(socket: net.Socket, code: string, detail: string): void {
  reply(socket, message("error", { code, detail }));
}

class Session {
  private buffer = Buffer.alloc(0);
  private greeted = false;
  private expectedIndex = 0;

  constructor(private readonly socket: net.Socket,
              private readonly config: ServerConfig) {}

  feed(data: Buffer): void {
    this.buffer = Buffer.concat([this.buffer, data]);
    for (;;) {
      let frame;
      try {
        frame = decodeFrame(this.buffer);
      } catch (err) {
        if (err instanceof Oversize) {
          // cannot resync past an oversized announcement
          errorReply(this.socket, "MalformedMessage", (err as Error).message);
          this.socket.destroy();
          return;
        }
        errorReply(this.socket, "MalformedMessage", (err as Error).message);
        const length = this.buffer.readUInt32BE(0);
        this.buffer = this.buffer.subarray(4 + length);
        continue;
      }
      if (!frame) return;
      this.buffer = this.buffer.subarray(frame.consumed);
      if (this.handle(frame.msg)) return;
    }
  }

  /** returns true when the session ended */
  private handle(msg: Message): boolean {
    switch (msg.kind) {
      case "bye":
        this.socket.end();
        return true;
      case "hello":
        if (msg.mode !== "retroactive") {
          errorReply(this.socket, "ModeRejected",
            `server runs in retroactive mode, client asked for ${msg.mode}`);
          return false;
        }
        this.greeted = true;
        this.expectedIndex = 0;
        reply(this.socket, message("hello_ok"));
        return false;
      case "step":
        break;
      default:
        if (!this.greeted) {
          errorReply(this.socket, "BadHandshake", "hello must precede any step");
        } else {
          errorReply(this.socket, "MalformedMessage",
            `unexpected message kind ${msg.kind}`);
        }
        return false;
    }
    if (!this.greeted) {
      errorReply(this.socket, "BadHandshake", "hello must precede any step");
      return false;
    }
    if (msg.index !== this.expectedIndex) {
      errorReply(this.socket, "OutOfOrderStep",
        `expected step ${this.expectedIndex}, got ${msg.index}`);
      return false;
    }
    try {
      const graph = this.config.echo
        ? msg.graph!
        : applyColor(msg.graph!, this.config.colorValue ?? "green");
      this.expectedIndex += 1;
      reply(this.socket, message("step_update", { graph }));
    } catch (err) {
      errorReply(this.socket, "HandlerFailure", (err as Error).message);
    }
    return false;
  }
}

export function startServer(config: ServerConfig): Promise<net.Server> {
  let busy = false;
  const server = net.createServer((socket) => {
    if (busy) {
      socket.destroy();
      return;
    }
    busy = true;
    const session = new Session(socket, config);
    socket.on("data", (data) => session.feed(data));
    socket.on("error", () => socket.destroy());
    socket.on("close", () => {
      busy = false;
    });
  });
  return new Promise((resolve, reject) => {
    server.once("error", reject);
    server.listen(config.port, config.host ?? "127.0.0.1", () => resolve(server));
  });
}
