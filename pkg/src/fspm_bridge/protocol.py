"""Lockstep synchronization protocol: one client, one or more servers.

Wire format: each frame is a 4-byte big-endian payload length followed by
that many bytes of UTF-8 XML holding exactly one <message> element.  The
payload cap is 256 MiB.  Message kinds:

    <message kind="hello" mode="retroactive|non_retroactive"/>
    <message kind="hello_ok"/>
    <message kind="step" index="N"> <env .../>* <graph .../> </message>
    <message kind="step_ok" status="..."/>            non-retroactive reply
    <message kind="step_update"> <graph .../> </message>  retroactive reply
    <message kind="error" code="..." detail="..."/>
    <message kind="bye"/>

Step indices start at 0 and increase by 1 within a session.  The client
drives every server strictly in roster order, one outstanding step at a
time; in a retroactive session each server's reply graph (after that
server's import pipeline) becomes the state the next server sees.  Any
error reply aborts the run: the protocol defines no recovery.

A server owns one session at a time.  A mode-mismatched hello is answered
with a ModeRejected error and the connection stays open for a corrected
hello; a malformed payload is answered with a MalformedMessage error; a
handler exception is answered with a HandlerFailure error, the expected
step index is left unchanged, and the session survives.
"""

from __future__ import annotations

import logging
import socket
import struct
import threading
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from fspm_bridge.errors import (
    ConfigError,
    ConnectRefused,
    FormatError,
    MalformedMessage,
    ModeRejected,
    Oversize,
    ProtocolError,
    ProtocolTimeout,
    ServerError,
    StepIndexMismatch,
    Truncated,
)
from fspm_bridge.graph import ExchangeGraph
from fspm_bridge.pipeline import Env, PipelineConfig, load_pipeline, run_pipeline
from fspm_bridge.values import ENV_KINDS, format_value, parse_value
from fspm_bridge.xeg import attr_text, graph_from_element, xeg_lines

log = logging.getLogger("fspm_bridge.protocol")

MAX_FRAME = 256 * 1024 * 1024
RETROACTIVE = "retroactive"
NON_RETROACTIVE = "non_retroactive"
MODES = (RETROACTIVE, NON_RETROACTIVE)

KINDS = ("hello", "hello_ok", "step", "step_ok", "step_update", "error", "bye")


@dataclass
class Message:
    kind: str
    mode: str | None = None
    index: int | None = None
    env: Env = field(default_factory=dict)
    graph: ExchangeGraph | None = None
    status: str | None = None
    code: str | None = None
    detail: str | None = None


def hello(mode: str) -> Message:
    return Message("hello", mode=mode)


def hello_ok() -> Message:
    return Message("hello_ok")


def step(index: int, env: Env, graph: ExchangeGraph) -> Message:
    return Message("step", index=index, env=dict(env), graph=graph)


def step_ok(status: str) -> Message:
    return Message("step_ok", status=status)


def step_update(graph: ExchangeGraph) -> Message:
    return Message("step_update", graph=graph)


def error(code: str, detail: str) -> Message:
    return Message("error", code=code, detail=detail)


def bye() -> Message:
    return Message("bye")


# -- message text ---------------------------------------------------------------


def encode_message(msg: Message) -> str:
    if msg.kind not in KINDS:
        raise MalformedMessage(f"unknown message kind {msg.kind!r}")
    attrs = [f'kind="{msg.kind}"']
    if msg.kind == "hello":
        if msg.mode not in MODES:
            raise MalformedMessage(f"hello needs a mode, got {msg.mode!r}")
        attrs.append(f'mode="{msg.mode}"')
    if msg.kind == "step":
        if msg.index is None or msg.index < 0:
            raise MalformedMessage("step needs a non-negative index")
        attrs.append(f'index="{msg.index}"')
    if msg.kind == "step_ok":
        attrs.append(f'status="{attr_text(msg.status or "", "status")}"')
    if msg.kind == "error":
        attrs.append(f'code="{attr_text(msg.code or "", "code")}"')
        attrs.append(f'detail="{attr_text(msg.detail or "", "detail")}"')
    head = f"<message {' '.join(attrs)}"
    lines = [head + ">"]
    if msg.kind == "step":
        for name in sorted(msg.env):
            pv = msg.env[name]
            if pv.kind not in ENV_KINDS:
                raise MalformedMessage(f"env variable {name!r} has unknown kind {pv.kind!r}")
            lines.append(f'  <env name="{attr_text(name, "env")}" type="{pv.kind}" '
                         f'value="{attr_text(format_value(pv), "env")}"/>')
    if msg.kind in ("step", "step_update"):
        if msg.graph is None:
            raise MalformedMessage(f"{msg.kind} needs a graph")
        lines.extend(xeg_lines(msg.graph, indent=1))
    if len(lines) == 1:
        return head + "/>\n"
    lines.append("</message>")
    return "\n".join(lines) + "\n"


def parse_message(text: str) -> Message:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise MalformedMessage(f"payload is not well-formed XML: {exc}") from exc
    if root.tag != "message":
        raise MalformedMessage(f"payload element must be <message>, got <{root.tag}>")
    kind = root.get("kind")
    if kind not in KINDS:
        raise MalformedMessage(f"unknown message kind {kind!r}")
    msg = Message(kind)
    if kind == "hello":
        msg.mode = root.get("mode")
        if msg.mode not in MODES:
            raise MalformedMessage(f"hello mode must be one of {MODES}, got {msg.mode!r}")
    if kind == "step":
        try:
            msg.index = int(root.get("index", ""))
        except ValueError:
            raise MalformedMessage("step index missing or not an integer") from None
        if msg.index < 0:
            raise MalformedMessage("step index must be >= 0")
    if kind == "step_ok":
        msg.status = root.get("status", "")
    if kind == "error":
        msg.code = root.get("code", "")
        msg.detail = root.get("detail", "")
    graphs = []
    for child in root:
        if child.tag == "env":
            name = child.get("name")
            vkind = child.get("type")
            value = child.get("value")
            if kind != "step" or name is None or vkind is None or value is None:
                raise MalformedMessage("misplaced or incomplete <env> element")
            if vkind not in ENV_KINDS:
                raise MalformedMessage(f"env variable {name!r}: unknown type {vkind!r}")
            try:
                msg.env[name] = parse_value(vkind, value)
            except ValueError as exc:
                raise MalformedMessage(f"env variable {name!r}: {exc}") from exc
        elif child.tag == "graph":
            graphs.append(child)
        else:
            raise MalformedMessage(f"unknown element <{child.tag}> in message")
    if kind in ("step", "step_update"):
        if len(graphs) != 1:
            raise MalformedMessage(f"{kind} needs exactly one embedded graph, "
                                   f"got {len(graphs)}")
        try:
            msg.graph = graph_from_element(graphs[0])
        except FormatError as exc:
            raise MalformedMessage(f"embedded graph: {exc}") from exc
    elif graphs:
        raise MalformedMessage(f"{kind} must not carry a graph")
    return msg


# -- frame codec -----------------------------------------------------------------


def encode_frame(msg: Message) -> bytes:
    payload = encode_message(msg).encode("utf-8")
    if len(payload) > MAX_FRAME:
        raise Oversize(f"payload of {len(payload)} bytes exceeds the "
                       f"{MAX_FRAME}-byte cap")
    return struct.pack(">I", len(payload)) + payload


def decode_frame(data: bytes) -> tuple[Message, int]:
    """Decode one frame from the head of ``data``; returns the message and
    the number of bytes consumed (always length + 4)."""
    if len(data) < 4:
        raise Truncated(f"frame header needs 4 bytes, got {len(data)}")
    (length,) = struct.unpack(">I", data[:4])
    if length > MAX_FRAME:
        raise Oversize(f"frame announces {length} bytes, cap is {MAX_FRAME}")
    if len(data) < 4 + length:
        raise Truncated(f"frame announces {length} bytes, only "
                        f"{len(data) - 4} available")
    try:
        text = data[4:4 + length].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedMessage(f"payload is not valid UTF-8: {exc}") from exc
    return parse_message(text), 4 + length


# -- socket plumbing ----------------------------------------------------------------


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        try:
            chunk = sock.recv(remaining)
        except socket.timeout as exc:
            raise ProtocolTimeout(f"timed out waiting for {remaining} bytes") from exc
        if not chunk:
            raise Truncated(f"connection closed with {remaining} bytes outstanding")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> Message | None:
    """Read one frame; None on a clean close at a frame boundary."""
    try:
        header = sock.recv(4)
    except socket.timeout as exc:
        raise ProtocolTimeout("timed out waiting for a frame") from exc
    if not header:
        return None
    if len(header) < 4:
        header += _read_exact(sock, 4 - len(header))
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME:
        raise Oversize(f"frame announces {length} bytes, cap is {MAX_FRAME}")
    payload = _read_exact(sock, length)
    try:
        return parse_message(payload.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise MalformedMessage(f"payload is not valid UTF-8: {exc}") from exc


def send_frame(sock: socket.socket, msg: Message) -> None:
    sock.sendall(encode_frame(msg))


# -- server ---------------------------------------------------------------------------


def server_run(port: int, handler, mode: str, host: str = "127.0.0.1",
               ready=None, stop_event: threading.Event | None = None) -> None:
    """Serve one session at a time until stop_event is set.

    ``handler(graph, env)`` returns a status string (non-retroactive mode)
    or an updated graph (retroactive mode).  Protocol problems are
    answered in-band as error messages; the session and the server both
    survive everything except a broken connection.
    """
    if mode not in MODES:
        raise ProtocolError(f"mode must be one of {MODES}, got {mode!r}")
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        listener.bind((host, port))
        listener.listen(1)
        listener.settimeout(0.2)
        bound = listener.getsockname()[1]
        log.info("serving %s model on %s:%d", mode, host, bound)
        if ready is not None:
            ready(bound)
        while stop_event is None or not stop_event.is_set():
            try:
                conn, peer = listener.accept()
            except socket.timeout:
                continue
            log.info("session from %s:%d", *peer)
            try:
                _serve_session(conn, handler, mode, stop_event)
            except (Truncated, ConnectionError, OSError) as exc:
                log.warning("session dropped: %s", exc)
            finally:
                conn.close()
    finally:
        listener.close()


def _serve_session(conn: socket.socket, handler, mode: str,
                   stop_event: threading.Event | None) -> None:
    conn.settimeout(0.2)
    greeted = False
    expected_index = 0
    while stop_event is None or not stop_event.is_set():
        try:
            msg = read_frame(conn)
        except ProtocolTimeout:
            continue
        except MalformedMessage as exc:
            # the frame was fully consumed, the stream is still in sync
            send_frame(conn, error("MalformedMessage", str(exc)))
            continue
        except Oversize as exc:
            # the announced payload is never read; no way to resync
            send_frame(conn, error("MalformedMessage", str(exc)))
            return
        if msg is None:
            return
        if msg.kind == "bye":
            return  # acknowledged by closing the socket
        if msg.kind == "hello":
            if msg.mode != mode:
                send_frame(conn, error("ModeRejected",
                                       f"server runs in {mode} mode, client asked "
                                       f"for {msg.mode}"))
                continue
            greeted = True
            expected_index = 0
            send_frame(conn, hello_ok())
            continue
        if not greeted:
            send_frame(conn, error("BadHandshake", "hello must precede any step"))
            continue
        if msg.kind != "step":
            send_frame(conn, error("MalformedMessage",
                                   f"unexpected message kind {msg.kind!r}"))
            continue
        if msg.index != expected_index:
            send_frame(conn, error("OutOfOrderStep",
                                   f"expected step {expected_index}, got {msg.index}"))
            continue
        try:
            result = handler(msg.graph, msg.env)
            if mode == NON_RETROACTIVE:
                if not isinstance(result, str):
                    raise TypeError("non-retroactive handler must return a status string")
                reply = step_ok(result)
            else:
                if not isinstance(result, ExchangeGraph):
                    raise TypeError("retroactive handler must return an updated graph")
                reply = step_update(result)
        except Exception as exc:  # handler failures stay in-band
            log.warning("handler failed on step %d: %s", msg.index, exc)
            send_frame(conn, error("HandlerFailure", str(exc)))
            continue
        expected_index += 1
        send_frame(conn, reply)


class TargetServer:
    """Threaded wrapper around server_run for tests and the demo command."""

    def __init__(self, handler, mode: str, port: int = 0, host: str = "127.0.0.1"):
        self._handler = handler
        self._mode = mode
        self._host = host
        self._want_port = port
        self._stop = threading.Event()
        self._ready = threading.Event()
        self.port: int | None = None
        self._thread: threading.Thread | None = None

    def __enter__(self) -> "TargetServer":
        def note_port(port):
            self.port = port
            self._ready.set()

        self._thread = threading.Thread(
            target=server_run,
            args=(self._want_port, self._handler, self._mode, self._host,
                  note_port, self._stop),
            daemon=True)
        self._thread.start()
        if not self._ready.wait(timeout=5.0):
            raise ProtocolError("server failed to start")
        return self

    def __exit__(self, *exc_info) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)


# -- client ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ServerSpec:
    address: str
    port: int
    mode: str
    import_pipeline: PipelineConfig | None = None
    export_pipeline: PipelineConfig | None = None

    @property
    def label(self) -> str:
        return f"{self.address}:{self.port}"


@dataclass
class ServerResult:
    server: str
    status: str
    latency_s: float


@dataclass
class StepRecord:
    index: int
    servers: list


@dataclass
class RunReport:
    mode_counts: dict
    steps: list
    final_graph: ExchangeGraph | None = None

    def total_exchanges(self) -> int:
        return sum(len(s.servers) for s in self.steps)


def load_roster(path) -> list[ServerSpec]:
    """Load a roster file; entry order is the retroactive chaining order.

    <roster>
      <server address="127.0.0.1" port="9001" mode="retroactive"
              import_pipeline="import.xml" export_pipeline="export.xml"/>
    </roster>

    Pipeline paths are resolved relative to the roster file and loaded
    eagerly; both are optional.
    """
    path = Path(path)
    try:
        root = ET.fromstring(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"roster file not found: {path}") from None
    except ET.ParseError as exc:
        raise ConfigError(f"{path}: malformed XML: {exc}") from exc
    if root.tag != "roster":
        raise ConfigError(f"{path}: expected <roster>, got <{root.tag}>")
    servers = []
    for child in root:
        if child.tag != "server":
            raise ConfigError(f"{path}: unknown element <{child.tag}>")
        address = child.get("address")
        port = child.get("port")
        mode = child.get("mode")
        if not address or not port or mode not in MODES:
            raise ConfigError(f"{path}: server entry needs address, port and a "
                              f"mode in {MODES}")
        def _load(attr):
            rel = child.get(attr)
            return load_pipeline(path.parent / rel) if rel else None
        try:
            port_num = int(port)
        except ValueError:
            raise ConfigError(f"{path}: bad port {port!r}") from None
        servers.append(ServerSpec(address, port_num, mode,
                                  _load("import_pipeline"), _load("export_pipeline")))
    if not servers:
        raise ConfigError(f"{path}: roster needs at least one server")
    return servers


class _Session:
    def __init__(self, spec: ServerSpec, timeout_s: float):
        self.spec = spec
        try:
            self.sock = socket.create_connection((spec.address, spec.port),
                                                 timeout=timeout_s)
        except ConnectionRefusedError as exc:
            raise ConnectRefused(f"{spec.label}: connection refused") from exc
        except socket.timeout as exc:
            raise ProtocolTimeout(f"{spec.label}: connect timed out") from exc
        self.sock.settimeout(timeout_s)

    def exchange(self, msg: Message) -> Message:
        send_frame(self.sock, msg)
        reply = read_frame(self.sock)
        if reply is None:
            raise Truncated(f"{self.spec.label}: connection closed mid-session")
        if reply.kind == "error":
            raise _error_to_exception(reply)
        return reply

    def close(self, polite: bool = True) -> None:
        try:
            if polite:
                send_frame(self.sock, bye())
        except OSError:
            pass
        self.sock.close()


def _error_to_exception(reply: Message) -> ProtocolError:
    if reply.code == "ModeRejected":
        return ModeRejected(reply.detail or "mode rejected by server")
    if reply.code == "OutOfOrderStep":
        return StepIndexMismatch(reply.detail or "server reports out-of-order step")
    return ServerError(reply.code or "unknown", reply.detail or "")


def client_run(roster, source_model, n_steps: int, env_schedule=None,
               timeout_s: float = 30.0) -> RunReport:
    """Drive the source model n_steps, exchanging with every server in
    roster order each step (lockstep, fail-fast on any error).

    In a retroactive session the server's reply graph is run through that
    server's import pipeline and becomes both the next server's input and,
    via ``source_model.install``, the model's current state.  An empty
    roster degrades to an offline run of the source model.
    """
    report = RunReport(mode_counts={}, steps=[])
    sessions: list[_Session] = []
    try:
        for spec in roster:
            if spec.mode not in MODES:
                raise ProtocolError(f"{spec.label}: bad mode {spec.mode!r}")
            session = _Session(spec, timeout_s)
            sessions.append(session)
            reply = session.exchange(hello(spec.mode))
            if reply.kind != "hello_ok":
                raise MalformedMessage(f"{spec.label}: expected hello_ok, "
                                       f"got {reply.kind}")
            report.mode_counts[spec.mode] = report.mode_counts.get(spec.mode, 0) + 1
        for index in range(n_steps):
            source_model.step()
            current = source_model.export()
            env = dict(env_schedule(index)) if env_schedule is not None else {}
            record = StepRecord(index, [])
            report.steps.append(record)
            for session in sessions:
                spec = session.spec
                sent_graph, sent_env = current, env
                if spec.export_pipeline is not None:
                    result = run_pipeline(current, spec.export_pipeline, env)
                    sent_graph, sent_env = result.graph, result.env
                started = time.perf_counter()
                reply = session.exchange(step(index, sent_env, sent_graph))
                latency = time.perf_counter() - started
                if spec.mode == NON_RETROACTIVE:
                    if reply.kind != "step_ok":
                        raise MalformedMessage(f"{spec.label}: expected step_ok, "
                                               f"got {reply.kind}")
                    record.servers.append(ServerResult(spec.label, reply.status or "",
                                                       latency))
                else:
                    if reply.kind != "step_update":
                        raise MalformedMessage(f"{spec.label}: expected step_update, "
                                               f"got {reply.kind}")
                    updated = reply.graph
                    if spec.import_pipeline is not None:
                        updated = run_pipeline(updated, spec.import_pipeline, env).graph
                    source_model.install(updated)
                    current = updated
                    record.servers.append(ServerResult(spec.label, "updated", latency))
        report.final_graph = source_model.export()
        return report
    finally:
        for session in sessions:
            session.close()
