"""Operator entry points.

Exit codes are a stable scripting contract: 0 success, 1 a validation or
diff difference was found, 2 usage error, 3 I/O or parse error, 4
protocol or runtime error.  stdout carries only machine-readable results;
diagnostics and warnings go to stderr.  FSPM_BRIDGE_LOG sets the log
level (debug, info, warning, error).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

from fspm_bridge import protocol, toy
from fspm_bridge.errors import (
    BridgeError,
    ConfigError,
    FormatError,
    GraphError,
    PipelineError,
    ProtocolError,
    SemanticError,
)
from fspm_bridge.graph import EdgeType, ExchangeGraph, canonical_diff
from fspm_bridge.pipeline import load_pipeline, run_pipeline
from fspm_bridge.xeg import parse_xeg, serialize_xeg

OK = 0
DIFFERENT = 1
USAGE = 2
IO_ERROR = 3
RUNTIME = 4

log = logging.getLogger("fspm_bridge.cli")


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def _parse_file(path: str, lenient: bool) -> ExchangeGraph:
    warnings: list[str] = []
    graph = parse_xeg(_read(path), lenient=lenient, warnings=warnings)
    for w in warnings:
        print(f"{path}: warning: {w}", file=sys.stderr)
    return graph


def cmd_convert(args) -> int:
    graph = _parse_file(args.input, args.lenient)
    config = load_pipeline(Path(args.pipeline))
    result = run_pipeline(graph, config)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for stage, seconds in result.timings:
        log.info("stage %s: %.3fs", stage, seconds)
    Path(args.output).write_text(serialize_xeg(result.graph), encoding="utf-8")
    return OK


def cmd_validate(args) -> int:
    try:
        _parse_file(args.input, args.lenient)
    except SemanticError as exc:
        # the parser folds the full violation listing into the message
        for line in str(exc).split("; "):
            print(line)
        return DIFFERENT
    return OK


def cmd_diff(args) -> int:
    a = _parse_file(args.a, args.lenient)
    b = _parse_file(args.b, args.lenient)
    difference = canonical_diff(a, b, args.tol)
    if difference is not None:
        print(difference)
        return DIFFERENT
    return OK


def _make_handler(args):
    if args.model == "water":
        params = toy.WaterParams(args.base_pressure, args.loss_per_node)
        return (lambda g, env: toy.water_handler(g, env, params)), protocol.RETROACTIVE
    if args.model == "status":
        return toy.status_handler, protocol.NON_RETROACTIVE
    if args.model == "color":
        value = args.color_value
        return (lambda g, env: toy.color_handler(g, env, value)), protocol.RETROACTIVE
    return (lambda g, env: g), protocol.RETROACTIVE  # echo


def cmd_serve(args) -> int:
    handler, mode = _make_handler(args)

    def announce(port):
        print(f"LISTENING {port}", flush=True)

    protocol.server_run(args.port, handler, mode, host=args.host, ready=announce)
    return OK


def cmd_run(args) -> int:
    roster = protocol.load_roster(args.roster)
    model = toy.GrowthModel(seed=args.seed)
    report = protocol.client_run(roster, model, args.steps, toy.default_env,
                                 timeout_s=args.timeout_s)
    final = serialize_xeg(report.final_graph)
    Path(args.out).write_text(final, encoding="utf-8")
    payload = {
        "steps": len(report.steps),
        "exchanges": report.total_exchanges(),
        "final_xeg": args.out,
        "per_step": [
            {"index": s.index,
             "servers": [{"server": r.server, "status": r.status,
                          "latency_s": round(r.latency_s, 6)} for r in s.servers]}
            for s in report.steps
        ],
    }
    if args.report:
        Path(args.report).write_text(json.dumps(payload, indent=2) + "\n",
                                     encoding="utf-8")
    print(json.dumps({"steps": payload["steps"], "exchanges": payload["exchanges"],
                      "final_xeg": args.out}))
    return OK


def _metamer_depths(graph: ExchangeGraph) -> dict[int, int]:
    depths = {graph.root: 0}
    queue = [graph.root]
    while queue:
        node_id = queue.pop(0)
        for e in graph.out_edges(node_id):
            if e.etype in (EdgeType.SUCCESSOR, EdgeType.BRANCH) and e.dst not in depths:
                depths[e.dst] = depths[node_id] + 1
                queue.append(e.dst)
    return depths


def cmd_demo_roundtrip(args) -> int:
    """Spawn a water server, run the retroactive loop against it, and
    machine-check the expected postconditions."""
    base, loss = 100.0, 10.0
    config_dir = Path(tempfile.mkdtemp(prefix="fspm-demo-"))
    toy.write_demo_configs(config_dir)
    server = subprocess.Popen(
        [sys.executable, "-m", "fspm_bridge.cli", "serve", "--port", "0",
         "--model", "water", "--base-pressure", str(base),
         "--loss-per-node", str(loss)],
        stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True)
    checks: list[tuple[str, bool, str]] = []
    started = time.perf_counter()
    try:
        line = server.stdout.readline().strip()
        if not line.startswith("LISTENING "):
            print(f"server failed to start: {line!r}", file=sys.stderr)
            return RUNTIME
        port = int(line.split()[1])
        spec = protocol.ServerSpec(
            "127.0.0.1", port, protocol.RETROACTIVE,
            import_pipeline=load_pipeline(config_dir / "import_water.xml"),
            export_pipeline=load_pipeline(config_dir / "export_water.xml"))
        model = toy.GrowthModel(seed=args.seed)
        report = protocol.client_run([spec], model, args.steps, toy.default_env,
                                     timeout_s=args.timeout_s)
        final = report.final_graph

        offline = toy.GrowthModel(seed=args.seed)
        for _ in range(args.steps):
            offline.step()
        reference = offline.export()
        checks.append(("census-unchanged",
                       final.node_count == reference.node_count
                       and final.edge_count == reference.edge_count,
                       f"{final.node_count} nodes / {final.edge_count} edges"))

        metamers = [n for n in final.nodes.values() if n.type_name == "Metamer"]
        greens = [n for n in metamers
                  if n.prop("color") and n.prop("color").value == "green"]
        checks.append(("internodes-green", len(greens) == len(metamers),
                       f"{len(greens)}/{len(metamers)} green"))

        depths = _metamer_depths(final)
        exact = True
        for n in metamers:
            expected = base - loss * (depths[n.id] - 1)
            got = n.prop("pressure")
            if got is None or got.value != expected:
                exact = False
        checks.append(("pressure-formula", exact,
                       "pressure == base - loss * depth on every metamer"))

        reparsed = parse_xeg(serialize_xeg(final))
        checks.append(("roundtrip-coherent",
                       canonical_diff(final, reparsed, 0.0) is None,
                       "serialize/parse preserves the final graph exactly"))
    except BridgeError as exc:
        print(f"demo failed: {exc}", file=sys.stderr)
        return RUNTIME
    finally:
        server.terminate()
        server.wait(timeout=10)
    elapsed = time.perf_counter() - started
    failed = [name for name, ok, _ in checks if not ok]
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    print(f"{'FAIL' if failed else 'PASS'} ({args.steps} steps, {elapsed:.2f}s)")
    return DIFFERENT if failed else OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fspm-bridge",
        description="Exchange-graph middleware: convert, validate and diff XEG "
                    "files, serve target models, run integrated simulations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="parse, run a pipeline, and write canonical XEG")
    p.add_argument("input")
    p.add_argument("pipeline", help="pipeline configuration file")
    p.add_argument("output")
    p.add_argument("--lenient", action="store_true",
                   help="downgrade unknown attributes/elements to warnings")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate", help="check a file against the model invariants")
    p.add_argument("input")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("diff", help="canonical comparison of two files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tol", type=float, default=1e-9,
                   help="relative float tolerance (default 1e-9)")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("serve", help="serve a built-in target model")
    p.add_argument("--port", type=int, required=True, help="0 picks a free port")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--model", choices=("water", "status", "color", "echo"),
                   default="water")
    p.add_argument("--base-pressure", type=float, default=100.0)
    p.add_argument("--loss-per-node", type=float, default=10.0)
    p.add_argument("--color-value", default="green")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("run", help="drive the growth model against a roster of servers")
    p.add_argument("--roster", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="path for the final XEG")
    p.add_argument("--report", help="optional JSON run report path")
    p.add_argument("--timeout-s", type=float, default=30.0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("demo-roundtrip",
                       help="spawn a water server, run the retroactive loop, "
                            "verify the postconditions")
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout-s", type=float, default=30.0)
    p.set_defaults(func=cmd_demo_roundtrip)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("FSPM_BRIDGE_LOG", "warning").upper()
    logging.basicConfig(stream=sys.stderr,
                        level=getattr(logging, level, logging.WARNING),
                        format="%(name)s %(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_ERROR
    except (ProtocolError, PipelineError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME
    except KeyboardInterrupt:
        return RUNTIME


if __name__ == "__main__":
    sys.exit(main())
