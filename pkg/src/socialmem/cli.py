"""Operator command line: ``socialmem {serve,chat,inspect,snapshot,bench}``.

Exit codes: 0 ok, 1 configuration error, 2 unreadable or corrupt store.
"""

from __future__ import annotations

import argparse
import asyncio
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import TextIO

from . import bench as bench_mod
from .engine import EngineConfig, SocialMemory
from .errors import BenchError, SnapshotError, ValidationError
from .llm import parse_model_spec
from .orchestrator import ACTION, SAY_AND_ACTION, SILENT
from .report import dot_report, text_report
from .service import parse_bind, serve
from .wire import WireRequest

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STORE = 2


class ConfigError(Exception):
    pass


def _engine_config(args) -> EngineConfig:
    try:
        cfg = EngineConfig.from_file(args.config) if args.config else EngineConfig()
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        return cfg
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _open_store(args) -> SocialMemory:
    cfg = _engine_config(args)
    try:
        model = parse_model_spec(args.model)
    except (ValidationError, OSError, ValueError) as exc:
        raise ConfigError(f"bad --model: {exc}") from exc
    if args.store and Path(args.store).exists():
        return SocialMemory.load(args.store, model=model)
    return SocialMemory(cfg, model=model)


# -- chat --------------------------------------------------------------------


def _find_person(mem: SocialMemory, who: str | None):
    g = mem.graph
    if who:
        node = g.resolve(who)
        if node is not None:
            return g.live(node)
        for p in g.persons():
            if p.name is not None and p.name.casefold() == who.casefold():
                return p
    node = g.upsert_person(g.new_face_id())
    if who:
        g.set_name(node, who)
    return node


def format_envelope(resp) -> list[str]:
    out = []
    if resp.kind == SILENT:
        out.append("robot: (silent)")
    elif resp.kind == ACTION:
        out.append(f"robot [action: {resp.action['name']}]")
    elif resp.kind == SAY_AND_ACTION:
        out.append(f"robot [action: {resp.action['name']}]: {resp.text}")
    else:
        out.append(f"robot: {resp.text}")
    for api, msg in sorted(resp.errors.items()):
        out.append(f"error[{api}]: {msg}")
    return out


def _graph_lines(mem: SocialMemory) -> list[str]:
    g = mem.graph

    def label(face):
        node = g.resolve(face)
        return f"{node.name} ({node.face_id})" if node.name else node.face_id

    edges = sorted(g.edges(), key=lambda e: e.key)
    if not edges:
        return ["(no relationships)"]
    return [f"{label(e.source)} -[{e.label}]-> {label(e.target)}" for e in edges]


def chat_loop(mem: SocialMemory, who: str | None, stdin: TextIO, stdout: TextIO) -> None:
    """Line-in, envelope-out REPL. Output carries no timings so transcripts are stable."""
    person = _find_person(mem, who)
    stdout.write(f"talking to {person.face_id}. /who /graph /context /quit\n")
    for raw in stdin:
        line = raw.rstrip("\n")
        stdout.write(f"> {line}\n")
        text = line.strip()
        if not text:
            continue
        person = mem.graph.live(person)
        if text == "/quit":
            break
        if text == "/who":
            summary = mem.graph.person_summary(person)
            stdout.write(f"{person.face_id}\n{summary or '(nothing known yet)'}\n")
            continue
        if text == "/graph":
            stdout.write("\n".join(_graph_lines(mem)) + "\n")
            continue
        if text == "/context":
            ctx = mem.last_context.get(person.face_id)
            if ctx is None:
                stdout.write("(no context assembled yet)\n")
            else:
                stdout.write(f"{len(ctx)} messages\n{ctx.render()}\n")
            continue
        if text.startswith("/"):
            stdout.write(f"unknown command {text}\n")
            continue
        resp = mem.handle(WireRequest("repl", text, face_id=person.face_id))
        stdout.write("\n".join(format_envelope(resp)) + "\n")
        person = mem.graph.resolve(resp.face_id)
    stdout.flush()


# -- commands ----------------------------------------------------------------


def cmd_serve(args) -> int:
    mem = _open_store(args)
    parse_bind(args.bind)

    def ready(host, port):
        print(f"listening on {host}:{port}", flush=True)

    asyncio.run(serve(mem, args.bind, args.store, ready=ready))
    return EXIT_OK


def cmd_chat(args) -> int:
    mem = _open_store(args)
    chat_loop(mem, args.person, sys.stdin, sys.stdout)
    if args.store:
        mem.save(args.store)
    return EXIT_OK


def _load_existing(path: str) -> SocialMemory:
    if not Path(path).exists():
        raise SnapshotError(f"no store at {path}")
    return SocialMemory.load(path)


def cmd_inspect(args) -> int:
    mem = _load_existing(args.store)
    sys.stdout.write(dot_report(mem) if args.dot else text_report(mem))
    return EXIT_OK


def cmd_snapshot_verify(args) -> int:
    raw = Path(args.store).read_text(encoding="utf-8") if Path(args.store).exists() else None
    mem = _load_existing(args.store)
    again = mem.dumps() + "\n"
    if raw != again:
        print("store loads but does not re-serialize byte-identically", file=sys.stderr)
        return EXIT_STORE
    persons = len(mem.graph.persons())
    print(f"ok: {persons} persons, {len(mem.chain)} messages, {len(mem.graph.edges())} edges")
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        questions = None
        if args.questions:
            data = json.loads(Path(args.questions).read_text(encoding="utf-8"))
            questions = data["questions"] if isinstance(data, dict) else data
        kw = {} if questions is None else {"questions": questions}
        cfg = bench_mod.BenchConfig(
            message_counts=args.counts, repetitions=args.repetitions,
            model_latency_per_message=args.latency, strategies=tuple(args.strategies),
            seed=args.seed or 0, dim=args.dim, **kw)
    except (BenchError, OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    progress = (lambda m: print(m, file=sys.stderr, flush=True)) if args.verbose else None
    result = bench_mod.run(cfg, progress=progress)
    sys.stdout.write(result.summary_table())
    if args.out:
        for kind, path in result.write(args.out).items():
            print(f"{kind}: {path}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--store", help="snapshot file (created if missing)")
    common.add_argument("--config", help="engine config JSON")
    common.add_argument("--seed", type=int, help="index construction seed")
    common.add_argument("--model", default="echo",
                        help="echo | scripted:<file> | latency:<ms-per-message>")

    p = argparse.ArgumentParser(prog="socialmem", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("serve", parents=[common], help="run the NDJSON service")
    s.add_argument("--bind", default="127.0.0.1:7878")
    s.set_defaults(func=cmd_serve)

    c = sub.add_parser("chat", parents=[common], help="interactive REPL")
    c.add_argument("person", nargs="?", help="face id or name (created if unknown)")
    c.set_defaults(func=cmd_chat)

    i = sub.add_parser("inspect", parents=[common], help="dump the social graph")
    i.add_argument("--dot", action="store_true", help="emit Graphviz DOT")
    i.set_defaults(func=cmd_inspect)

    sn = sub.add_parser("snapshot", help="snapshot maintenance")
    snsub = sn.add_subparsers(dest="action", required=True)
    v = snsub.add_parser("verify", parents=[common], help="check a store loads and round-trips")
    v.set_defaults(func=cmd_snapshot_verify)

    b = sub.add_parser("bench", parents=[common], help="RAG vs full-history benchmark")
    b.add_argument("--counts", type=int, nargs="+", default=[1000, 2000, 4000, 8000, 14000])
    b.add_argument("--repetitions", type=int, default=3)
    b.add_argument("--latency", type=float, default=1.0, help="simulated ms per context message")
    b.add_argument("--strategies", nargs="+", default=list(bench_mod.STRATEGIES),
                   choices=bench_mod.STRATEGIES)
    b.add_argument("--questions", help="JSON list (or {\"questions\": [...]}) of questions")
    b.add_argument("--dim", type=int, default=1536)
    b.add_argument("--out", help="directory for records.csv, summary.json/.txt, latency.dat")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    needs_store = args.command in ("inspect", "snapshot")
    if needs_store and not args.store:
        print("error: --store is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SnapshotError as exc:
        print(f"store error: {exc}", file=sys.stderr)
        return EXIT_STORE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
