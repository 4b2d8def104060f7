"""Deterministic text and DOT dumps of a store."""

from __future__ import annotations

import json

from .engine import SocialMemory


def _q(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def text_report(mem: SocialMemory) -> str:
    graph, chain = mem.graph, mem.chain
    lines = ["[persons]"]
    for p in graph.persons():
        name = _q(p.name) if p.name is not None else "-"
        lines.append(f"{p.face_id}  name={name}  created_at={p.created_at}"
                     f"  messages={chain.history_length(p)}")
        for cat in sorted(p.attributes):
            lines.append(f"    {cat}: {', '.join(p.attributes[cat])}")
    lines.append("")
    lines.append("[edges]")
    for e in sorted(graph.edges(), key=lambda e: e.key):
        lines.append(f"{e.source} -[{e.label}]-> {e.target}")
    lines.append("")
    lines.append("[chains]")
    for p in graph.persons():
        lines.append(f"{p.face_id}  {chain.history_length(p)}")
    lines.append("")
    lines.append("[aliases]")
    for dup, survivor in sorted(graph.alias_table().items()):
        lines.append(f"{dup} -> {survivor}")
    return "\n".join(lines) + "\n"


def dot_report(mem: SocialMemory) -> str:
    graph = mem.graph
    lines = ["digraph social_world {"]
    for p in graph.persons():
        label = p.name or p.face_id
        lines.append(f"  {_q(p.face_id)} [label={_q(label)}];")
    for e in sorted(graph.edges(), key=lambda e: e.key):
        lines.append(f"  {_q(e.source)} -> {_q(e.target)} [label={_q(e.label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
