"""Relationship and attribute extraction from utterances.

Extractors return an :class:`ExtractionResult`; :func:`apply` turns it into
graph mutations from a closed vocabulary (create-node, create-edge,
add-attribute). Extractors never emit query text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Protocol

from .errors import SocialMemError, ValidationError
from .world_graph import PersonNode, WorldGraph, normalize_label

SPEAKER = "speaker"
THIRD_PARTY = "third_party"

# capitalised words that start sentences but are never names
_NOT_NAMES = frozenset(
    "I My Me Mine The This That These Those He She It We They You Your His Her Its Our "
    "Their What Who Where When Why How Hi Hello Hey Yes No Okay Ok And But So Today "
    "Tomorrow Yesterday There Here Is Are Was Do Does Did Can Could Would Should".split()
)


@dataclass(frozen=True)
class AttributeFact:
    target: str  # "speaker" or "named"
    category: str
    value: str
    name: str | None = None


@dataclass(frozen=True)
class ExtractionResult:
    is_relationship: bool = False
    subject_role: str = SPEAKER
    subject_name: str | None = None
    object_name: str | None = None
    relation_label: str | None = None
    attributes: tuple[AttributeFact, ...] = ()
    introduced_name: str | None = None

    def __post_init__(self):
        if self.is_relationship and (not self.relation_label or not self.object_name):
            raise ValidationError("a relationship needs a label and an object name")
        if self.subject_role not in (SPEAKER, THIRD_PARTY):
            raise ValidationError(f"bad subject role {self.subject_role!r}")

    @property
    def empty(self) -> bool:
        return not self.is_relationship and not self.attributes and not self.introduced_name


class Extractor(Protocol):
    def extract(self, utterance: str, speaker_name: str | None = None) -> ExtractionResult: ...


def load_rules(path: str | Path | None = None) -> dict:
    if path is None:
        text = resources.files("socialmem.data").joinpath("extraction_rules.json").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return json.loads(text)


class RuleExtractor:
    """Pattern-table extractor; the table is a JSON data file.

    Placeholders in rule patterns: ``{NAME}``/``{SUBJECT}`` (capitalised
    token), ``{REL}`` (any key of ``relations``), ``{VALUE}`` (free text up
    to punctuation).
    """

    def __init__(self, rules: dict | None = None):
        self.table = rules if rules is not None else load_rules()
        self.relations = {k.lower(): v for k, v in self.table["relations"].items()}
        name = self.table["name_pattern"]
        rel = "|".join(re.escape(k) for k in sorted(self.relations, key=len, reverse=True))
        subs = {
            "{NAME}": f"(?P<name>{name})",
            "{SUBJECT}": f"(?P<subject>{name})",
            "{REL}": f"(?P<rel>(?i:{rel}))",
            "{VALUE}": f"(?P<value>{self.table['value_pattern']})",
        }
        self.rules = []
        for rule in self.table["rules"]:
            pattern = rule["pattern"]
            for key, val in subs.items():
                pattern = pattern.replace(key, val)
            self.rules.append((rule, re.compile(pattern)))

    def _names_ok(self, m: re.Match) -> bool:
        groups = m.groupdict()
        return all(groups.get(g) is None or groups[g] not in _NOT_NAMES
                   for g in ("name", "subject"))

    def extract(self, utterance: str, speaker_name: str | None = None) -> ExtractionResult:
        if not utterance or not utterance.strip():
            raise ValidationError("utterance must be non-empty")
        relation = None
        attributes: list[AttributeFact] = []
        introduced = None
        for rule, rx in self.rules:
            for m in rx.finditer(utterance):
                if not self._names_ok(m):
                    continue
                kind = rule["kind"]
                if kind == "introduction" and introduced is None:
                    introduced = m.group("name")
                elif kind == "relationship" and relation is None:
                    label = self.relations[m.group("rel").lower()]
                    if rule["subject"] == SPEAKER:
                        relation = (SPEAKER, speaker_name, m.group("name"), label)
                    else:
                        relation = (THIRD_PARTY, m.group("subject"), m.group("name"), label)
                elif kind == "attribute":
                    value = m.group("value").strip()
                    if not value:
                        continue
                    name = m.group("name") if rule["target"] == "named" else None
                    fact = AttributeFact(rule["target"], rule["category"], value, name)
                    if fact not in attributes:
                        attributes.append(fact)
        if relation is None:
            return ExtractionResult(attributes=tuple(attributes), introduced_name=introduced)
        role, subj, obj, label = relation
        return ExtractionResult(True, role, subj, obj, label, tuple(attributes), introduced)


@dataclass
class Mutation:
    op: str  # create-node | create-edge | add-attribute
    target: str
    detail: str
    status: str = "applied"


@dataclass
class MutationLog:
    entries: list[Mutation] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def count(self, op: str, status: str = "applied") -> int:
        return sum(1 for m in self.entries if m.op == op and m.status == status)


def apply(result: ExtractionResult, speaker: PersonNode, graph: WorldGraph,
          source_utterance_id: int | None = None) -> MutationLog:
    """Apply an extraction to the graph; returns one entry per effective change.

    Re-applying an identical result is a no-op with an empty log. A rejected
    step is logged with status ``rejected`` and the rest still applies.
    """
    out = MutationLog()
    with graph.lock:
        speaker = graph.live(speaker)
        if result.is_relationship:
            subject = None if result.subject_role == SPEAKER else result.subject_name
            try:
                res = graph.relate(subject, result.object_name,
                                   normalize_label(result.relation_label),
                                   speaker=speaker, source_utterance_id=source_utterance_id)
            except SocialMemError as exc:
                out.entries.append(Mutation("create-edge", speaker.face_id, str(exc), "rejected"))
            else:
                for node in res.created:
                    out.entries.append(Mutation("create-node", node.face_id, node.name or ""))
                if res.edge_created:
                    e = res.edge
                    out.entries.append(Mutation("create-edge", e.source, f"{e.label}->{e.target}"))
        for fact in result.attributes:
            if fact.target == SPEAKER:
                target = speaker
            else:
                hit = graph.find_closest_name(fact.name)
                if hit is None:
                    target = graph.upsert_person(graph.new_face_id(speech=True))
                    graph.set_name(target, fact.name)
                    out.entries.append(Mutation("create-node", target.face_id, fact.name))
                else:
                    target = hit[0]
            try:
                stored = graph.add_attribute(target, fact.category, fact.value)
            except SocialMemError as exc:
                out.entries.append(Mutation("add-attribute", target.face_id, str(exc), "rejected"))
                continue
            if stored:
                out.entries.append(
                    Mutation("add-attribute", target.face_id, f"{fact.category}={fact.value}"))
    return out
