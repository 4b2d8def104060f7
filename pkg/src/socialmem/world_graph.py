"""In-process social graph: people, their attributes and who relates to whom."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .errors import MergeError, SelfEdgeError, ValidationError
from .kernels import edit_distance

log = logging.getLogger(__name__)

SPEECH_PREFIX = "spk-"
VISION_PREFIX = "face-"
DEFAULT_NAME_THRESHOLD = 2


def is_speech_face(face_id: str) -> bool:
    return face_id.startswith(SPEECH_PREFIX)


def normalize_label(label: str) -> str:
    out = "_".join(label.strip().upper().replace("-", " ").split())
    if not out:
        raise ValidationError("relationship label must be non-empty")
    return out


@dataclass
class PersonNode:
    face_id: str
    created_at: int
    name: str | None = None
    attributes: dict[str, list[str]] = field(default_factory=dict)
    chain_head: int | None = None
    aliases: list[str] = field(default_factory=list)
    merged_into: str | None = None

    @property
    def live(self) -> bool:
        return self.merged_into is None

    @property
    def speech_derived(self) -> bool:
        return is_speech_face(self.face_id)


@dataclass(frozen=True)
class RelationshipEdge:
    source: str
    target: str
    label: str
    source_utterance_id: int | None = None

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.source, self.target, self.label)


@dataclass
class RelateOutcome:
    edge: RelationshipEdge
    edge_created: bool
    created: list[PersonNode]


class WorldGraph:
    """Person nodes keyed by face id, with relationship edges between them.

    Merged nodes stay behind as tombstones whose ``merged_into`` forwards to
    the survivor, so any face id ever issued keeps resolving to a live node.
    Mutations serialize on ``lock``.
    """

    def __init__(self, name_threshold: int = DEFAULT_NAME_THRESHOLD):
        self.name_threshold = name_threshold
        self.lock = threading.RLock()
        self._nodes: dict[str, PersonNode] = {}
        self._edges: list[RelationshipEdge] = []
        self._edge_keys: set[tuple[str, str, str]] = set()
        self._seq = 0
        self._face_seq = {SPEECH_PREFIX: 0, VISION_PREFIX: 0}
        self._merge_hooks: list[Callable[[PersonNode, PersonNode], None]] = []

    # -- lookup -------------------------------------------------------------

    def on_merge(self, hook: Callable[[PersonNode, PersonNode], None]) -> None:
        """Register ``hook(survivor, duplicate)``; runs inside merge_persons."""
        self._merge_hooks.append(hook)

    def resolve(self, face_id: str) -> PersonNode | None:
        node = self._nodes.get(face_id)
        while node is not None and node.merged_into is not None:
            node = self._nodes[node.merged_into]
        return node

    def live(self, person: PersonNode) -> PersonNode:
        node = self.resolve(person.face_id)
        if node is None:
            raise ValidationError(f"unknown person {person.face_id!r}")
        return node

    def persons(self, include_tombstones: bool = False) -> list[PersonNode]:
        nodes = sorted(self._nodes.values(), key=lambda p: p.created_at)
        return nodes if include_tombstones else [p for p in nodes if p.live]

    def edges(self) -> list[RelationshipEdge]:
        return list(self._edges)

    def edges_of(self, person: PersonNode) -> Iterator[RelationshipEdge]:
        face = self.live(person).face_id
        return (e for e in self._edges if face in (e.source, e.target))

    def alias_table(self) -> dict[str, str]:
        """Every tombstoned face id mapped to its live survivor."""
        return {f: self.resolve(f).face_id for f, n in self._nodes.items() if not n.live}

    def new_face_id(self, speech: bool = False) -> str:
        prefix = SPEECH_PREFIX if speech else VISION_PREFIX
        with self.lock:
            while True:
                self._face_seq[prefix] += 1
                face = f"{prefix}{self._face_seq[prefix]:06d}"
                if face not in self._nodes:
                    return face

    # -- person operations --------------------------------------------------

    def upsert_person(self, face_id: str) -> PersonNode:
        if not face_id or not face_id.strip():
            raise ValidationError("face_id must be non-empty")
        with self.lock:
            node = self.resolve(face_id)
            if node is None:
                self._seq += 1
                node = PersonNode(face_id=face_id, created_at=self._seq)
                self._nodes[face_id] = node
            return node

    def set_name(self, person: PersonNode, name: str) -> None:
        clean = name.strip() if name else ""
        if not clean:
            raise ValidationError("name must be non-empty")
        with self.lock:
            node = self.live(person)
            if node.name is not None and node.name != clean:
                log.info("renaming %s: %r -> %r", node.face_id, node.name, clean)
            node.name = clean

    def add_attribute(self, person: PersonNode, category: str, value: str) -> bool:
        """Store ``value`` under ``category``; returns False if already present."""
        cat = category.strip().lower() if category else ""
        val = value.strip() if value else ""
        if not cat or not val:
            raise ValidationError("attribute category and value must be non-empty")
        with self.lock:
            node = self.live(person)
            values = node.attributes.setdefault(cat, [])
            if val in values:
                return False
            values.append(val)
            return True

    def find_closest_name(self, name: str) -> tuple[PersonNode, int] | None:
        """Live named node nearest to ``name`` within the edit threshold.

        Ties go to the earliest-created node.
        """
        query = name.strip() if name else ""
        if not query:
            raise ValidationError("name must be non-empty")
        best: tuple[PersonNode, int] | None = None
        qlen = len(query.casefold())
        for node in self.persons():
            if node.name is None:
                continue
            # edit distance is at least the length difference
            if abs(len(node.name.casefold()) - qlen) > self.name_threshold:
                continue
            d = edit_distance(query, node.name)
            if d <= self.name_threshold and (best is None or d < best[1]):
                best = (node, d)
                if d == 0:
                    break
        return best

    def person_summary(self, person: PersonNode) -> str:
        node = self.live(person)
        lines = []
        if node.name:
            lines.append(f"Name: {node.name}")
        for cat in sorted(node.attributes):
            if node.attributes[cat]:
                lines.append(f"{cat}: {', '.join(node.attributes[cat])}")
        return "\n".join(lines)

    # -- relationships -------------------------------------------------------

    def _resolve_name(self, name: str | None, speaker: PersonNode | None) -> PersonNode | None:
        if name is None:
            if speaker is None:
                raise ValidationError("a name or a speaker is required")
            return self.live(speaker)
        hit = self.find_closest_name(name)
        return hit[0] if hit else None

    def _create_named(self, name: str) -> PersonNode:
        node = self.upsert_person(self.new_face_id(speech=True))
        self.set_name(node, name)
        return node

    def relate(self, subject_name: str | None, object_name: str | None, label: str,
               speaker: PersonNode | None = None,
               source_utterance_id: int | None = None) -> RelateOutcome:
        """:meth:`add_relationship` that also reports what it created."""
        lab = normalize_label(label)
        if subject_name is not None and not subject_name.strip():
            raise ValidationError("subject name must be non-empty")
        if object_name is not None and not object_name.strip():
            raise ValidationError("object name must be non-empty")
        with self.lock:
            subj = self._resolve_name(subject_name, speaker)
            obj = self._resolve_name(object_name, speaker)
            if subj is not None and subj is obj:
                raise SelfEdgeError(f"{subj.face_id} cannot relate to itself")
            if subj is None and obj is None and (
                    edit_distance(subject_name, object_name) <= self.name_threshold):
                raise SelfEdgeError(f"{subject_name!r} and {object_name!r} resolve to one person")
            created = []
            if subj is None:
                subj = self._create_named(subject_name)
                created.append(subj)
            if obj is None:
                obj = self._create_named(object_name)
                created.append(obj)
            edge = RelationshipEdge(subj.face_id, obj.face_id, lab, source_utterance_id)
            if edge.key in self._edge_keys:
                existing = next(e for e in self._edges if e.key == edge.key)
                return RelateOutcome(existing, False, created)
            self._edges.append(edge)
            self._edge_keys.add(edge.key)
            return RelateOutcome(edge, True, created)

    def add_relationship(self, subject_name: str | None, object_name: str | None, label: str,
                         speaker: PersonNode | None = None,
                         source_utterance_id: int | None = None) -> RelationshipEdge:
        """Idempotently store ``subject -[label]-> object``.

        Names resolve through :meth:`find_closest_name`; a ``None`` name means
        the speaker. Unresolved names become new speech-derived persons.
        """
        return self.relate(subject_name, object_name, label, speaker, source_utterance_id).edge

    # -- merging --------------------------------------------------------------

    @staticmethod
    def choose_survivor(a: PersonNode, b: PersonNode) -> tuple[PersonNode, PersonNode]:
        """(survivor, duplicate): a vision-derived node wins, else the older one."""
        if a.speech_derived != b.speech_derived:
            return (b, a) if a.speech_derived else (a, b)
        return (a, b) if a.created_at <= b.created_at else (b, a)

    def merge_persons(self, survivor: PersonNode, duplicate: PersonNode) -> PersonNode:
        with self.lock:
            if not survivor.live or not duplicate.live:
                raise MergeError("cannot merge a tombstoned person")
            if survivor is duplicate or survivor.face_id == duplicate.face_id:
                raise MergeError("cannot merge a person into itself")
            if survivor.name is None and duplicate.name is not None:
                survivor.name = duplicate.name
            for cat, values in duplicate.attributes.items():
                target = survivor.attributes.setdefault(cat, [])
                target.extend(v for v in values if v not in target)
            self._rewire(duplicate.face_id, survivor.face_id)
            for hook in self._merge_hooks:
                hook(survivor, duplicate)
            survivor.aliases.append(duplicate.face_id)
            survivor.aliases.extend(duplicate.aliases)
            duplicate.aliases = []
            duplicate.merged_into = survivor.face_id
            duplicate.attributes = {}
            duplicate.chain_head = None
            log.info("merged %s into %s", duplicate.face_id, survivor.face_id)
            return survivor

    def _rewire(self, old: str, new: str) -> None:
        edges, keys = [], set()
        for e in self._edges:
            src = new if e.source == old else e.source
            dst = new if e.target == old else e.target
            if src == dst:
                continue
            moved = RelationshipEdge(src, dst, e.label, e.source_utterance_id)
            if moved.key in keys:
                continue
            keys.add(moved.key)
            edges.append(moved)
        self._edges, self._edge_keys = edges, keys

    # -- persistence ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "persons": [
                {
                    "face_id": p.face_id,
                    "created_at": p.created_at,
                    "name": p.name,
                    "attributes": p.attributes,
                    "chain_head": p.chain_head,
                    "aliases": p.aliases,
                    "merged_into": p.merged_into,
                }
                for p in self.persons(include_tombstones=True)
            ],
            "edges": [
                {"from": e.source, "to": e.target, "label": e.label,
                 "source_utterance_id": e.source_utterance_id}
                for e in self._edges
            ],
            "aliases": self.alias_table(),
            "counters": {"person": self._seq, "speech_face": self._face_seq[SPEECH_PREFIX],
                         "vision_face": self._face_seq[VISION_PREFIX]},
        }

    @classmethod
    def from_dict(cls, data: dict, name_threshold: int = DEFAULT_NAME_THRESHOLD) -> "WorldGraph":
        g = cls(name_threshold=name_threshold)
        for p in data["persons"]:
            g._nodes[p["face_id"]] = PersonNode(
                face_id=p["face_id"], created_at=p["created_at"], name=p["name"],
                attributes={k: list(v) for k, v in p["attributes"].items()},
                chain_head=p["chain_head"], aliases=list(p["aliases"]),
                merged_into=p["merged_into"],
            )
        for e in data["edges"]:
            edge = RelationshipEdge(e["from"], e["to"], e["label"], e["source_utterance_id"])
            g._edges.append(edge)
            g._edge_keys.add(edge.key)
        c = data["counters"]
        g._seq = c["person"]
        g._face_seq = {SPEECH_PREFIX: c["speech_face"], VISION_PREFIX: c["vision_face"]}
        return g
