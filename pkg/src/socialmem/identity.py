"""Face-stream identity: frame majority voting and merge-on-introduction."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from .errors import ValidationError
from .world_graph import PersonNode, WorldGraph

UNKNOWN = "unknown"
DEFAULT_VOTES = 15


@dataclass(frozen=True)
class FrameVote:
    candidate: str = UNKNOWN
    confidence: float = 1.0

    def __post_init__(self):
        if not self.candidate:
            raise ValidationError("a vote needs a candidate (use 'unknown')")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError("confidence must lie in [0, 1]")


def majority_candidate(votes: Sequence[FrameVote], n: int = DEFAULT_VOTES) -> str | None:
    """The known candidate holding more than half of ``n`` votes, if any."""
    if len(votes) != n:
        raise ValidationError(f"expected {n} votes, got {len(votes)}")
    tally = Counter(v.candidate for v in votes if v.candidate != UNKNOWN)
    for candidate, count in tally.items():
        if 2 * count > n:
            return candidate
    return None


def resolve_identity(graph: WorldGraph, votes: Sequence[FrameVote],
                     n: int = DEFAULT_VOTES) -> str:
    """Face id for a burst of ``n`` frames; a fresh id unless one candidate has a strict majority.

    A winning candidate's node is upserted, so an unseen known id becomes a
    person too; a fresh id always gets a new node.
    """
    winner = majority_candidate(votes, n)
    if winner is None:
        winner = graph.new_face_id()
    return graph.upsert_person(winner).face_id


def resolve_on_introduction(graph: WorldGraph, person: PersonNode, spoken_name: str) -> PersonNode:
    """Attach a spoken name; merge with the nearest differently-identified namesake."""
    name = spoken_name.strip() if spoken_name else ""
    if not name:
        raise ValidationError("spoken name must be non-empty")
    with graph.lock:
        node = graph.live(person)
        hit = graph.find_closest_name(name)
        if hit is None or hit[0] is node:
            graph.set_name(node, name)
            return node
        survivor, duplicate = graph.choose_survivor(node, hit[0])
        graph.merge_persons(survivor, duplicate)
        graph.set_name(survivor, name)
        return survivor


class FrameClassifier(Protocol):
    def classify(self, image: bytes | str) -> FrameVote: ...


class MockFrameClassifier:
    """Looks frames up by fixture name; anything unlisted votes unknown."""

    def __init__(self, table: dict[str, str] | None = None):
        self.table = dict(table or {})

    @classmethod
    def from_file(cls, path: str | Path) -> "MockFrameClassifier":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def classify(self, image: bytes | str) -> FrameVote:
        key = image.decode("utf-8", "replace") if isinstance(image, bytes) else image
        return FrameVote(self.table.get(Path(key).name, UNKNOWN))
