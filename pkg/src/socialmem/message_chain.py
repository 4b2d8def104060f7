"""Per-person, append-only chain of exchanges, each indexed for semantic search."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

from .embedding import Embedder
from .errors import UnknownMessageError, ValidationError
from .vector_index import IndexEntry, VectorIndex
from .world_graph import PersonNode, WorldGraph


@dataclass
class MessageNode:
    message_id: int
    face_id: str
    user_text: str
    reply_text: str
    timestamp: int
    wall_time: float = 0.0
    prev_id: int | None = None
    next_id: int | None = None


def embedded_text(user_text: str, reply_text: str) -> str:
    return f"USER: {user_text}\nROBOT: {reply_text}"


class MessageChain:
    """Doubly linked message chains for every person, plus their index entries.

    ``timestamp`` is a logical clock shared by all chains, so two messages
    never share one and merged chains interleave unambiguously.
    """

    def __init__(self, graph: WorldGraph, index: VectorIndex, embedder: Embedder):
        self.graph = graph
        self.index = index
        self.embedder = embedder
        self.lock = threading.RLock()
        self._messages: dict[int, MessageNode] = {}
        self._length: dict[str, int] = {}
        self._next_id = 0
        self._clock = 0
        graph.on_merge(self.merge_chains)

    def __len__(self) -> int:
        return len(self._messages)

    def get(self, message_id: int) -> MessageNode:
        try:
            return self._messages[message_id]
        except KeyError:
            raise UnknownMessageError(message_id) from None

    def append_message(self, person: PersonNode, user_text: str, reply_text: str) -> MessageNode:
        if not user_text or not user_text.strip() or not reply_text or not reply_text.strip():
            raise ValidationError("user and reply text must be non-empty")
        node = self.graph.live(person)
        vec = self.embedder.embed(embedded_text(user_text, reply_text))
        with self.lock:
            self._next_id += 1
            self._clock += 1
            msg = MessageNode(self._next_id, node.face_id, user_text, reply_text,
                              self._clock, time.time(), prev_id=node.chain_head)
            self.index.insert(IndexEntry(msg.message_id, node.face_id, vec))
            if node.chain_head is not None:
                self._messages[node.chain_head].next_id = msg.message_id
            self._messages[msg.message_id] = msg
            node.chain_head = msg.message_id
            self._length[node.face_id] = self._length.get(node.face_id, 0) + 1
        return msg

    def history_length(self, person: PersonNode) -> int:
        return self._length.get(self.graph.live(person).face_id, 0)

    def last_n(self, person: PersonNode, n: int) -> list[MessageNode]:
        """Up to ``n`` newest messages, oldest first."""
        if n < 1:
            raise ValidationError("n must be positive")
        out = []
        cur = self.graph.live(person).chain_head
        while cur is not None and len(out) < n:
            msg = self._messages[cur]
            out.append(msg)
            cur = msg.prev_id
        out.reverse()
        return out

    def walk(self, person: PersonNode) -> list[MessageNode]:
        """Whole chain, oldest first."""
        out = []
        cur = self.graph.live(person).chain_head
        while cur is not None:
            msg = self._messages[cur]
            out.append(msg)
            cur = msg.prev_id
        out.reverse()
        return out

    def neighbors(self, message_id: int) -> tuple[MessageNode | None, MessageNode | None]:
        msg = self.get(message_id)
        prev = self._messages[msg.prev_id] if msg.prev_id is not None else None
        nxt = self._messages[msg.next_id] if msg.next_id is not None else None
        return prev, nxt

    def merge_chains(self, survivor: PersonNode, duplicate: PersonNode) -> None:
        """Interleave the duplicate's chain into the survivor's by timestamp."""
        with self.lock:
            merged = sorted(self.walk(survivor) + self.walk(duplicate), key=lambda m: m.timestamp)
            self._link(merged, survivor.face_id)
            survivor.chain_head = merged[-1].message_id if merged else None
            duplicate.chain_head = None
            self._length[survivor.face_id] = len(merged)
            self._length.pop(duplicate.face_id, None)
            self.index.alias(duplicate.face_id, survivor.face_id)

    def _link(self, ordered: list[MessageNode], face_id: str) -> None:
        prev = None
        for msg in ordered:
            msg.face_id = face_id
            msg.prev_id = prev.message_id if prev else None
            msg.next_id = None
            if prev is not None:
                prev.next_id = msg.message_id
            prev = msg

    # -- persistence ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "messages": [
                {"message_id": m.message_id, "face_id": m.face_id, "user_text": m.user_text,
                 "reply_text": m.reply_text, "timestamp": m.timestamp, "wall_time": m.wall_time}
                for m in sorted(self._messages.values(), key=lambda m: m.message_id)
            ],
            "counters": {"message": self._next_id, "clock": self._clock},
        }

    def restore(self, data: dict) -> None:
        """Rebuild chains from a flat message list; links come from timestamps.

        Index entries are restored separately by the caller.
        """
        by_face: dict[str, list[MessageNode]] = {}
        for m in data["messages"]:
            msg = MessageNode(m["message_id"], m["face_id"], m["user_text"], m["reply_text"],
                              m["timestamp"], m["wall_time"])
            self._messages[msg.message_id] = msg
            by_face.setdefault(msg.face_id, []).append(msg)
        for face, msgs in by_face.items():
            msgs.sort(key=lambda m: m.timestamp)
            self._link(msgs, face)
            person = self.graph.resolve(face)
            if person is None or person.face_id != face or person.chain_head != msgs[-1].message_id:
                raise ValueError(f"chain for {face!r} does not match its person node")
            self._length[face] = len(msgs)
        self._next_id = data["counters"]["message"]
        self._clock = data["counters"]["clock"]
