"""Hybrid semantic + recency context assembly and reply generation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

from .embedding import Embedder
from .errors import ModelError, RetrievalError, ValidationError
from .llm import LanguageModel
from .locks import KeyedLocks
from .message_chain import MessageChain, MessageNode
from .vector_index import VectorIndex
from .world_graph import PersonNode, WorldGraph

log = logging.getLogger(__name__)

SEMANTIC_HIT = "semantic_hit"
NEIGHBOR = "neighbor"
RECENT = "recent"


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 20
    neighbor_radius: int = 1
    recent: int = 20
    cap: int = 80

    def __post_init__(self):
        if min(self.k, self.recent, self.cap) < 1 or self.neighbor_radius < 0:
            raise ValidationError("retrieval sizes must be positive")


@dataclass
class RetrievedContext:
    messages: list[MessageNode]
    current_input: str
    person_summary: str
    provenance: dict[int, str] = field(default_factory=dict)
    semantic_hits: list[tuple[int, float]] = field(default_factory=list)
    pruned: bool = False
    fallback: bool = False

    def __len__(self) -> int:
        return len(self.messages)

    @property
    def message_ids(self) -> list[int]:
        return [m.message_id for m in self.messages]

    def prompt_messages(self) -> list[dict]:
        return [{"user_text": m.user_text, "reply_text": m.reply_text} for m in self.messages]

    def render(self) -> str:
        lines = [f"summary: {self.person_summary or '-'}"]
        if self.fallback:
            lines.append("(embedding failed: recency-only context)")
        for m in self.messages:
            lines.append(f"[{m.message_id}] ({self.provenance[m.message_id]}) "
                         f"USER: {m.user_text} | ROBOT: {m.reply_text}")
        lines.append(f"input: {self.current_input}")
        return "\n".join(lines)


@dataclass
class SpeechTurn:
    reply: str
    context: RetrievedContext
    message: MessageNode
    retrieval_ms: float
    model_ms: float
    model_wall_ms: float = 0.0


def model_time_ms(model: LanguageModel, context_size: int, wall_ms: float) -> float:
    """Simulated cost when the client reports one, otherwise the measured wall time."""
    simulated = getattr(model, "simulated_ms", None)
    return float(simulated(context_size)) if simulated is not None else wall_ms


class SpeechPipeline:
    """Bounded-context speech generation for one store.

    ``after_reply(person, message)`` runs once the exchange is appended (the
    relationship/attribute check); its failures are logged, never raised.
    """

    def __init__(self, graph: WorldGraph, chain: MessageChain, model: LanguageModel,
                 config: RetrievalConfig | None = None,
                 after_reply: Callable[[PersonNode, MessageNode], object] | None = None,
                 locks: KeyedLocks | None = None):
        self.graph = graph
        self.chain = chain
        self.model = model
        self.config = config or RetrievalConfig()
        self.after_reply = after_reply
        self.locks = locks or KeyedLocks()

    @property
    def index(self) -> VectorIndex:
        return self.chain.index

    @property
    def embedder(self) -> Embedder:
        return self.chain.embedder

    def assemble_context(self, person: PersonNode, input_text: str,
                         allow_fallback: bool = False) -> RetrievedContext:
        if not input_text or not input_text.strip():
            raise ValidationError("input text must be non-empty")
        cfg = self.config
        node = self.graph.live(person)
        summary = self.graph.person_summary(node)
        recent = self.chain.last_n(node, cfg.recent)
        try:
            query = self.embedder.embed(input_text)
        except Exception as exc:
            if not allow_fallback:
                raise RetrievalError(f"embedding failed: {exc}") from exc
            log.warning("embedding failed, using recency-only context: %s", exc)
            kept = recent[-cfg.cap:]
            return RetrievedContext(kept, input_text, summary,
                                    {m.message_id: RECENT for m in kept},
                                    pruned=len(kept) < len(recent), fallback=True)

        hits = self.index.search(query, cfg.k, node.face_id) if recent else []
        # neighbour -> similarity of the best hit it hangs off
        anchor: dict[int, float] = {}
        for mid, sim in hits:
            for nb in self._around(mid):
                if nb.message_id not in anchor:
                    anchor[nb.message_id] = sim

        hit_ids = {mid for mid, _ in hits}
        recent_ids = [m.message_id for m in recent]
        recent_set = set(recent_ids)
        # admission order: recency, then hits by similarity, then neighbour-only
        # entries by their anchor's similarity
        order = list(reversed(recent_ids))
        order += [mid for mid, _ in hits if mid not in recent_set]
        order += [mid for mid in anchor if mid not in hit_ids and mid not in recent_set]
        pruned = len(order) > cfg.cap
        keep = order[: cfg.cap]

        provenance = {}
        for mid in keep:
            if mid in hit_ids:
                provenance[mid] = SEMANTIC_HIT
            elif mid in recent_set:
                provenance[mid] = RECENT
            else:
                provenance[mid] = NEIGHBOR
        messages = sorted((self.chain.get(mid) for mid in keep), key=lambda m: m.timestamp)
        return RetrievedContext(messages, input_text, summary, provenance, hits, pruned=pruned)

    def _around(self, message_id: int) -> list[MessageNode]:
        out = []
        r = self.config.neighbor_radius
        cur = self.chain.get(message_id)
        for _ in range(r):
            if cur.prev_id is None:
                break
            cur = self.chain.get(cur.prev_id)
            out.append(cur)
        cur = self.chain.get(message_id)
        for _ in range(r):
            if cur.next_id is None:
                break
            cur = self.chain.get(cur.next_id)
            out.append(cur)
        return out

    def respond(self, person: PersonNode, input_text: str, preamble: str | None = None,
                model: LanguageModel | None = None) -> SpeechTurn:
        """Assemble, ask the model, append the exchange, then run the checker.

        ``preamble`` lines are shown to the model ahead of the input but are
        not stored in the chain.
        """
        model = model or self.model
        node = self.graph.live(person)
        with self.locks.hold(node.face_id):
            t0 = time.perf_counter()
            ctx = self.assemble_context(node, input_text, allow_fallback=True)
            retrieval_ms = (time.perf_counter() - t0) * 1000.0
            prompt_input = f"{preamble}\n{input_text}" if preamble else input_text
            t1 = time.perf_counter()
            try:
                reply = model.complete(ctx.person_summary, ctx.prompt_messages(), prompt_input)
            except ModelError:
                raise
            except Exception as exc:
                raise ModelError(str(exc)) from exc
            wall_ms = (time.perf_counter() - t1) * 1000.0
            if not isinstance(reply, str) or not reply.strip():
                raise ModelError("model returned an empty reply")
            msg = self.chain.append_message(node, input_text, reply)
        if self.after_reply is not None:
            try:
                self.after_reply(node, msg)
            except Exception:
                log.exception("relationship check failed for message %s", msg.message_id)
        return SpeechTurn(reply, ctx, msg, retrieval_ms, model_time_ms(model, len(ctx), wall_ms),
                          wall_ms)

    def generate_reply(self, person: PersonNode, input_text: str) -> str:
        return self.respond(person, input_text).reply


def full_history_context(graph: WorldGraph, chain: MessageChain, person: PersonNode,
                         input_text: str) -> RetrievedContext:
    """Non-RAG baseline: the entire chain, every message tagged recent."""
    if not input_text or not input_text.strip():
        raise ValidationError("input text must be non-empty")
    node = graph.live(person)
    messages = chain.walk(node)
    return RetrievedContext(messages, input_text, graph.person_summary(node),
                            {m.message_id: RECENT for m in messages})
