"""The assembled engine: graph, chains, index, pipelines, and snapshots."""

from __future__ import annotations

import base64
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .embedding import Embedder, HashingEmbedder
from .errors import SnapshotError, ValidationError
from .extraction import Extractor, MutationLog, RuleExtractor, apply
from .identity import DEFAULT_VOTES, FrameVote, resolve_identity, resolve_on_introduction
from .llm import EchoModel, LanguageModel
from .locks import KeyedLocks
from .message_chain import MessageChain, MessageNode
from .orchestrator import Executor, IntentPlanner, VisionClient
from .retrieval import RetrievalConfig, RetrievedContext, SpeechPipeline
from .vector_index import IndexEntry, IndexParams, VectorIndex
from .wire import WireRequest, WireResponse
from .world_graph import PersonNode, WorldGraph

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EngineConfig:
    dim: int = 1536
    hnsw_m: int = 16
    ef_construction: int = 200
    ef_search: int = 100
    exact_threshold: int = 512
    seed: int = 0
    k: int = 20
    neighbor_radius: int = 1
    recent: int = 20
    cap: int = 80
    name_threshold: int = 2
    votes: int = DEFAULT_VOTES

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        for key, value in data.items():
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError(f"config {key!r} must be an integer")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "EngineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def index_params(self) -> IndexParams:
        return IndexParams(self.dim, self.hnsw_m, self.ef_construction, self.ef_search,
                           self.exact_threshold, self.seed)

    def retrieval(self) -> RetrievalConfig:
        return RetrievalConfig(self.k, self.neighbor_radius, self.recent, self.cap)


def _encode_vector(v: np.ndarray) -> str:
    return base64.b64encode(np.asarray(v, dtype="<f8").tobytes()).decode("ascii")


def _decode_vector(s: str, dim: int) -> np.ndarray:
    v = np.frombuffer(base64.b64decode(s.encode("ascii"), validate=True), dtype="<f8")
    if v.shape[0] != dim:
        raise ValueError(f"vector has {v.shape[0]} values, expected {dim}")
    return v.astype(np.float64)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class SocialMemory:
    """One store and everything that reads or writes it.

    >>> mem = SocialMemory(EngineConfig(dim=64))
    >>> alice = mem.graph.upsert_person("face-a")
    >>> mem.speech.generate_reply(alice, "hello there")
    'hello there'
    """

    def __init__(self, config: EngineConfig | None = None, model: LanguageModel | None = None,
                 embedder: Embedder | None = None, extractor: Extractor | None = None,
                 planner: IntentPlanner | None = None, vision: VisionClient | None = None,
                 graph: WorldGraph | None = None):
        self.config = config or EngineConfig()
        self.embedder = embedder or HashingEmbedder(self.config.dim)
        if self.embedder.dim != self.config.dim:
            raise ValidationError("embedder dimension does not match config")
        self.model = model or EchoModel()
        self.extractor = extractor or RuleExtractor()
        self.planner = planner or IntentPlanner()
        self.graph = graph or WorldGraph(self.config.name_threshold)
        self.index = VectorIndex(self.config.index_params())
        self.chain = MessageChain(self.graph, self.index, self.embedder)
        self.locks = KeyedLocks()
        self.speech = SpeechPipeline(self.graph, self.chain, self.model, self.config.retrieval(),
                                     after_reply=self.check_exchange, locks=self.locks)
        self.executor = Executor(self.speech, vision)
        self.last_context: dict[str, RetrievedContext] = {}
        self.last_mutations: MutationLog | None = None

    # -- conversation --------------------------------------------------------

    def resolve_identity(self, votes: list[FrameVote]) -> PersonNode:
        face = resolve_identity(self.graph, votes, self.config.votes)
        return self.graph.upsert_person(face)

    def introduce(self, person: PersonNode, spoken_name: str) -> PersonNode:
        return resolve_on_introduction(self.graph, person, spoken_name)

    def check_exchange(self, person: PersonNode, message: MessageNode) -> MutationLog:
        """Post-reply check: handle introductions, then relationships and attributes."""
        person = self.graph.live(person)
        result = self.extractor.extract(message.user_text, person.name)
        if result.introduced_name:
            person = self.introduce(person, result.introduced_name)
        mutations = apply(result, person, self.graph, source_utterance_id=message.message_id)
        self.last_mutations = mutations
        return mutations

    def handle(self, request: WireRequest) -> WireResponse:
        """Identity -> route -> execute for one wire request."""
        t0 = time.perf_counter()
        if request.face_id is not None:
            person = self.graph.upsert_person(request.face_id)
        else:
            person = self.resolve_identity(request.face_votes)
        plan = self.planner.route(request.transcription, person)
        execution = self.executor.run(plan, request.transcription, person, request.image_ref)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        retrieval_ms = model_ms = 0.0
        turn = execution.turn
        if turn is not None:
            retrieval_ms, model_ms = turn.retrieval_ms, turn.model_ms
            self.last_context[self.graph.live(person).face_id] = turn.context
            # simulated model cost replaces the model's own wall time
            wall_ms = wall_ms - turn.model_wall_ms + turn.model_ms
        env = execution.envelope
        return WireResponse(
            session_id=request.session_id,
            face_id=self.graph.live(person).face_id,
            kind=env.kind,
            text=env.text,
            action=env.action.to_dict() if env.action else None,
            errors=dict(env.errors),
            retrieval_ms=round(retrieval_ms, 3),
            model_ms=round(model_ms, 3),
            total_ms=round(max(wall_ms, retrieval_ms + model_ms), 3),
            request_id=request.request_id,
        )

    # -- snapshots -----------------------------------------------------------

    def snapshot(self) -> dict:
        with self.graph.lock, self.chain.lock:
            g = self.graph.to_dict()
            c = self.chain.to_dict()
            return {
                "schema_version": SCHEMA_VERSION,
                "config": self.config.to_dict(),
                "persons": g["persons"],
                "edges": g["edges"],
                "aliases": g["aliases"],
                "messages": c["messages"],
                "counters": {**g["counters"], **c["counters"]},
                "index": {
                    "aliases": self.index.aliases(),
                    "entries": [
                        {"message_id": e.message_id, "face_id": e.face_id,
                         "vector": _encode_vector(e.vector)}
                        for e in self.index.entries()
                    ],
                },
            }

    def dumps(self) -> str:
        return canonical_json(self.snapshot())

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(self.dumps() + "\n", encoding="utf-8")
        os.replace(tmp, path)

    @classmethod
    def from_snapshot(cls, data: dict, **kwargs) -> "SocialMemory":
        if not isinstance(data, dict) or data.get("schema_version") != SCHEMA_VERSION:
            version = data.get("schema_version") if isinstance(data, dict) else None
            raise SnapshotError(f"unsupported snapshot schema version {version!r}")
        try:
            config = EngineConfig.from_dict(data["config"])
            graph = WorldGraph.from_dict(
                {"persons": data["persons"], "edges": data["edges"], "counters": data["counters"]},
                name_threshold=config.name_threshold)
            mem = cls(config, graph=graph, **kwargs)
            mem.chain.restore({"messages": data["messages"], "counters": data["counters"]})
            for e in sorted(data["index"]["entries"], key=lambda e: e["message_id"]):
                mem.index.insert(IndexEntry(e["message_id"], e["face_id"],
                                            _decode_vector(e["vector"], config.dim)))
            for dup, survivor in sorted(data["index"]["aliases"].items()):
                mem.index.alias(dup, survivor)
            if set(mem.chain._messages) != set(e["message_id"] for e in data["index"]["entries"]):
                raise ValueError("index entries do not match messages")
            if graph.alias_table() != data["aliases"]:
                raise ValueError("alias table does not match tombstones")
        except SnapshotError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise SnapshotError(f"corrupt snapshot: {exc}") from exc
        return mem

    @classmethod
    def loads(cls, text: str, **kwargs) -> "SocialMemory":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SnapshotError(f"snapshot is not valid JSON: {exc}") from exc
        return cls.from_snapshot(data, **kwargs)

    @classmethod
    def load(cls, path: str | Path, **kwargs) -> "SocialMemory":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
        return cls.loads(text, **kwargs)

    @classmethod
    def open(cls, path: str | Path, config: EngineConfig | None = None, **kwargs) -> "SocialMemory":
        """Load ``path`` if it exists, else start an empty store."""
        if Path(path).exists():
            return cls.load(path, **kwargs)
        return cls(config, **kwargs)
