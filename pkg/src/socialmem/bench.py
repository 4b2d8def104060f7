"""RAG vs full-history latency benchmark.

A single synthetic user's chat history is inflated by re-appending copies of
its messages. At each target size a fixed question battery is timed against
two context strategies:

* ``rag``: bounded hybrid retrieval (semantic hits, neighbours, recent turns);
* ``nonrag``: the whole chain.

Model cost comes from :class:`~socialmem.llm.LatencyModel`, so it is a pure
function of context size and the comparison isolates how each strategy scales.
Benchmark questions are never appended to the history.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .embedding import cosine
from .engine import EngineConfig, SocialMemory
from .errors import BenchError
from .llm import EchoModel, LanguageModel, LatencyModel
from .message_chain import MessageChain
from .retrieval import full_history_context
from .world_graph import PersonNode

RAG = "rag"
NONRAG = "nonrag"
STRATEGIES = (RAG, NONRAG)
BENCH_FACE = "face-bench"


def _data(name: str) -> dict:
    return json.loads(resources.files("socialmem.data").joinpath(name).read_text("utf-8"))


def default_questions() -> list[str]:
    return list(_data("bench_questions.json")["questions"])


def default_dialogue() -> list[tuple[str, str]]:
    return [tuple(x) for x in _data("bench_dialogue.json")["exchanges"]]


@dataclass
class BenchConfig:
    message_counts: list[int] = field(default_factory=lambda: [1000, 2000, 4000, 8000, 14000])
    questions: list[str] = field(default_factory=default_questions)
    repetitions: int = 3
    model_latency_per_message: float = 1.0
    strategies: tuple[str, ...] = STRATEGIES
    seed: int = 0
    dim: int = 1536

    def __post_init__(self):
        counts = list(self.message_counts)
        if not counts or any(c < 1 for c in counts) or counts != sorted(set(counts)):
            raise BenchError("message_counts must be positive and strictly ascending")
        if self.repetitions < 1:
            raise BenchError("repetitions must be at least 1")
        if not self.questions or any(not q.strip() for q in self.questions):
            raise BenchError("questions must be non-empty strings")
        if self.model_latency_per_message < 0:
            raise BenchError("model latency must be non-negative")
        if not self.strategies or set(self.strategies) - set(STRATEGIES):
            raise BenchError(f"strategies must be a subset of {STRATEGIES}")
        self.message_counts = counts
        self.strategies = tuple(s for s in STRATEGIES if s in self.strategies)


@dataclass
class BenchRecord:
    strategy: str
    history_size: int
    question: int
    repetition: int
    retrieval_ms: float
    model_ms: float
    total_ms: float
    context_size: int
    reply_text: str


CSV_COLUMNS = [f.name for f in fields(BenchRecord)]


def inflate_history(chain: MessageChain, person: PersonNode, target: int) -> int:
    """Re-append copies of ``person``'s chain until it holds ``target`` messages.

    Copies carry a ``[cycle N]`` suffix so their ids and embeddings stay
    distinct. Returns the resulting length.
    """
    if target < 1:
        raise BenchError("target must be positive")
    base = chain.walk(person)
    if not base:
        raise BenchError("cannot inflate an empty chain")
    length = len(base)
    cycle = length // len(base)
    while length < target:
        for msg in base:
            if length >= target:
                break
            tag = f" [cycle {cycle}]"
            chain.append_message(person, msg.user_text + tag, msg.reply_text + tag)
            length += 1
        cycle += 1
    return chain.history_length(person)


@dataclass
class BenchResult:
    config: BenchConfig
    records: list[BenchRecord]
    summary: list[dict]
    similarity: dict

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([getattr(r, c) for c in CSV_COLUMNS])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps({"summary": self.summary, "similarity": self.similarity},
                          indent=2, sort_keys=True) + "\n"

    def summary_table(self) -> str:
        head = ["strategy", "history", "n", "total_mean", "total_sd", "total_p50",
                "total_p95", "retrieval_mean", "context_mean"]
        rows = [[s["strategy"], str(s["history_size"]), str(s["n"])]
                + [f"{s[k]:.2f}" for k in ("total_ms_mean", "total_ms_sd", "total_ms_p50",
                                           "total_ms_p95", "retrieval_ms_mean",
                                           "context_size_mean")]
                for s in self.summary]
        widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
                  for i, h in enumerate(head)]
        lines = ["  ".join(h.rjust(w) for h, w in zip(head, widths))]
        lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
        sim = self.similarity
        lines.append("")
        if sim.get("per_question"):
            lines.append(f"reply similarity rag vs nonrag: mean {sim['mean']:.4f}  sd {sim['sd']:.4f}")
            for q in sim["per_question"]:
                lines.append(f"  q{q['question']}: {q['mean']:.4f}")
        else:
            lines.append("reply similarity: needs both strategies")
        return "\n".join(lines) + "\n"

    def gnuplot_data(self) -> str:
        by = {(s["strategy"], s["history_size"]): s for s in self.summary}
        lines = ["# history_size rag_mean rag_sd nonrag_mean nonrag_sd"]
        for n in self.config.message_counts:
            cols = [str(n)]
            for strat in STRATEGIES:
                s = by.get((strat, n))
                cols += [f"{s['total_ms_mean']:.3f}", f"{s['total_ms_sd']:.3f}"] if s else ["NaN", "NaN"]
            lines.append(" ".join(cols))
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / "records.csv", "json": out / "summary.json",
                 "table": out / "summary.txt", "dat": out / "latency.dat"}
        paths["csv"].write_text(self.csv_text(), encoding="utf-8")
        paths["json"].write_text(self.summary_json(), encoding="utf-8")
        paths["table"].write_text(self.summary_table(), encoding="utf-8")
        paths["dat"].write_text(self.gnuplot_data(), encoding="utf-8")
        return paths


def _percentile(values: list[float], q: float) -> float:
    return float(np.percentile(np.asarray(values, dtype=np.float64), q))


def summarize(records: list[BenchRecord]) -> list[dict]:
    groups: dict[tuple[str, int], list[BenchRecord]] = {}
    for r in records:
        groups.setdefault((r.strategy, r.history_size), []).append(r)
    out = []
    for (strat, size), rs in sorted(groups.items(), key=lambda kv: (STRATEGIES.index(kv[0][0]), kv[0][1])):
        totals = [r.total_ms for r in rs]
        out.append({
            "strategy": strat,
            "history_size": size,
            "n": len(rs),
            "total_ms_mean": statistics.fmean(totals),
            "total_ms_sd": statistics.stdev(totals) if len(totals) > 1 else 0.0,
            "total_ms_p50": _percentile(totals, 50),
            "total_ms_p95": _percentile(totals, 95),
            "retrieval_ms_mean": statistics.fmean(r.retrieval_ms for r in rs),
            "model_ms_mean": statistics.fmean(r.model_ms for r in rs),
            "context_size_mean": statistics.fmean(r.context_size for r in rs),
        })
    return out


def similarity(records: list[BenchRecord], embed) -> dict:
    """Cosine between the rag and nonrag reply to the same question, size and repetition."""
    pairs: dict[tuple[int, int, int], dict[str, str]] = {}
    for r in records:
        pairs.setdefault((r.question, r.history_size, r.repetition), {})[r.strategy] = r.reply_text
    per_q: dict[int, list[float]] = {}
    for (q, _, _), replies in sorted(pairs.items()):
        if RAG in replies and NONRAG in replies:
            per_q.setdefault(q, []).append(cosine(embed(replies[RAG]), embed(replies[NONRAG])))
    if not per_q:
        return {"per_question": [], "mean": math.nan, "sd": math.nan}
    rows = [{"question": q, "mean": statistics.fmean(v), "n": len(v)} for q, v in sorted(per_q.items())]
    means = [r["mean"] for r in rows]
    return {"per_question": rows, "mean": statistics.fmean(means),
            "sd": statistics.stdev(means) if len(means) > 1 else 0.0}


def prepare_store(config: BenchConfig,
                  dialogue: list[tuple[str, str]] | None = None) -> tuple[SocialMemory, PersonNode]:
    mem = SocialMemory(EngineConfig(dim=config.dim, seed=config.seed))
    person = mem.graph.upsert_person(BENCH_FACE)
    for user_text, reply_text in dialogue or default_dialogue():
        mem.chain.append_message(person, user_text, reply_text)
    return mem, person


def run(config: BenchConfig | None = None, memory: SocialMemory | None = None,
        person: PersonNode | None = None, model: LanguageModel | None = None,
        progress=None) -> BenchResult:
    """Inflate, time and summarise.

    Without ``memory`` a fresh store is seeded from the bundled dialogue.
    ``model`` is the reply generator wrapped by the latency mock (echo by
    default).
    """
    config = config or BenchConfig()
    if memory is None:
        memory, person = prepare_store(config)
    elif person is None:
        raise BenchError("a person is required when a store is supplied")
    person = memory.graph.live(person)
    if memory.chain.history_length(person) == 0:
        raise BenchError(f"{person.face_id} has no messages to benchmark against")
    latency = LatencyModel(config.model_latency_per_message, inner=model or EchoModel())
    records: list[BenchRecord] = []
    for target in config.message_counts:
        size = inflate_history(memory.chain, person, target)
        if progress:
            progress(f"history {size}")
        for strat in config.strategies:
            for rep in range(config.repetitions):
                for qi, question in enumerate(config.questions):
                    t0 = time.perf_counter()
                    if strat == RAG:
                        ctx = memory.speech.assemble_context(person, question)
                    else:
                        ctx = full_history_context(memory.graph, memory.chain, person, question)
                    retrieval_ms = (time.perf_counter() - t0) * 1000.0
                    reply = latency.complete(ctx.person_summary, ctx.prompt_messages(), question)
                    model_ms = latency.simulated_ms(len(ctx))
                    records.append(BenchRecord(strat, size, qi, rep, round(retrieval_ms, 3),
                                               round(model_ms, 3),
                                               round(retrieval_ms + model_ms, 3),
                                               len(ctx), reply))
    embed = memory.embedder.embed
    return BenchResult(config, records, summarize(records), similarity(records, embed))


def config_to_dict(config: BenchConfig) -> dict:
    d = asdict(config)
    d["strategies"] = list(config.strategies)
    return d
