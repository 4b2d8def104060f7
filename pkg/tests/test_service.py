import asyncio
import json
import threading
from pathlib import Path

from socialmem import EngineConfig, SocialMemory
from socialmem.llm import EchoModel
from socialmem.service import MemoryService, parse_bind
from socialmem.wire import WireError, WireResponse, decode_response

WIRE = Path(__file__).parent / "fixtures" / "wire"


def strip_timing(line: bytes) -> dict:
    d = json.loads(line)
    d.pop("timing", None)
    return d


async def _with_service(mem, body, store=None):
    svc = MemoryService(mem, store)
    await svc.start("127.0.0.1", 0)
    host, port = svc.address
    reader, writer = await asyncio.open_connection(host, port)
    try:
        return await body(reader, writer)
    finally:
        writer.close()
        await svc.stop()


def run(mem, body, store=None):
    return asyncio.run(asyncio.wait_for(_with_service(mem, body, store), 60))


def test_parse_bind():
    assert parse_bind("0.0.0.0:80") == ("0.0.0.0", 80)
    assert parse_bind(":9000") == ("127.0.0.1", 9000)


def test_fixture_requests_reproduce_fixture_responses():
    requests = WIRE.joinpath("requests.ndjson").read_bytes().splitlines(keepends=True)
    expected = WIRE.joinpath("responses.ndjson").read_bytes().splitlines(keepends=True)

    async def body(reader, writer):
        out = []
        for line in requests:
            writer.write(line)
            await writer.drain()
            out.append(await reader.readline())
        return out

    got = run(SocialMemory(EngineConfig(dim=64)), body)
    assert [strip_timing(x) for x in got] == [strip_timing(x) for x in expected]
    for line in got:
        r = decode_response(line)
        assert isinstance(r, WireResponse)
        assert r.total_ms >= r.retrieval_ms + r.model_ms - 1e-3


def test_malformed_lines_get_errors_and_connection_survives():
    bad = WIRE.joinpath("malformed.ndjson").read_bytes().splitlines(keepends=True)
    expected = json.loads(WIRE.joinpath("malformed_expected.json").read_text())
    good = b'{"face_id":"face-9","request_id":"ok","session_id":"s","transcription":"still here"}\n'

    async def body(reader, writer):
        out = []
        for line in bad + [b"\xff\xfe garbage\n", b"\n", good]:
            writer.write(line)
            await writer.drain()
            if line.strip():
                out.append(await reader.readline())
        return out

    got = run(SocialMemory(EngineConfig(dim=16)), body)
    errors = [decode_response(x) for x in got[:-1]]
    assert all(isinstance(e, WireError) for e in errors)
    assert [[e.code, e.request_id] for e in errors[:-1]] == expected
    assert errors[-1].code == "bad_json"
    last = decode_response(got[-1])
    assert isinstance(last, WireResponse) and last.text == "still here"


def test_fresh_face_for_unknown_votes():
    line = json.dumps({"session_id": "s", "transcription": "hi",
                       "face_votes": ["unknown"] * 15}).encode() + b"\n"

    async def body(reader, writer):
        writer.write(line + line)
        await writer.drain()
        return [await reader.readline(), await reader.readline()]

    a, b = (decode_response(x).face_id for x in run(SocialMemory(EngineConfig(dim=16)), body))
    assert a.startswith("face-") and b.startswith("face-") and a != b


class GateModel(EchoModel):
    """Blocks on the input ``wait`` until released."""

    def __init__(self):
        self.release = threading.Event()

    def complete(self, summary, messages, input_text):
        if input_text == "wait":
            assert self.release.wait(30)
        return input_text


def _req(face, text, rid):
    return json.dumps({"face_id": face, "request_id": rid, "session_id": "s",
                       "transcription": text}).encode() + b"\n"


def test_other_faces_not_blocked_same_face_ordered():
    model = GateModel()
    mem = SocialMemory(EngineConfig(dim=16), model=model)

    async def body(reader, writer):
        writer.write(_req("face-a", "wait", "a1") + _req("face-a", "after", "a2")
                     + _req("face-b", "hello", "b1"))
        await writer.drain()
        first = decode_response(await reader.readline())
        model.release.set()
        rest = [decode_response(await reader.readline()) for _ in range(2)]
        return [first] + rest

    got = run(mem, body)
    assert [r.request_id for r in got] == ["b1", "a1", "a2"]
    texts = [m.user_text for m in mem.chain.walk(mem.graph.resolve("face-a"))]
    assert texts == ["wait", "after"]


def test_second_connection_served_while_first_blocked():
    model = GateModel()
    mem = SocialMemory(EngineConfig(dim=16), model=model)

    async def body(reader, writer):
        svc_host, svc_port = writer.get_extra_info("peername")[:2]
        writer.write(_req("face-a", "wait", "a1"))
        await writer.drain()
        r2, w2 = await asyncio.open_connection(svc_host, svc_port)
        w2.write(_req("face-b", "hi", "b1"))
        await w2.drain()
        other = decode_response(await r2.readline())
        w2.close()
        model.release.set()
        mine = decode_response(await reader.readline())
        return other, mine

    other, mine = run(mem, body)
    assert (other.request_id, mine.request_id) == ("b1", "a1")


def test_shutdown_flushes_snapshot(tmp_path):
    store = tmp_path / "store.json"
    mem = SocialMemory(EngineConfig(dim=16))

    async def body(reader, writer):
        writer.write(_req("face-a", "remember this", "r"))
        await writer.drain()
        return await reader.readline()

    run(mem, body, store)
    loaded = SocialMemory.load(store)
    assert loaded.chain.walk(loaded.graph.resolve("face-a"))[0].user_text == "remember this"
    assert loaded.dumps() == mem.dumps()
