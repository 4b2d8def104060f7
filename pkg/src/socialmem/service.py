"""Asyncio NDJSON server in front of a :class:`SocialMemory`.

Requests on one connection that target the same face (or, for vote-based
requests, the same session) are answered in order; anything else runs
concurrently. Each response echoes the request's ``request_id``.
"""

from __future__ import annotations

import asyncio
import logging
import signal
import socket
from pathlib import Path

from .engine import SocialMemory
from .errors import SocialMemError
from .wire import BAD_REQUEST, INTERNAL, ProtocolError, WireError, decode_request, encode

log = logging.getLogger(__name__)

MAX_LINE = 1 << 20


def parse_bind(bind: str) -> tuple[str, int]:
    host, sep, port = bind.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"bind address must be host:port, got {bind!r}")
    return host or "127.0.0.1", int(port)


class MemoryService:
    def __init__(self, memory: SocialMemory, store_path: str | Path | None = None):
        self.memory = memory
        self.store_path = Path(store_path) if store_path else None
        self.server: asyncio.AbstractServer | None = None
        self._tasks: set[asyncio.Task] = set()

    @property
    def address(self) -> tuple[str, int]:
        return self.server.sockets[0].getsockname()[:2]

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> None:
        self.server = await asyncio.start_server(self._client, host, port, limit=MAX_LINE,
                                                 family=socket.AF_INET)

    async def _answer(self, line: bytes) -> bytes:
        try:
            req = decode_request(line)
        except ProtocolError as exc:
            return encode(WireError(exc.code, str(exc), exc.request_id))
        try:
            resp = await asyncio.to_thread(self.memory.handle, req)
        except SocialMemError as exc:
            return encode(WireError(BAD_REQUEST, str(exc), req.request_id))
        except Exception as exc:  # keep the connection alive whatever happens
            log.exception("request failed")
            return encode(WireError(INTERNAL, f"{type(exc).__name__}: {exc}", req.request_id))
        return encode(resp)

    @staticmethod
    def _order_key(line: bytes) -> str | None:
        try:
            req = decode_request(line)
        except ProtocolError:
            return None
        return f"face:{req.face_id}" if req.face_id else f"session:{req.session_id}"

    async def _client(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        write_lock = asyncio.Lock()
        tails: dict[str, asyncio.Task] = {}
        pending: set[asyncio.Task] = set()

        async def serve_one(line: bytes, before: asyncio.Task | None) -> None:
            if before is not None:
                await asyncio.gather(before, return_exceptions=True)
            out = await self._answer(line)
            async with write_lock:
                writer.write(out)
                await writer.drain()

        try:
            while True:
                try:
                    line = await reader.readline()
                except (asyncio.LimitOverrunError, ValueError):
                    async with write_lock:
                        writer.write(encode(WireError(BAD_REQUEST, "line too long")))
                        await writer.drain()
                    break
                if not line:
                    break
                if not line.strip():
                    continue
                key = self._order_key(line)
                task = asyncio.create_task(serve_one(line, tails.get(key) if key else None))
                if key:
                    tails[key] = task
                pending.add(task)
                self._tasks.add(task)
                task.add_done_callback(pending.discard)
                task.add_done_callback(self._tasks.discard)
            if pending:
                await asyncio.gather(*pending, return_exceptions=True)
        except ConnectionError:
            pass
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except ConnectionError:
                pass

    async def stop(self) -> None:
        if self.server is not None:
            self.server.close()
            await self.server.wait_closed()
        if self._tasks:
            await asyncio.gather(*list(self._tasks), return_exceptions=True)
        self.flush()

    def flush(self) -> None:
        if self.store_path is not None:
            self.memory.save(self.store_path)
            log.info("snapshot written to %s", self.store_path)


async def serve(memory: SocialMemory, bind: str, store_path: str | Path | None,
                ready=None) -> None:
    """Run until SIGINT/SIGTERM, then flush a snapshot."""
    host, port = parse_bind(bind)
    service = MemoryService(memory, store_path)
    await service.start(host, port)
    stop = asyncio.Event()
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            loop.add_signal_handler(sig, stop.set)
        except (NotImplementedError, RuntimeError):
            pass
    h, p = service.address
    log.info("listening on %s:%d", h, p)
    if ready is not None:
        ready(h, p)
    try:
        await stop.wait()
    finally:
        await service.stop()
