"""Language-model clients.

A client takes the person summary, the ordered context messages and the
current input and returns the reply text. The mocks here are what tests and
benchmarks run against; :class:`HttpChatModel` talks to an OpenAI-style
chat-completions endpoint.
"""

from __future__ import annotations

import json
import threading
import time
import urllib.error
import urllib.request
from pathlib import Path
from typing import Protocol, Sequence

from .errors import ModelError, ValidationError

Messages = Sequence[dict]


class LanguageModel(Protocol):
    def complete(self, summary: str, messages: Messages, input_text: str) -> str: ...


class EchoModel:
    """Replies with the input verbatim."""

    def complete(self, summary: str, messages: Messages, input_text: str) -> str:
        return input_text


class ScriptedModel:
    """Replays canned replies.

    ``script`` is either a list (replies in call order) or a mapping from
    exact input to reply, where the key ``"*"`` is the fallback.
    """

    def __init__(self, script: list[str] | dict[str, str]):
        self.script = script
        self._pos = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedModel":
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            data = [line for line in text.splitlines() if line.strip()]
        if not isinstance(data, (list, dict)):
            raise ValidationError("script must be a JSON list or object")
        return cls(data)

    def complete(self, summary: str, messages: Messages, input_text: str) -> str:
        if isinstance(self.script, dict):
            reply = self.script.get(input_text, self.script.get("*"))
            if reply is None:
                raise ModelError(f"no scripted reply for {input_text!r}")
            return reply
        with self._lock:
            if self._pos >= len(self.script):
                raise ModelError("scripted model ran out of replies")
            reply = self.script[self._pos]
            self._pos += 1
        return reply


class LatencyModel:
    """Wraps another client and charges a fixed cost per context message.

    The cost is reported through :meth:`simulated_ms`; nothing sleeps unless
    ``sleep=True``.
    """

    def __init__(self, ms_per_message: float, inner: LanguageModel | None = None,
                 base_ms: float = 0.0, sleep: bool = False):
        if ms_per_message < 0 or base_ms < 0:
            raise ValidationError("latency must be non-negative")
        self.ms_per_message = ms_per_message
        self.base_ms = base_ms
        self.inner = inner or EchoModel()
        self.sleep = sleep

    def simulated_ms(self, context_size: int) -> float:
        return self.base_ms + self.ms_per_message * context_size

    def complete(self, summary: str, messages: Messages, input_text: str) -> str:
        if self.sleep:
            time.sleep(self.simulated_ms(len(messages)) / 1000.0)
        return self.inner.complete(summary, messages, input_text)


class FailingModel:
    """Always raises; for exercising error paths."""

    def __init__(self, message: str = "model unavailable"):
        self.message = message

    def complete(self, summary: str, messages: Messages, input_text: str) -> str:
        raise ModelError(self.message)


class HttpChatModel:
    """Minimal chat-completions client (no streaming, no retries)."""

    def __init__(self, url: str, model: str, api_key: str | None = None, timeout: float = 30.0):
        self.url = url
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    def build_payload(self, summary: str, messages: Messages, input_text: str) -> dict:
        chat = [{"role": "system", "content": summary or "You are a friendly social robot."}]
        for m in messages:
            chat.append({"role": "user", "content": m["user_text"]})
            chat.append({"role": "assistant", "content": m["reply_text"]})
        chat.append({"role": "user", "content": input_text})
        return {"model": self.model, "messages": chat}

    def complete(self, summary: str, messages: Messages, input_text: str) -> str:
        body = json.dumps(self.build_payload(summary, messages, input_text)).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(self.url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                data = json.loads(resp.read().decode("utf-8"))
            return data["choices"][0]["message"]["content"]
        except (urllib.error.URLError, OSError, KeyError, IndexError, ValueError) as exc:
            raise ModelError(f"chat endpoint failed: {exc}") from exc


def parse_model_spec(spec: str) -> LanguageModel:
    """``echo`` | ``scripted:<file>`` | ``latency:<ms-per-message>``."""
    kind, _, arg = spec.partition(":")
    if kind == "echo" and not arg:
        return EchoModel()
    if kind == "scripted" and arg:
        return ScriptedModel.from_file(arg)
    if kind == "latency" and arg:
        try:
            return LatencyModel(float(arg))
        except ValueError:
            raise ValidationError(f"bad latency value {arg!r}") from None
    raise ValidationError(f"unknown model spec {spec!r}")
