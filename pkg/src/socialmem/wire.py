"""Newline-delimited JSON wire format.

One UTF-8 JSON object per line. Encoding is canonical (sorted keys, compact
separators, absent optionals omitted), so ``encode(decode(line)) == line``
for any line this module produced.

Request::

    {"face_votes":[{"candidate":"unknown","confidence":1.0},...],
     "request_id":"r1","session_id":"s1","transcription":"hello"}

Response::

    {"face_id":"face-000001","kind":"say","request_id":"r1","session_id":"s1",
     "text":"hello","timing":{"model_ms":0.0,"retrieval_ms":0.4,"total_ms":0.9}}

Error::

    {"error":{"code":"bad_request","message":"..."},"request_id":"r1"}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import SocialMemError, ValidationError
from .identity import FrameVote
from .orchestrator import ACTION, SAY, SAY_AND_ACTION, SILENT

BAD_JSON = "bad_json"
BAD_REQUEST = "bad_request"
INTERNAL = "internal"


class ProtocolError(SocialMemError):
    def __init__(self, code: str, message: str, request_id: str | None = None):
        super().__init__(message)
        self.code = code
        self.request_id = request_id


def _dumps(obj: dict) -> bytes:
    return (json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
            + "\n").encode("utf-8")


def _str(d: dict, key: str, required: bool = True) -> str | None:
    v = d.get(key)
    if v is None:
        if required:
            raise ValidationError(f"missing field {key!r}")
        return None
    if not isinstance(v, str):
        raise ValidationError(f"field {key!r} must be a string")
    return v


@dataclass
class WireRequest:
    session_id: str
    transcription: str
    face_id: str | None = None
    face_votes: list[FrameVote] | None = None
    image_ref: str | None = None
    request_id: str | None = None

    def __post_init__(self):
        if not self.transcription or not self.transcription.strip():
            raise ValidationError("transcription must be non-empty")
        if (self.face_id is None) == (self.face_votes is None):
            raise ValidationError("exactly one of face_id / face_votes is required")

    @classmethod
    def from_dict(cls, d: dict) -> "WireRequest":
        if not isinstance(d, dict):
            raise ValidationError("request must be a JSON object")
        known = {"session_id", "transcription", "face_id", "face_votes", "image_ref", "request_id"}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown fields {sorted(extra)}")
        votes = d.get("face_votes")
        if votes is not None:
            if not isinstance(votes, list):
                raise ValidationError("face_votes must be a list")
            parsed = []
            for v in votes:
                if isinstance(v, str):
                    parsed.append(FrameVote(v))
                elif isinstance(v, dict) and isinstance(v.get("candidate"), str):
                    conf = v.get("confidence", 1.0)
                    if isinstance(conf, bool) or not isinstance(conf, (int, float)):
                        raise ValidationError("vote confidence must be a number")
                    parsed.append(FrameVote(v["candidate"], float(conf)))
                else:
                    raise ValidationError("each vote is a candidate string or object")
            votes = parsed
        return cls(
            session_id=_str(d, "session_id"),
            transcription=_str(d, "transcription"),
            face_id=_str(d, "face_id", False),
            face_votes=votes,
            image_ref=_str(d, "image_ref", False),
            request_id=_str(d, "request_id", False),
        )

    def to_dict(self) -> dict:
        d = {"session_id": self.session_id, "transcription": self.transcription}
        if self.face_id is not None:
            d["face_id"] = self.face_id
        if self.face_votes is not None:
            d["face_votes"] = [{"candidate": v.candidate, "confidence": v.confidence}
                               for v in self.face_votes]
        if self.image_ref is not None:
            d["image_ref"] = self.image_ref
        if self.request_id is not None:
            d["request_id"] = self.request_id
        return d


@dataclass
class WireResponse:
    session_id: str
    face_id: str
    kind: str
    text: str | None = None
    action: dict | None = None
    errors: dict[str, str] = field(default_factory=dict)
    retrieval_ms: float = 0.0
    model_ms: float = 0.0
    total_ms: float = 0.0
    request_id: str | None = None

    def __post_init__(self):
        if self.kind not in (SAY, ACTION, SAY_AND_ACTION, SILENT):
            raise ValidationError(f"bad kind {self.kind!r}")
        if min(self.retrieval_ms, self.model_ms, self.total_ms) < 0:
            raise ValidationError("timings must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "WireResponse":
        t = d.get("timing", {})
        return cls(d["session_id"], d["face_id"], d["kind"], d.get("text"), d.get("action"),
                   dict(d.get("errors", {})), t.get("retrieval_ms", 0.0), t.get("model_ms", 0.0),
                   t.get("total_ms", 0.0), d.get("request_id"))

    def to_dict(self) -> dict:
        d = {
            "session_id": self.session_id,
            "face_id": self.face_id,
            "kind": self.kind,
            "timing": {"retrieval_ms": self.retrieval_ms, "model_ms": self.model_ms,
                       "total_ms": self.total_ms},
        }
        if self.text is not None:
            d["text"] = self.text
        if self.action is not None:
            d["action"] = self.action
        if self.errors:
            d["errors"] = self.errors
        if self.request_id is not None:
            d["request_id"] = self.request_id
        return d


@dataclass
class WireError:
    code: str
    message: str
    request_id: str | None = None

    def to_dict(self) -> dict:
        d = {"error": {"code": self.code, "message": self.message}}
        if self.request_id is not None:
            d["request_id"] = self.request_id
        return d


def encode(msg: WireRequest | WireResponse | WireError) -> bytes:
    return _dumps(msg.to_dict())


def _load(line: bytes | str) -> dict:
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError(BAD_JSON, f"not UTF-8: {exc}") from None
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(BAD_JSON, f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ProtocolError(BAD_REQUEST, "payload must be a JSON object")
    return obj


def decode_request(line: bytes | str) -> WireRequest:
    obj = _load(line)
    rid = obj.get("request_id") if isinstance(obj.get("request_id"), str) else None
    try:
        return WireRequest.from_dict(obj)
    except ValidationError as exc:
        raise ProtocolError(BAD_REQUEST, str(exc), rid) from None


def decode_response(line: bytes | str) -> WireResponse | WireError:
    obj = _load(line)
    if "error" in obj:
        e = obj["error"]
        return WireError(e["code"], e["message"], obj.get("request_id"))
    return WireResponse.from_dict(obj)


def decode(line: bytes | str) -> WireRequest | WireResponse | WireError:
    """Decode any wire object, telling requests and responses apart by shape."""
    obj = _load(line)
    if "error" in obj or "kind" in obj:
        return decode_response(line)
    return decode_request(line)
