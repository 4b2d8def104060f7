"""Reasoner (which capabilities to invoke) and Executor (invoke them, package the reply)."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Protocol

from .errors import SocialMemError, ValidationError
from .retrieval import SpeechPipeline, SpeechTurn
from .world_graph import PersonNode

log = logging.getLogger(__name__)

SPEECH = "speech"
VISION = "vision"
EMBODIMENT = "embodiment"
API_ORDER = (VISION, EMBODIMENT, SPEECH)
SILENCE_TOKEN = "(silence)"

SAY = "say"
ACTION = "action"
SAY_AND_ACTION = "say_and_action"
SILENT = "silent"


@dataclass(frozen=True)
class ActionPlan:
    apis: tuple[str, ...]
    embodiment_action: str | None = None
    respond: bool = True

    def __post_init__(self):
        if not self.apis:
            raise ValidationError("a plan invokes at least one api")
        unknown = set(self.apis) - set(API_ORDER)
        if unknown:
            raise ValidationError(f"unknown apis {sorted(unknown)}")
        if (EMBODIMENT in self.apis) != (self.embodiment_action is not None):
            raise ValidationError("embodiment needs an action name, and only embodiment has one")


@dataclass(frozen=True)
class Action:
    name: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}


@dataclass
class ResponseEnvelope:
    kind: str
    text: str | None = None
    action: Action | None = None
    errors: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (SAY, ACTION, SAY_AND_ACTION, SILENT):
            raise ValidationError(f"bad envelope kind {self.kind!r}")
        if self.kind in (SAY, SAY_AND_ACTION) and self.text is None:
            raise ValidationError(f"{self.kind} envelope needs text")
        if self.kind in (ACTION, SAY_AND_ACTION) and self.action is None:
            raise ValidationError(f"{self.kind} envelope needs an action")


@dataclass(frozen=True)
class Capability:
    name: str
    api: str
    description: str = ""
    triggers: tuple[str, ...] = ()


class CapabilityRegistry:
    """The documented capability list the planner routes against."""

    def __init__(self, capabilities: list[Capability]):
        self.capabilities = list(capabilities)
        self._patterns = [
            (cap, [re.compile(r"\b" + re.escape(t.lower()) + r"\b") for t in cap.triggers])
            for cap in self.capabilities
        ]

    @classmethod
    def load(cls, path: str | Path | None = None) -> "CapabilityRegistry":
        if path is None:
            text = resources.files("socialmem.data").joinpath("capabilities.json").read_text("utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        data = json.loads(text)
        caps = [Capability(c["name"], c["api"], c.get("description", ""),
                           tuple(c.get("triggers", ()))) for c in data["capabilities"]]
        return cls(caps)

    @property
    def actions(self) -> list[str]:
        return [c.name for c in self.capabilities if c.api == EMBODIMENT]

    def matches(self, text: str) -> list[tuple[int, Capability]]:
        """(position, capability) for each capability triggered in ``text``."""
        low = text.lower()
        hits = []
        for cap, patterns in self._patterns:
            positions = [m.start() for p in patterns for m in [p.search(low)] if m]
            if positions:
                hits.append((min(positions), cap))
        hits.sort(key=lambda h: h[0])
        return hits


class IntentPlanner:
    """Keyword planner over a capability registry. Never touches the store."""

    def __init__(self, registry: CapabilityRegistry | None = None):
        self.registry = registry or CapabilityRegistry.load()

    def route(self, transcription: str, person: PersonNode | None = None) -> ActionPlan:
        if not transcription or not transcription.strip():
            raise ValidationError("transcription must be non-empty")
        if transcription.strip().lower() == SILENCE_TOKEN:
            return ActionPlan((SPEECH,), respond=False)
        apis = {SPEECH}
        action = None
        for _, cap in self.registry.matches(transcription):
            if cap.api == VISION:
                apis.add(VISION)
            elif cap.api == EMBODIMENT and action is None:
                apis.add(EMBODIMENT)
                action = cap.name
        return ActionPlan(tuple(a for a in API_ORDER if a in apis), action)


class VisionClient(Protocol):
    def caption(self, image_ref: str | None) -> str: ...


class StaticCaptioner:
    """Returns a fixed caption, or a per-image caption from ``table``."""

    def __init__(self, caption: str = "a person sitting in front of the robot",
                 table: dict[str, str] | None = None):
        self.default = caption
        self.table = dict(table or {})

    def caption(self, image_ref: str | None) -> str:
        if image_ref is not None and image_ref in self.table:
            return self.table[image_ref]
        return self.default


@dataclass
class Execution:
    envelope: ResponseEnvelope
    turn: SpeechTurn | None = None


class Executor:
    def __init__(self, speech: SpeechPipeline, vision: VisionClient | None = None):
        self.speech = speech
        self.vision = vision or StaticCaptioner()

    def run(self, plan: ActionPlan, transcription: str, person: PersonNode,
            image_ref: str | None = None) -> Execution:
        if not plan.respond:
            return Execution(ResponseEnvelope(SILENT))
        errors: dict[str, str] = {}
        preamble = None
        if VISION in plan.apis:
            try:
                preamble = f"VISUAL: {self.vision.caption(image_ref)}"
            except Exception as exc:
                log.warning("vision failed: %s", exc)
                errors[VISION] = str(exc)
        action = Action(plan.embodiment_action) if plan.embodiment_action else None
        turn = None
        if SPEECH in plan.apis:
            try:
                turn = self.speech.respond(person, transcription, preamble=preamble)
            except SocialMemError as exc:
                log.warning("speech failed: %s", exc)
                errors[SPEECH] = str(exc)
        text = turn.reply if turn else None
        if text is not None and action is not None:
            kind = SAY_AND_ACTION
        elif text is not None:
            kind = SAY
        elif action is not None:
            kind = ACTION
        else:
            kind = SILENT
        return Execution(ResponseEnvelope(kind, text, action, errors), turn)

    def execute(self, plan: ActionPlan, transcription: str, person: PersonNode,
                image_ref: str | None = None) -> ResponseEnvelope:
        return self.run(plan, transcription, person, image_ref).envelope
