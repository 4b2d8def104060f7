import pytest

from socialmem import EngineConfig, SocialMemory
from socialmem.errors import ValidationError
from socialmem.llm import FailingModel
from socialmem.orchestrator import (
    ACTION,
    EMBODIMENT,
    SAY,
    SAY_AND_ACTION,
    SILENT,
    SPEECH,
    VISION,
    Action,
    ActionPlan,
    Capability,
    CapabilityRegistry,
    Executor,
    IntentPlanner,
    ResponseEnvelope,
    StaticCaptioner,
)


@pytest.fixture(scope="module")
def planner():
    return IntentPlanner()


@pytest.mark.parametrize("text,apis,action", [
    ("hello there", (SPEECH,), None),
    ("What am I wearing?", (VISION, SPEECH), None),
    ("can you wave", (EMBODIMENT, SPEECH), "wave"),
    ("what color is my shirt? give me a high five", (VISION, EMBODIMENT, SPEECH), "high_five"),
    ("dance then wave", (EMBODIMENT, SPEECH), "dance"),
    ("the microwave is broken", (SPEECH,), None),
])
def test_routing(planner, text, apis, action):
    plan = planner.route(text)
    assert plan.apis == apis and plan.embodiment_action == action


def test_silence(planner):
    plan = planner.route(" (Silence) ")
    assert not plan.respond


def test_plan_validation():
    with pytest.raises(ValidationError):
        ActionPlan(())
    with pytest.raises(ValidationError):
        ActionPlan(("telepathy",))
    with pytest.raises(ValidationError):
        ActionPlan((SPEECH,), embodiment_action="wave")
    with pytest.raises(ValidationError):
        ActionPlan((EMBODIMENT,))


def test_envelope_validation():
    with pytest.raises(ValidationError):
        ResponseEnvelope(SAY)
    with pytest.raises(ValidationError):
        ResponseEnvelope(ACTION)
    with pytest.raises(ValidationError):
        ResponseEnvelope("shout", "hi")
    assert Action("wave").to_dict() == {"name": "wave", "params": {}}


def test_registry_actions_and_custom():
    reg = CapabilityRegistry.load()
    assert {"wave", "dance", "high_five", "nod"} <= set(reg.actions)
    custom = CapabilityRegistry([Capability("bow", EMBODIMENT, triggers=("bow",))])
    assert IntentPlanner(custom).route("please bow").embodiment_action == "bow"


def make_executor(**kw):
    mem = SocialMemory(EngineConfig(dim=32), **kw)
    return mem, mem.executor, mem.graph.upsert_person("face-1")


def test_vision_caption_reaches_echo_reply(planner):
    mem, ex, p = make_executor(vision=StaticCaptioner("red shirt"))
    env = ex.execute(planner.route("what am I wearing"), "what am I wearing", p)
    assert env.kind == SAY and "red shirt" in env.text


def test_caption_table_by_image_ref(planner):
    mem, ex, p = make_executor(vision=StaticCaptioner("plain", {"img1": "green hat"}))
    env = ex.execute(planner.route("what am I wearing"), "what am I wearing", p, "img1")
    assert "green hat" in env.text


def test_action_envelope(planner):
    mem, ex, p = make_executor()
    env = ex.execute(planner.route("wave please"), "wave please", p)
    assert env.kind == SAY_AND_ACTION and env.action == Action("wave")


def test_silent_plan_no_append(planner):
    mem, ex, p = make_executor()
    env = ex.execute(planner.route("(silence)"), "(silence)", p)
    assert env.kind == SILENT and env.text is None
    assert mem.chain.history_length(p) == 0


def test_speech_failure_reported_action_kept(planner):
    mem, ex, p = make_executor(model=FailingModel())
    env = ex.execute(planner.route("wave please"), "wave please", p)
    assert env.kind == ACTION and SPEECH in env.errors
    env = ex.execute(planner.route("hello"), "hello", p)
    assert env.kind == SILENT and SPEECH in env.errors


def test_vision_failure_reported_speech_continues(planner):
    class Blind:
        def caption(self, image_ref):
            raise RuntimeError("camera offline")

    mem, ex, p = make_executor(vision=Blind())
    env = ex.execute(planner.route("what am I wearing"), "what am I wearing", p)
    assert env.kind == SAY and env.errors == {VISION: "camera offline"}
