"""Staged planning pipeline over a pluggable conversation model.

Five fixed stages: (1) describe the scenario, (2) identify task-related
objects, (3) draft natural-language steps, (4) rationality check and
revision, (5) emit meta-action lines. A retrieved demonstration's prompt
cache, when given, is prepended as an extra dialogue round before stage 1,
which is the whole in-context-learning mechanism; it never changes the
stage count. Stage-5 output is parsed and chain-validated, with a single
repair round before the session is marked failed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

from . import meta_action
from .conversation import ConversationModel, Message, ModelError, PromptCache, Role
from .meta_action import GripperState, Plan
from .scene import SceneGraph

PROMPTS_VERSION = "1"

STAGE_COUNT = 5


class PlannerError(RuntimeError):
    pass


class PlanParseError(PlannerError):
    """Stage-5 reply could not be turned into a plan."""


class ChainValidationError(PlannerError):
    """Stage-5 plan parsed but violates the gripper chain rule."""


class StageIncomplete(PlannerError):
    def __init__(self, stage: int):
        super().__init__(f"stage {stage} has not completed")
        self.stage = stage


def load_template(name: str) -> str:
    return resources.files("metaplan.prompts").joinpath(f"{name}.txt").read_text("utf-8")


def meta_action_definition() -> str:
    return load_template("meta_action_definition")


@dataclass
class SessionFailure:
    stage: str  # "1".."5" or "repair"
    error: str

    def to_dict(self) -> dict:
        return {"stage": self.stage, "error": self.error}


@dataclass
class PlanningSession:
    """One planning run: the conversation, per-stage outputs, and the result."""

    instruction: str
    scene: SceneGraph
    icl_demo: PromptCache | None
    stage_outputs: dict[int, str] = field(default_factory=dict)
    messages: list[Message] = field(default_factory=list)
    final: Plan | None = None
    failure: SessionFailure | None = None
    model_tag: str = "unknown"

    @property
    def succeeded(self) -> bool:
        return self.final is not None

    def to_dict(self) -> dict:
        return {
            "instruction": self.instruction,
            "scene": self.scene.to_dict(),
            "used_demo": self.icl_demo is not None,
            "stages": {str(k): v for k, v in sorted(self.stage_outputs.items())},
            "messages": [m.to_dict() for m in self.messages],
            "final": self.final.to_json_list() if self.final else None,
            "failure": self.failure.to_dict() if self.failure else None,
        }

    def prompt_cache(self, created_at: float) -> PromptCache:
        """Freeze this session's conversation for later demonstration replay."""
        return PromptCache(tuple(self.messages), self.model_tag, created_at)


def extract_fenced_block(reply: str) -> str:
    """Text between the first pair of ``` fences; raises if absent."""
    parts = reply.split("```")
    if len(parts) < 3:
        raise PlanParseError("reply has no fenced meta-action block")
    block = parts[1]
    # Drop an info string on the opening fence, if any.
    if "\n" in block:
        first, rest = block.split("\n", 1)
        if first.strip() and "," not in first:
            block = rest
    return block.strip()


def parse_stage5_reply(reply: str, task_id: str) -> Plan:
    block = extract_fenced_block(reply)
    lines = [line for line in block.splitlines() if line.strip()]
    if not lines:
        raise PlanParseError("fenced block is empty")
    actions = []
    for lineno, line in enumerate(lines, start=1):
        try:
            actions.append(meta_action.parse(line))
        except meta_action.MetaActionError as exc:
            raise PlanParseError(f"line {lineno}: {exc}") from exc
    return Plan(tuple(actions), task_id)


def _render(template: str, **values: str) -> str:
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", value)
    return out


def plan_task(
    instruction: str,
    scene: SceneGraph,
    model: ConversationModel,
    demo: PromptCache | None = None,
    task_id: str = "plan",
    initial_gripper: GripperState = GripperState.OPEN,
) -> PlanningSession:
    """Run the five planning stages and return the session.

    The session's `final` plan is set only when every stage completed and the
    parsed plan passed chain validation (after at most one repair round);
    otherwise `failure` records the failing stage.
    """
    if not instruction.strip():
        raise ValueError("instruction must be non-empty")

    session = PlanningSession(instruction=instruction, scene=scene, icl_demo=demo)
    session.model_tag = getattr(model, "model_tag", "unknown")
    messages = session.messages
    messages.append(Message(Role.SYSTEM, load_template("system")))
    if demo is not None:
        messages.extend(demo.dialogue_rounds())

    stage_prompts = {
        1: _render(load_template("stage1"), instruction=instruction, scene=scene.to_text()),
        2: load_template("stage2"),
        3: load_template("stage3"),
        4: load_template("stage4"),
        5: _render(load_template("stage5"), meta_action_definition=meta_action_definition()),
    }

    for stage in range(1, STAGE_COUNT + 1):
        payload = scene if stage == 1 else None
        messages.append(Message(Role.USER, stage_prompts[stage], payload))
        try:
            reply = model.complete(messages, stage=str(stage))
        except ModelError as exc:
            session.failure = SessionFailure(str(stage), f"model error: {exc}")
            return session
        messages.append(Message(Role.ASSISTANT, reply))
        session.stage_outputs[stage] = reply

    plan, error = _parse_and_validate(session.stage_outputs[5], task_id, initial_gripper)
    if plan is not None:
        session.final = plan
        return session

    # One bounded repair round: re-prompt with the validator's diagnosis.
    messages.append(Message(Role.USER, _render(load_template("repair"), error=error)))
    try:
        reply = model.complete(messages, stage="repair")
    except ModelError as exc:
        session.failure = SessionFailure("repair", f"model error: {exc}")
        return session
    messages.append(Message(Role.ASSISTANT, reply))

    plan, error = _parse_and_validate(reply, task_id, initial_gripper)
    if plan is not None:
        session.stage_outputs[5] = reply
        session.final = plan
    else:
        # The repair round retries stage 5, so the failure belongs to it.
        session.failure = SessionFailure("5", f"after repair: {error}")
    return session


def _parse_and_validate(
    reply: str, task_id: str, initial: GripperState
) -> tuple[Plan | None, str]:
    try:
        plan = parse_stage5_reply(reply, task_id)
    except PlanParseError as exc:
        return None, str(exc)
    report = meta_action.validate_chain(plan, initial)
    if not report.ok:
        return None, report.message
    return plan, ""


def extract_relevant_objects(session: PlanningSession) -> set[str]:
    """Lowercased, deduplicated object names from the stage-2 bullet list."""
    if 2 not in session.stage_outputs:
        raise StageIncomplete(2)
    names: set[str] = set()
    for line in session.stage_outputs[2].splitlines():
        stripped = line.strip()
        if stripped.startswith("- "):
            name = stripped[2:].strip().lower()
            if name:
                names.add(name)
    return names
