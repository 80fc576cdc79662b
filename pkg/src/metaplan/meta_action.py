"""Meta-action DSL: types, parser, serializer, chain validator, gripper semantics.

A meta-action line has five comma-separated fields:

    <pre gripper>, <motion>, <preposition>, <object or empty>, <post gripper>

e.g. "opened, move to, front on, burger, closed". Parsing is tolerant of
synonyms and case ("open"/"opened", "move"/"move to"); serialization always
emits the canonical lowercase form, so parse(serialize(a)) == a.

All types are immutable and all operations pure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence


class GripperState(enum.Enum):
    OPEN = "open"
    CLOSE = "close"


class MotionKind(enum.Enum):
    MOVE = "move"
    ROTATE = "rotate"


class Preposition(enum.Enum):
    ABOVE = "above"
    ON = "on"
    FRONT_ON = "front on"
    BEHIND = "behind"
    LEFT_OF = "left of"
    RIGHT_OF = "right of"
    INTO = "into"
    UP = "up"
    DOWN = "down"
    FORWARD = "forward"
    BACKWARD = "backward"


class GripperCommand(enum.Enum):
    CLOSE_GRIPPER = "close_gripper"
    OPEN_GRIPPER = "open_gripper"
    HOLD = "hold"


class MetaActionError(ValueError):
    """Parse failure; carries the offending token and its 1-based column."""

    def __init__(self, message: str, token: str, column: int):
        super().__init__(f"{message} (token {token!r} at column {column})")
        self.token = token
        self.column = column


class UnknownGripperWord(MetaActionError):
    def __init__(self, token: str, column: int):
        super().__init__("unknown gripper word", token, column)


class UnknownMotionWord(MetaActionError):
    def __init__(self, token: str, column: int):
        super().__init__("unknown motion word", token, column)


class UnknownPreposition(MetaActionError):
    def __init__(self, token: str, column: int):
        super().__init__("unknown preposition", token, column)


class FieldCountMismatch(MetaActionError):
    def __init__(self, count: int, token: str, column: int):
        super().__init__(f"expected 5 comma-separated fields, got {count}", token, column)
        self.count = count


class EmptyPlanError(ValueError):
    def __init__(self):
        super().__init__("plan has no actions")


@dataclass(frozen=True)
class LocationDescription:
    """Preposition plus optional target object; preposition-only is legal."""

    preposition: Preposition
    object_ref: str | None = None

    def __post_init__(self):
        if self.object_ref is not None:
            ref = " ".join(self.object_ref.lower().split())
            if not ref:
                raise ValueError("object_ref must be non-empty when present")
            if "," in ref:
                raise ValueError("object_ref cannot contain commas")
            object.__setattr__(self, "object_ref", ref)


@dataclass(frozen=True)
class MetaAction:
    pre: GripperState
    motion: MotionKind
    location: LocationDescription
    post: GripperState


@dataclass(frozen=True)
class Plan:
    """Ordered meta-action chain for one task; never empty."""

    actions: tuple[MetaAction, ...]
    task_id: str

    def __post_init__(self):
        actions = tuple(self.actions)
        if not actions:
            raise EmptyPlanError()
        object.__setattr__(self, "actions", actions)

    def __len__(self) -> int:
        return len(self.actions)

    def to_text(self) -> str:
        return "\n".join(serialize(a) for a in self.actions)

    def to_json_list(self) -> list[dict]:
        return [action_to_json(a) for a in self.actions]

    @staticmethod
    def from_text(text: str, task_id: str) -> Plan:
        lines = [line for line in text.splitlines() if line.strip()]
        return Plan(tuple(parse(line) for line in lines), task_id)

    @staticmethod
    def from_json_list(items: Iterable[dict], task_id: str) -> Plan:
        return Plan(tuple(action_from_json(d) for d in items), task_id)


_GRIPPER_WORDS = {
    "opened": GripperState.OPEN,
    "open": GripperState.OPEN,
    "closed": GripperState.CLOSE,
    "close": GripperState.CLOSE,
}

_MOTION_WORDS = {
    "move to": MotionKind.MOVE,
    "move": MotionKind.MOVE,
    "rotate to": MotionKind.ROTATE,
    "rotate": MotionKind.ROTATE,
}

_PREPOSITION_WORDS = {p.value: p for p in Preposition}

_CANONICAL_GRIPPER = {GripperState.OPEN: "opened", GripperState.CLOSE: "closed"}
_CANONICAL_MOTION = {MotionKind.MOVE: "move to", MotionKind.ROTATE: "rotate to"}


def _normalize_token(raw: str) -> str:
    """Lowercase and collapse internal whitespace runs to single spaces."""
    return " ".join(raw.lower().split())


def _split_fields(text: str) -> list[tuple[str, int]]:
    """Split on commas, keeping the 1-based column of each field's first
    non-space character (or of the field start when blank)."""
    fields: list[tuple[str, int]] = []
    start = 0
    for part in text.split(","):
        stripped = part.strip()
        offset = part.index(stripped) if stripped else 0
        fields.append((stripped, start + offset + 1))
        start += len(part) + 1
    return fields


def parse(text: str) -> MetaAction:
    """Parse one meta-action line into its structured form.

    Raises UnknownGripperWord / UnknownMotionWord / UnknownPreposition /
    FieldCountMismatch; never anything else, on any input string.
    """
    fields = _split_fields(text)
    if len(fields) != 5:
        if len(fields) > 5:
            token, column = fields[5]
        else:
            token, column = "", len(text) + 1
        raise FieldCountMismatch(len(fields), token, column)

    (pre_raw, pre_col), (motion_raw, motion_col), (prep_raw, prep_col), (
        obj_raw,
        _,
    ), (post_raw, post_col) = fields

    pre = _GRIPPER_WORDS.get(_normalize_token(pre_raw))
    if pre is None:
        raise UnknownGripperWord(pre_raw, pre_col)
    motion = _MOTION_WORDS.get(_normalize_token(motion_raw))
    if motion is None:
        raise UnknownMotionWord(motion_raw, motion_col)
    preposition = _PREPOSITION_WORDS.get(_normalize_token(prep_raw))
    if preposition is None:
        raise UnknownPreposition(prep_raw, prep_col)
    post = _GRIPPER_WORDS.get(_normalize_token(post_raw))
    if post is None:
        raise UnknownGripperWord(post_raw, post_col)

    obj = _normalize_token(obj_raw) or None
    return MetaAction(pre, motion, LocationDescription(preposition, obj), post)


def serialize(action: MetaAction) -> str:
    """Canonical five-field line; the object slot stays empty when absent."""
    return ", ".join(
        [
            _CANONICAL_GRIPPER[action.pre],
            _CANONICAL_MOTION[action.motion],
            action.location.preposition.value,
            action.location.object_ref or "",
            _CANONICAL_GRIPPER[action.post],
        ]
    )


def action_to_json(action: MetaAction) -> dict:
    return {
        "pre": action.pre.value,
        "motion": action.motion.value,
        "preposition": action.location.preposition.value.replace(" ", "_"),
        "object": action.location.object_ref,
        "post": action.post.value,
    }


def action_from_json(d: dict) -> MetaAction:
    return MetaAction(
        pre=GripperState(d["pre"]),
        motion=MotionKind(d["motion"]),
        location=LocationDescription(
            Preposition(d["preposition"].replace("_", " ")), d.get("object")
        ),
        post=GripperState(d["post"]),
    )


@dataclass(frozen=True)
class ChainReport:
    """Result of chain validation; ok=True means no violation found."""

    ok: bool
    index: int | None = None
    kind: str | None = None  # "initial" or "linkage"
    expected: GripperState | None = None
    actual: GripperState | None = None

    @property
    def message(self) -> str:
        if self.ok:
            return "chain OK"
        if self.kind == "initial":
            return (
                f"action 0 starts {self.actual.value} but the gripper is "
                f"{self.expected.value}"
            )
        return (
            f"broken linkage at index {self.index}: previous action ends "
            f"{self.expected.value} but this one starts {self.actual.value}"
        )


def validate_chain(
    plan: Plan | Sequence[MetaAction], initial: GripperState = GripperState.OPEN
) -> ChainReport:
    """Check the linkage rule (each post equals the next pre) plus the
    initial-state rule; reports the first violating action index."""
    actions = plan.actions if isinstance(plan, Plan) else tuple(plan)
    if not actions:
        raise EmptyPlanError()
    if actions[0].pre != initial:
        return ChainReport(False, 0, "initial", expected=initial, actual=actions[0].pre)
    for i in range(1, len(actions)):
        if actions[i - 1].post != actions[i].pre:
            return ChainReport(
                False, i, "linkage", expected=actions[i - 1].post, actual=actions[i].pre
            )
    return ChainReport(True)


def gripper_command(pre: GripperState, post: GripperState) -> GripperCommand:
    """Command implied by the surrounding states: change closes/opens, equal holds."""
    if pre == post:
        return GripperCommand.HOLD
    if post == GripperState.CLOSE:
        return GripperCommand.CLOSE_GRIPPER
    return GripperCommand.OPEN_GRIPPER
