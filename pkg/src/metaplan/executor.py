"""Meta-action execution: location description -> target pose -> world commands.

Each action resolves in three steps: (1) the location description becomes an
initial pose, anchored at the named object or nudged from the last pose when
only a preposition is given; (2) n candidate poses are sampled uniformly
around it, translation-only for moves and rotation-only for rotates, with the
zero offset always kept as candidate 0; (3) the conversation model picks one
candidate by index, falling back to candidate 0 on nonsense. The gripper
command implied by the action's pre/post states fires once the pose is
reached.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conversation import ConversationModel, Message, Role
from .geometry import (
    GRIPPER_DOWN,
    Pose6D,
    quat_angle,
    quat_between,
    quat_from_axis_angle,
    sample_in_ball,
    sample_rotation,
)
from .meta_action import (
    LocationDescription,
    MetaAction,
    MotionKind,
    Preposition,
    gripper_command,
    serialize,
)
from .scene import SceneGraph
from .world import GripperChange, MoveResult, ObjectKind, WorldState, move_gripper, set_gripper

# Failure buckets used by the evaluation harness.
CATEGORY_TARGET_LOCATING = "target_locating"
CATEGORY_ACTION_PARSING = "action_parsing"
CATEGORY_TASK_PLANNING = "task_planning"
CATEGORY_CANDIDATE_POSE = "candidate_pose"
CATEGORY_OTHER = "other"

FAILURE_CATEGORIES = (
    CATEGORY_TARGET_LOCATING,
    CATEGORY_ACTION_PARSING,
    CATEGORY_TASK_PLANNING,
    CATEGORY_CANDIDATE_POSE,
    CATEGORY_OTHER,
)


class UnknownObject(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.object_name = name


@dataclass(frozen=True)
class ExecutorConfig:
    candidate_count: int = 8
    max_translation_offset: float = 0.05  # meters
    max_rotation_offset: float = np.deg2rad(30.0)  # radians
    clearance: float = 0.10  # "above" hover height over the object top
    standoff: float = 0.02  # contact-range gap for "on"-style approaches
    step: float = 0.10  # preposition-only directional nudge
    use_pose_hints: bool = False  # ask the model for an orientation override

    def to_dict(self) -> dict:
        return {
            "candidate_count": self.candidate_count,
            "max_translation_offset": self.max_translation_offset,
            "max_rotation_offset": float(self.max_rotation_offset),
            "clearance": self.clearance,
            "standoff": self.standoff,
            "step": self.step,
            "use_pose_hints": self.use_pose_hints,
        }


class SampleMode:
    TRANSLATION_ONLY = "translation_only"
    ROTATION_ONLY = "rotation_only"


@dataclass(frozen=True)
class CandidateSet:
    base: Pose6D
    candidates: tuple[Pose6D, ...]
    mode: str
    seed: int

    def __len__(self) -> int:
        return len(self.candidates)


# Unit direction per preposition, world frame (x forward, y left, z up).
_DIRECTIONS = {
    Preposition.UP: np.array([0.0, 0.0, 1.0]),
    Preposition.DOWN: np.array([0.0, 0.0, -1.0]),
    Preposition.FORWARD: np.array([1.0, 0.0, 0.0]),
    Preposition.BACKWARD: np.array([-1.0, 0.0, 0.0]),
    Preposition.LEFT_OF: np.array([0.0, 1.0, 0.0]),
    Preposition.RIGHT_OF: np.array([0.0, -1.0, 0.0]),
    Preposition.ABOVE: np.array([0.0, 0.0, 1.0]),
}


def _parse_orientation_hint(reply: str) -> np.ndarray | None:
    """Accept "axis: x|y|z, angle: <degrees>" or "default"; else None."""
    text = reply.strip().lower()
    if not text or text == "default":
        return None
    axis_map = {"x": [1.0, 0.0, 0.0], "y": [0.0, 1.0, 0.0], "z": [0.0, 0.0, 1.0]}
    axis = None
    angle = None
    for part in text.replace(";", ",").split(","):
        if ":" not in part:
            continue
        key, value = part.split(":", 1)
        key = key.strip()
        value = value.strip()
        if key == "axis" and value in axis_map:
            axis = axis_map[value]
        elif key == "angle":
            try:
                angle = np.deg2rad(float(value))
            except ValueError:
                return None
    if axis is None or angle is None:
        return None
    return quat_from_axis_angle(axis, angle)


def resolve_init_pose(
    location: LocationDescription,
    world: WorldState,
    last: Pose6D,
    model: ConversationModel | None = None,
    config: ExecutorConfig = ExecutorConfig(),
) -> Pose6D:
    """Initial pose for a location description.

    Preposition-only descriptions nudge the last pose one step along the
    preposition's direction. Object-bearing ones anchor at the object:
    "above" hovers one clearance over the top, "into" targets a container's
    interior centroid, and everything else stands off by the contact gap
    along the preposition's axis. Orientation is gripper-down unless the
    model supplies a parseable hint (opt-in).
    """
    if location.object_ref is None:
        direction = _DIRECTIONS.get(location.preposition)
        offset = config.step * direction if direction is not None else np.zeros(3)
        position = last.position + offset
        orientation = last.orientation
    else:
        name = location.object_ref
        if name not in world.objects:
            raise UnknownObject(name)
        obj = world.objects[name]
        center = obj.pose.position
        lo, hi = obj.aabb
        prep = location.preposition
        if prep is Preposition.ABOVE:
            position = np.array([center[0], center[1], hi[2] + config.clearance])
        elif prep is Preposition.INTO and obj.kind is ObjectKind.CONTAINER:
            position = center.copy()
        elif prep in (Preposition.ON, Preposition.INTO, Preposition.UP):
            position = np.array([center[0], center[1], hi[2] + config.standoff])
        elif prep in (Preposition.FRONT_ON, Preposition.BACKWARD):
            position = np.array([lo[0] - config.standoff, center[1], center[2]])
        elif prep in (Preposition.BEHIND, Preposition.FORWARD):
            position = np.array([hi[0] + config.standoff, center[1], center[2]])
        elif prep is Preposition.LEFT_OF:
            position = np.array([center[0], hi[1] + config.standoff, center[2]])
        elif prep is Preposition.RIGHT_OF:
            position = np.array([center[0], lo[1] - config.standoff, center[2]])
        else:  # DOWN with an object: stand off under its top, same as ON
            position = np.array([center[0], center[1], hi[2] + config.standoff])
        orientation = GRIPPER_DOWN

    if config.use_pose_hints and model is not None:
        prompt = (
            "Choose the gripper orientation for the goal "
            f"'{location.preposition.value}"
            + (f" {location.object_ref}" if location.object_ref else "")
            + "'. Answer 'default' or 'axis: x|y|z, angle: <degrees>'."
        )
        reply = model.complete([Message(Role.USER, prompt)], stage="pose_hint")
        hint = _parse_orientation_hint(reply)
        if hint is not None:
            orientation = hint

    return Pose6D(np.asarray(position), orientation)


def sample_candidates(
    init: Pose6D,
    motion: MotionKind,
    n: int,
    seed: int,
    config: ExecutorConfig = ExecutorConfig(),
) -> CandidateSet:
    """n offset poses around init, candidate 0 always the zero offset.

    Moves sample translations uniformly in a ball; rotates sample a uniform
    axis with angle uniform in the allowed band. The untouched component is
    shared exactly (same array) with the base pose.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    candidates: list[Pose6D] = [init]
    if motion is MotionKind.MOVE:
        mode = SampleMode.TRANSLATION_ONLY
        for _ in range(n - 1):
            candidates.append(init.translated(sample_in_ball(rng, config.max_translation_offset)))
    else:
        mode = SampleMode.ROTATION_ONLY
        for _ in range(n - 1):
            candidates.append(init.rotated(sample_rotation(rng, config.max_rotation_offset)))
    return CandidateSet(base=init, candidates=tuple(candidates), mode=mode, seed=seed)


def _pose_summary(p: Pose6D) -> str:
    x, y, z = p.position
    w, qx, qy, qz = p.orientation
    return f"pos=({x:.4f}, {y:.4f}, {z:.4f}) quat=({w:.4f}, {qx:.4f}, {qy:.4f}, {qz:.4f})"


def select_target(
    candidate_set: CandidateSet,
    goal_text: str,
    scene: SceneGraph,
    model: ConversationModel,
) -> Pose6D:
    """Ask the model to pick a candidate by index; bad picks fall back to 0."""
    if not candidate_set.candidates:
        raise ValueError("candidate set is empty")
    listing = "\n".join(
        f"{i}: {_pose_summary(c)}" for i, c in enumerate(candidate_set.candidates)
    )
    prompt = (
        f"Goal: {goal_text}\n\nScene:\n{scene.to_text()}\n\n"
        f"Candidate gripper poses:\n{listing}\n\n"
        "Answer with the index of the best candidate, as a bare number."
    )
    reply = model.complete([Message(Role.USER, prompt)], stage="select")
    try:
        index = int(reply.strip())
    except ValueError:
        index = 0
    if not 0 <= index < len(candidate_set.candidates):
        index = 0
    return candidate_set.candidates[index]


@dataclass(frozen=True)
class StepOutcome:
    action_line: str
    target: Pose6D | None
    reached: bool
    gripper_change: GripperChange | None
    failure_category: str | None = None

    @property
    def ok(self) -> bool:
        return self.failure_category is None

    def to_dict(self) -> dict:
        return {
            "action_line": self.action_line,
            "p_target": self.target.to_dict() if self.target else None,
            "reached": self.reached,
            "category": self.failure_category,
        }


def execute_action(
    action: MetaAction,
    world: WorldState,
    model: ConversationModel,
    scene: SceneGraph,
    seed: int = 0,
    config: ExecutorConfig = ExecutorConfig(),
) -> StepOutcome:
    """Resolve, sample, select, move, then apply the implied gripper command."""
    line = serialize(action)
    try:
        init = resolve_init_pose(
            action.location, world, world.gripper.pose, model, config
        )
    except UnknownObject:
        return StepOutcome(
            line, None, False, None, failure_category=CATEGORY_TARGET_LOCATING
        )

    candidate_set = sample_candidates(
        init, action.motion, config.candidate_count, seed, config
    )
    target = select_target(candidate_set, line, scene, model)

    result: MoveResult = move_gripper(world, target)
    if not result.reached:
        return StepOutcome(
            line, target, False, None, failure_category=CATEGORY_CANDIDATE_POSE
        )

    change = set_gripper(world, gripper_command(action.pre, action.post))
    return StepOutcome(line, target, True, change)


def candidate_offsets(candidate_set: CandidateSet) -> list[float]:
    """Offset magnitudes of each candidate from the base pose (for auditing)."""
    out = []
    for c in candidate_set.candidates:
        if candidate_set.mode == SampleMode.TRANSLATION_ONLY:
            out.append(float(np.linalg.norm(c.position - candidate_set.base.position)))
        else:
            out.append(quat_angle(quat_between(candidate_set.base.orientation, c.orientation)))
    return out
