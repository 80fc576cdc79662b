"""Deterministic kinematic tabletop micro-world.

Objects are axis-aligned boxes on a table plane at z=0 (frame: x forward,
y left, z up). The gripper is a point that sweeps straight lines in 5 mm
steps; rigid objects and prismatic joints are solid for collision, buttons
too, while containers are open so things can be moved into them. Grasping
attaches the nearest graspable object whose grasp point lies within the
grasp radius; releasing settles the object straight down onto the first
supporting surface below. No dynamics, no forces: identical command
sequences from identical worlds produce bit-identical final worlds.
"""

from __future__ import annotations

import copy
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import GRIPPER_DOWN, Pose6D, quat_between, quat_mul, quat_rotate
from .meta_action import GripperCommand, GripperState
from .scene import SceneEdge, SceneGraph, SceneNode

SCENE_SCHEMA = "scene/1"


class MissingFixture(FileNotFoundError):
    pass


class ObjectKind(enum.Enum):
    RIGID = "rigid"
    CONTAINER = "container"
    PRISMATIC_JOINT = "prismatic_joint"
    BUTTON = "button"


# Kinds that block the gripper sweep. Containers are open boxes: their AABB
# defines the interior, not a solid obstacle.
SOLID_KINDS = (ObjectKind.RIGID, ObjectKind.PRISMATIC_JOINT, ObjectKind.BUTTON)
GRASPABLE_KINDS = (ObjectKind.RIGID, ObjectKind.PRISMATIC_JOINT)


@dataclass
class WorldConfig:
    sweep_step: float = 0.005
    grasp_radius: float = 0.03
    perturb_range: float = 0.02

    def to_dict(self) -> dict:
        return {
            "sweep_step": self.sweep_step,
            "grasp_radius": self.grasp_radius,
            "perturb_range": self.perturb_range,
        }


@dataclass
class SimObject:
    name: str
    kind: ObjectKind
    category: str
    pose: Pose6D
    extents: np.ndarray  # full sizes (x, y, z)
    grasp_offset: np.ndarray | None = None  # from center; default = top-face center
    perturb: bool = True
    graspable: bool = True
    joint_axis: np.ndarray | None = None  # sliding closes along +axis, opens along -axis
    max_extension: float = 0.0
    joint_extension: float = 0.0
    pressed: bool = False

    def __post_init__(self):
        self.extents = np.array(self.extents, dtype=np.float64).reshape(3)
        if self.grasp_offset is None:
            self.grasp_offset = np.array([0.0, 0.0, self.extents[2] / 2.0])
        else:
            self.grasp_offset = np.array(self.grasp_offset, dtype=np.float64).reshape(3)
        if self.kind is ObjectKind.PRISMATIC_JOINT:
            if self.joint_axis is None:
                raise ValueError(f"{self.name}: prismatic joints need a joint_axis")
            axis = np.array(self.joint_axis, dtype=np.float64).reshape(3)
            self.joint_axis = axis / np.linalg.norm(axis)

    @property
    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        half = self.extents / 2.0
        return self.pose.position - half, self.pose.position + half

    @property
    def top(self) -> float:
        return float(self.pose.position[2] + self.extents[2] / 2.0)

    @property
    def bottom(self) -> float:
        return float(self.pose.position[2] - self.extents[2] / 2.0)

    @property
    def grasp_point(self) -> np.ndarray:
        return self.pose.position + self.grasp_offset

    def footprint_contains(self, x: float, y: float) -> bool:
        lo, hi = self.aabb
        return lo[0] <= x <= hi[0] and lo[1] <= y <= hi[1]

    def solid(self) -> bool:
        return self.kind in SOLID_KINDS


def boxes_overlap(a: tuple[np.ndarray, np.ndarray], b: tuple[np.ndarray, np.ndarray]) -> bool:
    """Strict overlap: touching faces do not count."""
    return bool(np.all(a[0] < b[1]) and np.all(b[0] < a[1]))


def point_in_box(p: np.ndarray, box: tuple[np.ndarray, np.ndarray]) -> bool:
    return bool(np.all(box[0] < p) and np.all(p < box[1]))


@dataclass
class Gripper:
    pose: Pose6D
    state: GripperState = GripperState.OPEN
    attached: str | None = None
    attach_offset: np.ndarray | None = None  # world-frame vector gripper -> object center


@dataclass
class WorldState:
    objects: dict[str, SimObject]
    gripper: Gripper
    rng_seed: int = 0
    config: WorldConfig = field(default_factory=WorldConfig)

    def copy(self) -> WorldState:
        return copy.deepcopy(self)

    def object(self, name: str) -> SimObject:
        return self.objects[name]

    def attached_object(self) -> SimObject | None:
        if self.gripper.attached is None:
            return None
        return self.objects[self.gripper.attached]

    def scene_graph(self, edges: tuple[SceneEdge, ...] = ()) -> SceneGraph:
        nodes = tuple(
            SceneNode(o.name, o.category, o.pose) for o in self.objects.values()
        )
        return SceneGraph(nodes, edges)


@dataclass(frozen=True)
class MoveResult:
    reached: bool


@dataclass(frozen=True)
class GripperChange:
    attached: str | None = None
    released: str | None = None
    pressed: tuple[str, ...] = ()


def _collides(world: WorldState, gripper_pos: np.ndarray, attached: SimObject | None) -> bool:
    moving_box = None
    if attached is not None:
        half = attached.extents / 2.0
        center = gripper_pos + world.gripper.attach_offset
        moving_box = (center - half, center + half)
    for obj in world.objects.values():
        if not obj.solid():
            continue
        if attached is not None and obj.name == attached.name:
            continue
        if point_in_box(gripper_pos, obj.aabb):
            return True
        if moving_box is not None and boxes_overlap(moving_box, obj.aabb):
            return True
    return False


def _place_gripper(world: WorldState, position: np.ndarray, orientation=None) -> None:
    old = world.gripper.pose
    new_orientation = old.orientation if orientation is None else orientation
    world.gripper.pose = Pose6D(position, new_orientation)
    attached = world.attached_object()
    if attached is None:
        return
    offset = world.gripper.attach_offset
    if orientation is not None and not np.array_equal(orientation, old.orientation):
        delta = quat_between(old.orientation, new_orientation)
        offset = quat_rotate(delta, offset)
        world.gripper.attach_offset = offset
        attached.pose = Pose6D(position + offset, quat_mul(delta, attached.pose.orientation))
    else:
        attached.pose = Pose6D(position + offset, attached.pose.orientation)


def _move_joint_grasped(world: WorldState, target: Pose6D) -> MoveResult:
    """Axis-constrained drag of a grasped prismatic joint."""
    joint = world.attached_object()
    open_dir = -joint.joint_axis
    displacement = np.asarray(target.position) - world.gripper.pose.position
    delta = float(displacement @ open_dir)
    new_ext = float(np.clip(joint.joint_extension + delta, 0.0, joint.max_extension))
    allowed = new_ext - joint.joint_extension
    move_vec = open_dir * allowed
    end = world.gripper.pose.position + move_vec

    # Swept check so the drawer cannot be dragged through another solid.
    dist = float(np.linalg.norm(move_vec))
    steps = max(1, int(np.ceil(dist / world.config.sweep_step))) if dist > 0 else 0
    start = world.gripper.pose.position.copy()
    moved = 0.0
    last_free = start
    blocked = False
    for i in range(1, steps + 1):
        pos = start + move_vec * (i / steps) if i < steps else end
        half = joint.extents / 2.0
        center = pos + world.gripper.attach_offset
        box = (center - half, center + half)
        hit = False
        for obj in world.objects.values():
            if obj.name == joint.name or not obj.solid():
                continue
            if boxes_overlap(box, obj.aabb) or point_in_box(pos, obj.aabb):
                hit = True
                break
        if hit:
            blocked = True
            break
        last_free = pos
        moved = float((pos - start) @ open_dir)

    joint.joint_extension += moved
    joint.pose = Pose6D(joint.pose.position + open_dir * moved, joint.pose.orientation)
    world.gripper.pose = Pose6D(last_free, world.gripper.pose.orientation)
    reached = (not blocked) and bool(
        np.linalg.norm(world.gripper.pose.position - np.asarray(target.position)) < 1e-9
    )
    return MoveResult(reached=reached)


def move_gripper(world: WorldState, target: Pose6D) -> MoveResult:
    """Straight-line sweep to the target; stops at the last free sample.

    A grasped prismatic joint constrains motion to its slide axis and updates
    the joint extension by the projection of the displacement.
    """
    attached = world.attached_object()
    if attached is not None and attached.kind is ObjectKind.PRISMATIC_JOINT:
        return _move_joint_grasped(world, target)

    start = world.gripper.pose.position.copy()
    goal = np.array(target.position, dtype=np.float64)
    displacement = goal - start
    dist = float(np.linalg.norm(displacement))
    steps = max(1, int(np.ceil(dist / world.config.sweep_step))) if dist > 0 else 0

    last_free = start
    for i in range(1, steps + 1):
        pos = start + displacement * (i / steps) if i < steps else goal
        if _collides(world, pos, attached):
            _place_gripper(world, last_free)
            return MoveResult(reached=False)
        last_free = pos

    _place_gripper(world, goal, target.orientation)
    return MoveResult(reached=True)


def _settle(world: WorldState, obj: SimObject) -> None:
    """Snap straight down onto the first supporting surface below."""
    x, y = float(obj.pose.position[0]), float(obj.pose.position[1])
    bottom = obj.bottom
    support = 0.0  # table plane
    tol = 1e-9
    for other in world.objects.values():
        if other.name == obj.name:
            continue
        if not other.footprint_contains(x, y):
            continue
        if other.solid():
            surface = other.top
        elif other.kind is ObjectKind.CONTAINER:
            surface = other.bottom  # open box: things rest on its floor
        else:
            continue
        if surface <= bottom + tol:
            support = max(support, surface)
    drop = bottom - support
    obj.pose = Pose6D(obj.pose.position - np.array([0.0, 0.0, drop]), obj.pose.orientation)


def set_gripper(world: WorldState, command: GripperCommand) -> GripperChange:
    """Apply a gripper command: close grasps/presses, open releases and settles."""
    if command is GripperCommand.HOLD:
        return GripperChange()

    if command is GripperCommand.CLOSE_GRIPPER:
        world.gripper.state = GripperState.CLOSE
        pos = world.gripper.pose.position
        radius = world.config.grasp_radius
        pressed: list[str] = []
        best: SimObject | None = None
        best_dist = None
        for obj in world.objects.values():
            dist = float(np.linalg.norm(obj.grasp_point - pos))
            if dist > radius:
                continue
            if obj.kind is ObjectKind.BUTTON:
                if not obj.pressed:
                    obj.pressed = True
                    pressed.append(obj.name)
                continue
            if obj.kind in GRASPABLE_KINDS and obj.graspable:
                if (
                    best is None
                    or dist < best_dist
                    or (dist == best_dist and obj.name < best.name)
                ):
                    best = obj
                    best_dist = dist
        attached_name = None
        if best is not None and world.gripper.attached is None:
            world.gripper.attached = best.name
            world.gripper.attach_offset = best.pose.position - pos
            attached_name = best.name
        return GripperChange(attached=attached_name, pressed=tuple(pressed))

    # OPEN_GRIPPER
    world.gripper.state = GripperState.OPEN
    released = world.gripper.attached
    if released is not None:
        obj = world.objects[released]
        world.gripper.attached = None
        world.gripper.attach_offset = None
        if obj.kind is ObjectKind.RIGID:
            _settle(world, obj)
    return GripperChange(released=released)


# -- task fixtures ---------------------------------------------------------

TASK_NAMES = ("insert_pen", "clean_floor", "open_drawer", "make_coffee")


@dataclass(frozen=True)
class TaskSpec:
    name: str
    instruction: str
    initial_world: WorldState
    success: dict
    edges: tuple[SceneEdge, ...] = ()

    def scene_graph(self, world: WorldState | None = None) -> SceneGraph:
        return (world or self.initial_world).scene_graph(self.edges)


def load_scene(path: str | Path) -> TaskSpec:
    path = Path(path)
    if not path.exists():
        raise MissingFixture(str(path))
    data = json.loads(path.read_text(encoding="utf-8"))
    if data.get("schema") != SCENE_SCHEMA:
        raise ValueError(f"{path}: expected schema {SCENE_SCHEMA!r}")

    objects: dict[str, SimObject] = {}
    for entry in data["objects"]:
        kind = ObjectKind(entry["kind"])
        obj = SimObject(
            name=entry["name"],
            kind=kind,
            category=entry.get("category", entry["name"]),
            pose=Pose6D(np.array(entry["position"]), GRIPPER_DOWN),
            extents=np.array(entry["extents"]),
            grasp_offset=np.array(entry["grasp_offset"]) if "grasp_offset" in entry else None,
            perturb=entry.get("perturb", kind is ObjectKind.RIGID),
            graspable=entry.get("graspable", True),
            joint_axis=np.array(entry["joint_axis"]) if "joint_axis" in entry else None,
            max_extension=entry.get("max_extension", 0.0),
        )
        objects[obj.name] = obj

    grip = data["gripper"]
    gripper = Gripper(
        pose=Pose6D(np.array(grip["position"]), GRIPPER_DOWN),
        state=GripperState(grip.get("state", "open")),
    )
    edges = tuple(
        SceneEdge(e["subject"], e["relation"], e["object"]) for e in data.get("relations", [])
    )
    world = WorldState(objects=objects, gripper=gripper)
    return TaskSpec(
        name=data["name"],
        instruction=data["instruction"],
        initial_world=world,
        success=data["success"],
        edges=edges,
    )


def builtin_scene_path(task: str) -> Path:
    from importlib import resources

    candidate = resources.files("metaplan").joinpath(f"fixtures/scenes/{task}.json")
    with resources.as_file(candidate) as p:
        if not p.exists():
            raise MissingFixture(task)
        return Path(p)


def load_builtin_task(task: str) -> TaskSpec:
    return load_scene(builtin_scene_path(task))


def perturbed_world(task: TaskSpec, seed: int) -> WorldState:
    """Fresh copy of the initial world with rigid objects jittered in x/y."""
    world = task.initial_world.copy()
    world.rng_seed = seed
    rng = np.random.default_rng(seed)
    limit = world.config.perturb_range
    for obj in world.objects.values():
        jitter = rng.uniform(-limit, limit, size=2)
        if obj.kind is ObjectKind.RIGID and obj.perturb:
            obj.pose = Pose6D(
                obj.pose.position + np.array([jitter[0], jitter[1], 0.0]),
                obj.pose.orientation,
            )
    return world


def check_success(world: WorldState, task: TaskSpec) -> bool:
    """Evaluate the task's success predicate on the given world."""
    params = task.success
    kind = params["kind"]

    if kind == "insert_pen":
        pen = world.object(params["pen"])
        holder = world.object(params["holder"])
        radius = float(min(holder.extents[0], holder.extents[1]) / 2.0)
        center = pen.pose.position
        dx = center[0] - holder.pose.position[0]
        dy = center[1] - holder.pose.position[1]
        lo, hi = holder.aabb
        return bool(dx * dx + dy * dy <= radius * radius and lo[2] <= center[2] <= hi[2])

    if kind == "clean_floor":
        bin_obj = world.object(params["bin"])
        lo, hi = bin_obj.aabb
        for name in params["trash"]:
            center = world.object(name).pose.position
            if not bool(np.all(lo <= center) and np.all(center <= hi)):
                return False
        return True

    if kind == "open_drawer":
        drawer = world.object(params["drawer"])
        return drawer.joint_extension >= float(params["min_extension"])

    if kind == "make_coffee":
        button = world.object(params["button"])
        mug = world.object(params["mug"])
        machine = world.object(params["machine"])
        if not button.pressed:
            return False
        pad_center = params["pad_center"]
        pad_half = float(params["pad_half_size"])
        on_pad = (
            abs(mug.pose.position[0] - pad_center[0]) <= pad_half
            and abs(mug.pose.position[1] - pad_center[1]) <= pad_half
        )
        resting = abs(mug.bottom - machine.top) <= 1e-6
        return bool(on_pad and resting)

    raise ValueError(f"unknown success predicate kind {kind!r}")


def dump_world_png(world: WorldState, path: str | Path) -> None:
    """Top-down AABB debug plot (no interactive UI, just a file)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Rectangle

    fig, ax = plt.subplots(figsize=(6, 6))
    colors = {
        ObjectKind.RIGID: "#4c72b0",
        ObjectKind.CONTAINER: "#dd8452",
        ObjectKind.PRISMATIC_JOINT: "#55a868",
        ObjectKind.BUTTON: "#c44e52",
    }
    for obj in world.objects.values():
        lo, hi = obj.aabb
        ax.add_patch(
            Rectangle(
                (lo[0], lo[1]),
                hi[0] - lo[0],
                hi[1] - lo[1],
                fill=obj.solid(),
                alpha=0.4,
                color=colors[obj.kind],
            )
        )
        ax.annotate(obj.name, (obj.pose.position[0], obj.pose.position[1]), ha="center")
    gx, gy = world.gripper.pose.position[0], world.gripper.pose.position[1]
    ax.plot([gx], [gy], marker="x", color="black", markersize=10)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.autoscale_view()
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
