"""Meta-action planning stack.

A task instruction is decomposed into meta-actions — five-field lines like
"opened, move to, front on, burger, closed" — by a staged conversation with a
pluggable model, optionally conditioned on the most similar verified
demonstration retrieved from a self-augmenting store. Each action resolves to
a 6-DoF target pose (anchor, uniform candidate offsets, model-selected pick)
and runs against a deterministic tabletop micro-simulator; an evaluation
harness scores suites with and without retrieval, and an HTTP service exposes
the human curation loop.
"""

from .conversation import (
    ConversationModel,
    CounterClock,
    Message,
    ModelError,
    OpenAICompatModel,
    PromptCache,
    Role,
    ScriptedConversationModel,
)
from .executor import (
    CandidateSet,
    ExecutorConfig,
    StepOutcome,
    execute_action,
    resolve_init_pose,
    sample_candidates,
    select_target,
)
from .geometry import GRIPPER_DOWN, Pose6D, pose
from .harness import SuiteReport, compare_icl, run_suite, seed_demo_db
from .meta_action import (
    ChainReport,
    GripperCommand,
    GripperState,
    LocationDescription,
    MetaAction,
    MotionKind,
    Plan,
    Preposition,
    gripper_command,
    parse,
    serialize,
    validate_chain,
)
from .planner import PlanningSession, extract_relevant_objects, plan_task
from .rag import (
    DemoStore,
    Embedding,
    GateThresholds,
    PlanRecord,
    RecordStatus,
    SimilarityScores,
    embed,
    gate_decision,
    object_similarity,
    sequence_similarity,
)
from .scene import SceneEdge, SceneGraph, SceneNode
from .world import (
    ObjectKind,
    SimObject,
    TaskSpec,
    WorldState,
    check_success,
    load_builtin_task,
    load_scene,
    move_gripper,
    perturbed_world,
    set_gripper,
)

__version__ = "0.1.0"
