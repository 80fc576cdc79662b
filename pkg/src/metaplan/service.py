"""Human-in-the-loop annotation service over the planner and the demo store.

Workflow per task: create it against a scene fixture, run planning with and
without a retrieved demonstration, edit any intermediate stage (edits
invalidate everything downstream; final meta-action text is re-parsed and
chain-validated before it is accepted), vote on the outcome, then commit the
verified plan through the augmentation gate into the store. The service is
the only write path to the store; tasks themselves live in service memory.

All bodies and responses are JSON and every response carries the schema tag.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .conversation import ModelError, ScriptedConversationModel, system_clock
from .meta_action import validate_chain
from .planner import (
    PlanningSession,
    PlanParseError,
    extract_relevant_objects,
    parse_stage5_reply,
    plan_task,
)
from .rag import DemoStore, PlanRecord, RecordStatus, Vote, embed
from .world import MissingFixture, TaskSpec, load_builtin_task, load_scene

API_SCHEMA = "annotation/1"

MODES = ("icl", "no_icl")


@dataclass
class ServiceConfig:
    db_path: str | Path
    transcripts_dir: str | Path | None = None
    scenes_dir: str | Path | None = None
    quorum: int = 1
    retrieval_k: int = 3
    clock: Callable[[], float] = system_clock


@dataclass
class AnnotationTask:
    id: str
    instruction: str
    scene_ref: str
    spec: TaskSpec
    version: int = 1
    sessions: dict[str, PlanningSession | None] = field(
        default_factory=lambda: {"icl": None, "no_icl": None}
    )
    stale: dict[str, list[int]] = field(default_factory=lambda: {"icl": [], "no_icl": []})
    no_demo: dict[str, bool] = field(default_factory=lambda: {"icl": False, "no_icl": False})
    votes: list[Vote] = field(default_factory=list)
    status: RecordStatus = RecordStatus.PENDING
    voted_session: str | None = None
    committed: str | None = None  # "added" | "skipped"
    record_id: int | None = None

    def session_dict(self, mode: str) -> dict | None:
        session = self.sessions[mode]
        if session is None:
            return None
        payload = session.to_dict()
        payload["stale_stages"] = sorted(self.stale[mode])
        payload["no_demo_available"] = self.no_demo[mode]
        return payload

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "instruction": self.instruction,
            "scene_ref": self.scene_ref,
            "version": self.version,
            "status": self.status.value,
            "votes": [v.to_dict() for v in self.votes],
            "voted_session": self.voted_session,
            "sessions": {mode: self.session_dict(mode) for mode in MODES},
            "committed": self.committed,
            "record_id": self.record_id,
        }


class CreateTaskBody(BaseModel):
    instruction: str
    scene_ref: str


class PlanBody(BaseModel):
    mode: Literal["icl", "no_icl", "both"] = "both"


class EditBody(BaseModel):
    text: str
    version: int
    session: Literal["icl", "no_icl"] | None = None


class VoteBody(BaseModel):
    verdict: Literal["correct", "incorrect"]
    annotator: str
    session: Literal["icl", "no_icl"] | None = None


def _envelope(payload: dict, status_code: int = 200) -> JSONResponse:
    return JSONResponse({"schema": API_SCHEMA, **payload}, status_code=status_code)


def _error(code: str, message: str, status_code: int) -> JSONResponse:
    return _envelope({"error": {"code": code, "message": message}}, status_code)


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="metaplan annotation service")
    store = DemoStore(config.db_path)
    tasks: dict[str, AnnotationTask] = {}
    counter = {"next": 1}

    app.state.store = store
    app.state.tasks = tasks
    app.state.config = config

    def resolve_scene(scene_ref: str) -> TaskSpec:
        if config.scenes_dir is not None:
            candidate = Path(config.scenes_dir) / f"{scene_ref}.json"
            if candidate.exists():
                return load_scene(candidate)
        return load_builtin_task(scene_ref)

    def scripted_model(scene_ref: str, mode: str) -> ScriptedConversationModel:
        if config.transcripts_dir is None:
            raise FileNotFoundError("service has no transcripts directory configured")
        path = Path(config.transcripts_dir) / f"{scene_ref}__{mode}.json"
        if not path.exists():
            raise FileNotFoundError(str(path))
        return ScriptedConversationModel.load(path)

    def get_task(task_id: str) -> AnnotationTask | None:
        return tasks.get(task_id)

    def pick_session_mode(task: AnnotationTask, requested: str | None) -> str | None:
        """Choose which session a vote/edit refers to; None means ambiguous."""
        if requested is not None:
            return requested
        available = [m for m in MODES if task.sessions[m] is not None]
        if len(available) == 1:
            return available[0]
        return None

    @app.get("/scenes")
    def list_scenes():
        names = set()
        if config.scenes_dir is not None:
            names.update(p.stem for p in Path(config.scenes_dir).glob("*.json"))
        from .world import TASK_NAMES

        for name in TASK_NAMES:
            try:
                load_builtin_task(name)
                names.add(name)
            except MissingFixture:
                pass
        return _envelope({"scenes": sorted(names)})

    @app.post("/tasks")
    def create_task(body: CreateTaskBody):
        if not body.instruction.strip():
            return _error("empty_instruction", "instruction must be non-empty", 422)
        try:
            spec = resolve_scene(body.scene_ref)
        except MissingFixture:
            return _error("unknown_scene", f"no scene fixture {body.scene_ref!r}", 404)
        task_id = f"t{counter['next']}"
        counter["next"] += 1
        task = AnnotationTask(
            id=task_id, instruction=body.instruction, scene_ref=body.scene_ref, spec=spec
        )
        tasks[task_id] = task
        return _envelope({"task": task.to_dict()}, status_code=201)

    @app.get("/tasks")
    def list_tasks():
        return _envelope({"tasks": [t.to_dict() for t in tasks.values()]})

    @app.get("/tasks/{task_id}")
    def get_task_endpoint(task_id: str):
        task = get_task(task_id)
        if task is None:
            return _error("unknown_task", f"no task {task_id!r}", 404)
        return _envelope({"task": task.to_dict()})

    @app.post("/tasks/{task_id}/plan")
    def plan_endpoint(task_id: str, body: PlanBody):
        task = get_task(task_id)
        if task is None:
            return _error("unknown_task", f"no task {task_id!r}", 404)
        modes = MODES if body.mode == "both" else (body.mode,)
        scene = task.spec.scene_graph()
        for mode in modes:
            try:
                model = scripted_model(task.scene_ref, mode)
            except FileNotFoundError as exc:
                return _error("missing_transcript", str(exc), 503)
            demo = None
            task.no_demo[mode] = False
            try:
                if mode == "icl":
                    hit = store.retrieve(
                        embed(task.instruction, scene), config.retrieval_k, model
                    )
                    if hit is None:
                        task.no_demo[mode] = True
                    else:
                        demo = hit.record.prompt_cache
                session = plan_task(
                    task.instruction, scene, model, demo, task_id=task.id
                )
            except ModelError as exc:
                return _error("model_error", str(exc), 502)
            task.sessions[mode] = session
            task.stale[mode] = []
        task.version += 1
        payload = {mode: task.session_dict(mode) for mode in modes}
        return _envelope({"task_id": task.id, "version": task.version, "sessions": payload})

    @app.put("/tasks/{task_id}/stages/{stage}")
    def edit_stage(task_id: str, stage: int, body: EditBody):
        task = get_task(task_id)
        if task is None:
            return _error("unknown_task", f"no task {task_id!r}", 404)
        if not 1 <= stage <= 5:
            return _error("bad_stage", "stage must be between 1 and 5", 422)
        if body.version != task.version:
            return _error(
                "stale_version",
                f"edit carries version {body.version}, task is at {task.version}",
                409,
            )
        mode = pick_session_mode(task, body.session)
        if mode is None:
            return _error("ambiguous_session", "specify session: icl or no_icl", 400)
        session = task.sessions[mode]
        if session is None:
            return _error("no_session", f"task has no {mode} session", 409)

        if stage == 5:
            text = body.text if "```" in body.text else f"```\n{body.text}\n```"
            try:
                plan = parse_stage5_reply(text, task.id)
            except PlanParseError as exc:
                return _error("invalid_meta_action_text", str(exc), 422)
            report = validate_chain(plan)
            if not report.ok:
                return _error(
                    "invalid_meta_action_text",
                    report.message + f" (index {report.index})",
                    422,
                )
            session.final = plan
            session.stage_outputs[5] = text
            task.stale[mode] = [s for s in task.stale[mode] if s != 5]
        else:
            session.stage_outputs[stage] = body.text
            downstream = [s for s in range(stage + 1, 6)]
            task.stale[mode] = sorted(set(task.stale[mode]) | set(downstream))
            session.final = None  # derived output is stale until re-derived
        task.version += 1
        return _envelope(
            {"task_id": task.id, "version": task.version, "session": task.session_dict(mode)}
        )

    @app.post("/tasks/{task_id}/vote")
    def vote(task_id: str, body: VoteBody):
        task = get_task(task_id)
        if task is None:
            return _error("unknown_task", f"no task {task_id!r}", 404)
        mode = pick_session_mode(task, body.session)
        if mode is None:
            return _error("ambiguous_session", "specify session: icl or no_icl", 400)
        session = task.sessions[mode]
        if session is None or session.final is None:
            return _error("no_final_plan", "vote requires a final plan", 409)
        task.votes.append(Vote(body.verdict, body.annotator, config.clock()))
        task.voted_session = mode
        if len(task.votes) >= config.quorum:
            task.status = (
                RecordStatus.VERIFIED
                if task.votes[-1].verdict == "correct"
                else RecordStatus.REJECTED
            )
        task.version += 1
        return _envelope(
            {"task_id": task.id, "version": task.version, "status": task.status.value}
        )

    @app.post("/tasks/{task_id}/commit")
    def commit(task_id: str):
        task = get_task(task_id)
        if task is None:
            return _error("unknown_task", f"no task {task_id!r}", 404)
        if task.status is not RecordStatus.VERIFIED:
            return _error("not_verified", f"task status is {task.status.value}", 409)
        session = task.sessions[task.voted_session or "icl"]
        if session is None or session.final is None:
            return _error("no_final_plan", "verified session lost its plan", 409)
        try:
            objects = frozenset(extract_relevant_objects(session))
        except Exception:
            objects = frozenset()
        candidate = PlanRecord(
            id=0,
            instruction=task.instruction,
            scene=session.scene,
            embedding=embed(task.instruction, session.scene),
            prompt_cache=session.prompt_cache(config.clock()),
            plan=session.final,
            relevant_objects=objects,
            status=RecordStatus.VERIFIED,
            votes=tuple(task.votes),
        )
        decision, scores, stored = store.augmentation_gate(candidate)
        task.committed = "added" if decision == "add" else "skipped"
        if stored is not None:
            task.record_id = stored.id
        task.version += 1
        return _envelope(
            {
                "task_id": task.id,
                "version": task.version,
                "decision": decision,
                "scores": {str(rid): s.to_dict() for rid, s in sorted(scores.items())},
                "record_id": task.record_id,
            }
        )

    @app.get("/records")
    def list_records():
        return _envelope({"records": [r.to_dict() for r in store.records()]})

    @app.get("/records/{record_id}")
    def get_record(record_id: int):
        try:
            record = store.get(record_id)
        except KeyError:
            return _error("unknown_record", f"no record {record_id}", 404)
        return _envelope({"record": record.to_dict()})

    return app
