"""Evaluation harness: seeded task suites, success tables, failure histograms.

A suite run is a pure function of (scene fixtures, transcripts, seed): each
trial perturbs the task's world from a derived seed, replays the scripted
conversation for that (task, mode), plans, executes, and checks the task
predicate. Every failed trial is filed under exactly one failure category,
taken from the first failing step.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .conversation import ModelError, ScriptedConversationModel, system_clock
from .executor import (
    CATEGORY_ACTION_PARSING,
    CATEGORY_OTHER,
    CATEGORY_TASK_PLANNING,
    ExecutorConfig,
    FAILURE_CATEGORIES,
    execute_action,
)
from .planner import extract_relevant_objects, plan_task
from .rag import DemoStore, PlanRecord, RecordStatus, Vote, embed
from .world import TaskSpec, check_success, load_builtin_task, load_scene, perturbed_world

REPORT_SCHEMA = "report/1"


class MissingTranscript(FileNotFoundError):
    pass


class MismatchedSuites(ValueError):
    pass


def transcript_path(directory: str | Path, task: str, icl: bool) -> Path:
    mode = "icl" if icl else "no_icl"
    return Path(directory) / f"{task}__{mode}.json"


def default_transcript_dir() -> Path:
    from importlib import resources

    with resources.as_file(resources.files("metaplan").joinpath("fixtures/transcripts")) as p:
        return Path(p)


def _resolve_task(task: str, scenes_dir: str | Path | None) -> TaskSpec:
    if scenes_dir is not None:
        candidate = Path(scenes_dir) / f"{task}.json"
        if candidate.exists():
            return load_scene(candidate)
    return load_builtin_task(task)


def trial_seed(suite_seed: int, task_index: int, trial_index: int) -> int:
    """Stable per-trial seed derivation."""
    return int(np.random.SeedSequence([suite_seed, task_index, trial_index]).generate_state(1)[0])


@dataclass(frozen=True)
class TrialResult:
    task: str
    trial_index: int
    icl: bool
    success: bool
    failure_category: str | None
    episode_log: str | None
    wall_time: float

    def __post_init__(self):
        if self.success and self.failure_category is not None:
            raise ValueError("successful trials carry no failure category")
        if not self.success and self.failure_category not in FAILURE_CATEGORIES:
            raise ValueError("failed trials need exactly one known failure category")

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "trial_index": self.trial_index,
            "icl": self.icl,
            "success": self.success,
            "failure_category": self.failure_category,
            "episode_log": self.episode_log,
            "wall_time": self.wall_time,
        }


@dataclass
class SuiteReport:
    tasks: list[str]
    trials_per_task: int
    icl: bool
    seed: int
    trials: list[TrialResult] = field(default_factory=list)

    def successes(self, task: str | None = None) -> int:
        return sum(
            1 for t in self.trials if t.success and (task is None or t.task == task)
        )

    def trial_count(self, task: str | None = None) -> int:
        return sum(1 for t in self.trials if task is None or t.task == task)

    def rate(self, task: str | None = None) -> float:
        n = self.trial_count(task)
        return self.successes(task) / n if n else 0.0

    def failure_histogram(self) -> dict[str, int]:
        hist = {category: 0 for category in FAILURE_CATEGORIES}
        for t in self.trials:
            if not t.success:
                hist[t.failure_category] += 1
        return hist

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "tasks": list(self.tasks),
            "trials_per_task": self.trials_per_task,
            "icl": self.icl,
            "seed": self.seed,
            "per_task": {
                task: {
                    "successes": self.successes(task),
                    "trials": self.trial_count(task),
                    "rate": self.rate(task),
                }
                for task in self.tasks
            },
            "overall": {
                "successes": self.successes(),
                "trials": self.trial_count(),
                "rate": self.rate(),
            },
            "failure_histogram": self.failure_histogram(),
            "trials": [t.to_dict() for t in self.trials],
        }

    @staticmethod
    def from_dict(d: dict) -> SuiteReport:
        report = SuiteReport(
            tasks=list(d["tasks"]),
            trials_per_task=d["trials_per_task"],
            icl=d["icl"],
            seed=d["seed"],
        )
        report.trials = [
            TrialResult(
                task=t["task"],
                trial_index=t["trial_index"],
                icl=t["icl"],
                success=t["success"],
                failure_category=t["failure_category"],
                episode_log=t["episode_log"],
                wall_time=t["wall_time"],
            )
            for t in d["trials"]
        ]
        return report

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @staticmethod
    def load(path: str | Path) -> SuiteReport:
        return SuiteReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def render_text(self) -> str:
        mode = "with ICL" if self.icl else "without ICL"
        lines = [f"suite ({mode}, seed={self.seed})"]
        lines.append(f"{'task':<16}{'success':>10}{'rate':>10}")
        for task in self.tasks:
            n, s = self.trial_count(task), self.successes(task)
            lines.append(f"{task:<16}{f'{s}/{n}':>10}{self.rate(task):>9.1%}")
        lines.append(f"{'overall':<16}{f'{self.successes()}/{self.trial_count()}':>10}{self.rate():>9.1%}")
        hist = {k: v for k, v in self.failure_histogram().items() if v}
        if hist:
            lines.append("failures: " + ", ".join(f"{k}={v}" for k, v in hist.items()))
        return "\n".join(lines)


def run_trial(
    spec: TaskSpec,
    task: str,
    trial_index: int,
    icl: bool,
    seed: int,
    transcript: Path,
    store: DemoStore | None,
    retrieval_k: int = 3,
    executor_config: ExecutorConfig = ExecutorConfig(),
    log_path: Path | None = None,
) -> TrialResult:
    started = time.perf_counter()
    world = perturbed_world(spec, seed)
    scene = spec.scene_graph(world)
    model = ScriptedConversationModel.load(transcript)

    outcomes = []
    success = False
    category: str | None = None
    try:
        demo = None
        if icl and store is not None:
            query = embed(spec.instruction, scene)
            hit = store.retrieve(query, retrieval_k, model)
            demo = hit.record.prompt_cache if hit is not None else None

        session = plan_task(
            spec.instruction, scene, model, demo, task_id=f"{task}-{trial_index}"
        )
        if session.final is None:
            category = (
                CATEGORY_OTHER
                if session.failure and session.failure.error.startswith("model error")
                else CATEGORY_ACTION_PARSING
            )
        else:
            for step_index, action in enumerate(session.final.actions):
                outcome = execute_action(
                    action,
                    world,
                    model,
                    scene,
                    seed=trial_seed(seed, step_index, 0),
                    config=executor_config,
                )
                outcomes.append(outcome)
                if not outcome.ok:
                    category = outcome.failure_category
                    break
            else:
                success = check_success(world, spec)
                if not success:
                    category = CATEGORY_TASK_PLANNING
    except ModelError:
        # Adapter failure outside the planner (retrieval or candidate
        # selection); not one of the four step-tagged causes.
        category = CATEGORY_OTHER

    log_name = None
    if log_path is not None:
        log_path.parent.mkdir(parents=True, exist_ok=True)
        with log_path.open("w", encoding="utf-8") as fh:
            for outcome in outcomes:
                fh.write(json.dumps(outcome.to_dict(), sort_keys=True) + "\n")
        log_name = str(log_path)

    return TrialResult(
        task=task,
        trial_index=trial_index,
        icl=icl,
        success=success,
        failure_category=category,
        episode_log=log_name,
        wall_time=time.perf_counter() - started,
    )


def run_suite(
    tasks: list[str],
    trials_per_task: int,
    icl: bool,
    seed: int,
    transcripts_dir: str | Path | None = None,
    db_path: str | Path | None = None,
    scenes_dir: str | Path | None = None,
    log_dir: str | Path | None = None,
    retrieval_k: int = 3,
    executor_config: ExecutorConfig = ExecutorConfig(),
) -> SuiteReport:
    """Run tasks x trials and aggregate a report; deterministic given seed."""
    transcripts = Path(transcripts_dir) if transcripts_dir else default_transcript_dir()
    specs: dict[str, TaskSpec] = {}
    for task in tasks:
        specs[task] = _resolve_task(task, scenes_dir)
        path = transcript_path(transcripts, task, icl)
        if not path.exists():
            raise MissingTranscript(str(path))

    store = DemoStore(db_path) if db_path else None
    mode = "icl" if icl else "no_icl"
    report = SuiteReport(tasks=list(tasks), trials_per_task=trials_per_task, icl=icl, seed=seed)
    for task_index, task in enumerate(tasks):
        for trial_index in range(trials_per_task):
            log_path = None
            if log_dir is not None:
                log_path = Path(log_dir) / f"{task}__{mode}__{trial_index:03d}.jsonl"
            report.trials.append(
                run_trial(
                    specs[task],
                    task,
                    trial_index,
                    icl,
                    trial_seed(seed, task_index, trial_index),
                    transcript_path(transcripts, task, icl),
                    store,
                    retrieval_k,
                    executor_config,
                    log_path,
                )
            )
    return report


@dataclass(frozen=True)
class IclComparison:
    tasks: list[str]
    per_task: dict[str, dict[str, float]]
    overall_without: float
    overall_with: float

    @property
    def delta_points(self) -> float:
        return (self.overall_with - self.overall_without) * 100.0

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "tasks": list(self.tasks),
            "per_task": self.per_task,
            "overall": {
                "without_icl": self.overall_without,
                "with_icl": self.overall_with,
                "delta_points": self.delta_points,
            },
        }

    def render_text(self) -> str:
        lines = [f"{'task':<16}{'w/o ICL':>10}{'w/ ICL':>10}{'delta':>10}"]
        for task in self.tasks:
            row = self.per_task[task]
            lines.append(
                f"{task:<16}{row['without_icl']:>9.1%}{row['with_icl']:>9.1%}"
                f"{row['delta_points']:>+9.1f}p"
            )
        lines.append(
            f"{'overall':<16}{self.overall_without:>9.1%}{self.overall_with:>9.1%}"
            f"{self.delta_points:>+9.1f}p"
        )
        return "\n".join(lines)


def compare_icl(report_without: SuiteReport, report_with: SuiteReport) -> IclComparison:
    """Side-by-side success rates; both suites must cover the same grid."""
    if (
        report_without.tasks != report_with.tasks
        or report_without.trials_per_task != report_with.trials_per_task
    ):
        raise MismatchedSuites(
            f"suites do not match: {report_without.tasks} x {report_without.trials_per_task} "
            f"vs {report_with.tasks} x {report_with.trials_per_task}"
        )
    per_task = {}
    for task in report_without.tasks:
        without_rate = report_without.rate(task)
        with_rate = report_with.rate(task)
        per_task[task] = {
            "without_icl": without_rate,
            "with_icl": with_rate,
            "delta_points": (with_rate - without_rate) * 100.0,
        }
    return IclComparison(
        tasks=list(report_without.tasks),
        per_task=per_task,
        overall_without=report_without.rate(),
        overall_with=report_with.rate(),
    )


def seed_demo_db(
    db_path: str | Path,
    tasks: list[str],
    transcripts_dir: str | Path | None = None,
    scenes_dir: str | Path | None = None,
    clock: Callable[[], float] = system_clock,
) -> DemoStore:
    """Bootstrap a demonstration database from the good (ICL) transcripts.

    Each task is planned once on its unperturbed scene, marked verified with
    a bootstrap vote, and offered to the augmentation gate.
    """
    transcripts = Path(transcripts_dir) if transcripts_dir else default_transcript_dir()
    store = DemoStore(db_path)
    for task in tasks:
        spec = _resolve_task(task, scenes_dir)
        path = transcript_path(transcripts, task, icl=True)
        if not path.exists():
            raise MissingTranscript(str(path))
        model = ScriptedConversationModel.load(path)
        scene = spec.scene_graph()
        session = plan_task(spec.instruction, scene, model, task_id=task)
        if session.final is None:
            raise ValueError(f"seed transcript for {task} did not produce a valid plan")
        now = clock()
        record = PlanRecord(
            id=0,
            instruction=spec.instruction,
            scene=scene,
            embedding=embed(spec.instruction, scene),
            prompt_cache=session.prompt_cache(now),
            plan=session.final,
            relevant_objects=frozenset(extract_relevant_objects(session)),
            status=RecordStatus.VERIFIED,
            votes=(Vote("correct", "bootstrap", now),),
        )
        store.augmentation_gate(record)
    return store
