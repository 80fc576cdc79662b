"""Self-augmenting demonstration store.

Embeddings are deterministic signed feature hashes (D=256) over the
instruction tokens, scene node names, and relation edge strings, so identical
tasks always embed identically and retrieval is reproducible. Records persist
to one append-only JSON-lines file with a schema header; votes and status
changes are appended as amendment lines and folded on load.

A verified task enters the store only through the dual-threshold gate: it is
added iff its object-set similarity AND plan-sequence similarity stay below
the configured thresholds against EVERY stored record, which keeps the
database diverse instead of piling up near-duplicates.
"""

from __future__ import annotations

import enum
import hashlib
import json
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .conversation import ConversationModel, Message, PromptCache, Role
from .meta_action import Plan, serialize, validate_chain
from .scene import SceneGraph

EMBEDDING_DIM = 256
SCHEMA_VERSION = 1

DEFAULT_OBJECT_THRESHOLD = 0.6
DEFAULT_SEQUENCE_THRESHOLD = 0.7


class RecordStatus(enum.Enum):
    PENDING = "pending"
    VERIFIED = "verified"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Embedding:
    vector: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vector, dtype=np.float64).reshape(EMBEDDING_DIM)
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    @property
    def is_empty(self) -> bool:
        return self.norm == 0.0

    def cosine(self, other: Embedding) -> float:
        if self.is_empty or other.is_empty:
            return 0.0
        return float(self.vector @ other.vector) / (self.norm * other.norm)

    def to_list(self) -> list[float]:
        return [float(v) for v in self.vector]


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric word tokens."""
    out: list[str] = []
    word = []
    for ch in text.lower():
        if ch.isalnum():
            word.append(ch)
        elif word:
            out.append("".join(word))
            word = []
    if word:
        out.append("".join(word))
    return out


def _token_bucket(token: str) -> tuple[int, float]:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=16).digest()
    bucket = int.from_bytes(digest[:8], "big") % EMBEDDING_DIM
    sign = 1.0 if digest[8] % 2 == 0 else -1.0
    return bucket, sign


def embedding_tokens(instruction: str, scene: SceneGraph) -> list[str]:
    tokens = tokenize(instruction)
    tokens.extend(n.name for n in scene.nodes)
    tokens.extend(e.as_token() for e in scene.edges)
    return tokens


def embed(instruction: str, scene: SceneGraph) -> Embedding:
    """Signed feature-hash bag of (instruction tokens + node names + edges)."""
    vec = np.zeros(EMBEDDING_DIM)
    for token in embedding_tokens(instruction, scene):
        bucket, sign = _token_bucket(token)
        vec[bucket] += sign
    return Embedding(vec)


def object_similarity(a: set[str], b: set[str]) -> float:
    """Jaccard index of the two name sets; two empty sets count as identical."""
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def _levenshtein(a: list[str], b: list[str]) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, sa in enumerate(a, start=1):
        cur = [i]
        for j, sb in enumerate(b, start=1):
            cost = 0 if sa == sb else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def sequence_similarity(a: Plan, b: Plan) -> float:
    """1 - normalized edit distance over canonical action lines as symbols."""
    lines_a = [serialize(act) for act in a.actions]
    lines_b = [serialize(act) for act in b.actions]
    distance = _levenshtein(lines_a, lines_b)
    return 1.0 - distance / max(len(lines_a), len(lines_b))


@dataclass(frozen=True)
class SimilarityScores:
    object_similarity: float
    sequence_similarity: float

    def to_dict(self) -> dict:
        return {
            "object_similarity": self.object_similarity,
            "sequence_similarity": self.sequence_similarity,
        }


@dataclass(frozen=True)
class Vote:
    verdict: str  # "correct" | "incorrect"
    annotator: str
    timestamp: float

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "annotator": self.annotator, "timestamp": self.timestamp}


@dataclass(frozen=True)
class PlanRecord:
    id: int
    instruction: str
    scene: SceneGraph
    embedding: Embedding
    prompt_cache: PromptCache
    plan: Plan
    relevant_objects: frozenset[str]
    status: RecordStatus = RecordStatus.PENDING
    votes: tuple[Vote, ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "instruction": self.instruction,
            "scene": self.scene.to_dict(),
            "embedding": self.embedding.to_list(),
            "prompt_cache": self.prompt_cache.to_dict(),
            "plan": {"task_id": self.plan.task_id, "actions": self.plan.to_json_list()},
            "relevant_objects": sorted(self.relevant_objects),
            "status": self.status.value,
            "votes": [v.to_dict() for v in self.votes],
        }

    @staticmethod
    def from_dict(d: dict) -> PlanRecord:
        return PlanRecord(
            id=d["id"],
            instruction=d["instruction"],
            scene=SceneGraph.from_dict(d["scene"]),
            embedding=Embedding(np.array(d["embedding"])),
            prompt_cache=PromptCache.from_dict(d["prompt_cache"]),
            plan=Plan.from_json_list(d["plan"]["actions"], d["plan"]["task_id"]),
            relevant_objects=frozenset(d["relevant_objects"]),
            status=RecordStatus(d["status"]),
            votes=tuple(Vote(**v) for v in d["votes"]),
        )


@dataclass(frozen=True)
class GateThresholds:
    object_threshold: float = DEFAULT_OBJECT_THRESHOLD
    sequence_threshold: float = DEFAULT_SEQUENCE_THRESHOLD


def gate_decision(
    candidate: PlanRecord,
    existing: list[PlanRecord],
    thresholds: GateThresholds = GateThresholds(),
) -> tuple[bool, dict[int, SimilarityScores]]:
    """Dual-threshold augmentation gate.

    Add iff, against every existing record, both similarity metrics fall
    below their thresholds. Universally quantified, so the decision cannot
    depend on iteration order, and it is vacuously Add on an empty store.
    """
    if candidate.status is not RecordStatus.VERIFIED:
        raise ValueError("augmentation gate requires a verified candidate")
    scores: dict[int, SimilarityScores] = {}
    add = True
    for record in existing:
        s = SimilarityScores(
            object_similarity=object_similarity(
                set(candidate.relevant_objects), set(record.relevant_objects)
            ),
            sequence_similarity=sequence_similarity(candidate.plan, record.plan),
        )
        scores[record.id] = s
        if (
            s.object_similarity >= thresholds.object_threshold
            or s.sequence_similarity >= thresholds.sequence_threshold
        ):
            add = False
    return add, scores


@dataclass(frozen=True)
class RetrievalResult:
    record: PlanRecord
    rank: int  # 1-based rank among the top-k shown to the selector
    similarity: float
    selection_out_of_range: bool = False


class DemoStore:
    """Append-only demonstration database.

    Many readers, one writer: every mutation is serialized through one lock
    and flushed to the JSONL file before it returns.
    """

    def __init__(
        self,
        path: str | Path | None = None,
        thresholds: GateThresholds = GateThresholds(),
    ):
        self.path = Path(path) if path is not None else None
        self.thresholds = thresholds
        self._records: dict[int, PlanRecord] = {}
        self._next_id = 1
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()
        elif self.path is not None:
            self._write_header()

    # -- persistence ----------------------------------------------------

    def _write_header(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", encoding="utf-8") as fh:
            fh.write(json.dumps({"schema": SCHEMA_VERSION, "dim": EMBEDDING_DIM}) + "\n")
            fh.flush()

    def _append_line(self, payload: dict) -> None:
        if self.path is None:
            return
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, sort_keys=True) + "\n")
            fh.flush()

    def _load(self) -> None:
        lines = self.path.read_text(encoding="utf-8").splitlines()
        if not lines:
            self._write_header()
            return
        header = json.loads(lines[0])
        if header.get("schema") != SCHEMA_VERSION or header.get("dim") != EMBEDDING_DIM:
            raise ValueError(f"unsupported store file {self.path}: header {header}")
        for line in lines[1:]:
            if not line.strip():
                continue
            entry = json.loads(line)
            kind = entry["type"]
            if kind == "record":
                record = PlanRecord.from_dict(entry["record"])
                self._records[record.id] = record
                self._next_id = max(self._next_id, record.id + 1)
            elif kind == "vote":
                rec = self._records[entry["record_id"]]
                vote = Vote(entry["verdict"], entry["annotator"], entry["timestamp"])
                self._records[rec.id] = replace(rec, votes=rec.votes + (vote,))
            elif kind == "status":
                rec = self._records[entry["record_id"]]
                self._records[rec.id] = replace(rec, status=RecordStatus(entry["status"]))
            else:
                raise ValueError(f"unknown store entry type {kind!r}")

    def compact(self) -> None:
        """Rewrite the file with amendments folded into the record lines."""
        if self.path is None:
            return
        with self._lock:
            self._write_header()
            for record in self.records():
                self._append_line({"type": "record", "record": record.to_dict()})

    # -- reads -----------------------------------------------------------

    def records(self) -> list[PlanRecord]:
        return [self._records[k] for k in sorted(self._records)]

    def verified(self) -> list[PlanRecord]:
        return [r for r in self.records() if r.status is RecordStatus.VERIFIED]

    def get(self, record_id: int) -> PlanRecord:
        return self._records[record_id]

    def __len__(self) -> int:
        return len(self._records)

    # -- writes ----------------------------------------------------------

    def add(self, record: PlanRecord) -> PlanRecord:
        """Append a record verbatim (id is assigned here)."""
        with self._lock:
            stored = replace(record, id=self._next_id)
            self._next_id += 1
            self._records[stored.id] = stored
            self._append_line({"type": "record", "record": stored.to_dict()})
            return stored

    def record_vote(
        self, record_id: int, verdict: str, annotator: str, timestamp: float
    ) -> PlanRecord:
        with self._lock:
            rec = self._records[record_id]
            vote = Vote(verdict, annotator, timestamp)
            updated = replace(rec, votes=rec.votes + (vote,))
            self._records[record_id] = updated
            self._append_line(
                {
                    "type": "vote",
                    "record_id": record_id,
                    "verdict": verdict,
                    "annotator": annotator,
                    "timestamp": timestamp,
                }
            )
            return updated

    def set_status(self, record_id: int, status: RecordStatus) -> PlanRecord:
        with self._lock:
            rec = self._records[record_id]
            updated = replace(rec, status=status)
            self._records[record_id] = updated
            self._append_line({"type": "status", "record_id": record_id, "status": status.value})
            return updated

    def augmentation_gate(
        self, candidate: PlanRecord
    ) -> tuple[str, dict[int, SimilarityScores], PlanRecord | None]:
        """Run the gate; on Add, append atomically. Returns (decision, scores, stored)."""
        add, scores = gate_decision(candidate, self.records(), self.thresholds)
        if not add:
            return "skip", scores, None
        return "add", scores, self.add(candidate)

    # -- retrieval ---------------------------------------------------------

    def rank(self, query: Embedding) -> list[tuple[PlanRecord, float]]:
        """Verified records by descending cosine, ties broken by lower id."""
        scored = [(r, query.cosine(r.embedding)) for r in self.verified()]
        scored.sort(key=lambda pair: (-pair[1], pair[0].id))
        return scored

    def retrieve(
        self, query: Embedding, k: int, model: ConversationModel
    ) -> RetrievalResult | None:
        """Top-k by cosine, then the model picks one by its 1-based rank.

        Returns None when the store holds no verified demonstrations; an
        out-of-range or unparseable pick falls back to rank 1.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        ranked = self.rank(query)
        if not ranked:
            return None
        top = ranked[:k]
        listing = "\n".join(
            f"{i}. instruction: {rec.instruction} | objects: "
            f"{', '.join(sorted(rec.relevant_objects)) or 'none'}"
            for i, (rec, _) in enumerate(top, start=1)
        )
        prompt = (
            "Pick the stored demonstration most similar to the new task. "
            "Answer with its number only.\n" + listing
        )
        reply = model.complete([Message(Role.USER, prompt)], stage="retrieve")
        out_of_range = False
        try:
            pick = int(reply.strip())
        except ValueError:
            pick = 1
            out_of_range = True
        if not 1 <= pick <= len(top):
            pick = 1
            out_of_range = True
        record, similarity = top[pick - 1]
        return RetrievalResult(record, pick, similarity, out_of_range)
