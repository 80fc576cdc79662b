"""Conversation plumbing: messages, stored prompt caches, and the pluggable
conversation-model contract with scripted (replay) and live (HTTP) adapters.

The scripted adapter replays replies from a transcript file so every pipeline
stage is reproducible byte for byte. Transcript format (JSON, version 1):

    {"version": 1, "model_tag": "scripted-v1",
     "records": [{"stage": "1", "reply": "..."},
                 {"stage": "select", "reply": "0", "digest": "<optional sha256>"}]}

Stage labels: "1".."5" for the planning stages, "repair" for the one repair
round, "retrieve" for demonstration selection, "select" for candidate-pose
selection, "pose_hint" for optional orientation hints. Records are consumed
in file order within each stage label; when a record carries a digest it must
match the sha256 digest of the conversation being answered.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .scene import SceneGraph

TRANSCRIPT_VERSION = 1


class Role(enum.Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


class ModelError(RuntimeError):
    """Conversation adapter failure."""


class MissingScriptedReply(ModelError):
    def __init__(self, stage: str):
        super().__init__(f"transcript has no remaining reply for stage {stage!r}")
        self.stage = stage


class DigestMismatch(ModelError):
    def __init__(self, stage: str, expected: str, actual: str):
        super().__init__(
            f"conversation digest mismatch at stage {stage!r}: "
            f"recorded {expected[:12]}…, got {actual[:12]}…"
        )


@dataclass(frozen=True)
class Message:
    role: Role
    text: str
    scene_payload: SceneGraph | None = None

    def __post_init__(self):
        if self.role is Role.ASSISTANT and self.scene_payload is not None:
            raise ValueError("assistant messages never carry a scene payload")

    def to_dict(self) -> dict:
        d = {"role": self.role.value, "text": self.text}
        if self.scene_payload is not None:
            d["scene"] = self.scene_payload.to_dict()
        return d

    @staticmethod
    def from_dict(d: dict) -> Message:
        scene = SceneGraph.from_dict(d["scene"]) if "scene" in d else None
        return Message(Role(d["role"]), d["text"], scene)


def conversation_digest(messages: list[Message]) -> str:
    """Stable sha256 over the conversation content."""
    payload = [
        {"role": m.role.value, "text": m.text, "has_scene": m.scene_payload is not None}
        for m in messages
    ]
    raw = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(raw).hexdigest()


def _check_alternation(messages: tuple[Message, ...]) -> None:
    body = list(messages)
    while body and body[0].role is Role.SYSTEM:
        body.pop(0)
    for i, m in enumerate(body):
        expected = Role.USER if i % 2 == 0 else Role.ASSISTANT
        if m.role is not expected:
            raise ValueError(
                f"prompt cache must alternate user/assistant after leading "
                f"system messages (message {i} is {m.role.value})"
            )


@dataclass(frozen=True)
class PromptCache:
    """Full stored conversation of a demonstration's planning run."""

    messages: tuple[Message, ...]
    model_tag: str
    created_at: float

    def __post_init__(self):
        messages = tuple(self.messages)
        _check_alternation(messages)
        object.__setattr__(self, "messages", messages)

    def dialogue_rounds(self) -> tuple[Message, ...]:
        """The user/assistant rounds, without leading system messages."""
        body = list(self.messages)
        while body and body[0].role is Role.SYSTEM:
            body.pop(0)
        return tuple(body)

    def to_dict(self) -> dict:
        return {
            "messages": [m.to_dict() for m in self.messages],
            "model_tag": self.model_tag,
            "created_at": self.created_at,
        }

    @staticmethod
    def from_dict(d: dict) -> PromptCache:
        return PromptCache(
            tuple(Message.from_dict(m) for m in d["messages"]),
            d["model_tag"],
            d["created_at"],
        )


class ConversationModel(Protocol):
    """Given a conversation, produce one assistant reply.

    `stage` labels what the caller is asking for so scripted adapters can
    select the matching transcript record; live adapters ignore it.
    """

    model_tag: str

    def complete(self, messages: list[Message], stage: str) -> str: ...


class ScriptedConversationModel:
    """Replays recorded replies; byte-identical output for identical runs."""

    def __init__(self, records: list[dict], model_tag: str = "scripted"):
        self.model_tag = model_tag
        self._queues: dict[str, deque[dict]] = {}
        for rec in records:
            stage = str(rec["stage"])
            self._queues.setdefault(stage, deque()).append(rec)

    @staticmethod
    def load(path: str | Path, model_tag: str | None = None) -> ScriptedConversationModel:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if data.get("version") != TRANSCRIPT_VERSION:
            raise ModelError(f"unsupported transcript version in {path}")
        tag = model_tag or data.get("model_tag", "scripted")
        return ScriptedConversationModel(data["records"], model_tag=tag)

    def complete(self, messages: list[Message], stage: str) -> str:
        queue = self._queues.get(stage)
        if not queue:
            raise MissingScriptedReply(stage)
        record = queue.popleft()
        expected = record.get("digest")
        if expected is not None:
            actual = conversation_digest(messages)
            if actual != expected:
                raise DigestMismatch(stage, expected, actual)
        return record["reply"]

    def has_stage(self, stage: str) -> bool:
        return bool(self._queues.get(stage))


class OpenAICompatModel:
    """Live adapter for any OpenAI-style chat-completions endpoint.

    Meant for manual runs; nothing in the test suite talks to a network.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.model_tag = model
        self.api_key = api_key or os.environ.get("METAPLAN_API_KEY", "")
        self.timeout = timeout

    def complete(self, messages: list[Message], stage: str) -> str:
        import httpx

        payload = {
            "model": self.model,
            "messages": [
                {
                    "role": m.role.value,
                    "content": m.text
                    if m.scene_payload is None
                    else f"{m.text}\n\n{m.scene_payload.to_text()}",
                }
                for m in messages
            ],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = httpx.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except Exception as exc:  # noqa: BLE001 - adapter boundary
            raise ModelError(f"live completion failed: {exc}") from exc


def system_clock() -> float:
    return time.time()


class CounterClock:
    """Deterministic clock for tests and replay: base + n * step."""

    def __init__(self, base: float = 1_700_000_000.0, step: float = 1.0):
        self.base = base
        self.step = step
        self._n = 0

    def __call__(self) -> float:
        value = self.base + self._n * self.step
        self._n += 1
        return value
