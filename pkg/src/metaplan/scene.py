"""Object scene graphs: the textual scene representation used for prompting,
embedding, and the demonstration database."""

from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import Pose6D

RELATIONS = ("on", "in", "left-of", "right-of", "front-of", "behind")


@dataclass(frozen=True)
class SceneNode:
    name: str
    category: str
    pose: Pose6D


@dataclass(frozen=True)
class SceneEdge:
    subject: str
    relation: str
    object: str

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}; expected one of {RELATIONS}")

    def as_token(self) -> str:
        return f"{self.relation}({self.subject},{self.object})"


@dataclass(frozen=True)
class SceneGraph:
    nodes: tuple[SceneNode, ...] = field(default_factory=tuple)
    edges: tuple[SceneEdge, ...] = field(default_factory=tuple)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        edges = tuple(self.edges)
        names = [n.name for n in nodes]
        if len(set(names)) != len(names):
            raise ValueError("scene node names must be unique")
        known = set(names)
        for e in edges:
            if e.subject not in known or e.object not in known:
                raise ValueError(f"edge {e.as_token()} references an unknown node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    def node(self, name: str) -> SceneNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def node_names(self) -> list[str]:
        return [n.name for n in self.nodes]

    def to_text(self) -> str:
        """Compact listing used inside prompts."""
        lines = ["objects:"]
        for n in self.nodes:
            x, y, z = n.pose.position
            lines.append(f"- {n.name} ({n.category}) at ({x:.3f}, {y:.3f}, {z:.3f})")
        lines.append("relations:")
        if self.edges:
            lines.extend(f"- {e.subject} {e.relation} {e.object}" for e in self.edges)
        else:
            lines.append("- none")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"name": n.name, "category": n.category, "pose": n.pose.to_dict()}
                for n in self.nodes
            ],
            "edges": [
                {"subject": e.subject, "relation": e.relation, "object": e.object}
                for e in self.edges
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> SceneGraph:
        nodes = tuple(
            SceneNode(n["name"], n["category"], Pose6D.from_dict(n["pose"]))
            for n in d.get("nodes", [])
        )
        edges = tuple(
            SceneEdge(e["subject"], e["relation"], e["object"]) for e in d.get("edges", [])
        )
        return SceneGraph(nodes, edges)
