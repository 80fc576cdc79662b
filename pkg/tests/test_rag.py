import itertools
import json
import math
import random

import numpy as np
import pytest

from metaplan.conversation import Message, PromptCache, Role, ScriptedConversationModel
from metaplan.geometry import pose
from metaplan.meta_action import (
    GripperState,
    LocationDescription,
    MetaAction,
    MotionKind,
    Plan,
    Preposition,
)
from metaplan.rag import (
    EMBEDDING_DIM,
    DemoStore,
    Embedding,
    GateThresholds,
    PlanRecord,
    RecordStatus,
    Vote,
    _token_bucket,
    embed,
    gate_decision,
    object_similarity,
    sequence_similarity,
)
from metaplan.scene import SceneEdge, SceneGraph, SceneNode

O, C = GripperState.OPEN, GripperState.CLOSE

# Verified collision-free under the embedder's bucket hash (asserted below),
# so sparse token-count arithmetic predicts hashed cosines exactly.
VOCAB = [
    "cup", "table", "pen", "drawer", "mug", "bin", "plate", "burger",
    "button", "machine", "trash", "grab", "lift", "wipe", "press",
]


def scene_of(*names: str) -> SceneGraph:
    return SceneGraph(
        nodes=tuple(SceneNode(n, "thing", pose(0.1 * i, 0.0, 0.0)) for i, n in enumerate(names))
    )


def act(pre, post, prep=Preposition.ON, obj="cup"):
    return MetaAction(pre, MotionKind.MOVE, LocationDescription(prep, obj), post)


def plan_of(*objs: str) -> Plan:
    actions = []
    state = O
    for obj in objs:
        nxt = C if state is O else O
        actions.append(act(state, nxt, obj=obj))
        state = nxt
    return Plan(tuple(actions), "fixture")


def cache() -> PromptCache:
    return PromptCache(
        (Message(Role.USER, "q"), Message(Role.ASSISTANT, "a")), "scripted", 0.0
    )


def record(
    instruction: str,
    objects: set[str],
    plan: Plan,
    status=RecordStatus.VERIFIED,
    embedding: Embedding | None = None,
) -> PlanRecord:
    scene = scene_of(*sorted(objects)) if objects else scene_of("table")
    return PlanRecord(
        id=0,
        instruction=instruction,
        scene=scene,
        embedding=embedding if embedding is not None else embed(instruction, scene),
        prompt_cache=cache(),
        plan=plan,
        relevant_objects=frozenset(objects),
        status=status,
        votes=(Vote("correct", "t", 0.0),),
    )


def sparse_vec(**entries: float) -> Embedding:
    vec = np.zeros(EMBEDDING_DIM)
    for key, value in entries.items():
        vec[int(key[1:])] = value
    return Embedding(vec)


# -- embedding ----------------------------------------------------------------


def test_embed_is_deterministic():
    scene = scene_of("cup", "table")
    a = embed("wipe the table", scene)
    b = embed("wipe the table", scene)
    assert np.array_equal(a.vector, b.vector)
    assert a.norm > 0


def test_embed_is_bag_of_tokens():
    scene = scene_of("cup")
    assert np.array_equal(
        embed("grab the cup now", scene).vector, embed("now the grab cup", scene).vector
    )


def test_embed_empty_input_is_flagged_zero_vector():
    empty = embed("", SceneGraph())
    assert empty.is_empty
    assert empty.cosine(empty) == 0.0


def test_vocabulary_fixture_is_collision_free():
    buckets = [_token_bucket(w)[0] for w in VOCAB]
    assert len(set(buckets)) == len(VOCAB)


def _sparse_cosine(tokens_a: list[str], tokens_b: list[str]) -> float:
    """Oracle: cosine from raw token counts, no hashing involved."""
    from collections import Counter

    ca, cb = Counter(tokens_a), Counter(tokens_b)
    dot = sum(ca[t] * cb[t] for t in set(ca) | set(cb))
    na = math.sqrt(sum(v * v for v in ca.values()))
    nb = math.sqrt(sum(v * v for v in cb.values()))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


def test_disjoint_token_inputs_have_exactly_zero_cosine():
    a = embed("cup table pen", SceneGraph())
    b = embed("drawer mug bin", SceneGraph())
    assert _sparse_cosine(["cup", "table", "pen"], ["drawer", "mug", "bin"]) == 0.0
    assert a.cosine(b) == 0.0


def test_overlapping_inputs_match_sparse_count_oracle():
    tokens_a = ["cup", "table", "grab", "grab"]
    tokens_b = ["cup", "bin", "grab"]
    a = embed(" ".join(tokens_a), SceneGraph())
    b = embed(" ".join(tokens_b), SceneGraph())
    assert a.cosine(b) == pytest.approx(_sparse_cosine(tokens_a, tokens_b), abs=1e-12)


def test_embed_includes_scene_nodes_and_edges():
    scene = SceneGraph(
        nodes=(
            SceneNode("cup", "tableware", pose(0, 0, 0)),
            SceneNode("table", "furniture", pose(0, 0, 0)),
        ),
        edges=(SceneEdge("cup", "on", "table"),),
    )
    with_scene = embed("grab", scene)
    without_scene = embed("grab", SceneGraph())
    assert not np.array_equal(with_scene.vector, without_scene.vector)


# -- similarity metrics ---------------------------------------------------------


def test_object_similarity_examples():
    assert object_similarity({"cup", "table"}, {"cup", "table"}) == 1.0
    # Oracle by direct enumeration: intersection 1, union 3.
    assert object_similarity({"cup", "table"}, {"cup", "bin"}) == 1 / 3
    assert object_similarity({"pen"}, {"drawer"}) == 0.0
    assert object_similarity(set(), set()) == 1.0


def _edit_distance_oracle(a: list[str], b: list[str]) -> int:
    """Independent full-matrix DP, kept separate from the implementation."""
    rows = len(a) + 1
    cols = len(b) + 1
    m = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        m[i][0] = i
    for j in range(cols):
        m[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            m[i][j] = min(
                m[i - 1][j] + 1,
                m[i][j - 1] + 1,
                m[i - 1][j - 1] + (a[i - 1] != b[j - 1]),
            )
    return m[-1][-1]


def test_sequence_similarity_examples():
    p = plan_of("cup", "cup")
    assert sequence_similarity(p, p) == 1.0
    # One action of two replaced: distance 1 / max-len 2 -> 0.5 (oracle below).
    q = plan_of("cup", "bin")
    assert sequence_similarity(p, q) == 0.5
    # Entirely different 3-step plans: distance 3 / 3 -> 0.0.
    r, s = plan_of("cup", "cup", "cup"), plan_of("bin", "bin", "bin")
    assert sequence_similarity(r, s) == 0.0


@pytest.mark.parametrize("len_a,len_b", list(itertools.product(range(1, 5), repeat=2)))
def test_sequence_similarity_matches_dp_oracle(len_a, len_b):
    rng = random.Random(len_a * 10 + len_b)
    objs = ["cup", "bin", "pen"]
    a = plan_of(*[rng.choice(objs) for _ in range(len_a)])
    b = plan_of(*[rng.choice(objs) for _ in range(len_b)])
    from metaplan.meta_action import serialize

    lines_a = [serialize(x) for x in a.actions]
    lines_b = [serialize(x) for x in b.actions]
    expected = 1.0 - _edit_distance_oracle(lines_a, lines_b) / max(len_a, len_b)
    assert sequence_similarity(a, b) == expected


def test_similarity_metrics_are_symmetric_and_bounded():
    rng = random.Random(5)
    objs = ["cup", "bin", "pen", "mug"]
    for _ in range(50):
        sa = set(rng.sample(objs, rng.randint(0, 4)))
        sb = set(rng.sample(objs, rng.randint(0, 4)))
        assert object_similarity(sa, sb) == object_similarity(sb, sa)
        assert 0.0 <= object_similarity(sa, sb) <= 1.0
        pa = plan_of(*[rng.choice(objs) for _ in range(rng.randint(1, 4))])
        pb = plan_of(*[rng.choice(objs) for _ in range(rng.randint(1, 4))])
        assert sequence_similarity(pa, pb) == sequence_similarity(pb, pa)
        assert 0.0 <= sequence_similarity(pa, pb) <= 1.0


# -- augmentation gate ------------------------------------------------------------


def test_gate_rejects_duplicate_with_unit_scores(tmp_path):
    store = DemoStore(tmp_path / "db.jsonl")
    first = store.add(record("wipe table", {"cup", "table"}, plan_of("cup")))
    decision, scores, stored = store.augmentation_gate(
        record("wipe table", {"cup", "table"}, plan_of("cup"))
    )
    assert decision == "skip" and stored is None
    assert scores[first.id].object_similarity == 1.0
    assert scores[first.id].sequence_similarity == 1.0
    assert len(store) == 1


def test_gate_adds_disjoint_novel_candidate(tmp_path):
    store = DemoStore(tmp_path / "db.jsonl")
    store.add(record("wipe table", {"cup", "table"}, plan_of("cup")))
    decision, scores, stored = store.augmentation_gate(
        record("open drawer", {"drawer"}, plan_of("drawer", "drawer", "drawer"))
    )
    assert decision == "add" and stored is not None
    assert all(s.object_similarity == 0.0 for s in scores.values())
    assert len(store) == 2


def test_gate_vacuously_adds_on_empty_store(tmp_path):
    store = DemoStore(tmp_path / "db.jsonl")
    decision, scores, stored = store.augmentation_gate(
        record("anything", {"mug"}, plan_of("mug"))
    )
    assert decision == "add" and scores == {} and stored is not None


def test_gate_requires_verified_candidate():
    with pytest.raises(ValueError):
        gate_decision(record("x", {"mug"}, plan_of("mug"), status=RecordStatus.PENDING), [])


def test_gate_decision_invariant_under_store_permutation():
    rng = random.Random(11)
    existing = [
        record(f"task {i}", set(rng.sample(VOCAB, 3)), plan_of(*rng.sample(VOCAB, 2)))
        for i in range(6)
    ]
    for i, r in enumerate(existing):
        object.__setattr__(r, "id", i + 1)
    candidate = record("new", set(rng.sample(VOCAB, 3)), plan_of(*rng.sample(VOCAB, 2)))
    baseline, _ = gate_decision(candidate, existing)
    for _ in range(10):
        shuffled = existing[:]
        rng.shuffle(shuffled)
        decision, _ = gate_decision(candidate, shuffled)
        assert decision == baseline


def test_gate_thresholds_are_configurable(tmp_path):
    strict = DemoStore(tmp_path / "db.jsonl", thresholds=GateThresholds(0.01, 0.01))
    strict.add(record("a", {"cup"}, plan_of("cup")))
    decision, _, _ = strict.augmentation_gate(
        record("b", {"cup", "bin", "pen"}, plan_of("bin"))
    )
    assert decision == "skip"  # object overlap 1/3 >= 0.01


def test_store_size_is_monotone_under_random_gate_sequences(tmp_path):
    rng = random.Random(99)
    store = DemoStore(tmp_path / "db.jsonl")
    size = 0
    for i in range(60):
        candidate = record(
            f"task {rng.randint(0, 20)}",
            set(rng.sample(VOCAB, rng.randint(1, 4))),
            plan_of(*[rng.choice(VOCAB) for _ in range(rng.randint(1, 3))]),
        )
        store.augmentation_gate(candidate)
        assert len(store) >= size
        size = len(store)


# -- retrieval ----------------------------------------------------------------


def reply_model(text: str) -> ScriptedConversationModel:
    return ScriptedConversationModel([{"stage": "retrieve", "reply": text}])


def test_retrieve_returns_none_on_empty_store(tmp_path):
    store = DemoStore(tmp_path / "db.jsonl")
    assert store.retrieve(embed("x", scene_of("cup")), 3, reply_model("1")) is None


def test_retrieve_ignores_unverified_records(tmp_path):
    store = DemoStore(tmp_path / "db.jsonl")
    store.add(record("a", {"cup"}, plan_of("cup"), status=RecordStatus.PENDING))
    assert store.retrieve(embed("a", scene_of("cup")), 3, reply_model("1")) is None


def test_retrieve_scripted_pick_selects_rank(tmp_path):
    store = DemoStore(tmp_path / "db.jsonl")
    store.add(record("r1", {"cup"}, plan_of("cup"), embedding=sparse_vec(b0=1.0)))
    store.add(record("r2", {"bin"}, plan_of("bin"), embedding=sparse_vec(b0=1.0, b1=1.0)))
    query = sparse_vec(b0=1.0)
    hit = store.retrieve(query, 3, reply_model("2"))  # k clamps to store size
    assert hit.record.instruction == "r2"
    assert hit.rank == 2
    assert not hit.selection_out_of_range


def test_retrieve_out_of_range_falls_back_to_rank_one(tmp_path):
    store = DemoStore(tmp_path / "db.jsonl")
    store.add(record("r1", {"cup"}, plan_of("cup"), embedding=sparse_vec(b0=1.0)))
    store.add(record("r2", {"bin"}, plan_of("bin"), embedding=sparse_vec(b1=1.0)))
    hit = store.retrieve(sparse_vec(b0=1.0), 2, reply_model("99"))
    assert hit.rank == 1 and hit.selection_out_of_range
    assert hit.record.instruction == "r1"


def _brute_force_top_k(query: Embedding, records, k):
    """Oracle: exhaustive cosine over all records, stable tie-break by id."""

    def cosine(a, b):
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0 or nb == 0:
            return 0.0
        return float(a @ b) / (na * nb)

    scored = sorted(
        ((cosine(query.vector, r.embedding.vector), -r.id, r) for r in records),
        key=lambda t: (t[0], t[1]),
        reverse=True,
    )
    return [r.id for _, _, r in scored[:k]]


def test_retrieve_top_k_matches_brute_force_oracle(tmp_path):
    rng = np.random.default_rng(17)
    store = DemoStore(tmp_path / "db.jsonl")
    for i in range(20):
        vec = np.zeros(EMBEDDING_DIM)
        vec[rng.integers(0, 8, size=4)] = rng.normal(size=4)
        store.add(record(f"r{i}", {"cup"}, plan_of("cup"), embedding=Embedding(vec)))
    query = Embedding(np.eye(EMBEDDING_DIM)[1] + 0.5 * np.eye(EMBEDDING_DIM)[3])
    expected = _brute_force_top_k(query, store.records(), 3)
    got = [r.id for r, _ in store.rank(query)[:3]]
    assert got == expected


# -- persistence ------------------------------------------------------------------


def test_store_reload_reproduces_ranking_bytes(tmp_path):
    path = tmp_path / "db.jsonl"
    store = DemoStore(path)
    rng = np.random.default_rng(23)
    for i in range(20):
        vec = rng.normal(size=EMBEDDING_DIM)
        store.add(record(f"task {i}", {"cup"}, plan_of("cup"), embedding=Embedding(vec)))
    query = embed("task", scene_of("cup"))
    ranked = json.dumps([r.id for r, _ in store.rank(query)])
    reloaded = DemoStore(path)
    assert json.dumps([r.id for r, _ in reloaded.rank(query)]) == ranked


def test_store_folds_amendments_on_load(tmp_path):
    path = tmp_path / "db.jsonl"
    store = DemoStore(path)
    rec = store.add(record("a", {"cup"}, plan_of("cup")))
    store.record_vote(rec.id, "incorrect", "alice", 5.0)
    store.set_status(rec.id, RecordStatus.REJECTED)
    reloaded = DemoStore(path)
    got = reloaded.get(rec.id)
    assert got.status is RecordStatus.REJECTED
    assert got.votes[-1].verdict == "incorrect"
    assert reloaded.verified() == []


def test_compaction_preserves_folded_state(tmp_path):
    path = tmp_path / "db.jsonl"
    store = DemoStore(path)
    rec = store.add(record("a", {"cup"}, plan_of("cup")))
    store.record_vote(rec.id, "incorrect", "alice", 5.0)
    store.set_status(rec.id, RecordStatus.REJECTED)
    lines_before = path.read_text().splitlines()
    store.compact()
    lines_after = path.read_text().splitlines()
    assert len(lines_after) < len(lines_before)
    reloaded = DemoStore(path)
    assert reloaded.get(rec.id).status is RecordStatus.REJECTED
    assert len(reloaded.get(rec.id).votes) == 2  # original + amendment


def test_store_header_is_versioned(tmp_path):
    path = tmp_path / "db.jsonl"
    DemoStore(path)
    header = json.loads(path.read_text().splitlines()[0])
    assert header == {"schema": 1, "dim": EMBEDDING_DIM}
