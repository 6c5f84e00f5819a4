"""Weakly supervised response-selection dataset generation.

An insertion point splits a dialogue into a context (the history so far) and
the true next turn, the positive candidate. Adversarial candidates are drawn
either from strictly later turns of the same dialogue (internal swap) or from
other dialogues of the same split (external swap). Sampling is without
replacement, rejects turns content-identical to the positive, and is fully
reproducible: all randomness flows from one root seed through per-dialogue
and per-point substreams of numpy's default PCG64 generator, and output order
is canonical (dialogue id, then point index), so the dataset is a pure
function of (dialogue set, seed).

This module also loads graded turn-coherence test sets: JSONL instances whose
candidates carry either raw per-worker ratings (integers 1..3, averaged on
load) or a precomputed mean rating, plus a provenance label.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .corpus import (
    CorpusFormatError,
    Dialogue,
    Turn,
    dialogue_to_dict,
    turn_from_dict,
)
from .errors import DataError, InsufficientPoolError

PROVENANCES = ("original", "internal", "external")
RATING_SCALE = (1, 2, 3)

GENERATOR_NAME = "numpy.random.default_rng (PCG64), SeedSequence([seed, sha256(dialogue_id)[:8], point])"


@dataclass(frozen=True)
class InsertionPoint:
    """A context/positive split: the positive is the turn at index context_len."""

    dialogue_id: str
    context_len: int

    @property
    def positive_idx(self) -> int:
        return self.context_len


@dataclass(frozen=True)
class Candidate:
    turn: Turn
    provenance: str  # original | internal | external
    ratings: tuple[int, ...] | None = None
    mean_rating: float | None = None


@dataclass(frozen=True)
class RankingInstance:
    """A context with one original and n_neg adversarial next-turn candidates."""

    dialogue_id: str
    point_index: int
    context: tuple[Turn, ...]
    candidates: tuple[Candidate, ...]
    positive_position: int

    @property
    def context_len(self) -> int:
        return len(self.context)

    @property
    def n_pairs(self) -> int:
        return len(self.candidates) - 1


@dataclass(frozen=True)
class RatedInstance:
    """A context with candidates carrying mean human coherence ratings in [1, 3]."""

    context: tuple[Turn, ...]
    candidates: tuple[Candidate, ...]
    instance_id: str | None = None


def turn_fingerprint(turn: Turn) -> str:
    """Content identity of a turn (speaker excluded): DA labels, entities, text."""
    payload = [
        {
            "da": seg.da,
            "entities": [[m.head, m.role] for m in seg.entities],
            "text": seg.text,
        }
        for seg in turn.segments
    ]
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"), sort_keys=True)


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _id_entropy(dialogue_id: str) -> int:
    return int.from_bytes(hashlib.sha256(dialogue_id.encode("utf-8")).digest()[:8], "big")


def point_rng(seed: int, dialogue_id: str, stream: int) -> np.random.Generator:
    """Deterministic substream: stream 0 picks insertion points, stream 1+j
    drives negatives and candidate shuffling for point j."""
    return np.random.default_rng(np.random.SeedSequence([seed, _id_entropy(dialogue_id), stream]))


def gen_insertion_points(
    d: Dialogue,
    n: int,
    ctx_range: tuple[int, int] | None = None,
    rng: int | np.random.Generator = 0,
) -> list[InsertionPoint]:
    """Sample up to n distinct insertion points, uniform over the admissible
    context lengths (clipped by ctx_range when given). Points are returned
    sorted by context length; when fewer than n are admissible, all are used.
    """
    if n < 1:
        raise DataError("number of insertion points must be >= 1")
    lo, hi = 1, len(d.turns) - 1
    if ctx_range is not None:
        lo = max(lo, ctx_range[0])
        hi = min(hi, ctx_range[1])
    if hi < lo:
        raise DataError(
            f"dialogue {d.id!r} has no admissible insertion point "
            f"({len(d.turns)} turns, ctx_range={ctx_range})"
        )
    admissible = np.arange(lo, hi + 1)
    gen = _as_rng(rng)
    if len(admissible) <= n:
        chosen = admissible
    else:
        chosen = gen.choice(admissible, size=n, replace=False)
    return [InsertionPoint(d.id, int(c)) for c in sorted(chosen)]


class _TurnIndex:
    """Flat index of every turn in a split, with fingerprints, for fast
    external-swap sampling."""

    def __init__(self, split: Sequence[Dialogue]):
        self.dialogue_ids: list[str] = []
        self.turns: list[Turn] = []
        self.fingerprints: list[str] = []
        self.count_by_dialogue: dict[str, int] = {}
        for d in split:
            self.count_by_dialogue[d.id] = len(d.turns)
            for t in d.turns:
                self.dialogue_ids.append(d.id)
                self.turns.append(t)
                self.fingerprints.append(turn_fingerprint(t))

    def __len__(self) -> int:
        return len(self.turns)


def _sample_external(
    index: _TurnIndex,
    exclude_dialogue: str,
    positive_fp: str,
    count: int,
    gen: np.random.Generator,
) -> list[Turn]:
    total = len(index)
    own = index.count_by_dialogue.get(exclude_dialogue, 0)
    if total - own < count:
        raise InsufficientPoolError(
            f"external pool for dialogue {exclude_dialogue!r} has only "
            f"{total - own} turns, need {count}"
        )
    picked: list[int] = []
    seen: set[int] = set()
    attempts = 0
    # Rejection sampling over the flat index is distribution-identical to
    # uniform sampling without replacement from the filtered pool.
    max_attempts = 200 * count + 1000
    while len(picked) < count and attempts < max_attempts:
        attempts += 1
        i = int(gen.integers(0, total))
        if i in seen or index.dialogue_ids[i] == exclude_dialogue:
            continue
        if index.fingerprints[i] == positive_fp:
            continue
        seen.add(i)
        picked.append(i)
    if len(picked) < count:
        # Degenerate data (mostly duplicates of the positive): fall back to the
        # exact filtered pool.
        pool = [
            i
            for i in range(total)
            if index.dialogue_ids[i] != exclude_dialogue
            and index.fingerprints[i] != positive_fp
        ]
        if len(pool) < count:
            raise InsufficientPoolError(
                f"external pool for dialogue {exclude_dialogue!r} has only "
                f"{len(pool)} usable turns, need {count}"
            )
        picked = [pool[j] for j in gen.choice(len(pool), size=count, replace=False)]
    return [index.turns[i] for i in picked]


def sample_negatives(
    point: InsertionPoint,
    mode: str,
    count: int,
    corpus_split: Sequence[Dialogue],
    rng: int | np.random.Generator = 0,
    _index: _TurnIndex | None = None,
) -> list[Turn]:
    """Draw adversarial turns for an insertion point, without replacement.

    internal: uniform over the turns strictly after the positive in the same
    dialogue. external: uniform over all turns of the other dialogues in the
    same split. Turns content-identical to the positive are never returned.
    """
    if mode not in ("internal", "external"):
        raise DataError(f"unknown sampling mode {mode!r}")
    if count < 1:
        raise DataError("negative count must be >= 1")
    gen = _as_rng(rng)
    source = next((d for d in corpus_split if d.id == point.dialogue_id), None)
    if source is None:
        raise DataError(f"dialogue {point.dialogue_id!r} not found in split")
    if not 1 <= point.positive_idx <= len(source.turns) - 1:
        raise DataError(f"insertion point {point.positive_idx} out of range for {source.id!r}")
    positive_fp = turn_fingerprint(source.turns[point.positive_idx])

    if mode == "internal":
        pool = [
            t
            for t in source.turns[point.positive_idx + 1 :]
            if turn_fingerprint(t) != positive_fp
        ]
        if len(pool) < count:
            raise InsufficientPoolError(
                f"internal pool after turn {point.positive_idx} of "
                f"{source.id!r} has {len(pool)} usable turns, need {count}"
            )
        idx = gen.choice(len(pool), size=count, replace=False)
        return [pool[i] for i in idx]

    if len(corpus_split) < 2:
        raise InsufficientPoolError("external swap needs at least one other dialogue")
    index = _index if _index is not None else _TurnIndex(corpus_split)
    return _sample_external(index, point.dialogue_id, positive_fp, count, gen)


def build_selection_dataset(
    split: Sequence[Dialogue],
    points_per_dialogue: int = 10,
    n_neg: int = 9,
    mode: str = "internal",
    seed: int = 0,
    ctx_range: tuple[int, int] | None = None,
) -> tuple[list[RankingInstance], dict]:
    """Generate the response-selection dataset for one corpus split.

    Returns the instances in canonical order plus a manifest recording the
    generator, seed, and counts. Every instance has 1 original and n_neg
    adversarial candidates, shuffled with the point's own substream.
    """
    if not split:
        raise DataError("empty split")
    ids = [d.id for d in split]
    if len(set(ids)) != len(ids):
        raise DataError("split contains duplicate dialogue ids")
    index = _TurnIndex(split) if mode == "external" else None
    instances: list[RankingInstance] = []
    for d in sorted(split, key=lambda x: x.id):
        points = gen_insertion_points(
            d, points_per_dialogue, ctx_range, point_rng(seed, d.id, 0)
        )
        for j, pt in enumerate(points):
            gen = point_rng(seed, d.id, 1 + j)
            negatives = sample_negatives(pt, mode, n_neg, split, gen, _index=index)
            cands = [Candidate(d.turns[pt.positive_idx], "original")] + [
                Candidate(t, mode) for t in negatives
            ]
            perm = gen.permutation(len(cands))
            candidates = tuple(cands[i] for i in perm)
            positive_position = int(np.nonzero(perm == 0)[0][0])
            instances.append(
                RankingInstance(
                    dialogue_id=d.id,
                    point_index=j,
                    context=d.turns[: pt.context_len],
                    candidates=candidates,
                    positive_position=positive_position,
                )
            )
    manifest = {
        "generator": GENERATOR_NAME,
        "seed": seed,
        "mode": mode,
        "points_per_dialogue": points_per_dialogue,
        "n_neg": n_neg,
        "ctx_range": list(ctx_range) if ctx_range is not None else None,
        "dialogues": len(split),
        "insertion_points": len(instances),
        "pairs": sum(inst.n_pairs for inst in instances),
    }
    return instances, manifest


# -- serialization -----------------------------------------------------------


def _turn_dict(turn: Turn) -> dict:
    return dialogue_to_dict(Dialogue(id="_", turns=(turn,)))["turns"][0]


def instance_to_dict(inst: RankingInstance) -> dict:
    return {
        "dialogue_id": inst.dialogue_id,
        "point_index": inst.point_index,
        "context": [_turn_dict(t) for t in inst.context],
        "candidates": [
            {"provenance": c.provenance, "turn": _turn_dict(c.turn)} for c in inst.candidates
        ],
        "positive_position": inst.positive_position,
    }


def instance_from_dict(obj: dict) -> RankingInstance:
    try:
        context = tuple(
            turn_from_dict(t, f"context[{i}]") for i, t in enumerate(obj["context"])
        )
        candidates = []
        for i, c in enumerate(obj["candidates"]):
            prov = c["provenance"]
            if prov not in PROVENANCES:
                raise CorpusFormatError(f"candidates[{i}]: unknown provenance {prov!r}")
            candidates.append(
                Candidate(turn=turn_from_dict(c["turn"], f"candidates[{i}].turn"), provenance=prov)
            )
        return RankingInstance(
            dialogue_id=obj["dialogue_id"],
            point_index=int(obj.get("point_index", 0)),
            context=context,
            candidates=tuple(candidates),
            positive_position=int(obj["positive_position"]),
        )
    except KeyError as exc:
        raise CorpusFormatError(f"instance record missing field {exc}") from exc


def save_instances(instances: Sequence[RankingInstance], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for inst in instances:
            f.write(json.dumps(instance_to_dict(inst), ensure_ascii=False, separators=(",", ":")))
            f.write("\n")


def _iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                yield line_no, json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON ({exc.msg})", line=line_no) from exc


def load_instances(path) -> list[RankingInstance]:
    instances = []
    for line_no, obj in _iter_jsonl(path):
        try:
            inst = instance_from_dict(obj)
        except CorpusFormatError as exc:
            raise CorpusFormatError(str(exc), line=line_no) from exc
        n_orig = sum(1 for c in inst.candidates if c.provenance == "original")
        if n_orig != 1:
            raise CorpusFormatError(f"instance has {n_orig} original candidates", line=line_no)
        instances.append(inst)
    if not instances:
        raise DataError(f"empty dataset: {path}")
    return instances


def rated_instance_from_dict(obj: dict) -> RatedInstance:
    try:
        context = tuple(
            turn_from_dict(t, f"context[{i}]") for i, t in enumerate(obj["context"])
        )
        candidates = []
        for i, c in enumerate(obj["candidates"]):
            prov = c["provenance"]
            if prov not in PROVENANCES:
                raise CorpusFormatError(f"candidates[{i}]: unknown provenance {prov!r}")
            turn = turn_from_dict(c["turn"], f"candidates[{i}].turn")
            if "ratings" in c:
                ratings = c["ratings"]
                if not isinstance(ratings, list) or not ratings:
                    raise CorpusFormatError(f"candidates[{i}].ratings: expected nonempty list")
                for r in ratings:
                    if r not in RATING_SCALE:
                        raise CorpusFormatError(
                            f"candidates[{i}].ratings: rating {r!r} outside {{1,2,3}}"
                        )
                mean = float(sum(ratings)) / len(ratings)
                candidates.append(
                    Candidate(turn=turn, provenance=prov, ratings=tuple(ratings), mean_rating=mean)
                )
            elif "mean_rating" in c:
                mean = float(c["mean_rating"])
                if not RATING_SCALE[0] <= mean <= RATING_SCALE[-1]:
                    raise CorpusFormatError(
                        f"candidates[{i}].mean_rating: {mean} outside [1, 3]"
                    )
                candidates.append(Candidate(turn=turn, provenance=prov, mean_rating=mean))
            else:
                raise CorpusFormatError(
                    f"candidates[{i}]: needs either 'ratings' or 'mean_rating'"
                )
        return RatedInstance(
            context=context,
            candidates=tuple(candidates),
            instance_id=obj.get("id"),
        )
    except KeyError as exc:
        raise CorpusFormatError(f"rated record missing field {exc}") from exc


def load_rated_testset(path, strict_swbd: bool = False) -> list[RatedInstance]:
    """Load a graded turn-coherence test set.

    With strict_swbd=True every instance must follow the 7-candidate format
    (1 original, 3 internal, 3 external).
    """
    instances = []
    for line_no, obj in _iter_jsonl(path):
        try:
            inst = rated_instance_from_dict(obj)
        except CorpusFormatError as exc:
            raise CorpusFormatError(str(exc), line=line_no) from exc
        if strict_swbd:
            counts = {p: 0 for p in PROVENANCES}
            for c in inst.candidates:
                counts[c.provenance] += 1
            if len(inst.candidates) != 7 or counts != {
                "original": 1,
                "internal": 3,
                "external": 3,
            }:
                raise CorpusFormatError(
                    f"expected 7 candidates (1 original, 3 internal, 3 external), got {counts}",
                    line=line_no,
                )
        instances.append(inst)
    if not instances:
        raise DataError(f"empty rated test set: {path}")
    return instances


def rated_instance_to_dict(inst: RatedInstance) -> dict:
    obj: dict = {}
    if inst.instance_id is not None:
        obj["id"] = inst.instance_id
    obj["context"] = [_turn_dict(t) for t in inst.context]
    cands = []
    for c in inst.candidates:
        rec: dict = {"provenance": c.provenance, "turn": _turn_dict(c.turn)}
        if c.ratings is not None:
            rec["ratings"] = list(c.ratings)
        else:
            rec["mean_rating"] = c.mean_rating
        cands.append(rec)
    obj["candidates"] = cands
    return obj


def save_rated_testset(instances: Sequence[RatedInstance], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for inst in instances:
            f.write(json.dumps(rated_instance_to_dict(inst), ensure_ascii=False, separators=(",", ":")))
            f.write("\n")
