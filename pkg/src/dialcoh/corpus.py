"""Canonical data model for annotated dialogues.

Dialogues arrive pre-annotated: every utterance segment carries a dialogue-act
(DA) label and the entity mentions (NP heads with grammatical roles) observed
in it. This module owns the JSONL corpus format, record validation, and
vocabulary derivation. It does no tagging or parsing of its own; raw-text
processing happens upstream.

Corpus format, one dialogue per line::

    {"id": str,
     "turns": [{"speaker": "A"|"B",
                "segments": [{"da": str,
                              "entities": [{"head": str, "role": "S"|"O"|"X"}],
                              "text": str?}]}]}

Entity heads are case-folded at ingestion so grid columns unify "Movie" and
"movie". All corpus values are immutable after construction.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import CorpusFormatError, DataError

SPEAKERS = ("A", "B")
MENTION_ROLES = ("S", "O", "X")

# Reserved vocabulary tokens. <pad>/<unk> only exist in the word vocabulary;
# <no_ent> fills positions for turns or segments without entity mentions.
PAD = "<pad>"
UNK = "<unk>"
NO_ENT = "<no_ent>"

TURN_TAGS = ("B-A", "B-B", "I-A", "I-B")


@dataclass(frozen=True)
class EntityMention:
    """One entity occurrence: a lowercased NP head and its grammatical role."""

    head: str
    role: str  # "S" | "O" | "X"


@dataclass(frozen=True)
class Segment:
    """An utterance segment: one DA label plus its mentions in appearance order."""

    da: str
    entities: tuple[EntityMention, ...] = ()
    text: str | None = None


@dataclass(frozen=True)
class Turn:
    speaker: str  # "A" | "B"
    segments: tuple[Segment, ...] = ()

    def da_labels(self) -> tuple[str, ...]:
        return tuple(seg.da for seg in self.segments)

    def mentions(self) -> tuple[EntityMention, ...]:
        return tuple(m for seg in self.segments for m in seg.entities)


@dataclass(frozen=True)
class Dialogue:
    id: str
    turns: tuple[Turn, ...] = ()


Corpus = list[Dialogue]


# -- parsing --------------------------------------------------------------


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise CorpusFormatError(f"{where}: missing field '{key}'")
    return obj[key]


def mention_from_dict(obj, where: str) -> EntityMention:
    if not isinstance(obj, dict):
        raise CorpusFormatError(f"{where}: entity must be an object")
    head = _require(obj, "head", where)
    role = _require(obj, "role", where)
    if not isinstance(head, str):
        raise CorpusFormatError(f"{where}.head: expected string")
    if not isinstance(role, str):
        raise CorpusFormatError(f"{where}.role: expected string")
    return EntityMention(head=head.lower(), role=role)


def segment_from_dict(obj, where: str) -> Segment:
    if not isinstance(obj, dict):
        raise CorpusFormatError(f"{where}: segment must be an object")
    da = _require(obj, "da", where)
    if not isinstance(da, str):
        raise CorpusFormatError(f"{where}.da: expected string")
    raw_entities = obj.get("entities", [])
    if not isinstance(raw_entities, list):
        raise CorpusFormatError(f"{where}.entities: expected list")
    entities = tuple(
        mention_from_dict(e, f"{where}.entities[{i}]") for i, e in enumerate(raw_entities)
    )
    text = obj.get("text")
    if text is not None and not isinstance(text, str):
        raise CorpusFormatError(f"{where}.text: expected string")
    return Segment(da=da, entities=entities, text=text)


def turn_from_dict(obj, where: str) -> Turn:
    if not isinstance(obj, dict):
        raise CorpusFormatError(f"{where}: turn must be an object")
    speaker = _require(obj, "speaker", where)
    if not isinstance(speaker, str):
        raise CorpusFormatError(f"{where}.speaker: expected string")
    raw_segments = _require(obj, "segments", where)
    if not isinstance(raw_segments, list):
        raise CorpusFormatError(f"{where}.segments: expected list")
    segments = tuple(
        segment_from_dict(s, f"{where}.segments[{i}]") for i, s in enumerate(raw_segments)
    )
    return Turn(speaker=speaker, segments=segments)


def dialogue_from_dict(obj) -> Dialogue:
    """Parse one JSON record structurally; enum values are checked by validate_dialogue."""
    if not isinstance(obj, dict):
        raise CorpusFormatError("record must be an object")
    did = _require(obj, "id", "record")
    if not isinstance(did, str) or not did:
        raise CorpusFormatError("record.id: expected nonempty string")
    raw_turns = _require(obj, "turns", "record")
    if not isinstance(raw_turns, list):
        raise CorpusFormatError("record.turns: expected list")
    turns = tuple(turn_from_dict(t, f"turns[{i}]") for i, t in enumerate(raw_turns))
    return Dialogue(id=did, turns=turns)


def dialogue_to_dict(d: Dialogue) -> dict:
    """Canonical dict form: fixed key order, text omitted when absent."""
    turns = []
    for turn in d.turns:
        segments = []
        for seg in turn.segments:
            s: dict = {
                "da": seg.da,
                "entities": [{"head": m.head, "role": m.role} for m in seg.entities],
            }
            if seg.text is not None:
                s["text"] = seg.text
            segments.append(s)
        turns.append({"speaker": turn.speaker, "segments": segments})
    return {"id": d.id, "turns": turns}


def canonical_json(d: Dialogue) -> str:
    return json.dumps(dialogue_to_dict(d), ensure_ascii=False, separators=(",", ":"))


# -- validation ------------------------------------------------------------


def validate_dialogue(d: Dialogue) -> list[str]:
    """Check type invariants; returns a list of violations (empty when valid)."""
    problems: list[str] = []
    if not d.id:
        problems.append("id: empty")
    if not d.turns:
        problems.append("turns: empty turn list")
    for ti, turn in enumerate(d.turns):
        if turn.speaker not in SPEAKERS:
            problems.append(f"turns[{ti}].speaker: invalid speaker {turn.speaker!r}")
        if not turn.segments:
            problems.append(f"turns[{ti}].segments: turn has no segments")
        for si, seg in enumerate(turn.segments):
            if not seg.da:
                problems.append(f"turns[{ti}].segments[{si}].da: empty DA label")
            for ei, m in enumerate(seg.entities):
                where = f"turns[{ti}].segments[{si}].entities[{ei}]"
                if not m.head:
                    problems.append(f"{where}.head: empty head")
                elif any(c.isspace() for c in m.head):
                    problems.append(f"{where}.head: head contains whitespace ({m.head!r})")
                if m.role not in MENTION_ROLES:
                    problems.append(f"{where}.role: invalid role {m.role!r}")
    return problems


def iter_corpus_records(path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, parsed_json) for every nonblank line."""
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON ({exc.msg})", line=line_no) from exc
            yield line_no, obj


def load_tagset(path) -> tuple[str, ...]:
    """Read a newline-separated DA tagset file."""
    labels = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    labels = [l for l in labels if l]
    if not labels:
        raise DataError(f"empty tagset file: {path}")
    return tuple(labels)


def load_corpus(path, tagset: Sequence[str] | None = None) -> Corpus:
    """Load and validate a JSONL corpus.

    Raises CorpusFormatError naming the offending line on any parse error,
    invariant violation, duplicate dialogue id, or (when a tagset is given)
    unknown DA label. An empty file is an error.
    """
    corpus: Corpus = []
    seen_ids: set[str] = set()
    allowed = set(tagset) if tagset is not None else None
    for line_no, obj in iter_corpus_records(path):
        try:
            d = dialogue_from_dict(obj)
        except CorpusFormatError as exc:
            raise CorpusFormatError(str(exc), line=line_no) from exc
        problems = validate_dialogue(d)
        if problems:
            raise CorpusFormatError(problems[0], line=line_no)
        if d.id in seen_ids:
            raise CorpusFormatError(f"duplicate dialogue id {d.id!r}", line=line_no)
        seen_ids.add(d.id)
        if allowed is not None:
            for ti, turn in enumerate(d.turns):
                for si, seg in enumerate(turn.segments):
                    if seg.da not in allowed:
                        raise CorpusFormatError(
                            f"turns[{ti}].segments[{si}].da: unknown DA tag {seg.da!r}",
                            line=line_no,
                        )
        corpus.append(d)
    if not corpus:
        raise DataError(f"empty corpus: {path}")
    return corpus


def save_corpus(corpus: Iterable[Dialogue], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for d in corpus:
            f.write(canonical_json(d) + "\n")


# -- vocabularies ----------------------------------------------------------


@dataclass(frozen=True)
class Vocab:
    """An ordered token list; a token's index is its position."""

    tokens: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {t: i for i, t in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise DataError("vocabulary contains duplicate tokens")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def id(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise DataError(f"token not in vocabulary: {token!r}") from None

    def get(self, token: str, default: int | None = None) -> int | None:
        return self._index.get(token, default)

    def token(self, idx: int) -> str:
        return self.tokens[idx]


@dataclass(frozen=True)
class Vocabularies:
    """Frozen token/index maps for the four input channels.

    words: entity heads with reserved <pad>, <unk>, <no_ent> up front.
    roles: <no_ent> plus the three mention roles.
    da:    base DA labels (IOB2 expansion derived on demand).
    turn:  the four speaker-boundary tags B-A/B-B/I-A/I-B.
    """

    words: Vocab
    roles: Vocab
    da: Vocab
    turn: Vocab

    def iob_da(self) -> Vocab:
        """IOB2-expanded DA vocabulary: B-/I- variants of every base label."""
        return Vocab(tuple(f"{p}-{t}" for t in self.da.tokens for p in ("B", "I")))

    def word_id(self, head: str) -> int:
        wid = self.words.get(head)
        return wid if wid is not None else self.words.id(UNK)

    def to_dict(self) -> dict:
        return {
            "words": list(self.words.tokens),
            "roles": list(self.roles.tokens),
            "da": list(self.da.tokens),
            "turn": list(self.turn.tokens),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Vocabularies":
        try:
            return cls(
                words=Vocab(tuple(obj["words"])),
                roles=Vocab(tuple(obj["roles"])),
                da=Vocab(tuple(obj["da"])),
                turn=Vocab(tuple(obj["turn"])),
            )
        except KeyError as exc:
            raise DataError(f"vocabulary file missing section {exc}") from exc


def derive_vocabularies(
    corpus: Sequence[Dialogue],
    min_word_count: int = 1,
    tagset: Sequence[str] | None = None,
) -> Vocabularies:
    """Build deterministic vocabularies from a corpus.

    Heads occurring fewer than min_word_count times are excluded (they map to
    <unk> at encode time). Content tokens are inserted in sorted order, so two
    runs over the same corpus produce identical index maps. When a tagset is
    supplied it defines the DA vocabulary; otherwise the observed labels do.
    """
    if not corpus:
        raise DataError("cannot derive vocabularies from an empty corpus")
    if min_word_count < 0:
        raise DataError("min_word_count must be >= 0")
    head_counts: Counter[str] = Counter()
    observed_das: set[str] = set()
    for d in corpus:
        for turn in d.turns:
            for seg in turn.segments:
                observed_das.add(seg.da)
                for m in seg.entities:
                    head_counts[m.head] += 1
    kept = sorted(h for h, c in head_counts.items() if c >= min_word_count)
    da_labels = sorted(tagset) if tagset is not None else sorted(observed_das)
    return Vocabularies(
        words=Vocab((PAD, UNK, NO_ENT, *kept)),
        roles=Vocab((NO_ENT, *sorted(MENTION_ROLES))),
        da=Vocab(tuple(da_labels)),
        turn=Vocab(TURN_TAGS),
    )


def save_vocabularies(vocabs: Vocabularies, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(vocabs.to_dict(), f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")


def load_vocabularies(path) -> Vocabularies:
    with open(path, encoding="utf-8") as f:
        return Vocabularies.from_dict(json.load(f))
