import json

import pytest

from dialcoh.corpus import (
    NO_ENT,
    PAD,
    UNK,
    Dialogue,
    EntityMention,
    Segment,
    Turn,
    canonical_json,
    derive_vocabularies,
    load_corpus,
    load_tagset,
    save_corpus,
    validate_dialogue,
)
from dialcoh.errors import CorpusFormatError, DataError

from conftest import simple_dialogue, synthetic_corpus


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


MINIMAL = {
    "id": "d1",
    "turns": [
        {"speaker": "A", "segments": [{"da": "sd", "entities": [{"head": "movie", "role": "O"}]}]},
        {"speaker": "B", "segments": [{"da": "qy", "entities": []}]},
    ],
}


class TestLoadCorpus:
    def test_single_dialogue(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_lines(path, [json.dumps(MINIMAL)])
        corpus = load_corpus(path)
        assert len(corpus) == 1
        assert corpus[0].id == "d1"
        assert corpus[0].turns[0].segments[0].entities[0].head == "movie"

    def test_empty_file_is_error(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(DataError, match="empty corpus"):
            load_corpus(path)

    def test_invalid_role_names_line_and_field(self, tmp_path):
        bad = json.loads(json.dumps(MINIMAL))
        bad["turns"][0]["segments"][0]["entities"][0]["role"] = "Q"
        path = tmp_path / "c.jsonl"
        write_lines(path, [json.dumps(MINIMAL).replace("d1", "d0"), json.dumps(bad)])
        with pytest.raises(CorpusFormatError, match=r"line 2.*role"):
            load_corpus(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_lines(path, [json.dumps(MINIMAL), json.dumps(MINIMAL)])
        with pytest.raises(CorpusFormatError, match="duplicate dialogue id"):
            load_corpus(path)

    def test_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_lines(path, [json.dumps(MINIMAL), "{not json"])
        with pytest.raises(CorpusFormatError, match="line 2"):
            load_corpus(path)

    def test_unknown_da_with_tagset(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_lines(path, [json.dumps(MINIMAL)])
        tagset_path = tmp_path / "tags.txt"
        tagset_path.write_text("sd\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError, match="unknown DA tag 'qy'"):
            load_corpus(path, tagset=load_tagset(tagset_path))
        ok = load_corpus(path, tagset=("sd", "qy"))
        assert len(ok) == 1

    def test_heads_case_folded(self, tmp_path):
        rec = json.loads(json.dumps(MINIMAL))
        rec["turns"][0]["segments"][0]["entities"][0]["head"] = "Movie"
        path = tmp_path / "c.jsonl"
        write_lines(path, [json.dumps(rec)])
        corpus = load_corpus(path)
        assert corpus[0].turns[0].segments[0].entities[0].head == "movie"


class TestValidateDialogue:
    def test_empty_turns(self):
        assert len(validate_dialogue(Dialogue(id="d", turns=()))) == 1

    def test_well_formed(self):
        assert validate_dialogue(simple_dialogue()) == []

    def test_empty_head(self):
        d = Dialogue(
            id="d",
            turns=(Turn("A", (Segment("sd", (EntityMention("", "S"),)),)),),
        )
        assert len(validate_dialogue(d)) == 1

    def test_whitespace_head_and_bad_speaker(self):
        d = Dialogue(
            id="d",
            turns=(Turn("C", (Segment("sd", (EntityMention("two words", "S"),)),)),),
        )
        problems = validate_dialogue(d)
        assert any("speaker" in p for p in problems)
        assert any("whitespace" in p for p in problems)


class TestRoundTrip:
    def test_canonical_bytes(self, tmp_path):
        corpus = synthetic_corpus(4, 6, seed=9)
        a = tmp_path / "a.jsonl"
        save_corpus(corpus, a)
        reloaded = load_corpus(a)
        b = tmp_path / "b.jsonl"
        save_corpus(reloaded, b)
        assert a.read_bytes() == b.read_bytes()

    def test_non_canonical_input_normalizes(self, tmp_path):
        d = simple_dialogue()
        scrambled = json.dumps(
            {"turns": json.loads(canonical_json(d))["turns"], "id": d.id}, indent=1
        ).replace("\n", " ")
        path = tmp_path / "c.jsonl"
        write_lines(path, [scrambled])
        (reloaded,) = load_corpus(path)
        assert canonical_json(reloaded) == canonical_json(d)


class TestVocabularies:
    def test_single_head(self):
        d = simple_dialogue()
        v = derive_vocabularies([d], min_word_count=1)
        assert v.words.tokens == (PAD, UNK, NO_ENT, "movie")

    def test_threshold_drops_rare_heads(self):
        d = Dialogue(
            id="d",
            turns=(
                Turn("A", (Segment("sd", (EntityMention("movie", "S"),)),)),
                Turn("B", (Segment("sd", (EntityMention("movie", "O"), EntityMention("rare", "X"))),)),
            ),
        )
        v = derive_vocabularies([d], min_word_count=2)
        assert "movie" in v.words
        assert "rare" not in v.words
        assert v.word_id("rare") == v.words.id(UNK)

    def test_turn_tags_fixed(self, corpus):
        v = derive_vocabularies(corpus)
        assert v.turn.tokens == ("B-A", "B-B", "I-A", "I-B")

    def test_deterministic(self, corpus):
        a = derive_vocabularies(corpus, min_word_count=1)
        b = derive_vocabularies(corpus, min_word_count=1)
        assert a == b

    def test_indexes_dense_and_unique(self, vocabs):
        for vocab in (vocabs.words, vocabs.roles, vocabs.da, vocabs.turn):
            ids = [vocab.id(t) for t in vocab.tokens]
            assert ids == list(range(len(vocab)))

    def test_iob_expansion_doubles_da(self, vocabs):
        expanded = vocabs.iob_da()
        assert len(expanded) == 2 * len(vocabs.da)
        for tag in vocabs.da.tokens:
            assert f"B-{tag}" in expanded
            assert f"I-{tag}" in expanded

    def test_roles_vocabulary(self, vocabs):
        assert set(vocabs.roles.tokens) == {NO_ENT, "S", "O", "X"}

    def test_empty_corpus_rejected(self):
        with pytest.raises(DataError):
            derive_vocabularies([])
