import hashlib
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialcoh.corpus import Dialogue
from dialcoh.errors import CorpusFormatError, DataError, InsufficientPoolError
from dialcoh.swapgen import (
    InsertionPoint,
    build_selection_dataset,
    gen_insertion_points,
    load_instances,
    load_rated_testset,
    rated_instance_from_dict,
    sample_negatives,
    save_instances,
    turn_fingerprint,
)

from conftest import seg, synthetic_corpus, synthetic_dialogue, turn


def unique_dialogue(i: int, n_turns: int) -> Dialogue:
    """Every turn textually unique (so fingerprints never collide)."""
    return Dialogue(
        id=f"u{i:03d}",
        turns=tuple(
            turn("A" if t % 2 == 0 else "B", seg("sd", [], f"dlg {i} turn {t}"))
            for t in range(n_turns)
        ),
    )


class TestInsertionPoints:
    def test_unbounded_sampling(self):
        d = unique_dialogue(0, 12)
        points = gen_insertion_points(d, 10, rng=7)
        assert len(points) == 10
        idxs = [p.positive_idx for p in points]
        assert len(set(idxs)) == 10
        assert all(1 <= i <= 11 for i in idxs)

    def test_exhaustion_returns_all(self):
        d = unique_dialogue(0, 2)
        points = gen_insertion_points(d, 10, rng=3)
        assert [p.positive_idx for p in points] == [1]

    def test_ctx_range_cap(self):
        d = unique_dialogue(0, 30)
        points = gen_insertion_points(d, 10, ctx_range=(1, 10), rng=11)
        assert all(p.positive_idx <= 10 for p in points)
        assert len(points) == 10

    def test_too_short_dialogue(self):
        d = unique_dialogue(0, 1)
        with pytest.raises(DataError, match="no admissible"):
            gen_insertion_points(d, 1)

    def test_deterministic_given_seed(self):
        d = unique_dialogue(0, 40)
        a = gen_insertion_points(d, 10, rng=5)
        b = gen_insertion_points(d, 10, rng=5)
        assert a == b


class TestSampleNegatives:
    def test_internal_strictly_after_positive(self):
        d = unique_dialogue(0, 12)
        point = InsertionPoint(d.id, 5)
        negs = sample_negatives(point, "internal", 3, [d], rng=1)
        assert len(negs) == 3
        later = {turn_fingerprint(t) for t in d.turns[6:]}
        fps = [turn_fingerprint(t) for t in negs]
        assert len(set(fps)) == 3
        assert all(fp in later for fp in fps)

    def test_internal_insufficient_pool(self):
        d = unique_dialogue(0, 6)
        with pytest.raises(InsufficientPoolError):
            sample_negatives(InsertionPoint(d.id, 4), "internal", 3, [d], rng=1)

    def test_external_excludes_source_dialogue(self):
        split = [unique_dialogue(i, 8) for i in range(4)]
        point = InsertionPoint(split[0].id, 3)
        negs = sample_negatives(point, "external", 5, split, rng=9)
        own = {turn_fingerprint(t) for t in split[0].turns}
        assert all(turn_fingerprint(t) not in own for t in negs)

    def test_external_needs_other_dialogue(self):
        d = unique_dialogue(0, 8)
        with pytest.raises(InsufficientPoolError):
            sample_negatives(InsertionPoint(d.id, 2), "external", 1, [d], rng=0)

    def test_never_returns_turn_identical_to_positive(self):
        # Other dialogues consist entirely of copies of the positive turn.
        base = unique_dialogue(0, 6)
        positive = base.turns[2]
        clone = Dialogue(id="clones", turns=tuple([positive] * 6))
        with pytest.raises(InsufficientPoolError):
            sample_negatives(InsertionPoint(base.id, 2), "external", 1, [base, clone], rng=0)

    def test_mixed_pool_skips_positive_clones(self):
        base = unique_dialogue(0, 6)
        positive = base.turns[2]
        other = Dialogue(
            id="mix",
            turns=(positive, unique_dialogue(9, 2).turns[0], positive, positive),
        )
        negs = sample_negatives(InsertionPoint(base.id, 2), "external", 1, [base, other], rng=4)
        assert turn_fingerprint(negs[0]) != turn_fingerprint(positive)


class TestBuildDataset:
    def test_pair_count_identity(self):
        split = [unique_dialogue(i, 21) for i in range(4)]
        for mode in ("internal", "external"):
            instances, manifest = build_selection_dataset(
                split, points_per_dialogue=10, n_neg=9, mode=mode, seed=5, ctx_range=(1, 10)
            )
            assert manifest["insertion_points"] == 40
            assert manifest["pairs"] == 360
            assert all(len(i.candidates) == 10 for i in instances)

    @given(seed=st.integers(0, 1000), mode=st.sampled_from(["internal", "external"]))
    @settings(max_examples=20, deadline=None)
    def test_invariants_across_seeds(self, seed, mode):
        split = [unique_dialogue(i, 15) for i in range(3)]
        instances, manifest = build_selection_dataset(
            split, points_per_dialogue=3, n_neg=2, mode=mode, seed=seed, ctx_range=(1, 5)
        )
        assert manifest["pairs"] == manifest["insertion_points"] * 2
        by_id = {d.id: d for d in split}
        for inst in instances:
            d = by_id[inst.dialogue_id]
            assert inst.context == d.turns[: inst.context_len]
            positive = inst.candidates[inst.positive_position]
            assert positive.provenance == "original"
            assert turn_fingerprint(positive.turn) == turn_fingerprint(d.turns[inst.context_len])
            for c in inst.candidates:
                if c.provenance == "original":
                    continue
                fp = turn_fingerprint(c.turn)
                if mode == "internal":
                    later = [turn_fingerprint(t) for t in d.turns[inst.context_len + 1 :]]
                    assert fp in later
                else:
                    own = {turn_fingerprint(t) for t in d.turns}
                    assert fp not in own

    def test_canonical_order_independent_of_input_order(self):
        split = [unique_dialogue(i, 12) for i in range(4)]
        a, _ = build_selection_dataset(
            split, points_per_dialogue=2, n_neg=2, seed=3, ctx_range=(1, 9)
        )
        b, _ = build_selection_dataset(
            split[::-1], points_per_dialogue=2, n_neg=2, seed=3, ctx_range=(1, 9)
        )
        assert a == b

    def test_same_seed_byte_identical_files(self, tmp_path):
        split = [unique_dialogue(i, 14) for i in range(3)]
        digests = []
        for run in range(2):
            instances, _ = build_selection_dataset(
                split, points_per_dialogue=4, n_neg=3, mode="internal", seed=11,
                ctx_range=(1, 10),
            )
            path = tmp_path / f"ds{run}.jsonl"
            save_instances(instances, path)
            digests.append(hashlib.sha256(path.read_bytes()).hexdigest())
        assert digests[0] == digests[1]

    def test_different_seeds_differ(self):
        split = [unique_dialogue(i, 30) for i in range(2)]
        a, _ = build_selection_dataset(
            split, points_per_dialogue=5, n_neg=2, seed=1, ctx_range=(1, 20)
        )
        b, _ = build_selection_dataset(
            split, points_per_dialogue=5, n_neg=2, seed=2, ctx_range=(1, 20)
        )
        assert a != b

    def test_round_trip(self, tmp_path):
        split = [synthetic_dialogue(i, 10) for i in range(3)]
        instances, _ = build_selection_dataset(
            split, points_per_dialogue=2, n_neg=2, seed=0, ctx_range=(1, 7)
        )
        path = tmp_path / "ds.jsonl"
        save_instances(instances, path)
        reloaded = load_instances(path)
        assert len(reloaded) == len(instances)
        assert reloaded[0].positive_position == instances[0].positive_position
        assert reloaded[0].context == instances[0].context


class TestRatedTestset:
    def make_record(self, candidates):
        ctx = [{"speaker": "A", "segments": [{"da": "sd", "entities": []}]}]
        return {"context": ctx, "candidates": candidates}

    def cand(self, prov="original", **extra):
        base = {
            "provenance": prov,
            "turn": {"speaker": "B", "segments": [{"da": "b", "entities": []}]},
        }
        base.update(extra)
        return base

    def test_mean_from_worker_scores(self):
        rec = self.make_record([self.cand(ratings=[3, 3, 2, 3, 2])])
        inst = rated_instance_from_dict(rec)
        assert inst.candidates[0].mean_rating == pytest.approx(2.6)

    def test_rating_outside_scale(self):
        rec = self.make_record([self.cand(ratings=[3, 4])])
        with pytest.raises(CorpusFormatError, match="outside"):
            rated_instance_from_dict(rec)

    def test_mean_rating_accepted(self):
        rec = self.make_record([self.cand(mean_rating=1.8)])
        assert rated_instance_from_dict(rec).candidates[0].mean_rating == pytest.approx(1.8)

    def test_missing_rating_fields(self):
        rec = self.make_record([self.cand()])
        with pytest.raises(CorpusFormatError, match="ratings"):
            rated_instance_from_dict(rec)

    def test_strict_candidate_count(self, tmp_path):
        candidates = [self.cand("original", mean_rating=2.6)] + [
            self.cand("internal", mean_rating=1.8) for _ in range(3)
        ] + [self.cand("external", mean_rating=1.4) for _ in range(3)]
        good = self.make_record(candidates)
        path = tmp_path / "rated.jsonl"
        path.write_text(json.dumps(good) + "\n", encoding="utf-8")
        assert len(load_rated_testset(path, strict_swbd=True)) == 1

        bad = self.make_record(candidates[:5])
        path.write_text(json.dumps(bad) + "\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError, match="7 candidates"):
            load_rated_testset(path, strict_swbd=True)
        assert len(load_rated_testset(path, strict_swbd=False)) == 1
