"""Candidate ranking with the pessimistic tie rule."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from ..corpus import Turn
from ..metrics import pessimistic_order
from ..swapgen import Candidate


class Scorer(Protocol):
    def score_candidates(
        self, context: Sequence[Turn], candidates: Sequence[Turn]
    ) -> np.ndarray: ...


@dataclass(frozen=True)
class RankedCandidate:
    rank: int  # 1-based
    index: int  # position in the input candidate list
    score: float
    candidate: Candidate


def candidate_relevance(c: Candidate) -> float:
    """Tie-breaking relevance: the mean rating when present, otherwise 1 for
    the original candidate and 0 for adversarial ones."""
    if c.mean_rating is not None:
        return c.mean_rating
    return 1.0 if c.provenance == "original" else 0.0


def rank_candidates(
    context: Sequence[Turn], candidates: Sequence[Candidate], model: Scorer
) -> list[RankedCandidate]:
    """Score and order candidates, descending; under equal scores the more
    relevant candidate (original, or higher rated) is ranked after the others.
    The ordering is invariant under any strictly increasing score transform.
    """
    scores = model.score_candidates(context, [c.turn for c in candidates])
    relevance = [candidate_relevance(c) for c in candidates]
    order = pessimistic_order(scores, relevance)
    return [
        RankedCandidate(rank=r + 1, index=i, score=float(scores[i]), candidate=candidates[i])
        for r, i in enumerate(order)
    ]
