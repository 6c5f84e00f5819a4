"""Ranking and agreement metrics with pessimistic tie handling.

Whenever a model assigns two candidates the same score, the model is assumed
to be wrong: relevant (or higher-rated) candidates are ordered after tied
others, and tied pairs count as errors in pairwise accuracy. All per-instance
metrics lie in [0, 1]; corpus-level values are arithmetic means over
instances, taken by the caller.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, NumericError


def pessimistic_order(scores: Sequence[float], relevance: Sequence[float]) -> list[int]:
    """Indices in predicted rank order: descending score, ties broken by
    ascending relevance (higher-relevance candidates last), then by index."""
    scores = [float(s) for s in scores]
    relevance = [float(r) for r in relevance]
    if len(scores) != len(relevance):
        raise DataError("scores and relevance must align")
    return sorted(range(len(scores)), key=lambda i: (-scores[i], relevance[i], i))


def ranked_relevance(scores: Sequence[float], relevance: Sequence[float]) -> np.ndarray:
    """Relevance values rearranged into the pessimistic predicted order."""
    order = pessimistic_order(scores, relevance)
    return np.asarray([relevance[i] for i in order], dtype=np.float64)


def pairwise_accuracy(pos_score: float, neg_scores: Sequence[float]) -> float:
    """Fraction of adversarial candidates scored strictly below the original;
    a tie counts as an error."""
    neg_scores = list(neg_scores)
    if not neg_scores:
        raise DataError("pairwise accuracy needs at least one negative score")
    wins = sum(1 for s in neg_scores if pos_score > s)
    return wins / len(neg_scores)


def graded_pairwise_accuracy(
    scores: Sequence[float], ratings: Sequence[float]
) -> tuple[float, int]:
    """Accuracy over candidate pairs with non-identical ratings: a pair is
    correct when the higher-rated candidate scores strictly higher. Returns
    (accuracy, number of evaluated pairs); accuracy is 0.0 when no pair with
    distinct ratings exists."""
    scores = [float(s) for s in scores]
    ratings = [float(r) for r in ratings]
    correct = 0
    total = 0
    for i in range(len(scores)):
        for j in range(i + 1, len(scores)):
            if ratings[i] == ratings[j]:
                continue
            total += 1
            hi, lo = (i, j) if ratings[i] > ratings[j] else (j, i)
            if scores[hi] > scores[lo]:
                correct += 1
    return (correct / total if total else 0.0), total


def reciprocal_rank(relevance_in_order: Sequence[float]) -> float:
    """1 / rank of the first relevant item; relevance is binary here."""
    for i, rel in enumerate(relevance_in_order):
        if rel > 0:
            return 1.0 / (i + 1)
    raise DataError("no relevant candidate in ranking")


def recall_at_k(relevance_in_order: Sequence[float], k: int) -> float:
    """1.0 iff a relevant candidate appears within the top k positions."""
    n = len(relevance_in_order)
    if not 1 <= k <= n:
        raise DataError(f"k={k} outside [1, {n}]")
    return 1.0 if any(r > 0 for r in relevance_in_order[:k]) else 0.0


def dcg(gains_in_order: Sequence[float]) -> float:
    gains = np.asarray(gains_in_order, dtype=np.float64)
    discounts = np.log2(np.arange(2, len(gains) + 2))
    return float((gains / discounts).sum())


def ndcg(gains_in_order: Sequence[float]) -> float:
    """Normalized discounted cumulative gain with linear gains: DCG of the
    predicted order over DCG of the gain-sorted ideal order."""
    gains = np.asarray(gains_in_order, dtype=np.float64)
    if gains.size == 0 or not (gains > 0).any():
        raise DataError("nDCG requires at least one positive gain")
    ideal = np.sort(gains)[::-1]
    return dcg(gains) / dcg(ideal)


def ndcg_from_scores(scores: Sequence[float], gains: Sequence[float]) -> float:
    """nDCG of a scored candidate list under the pessimistic tie rule."""
    order = pessimistic_order(scores, gains)
    return ndcg([gains[i] for i in order])


def dynamic_relevance(ratings: Sequence[float]) -> np.ndarray:
    """Binary labels marking every candidate that reaches the instance's
    maximum mean rating."""
    ratings = np.asarray(ratings, dtype=np.float64)
    if ratings.size == 0:
        raise DataError("empty rating list")
    return (ratings == ratings.max()).astype(np.float64)


def harmonic(n: int) -> float:
    return sum(1.0 / k for k in range(1, n + 1))


def expected_random_mrr(n_candidates: int) -> float:
    """Closed form for a single relevant candidate: H(n) / n."""
    if n_candidates < 1:
        raise DataError("need at least one candidate")
    return harmonic(n_candidates) / n_candidates


def random_baseline(
    n_candidates: int,
    metric: str,
    relevance: Sequence[float] | None = None,
    trials: int = 100_000,
    seed: int = 0,
    k: int = 1,
) -> dict:
    """Monte Carlo estimate of a metric under uniformly random orderings.

    relevance defaults to a single relevant candidate (binary metrics) and is
    the gain vector for ndcg. Returns the estimate, its standard error, and a
    closed form when one is known (single-relevant MRR and R@k).
    """
    if trials < 1:
        raise DataError("trials must be >= 1")
    if n_candidates < 1:
        raise DataError("need at least one candidate")
    rng = np.random.default_rng(seed)
    if relevance is None:
        relevance = np.zeros(n_candidates)
        relevance[0] = 1.0
    rel = np.asarray(relevance, dtype=np.float64)
    if rel.size != n_candidates:
        raise DataError("relevance profile length must equal n_candidates")

    single_relevant = int((rel > 0).sum()) == 1 and metric != "ndcg"
    closed_form = None

    if metric == "accuracy":
        # Random continuous scores are tie-free almost surely: P(pos > neg) = 1/2.
        scores = rng.random((trials, n_candidates))
        pos = int(np.argmax(rel))
        neg = [i for i in range(n_candidates) if i != pos]
        if not neg:
            raise DataError("accuracy baseline needs at least two candidates")
        wins = (scores[:, [pos]] > scores[:, neg]).mean(axis=1)
        values = wins
        closed_form = 0.5
    else:
        # Random permutation of the relevance profile per trial.
        keys = rng.random((trials, n_candidates))
        perm = np.argsort(keys, axis=1)
        arranged = rel[perm]
        if metric == "mrr":
            first = np.argmax(arranged > 0, axis=1)
            if not (arranged > 0).any(axis=1).all():
                raise DataError("mrr baseline needs at least one relevant candidate")
            values = 1.0 / (first + 1.0)
            if single_relevant:
                closed_form = expected_random_mrr(n_candidates)
        elif metric == "recall":
            if not 1 <= k <= n_candidates:
                raise DataError(f"k={k} outside [1, {n_candidates}]")
            values = (arranged[:, :k] > 0).any(axis=1).astype(np.float64)
            if single_relevant:
                closed_form = k / n_candidates
        elif metric == "ndcg":
            if not (rel > 0).any():
                raise DataError("ndcg baseline needs at least one positive gain")
            discounts = np.log2(np.arange(2, n_candidates + 2))
            ideal = dcg(np.sort(rel)[::-1])
            values = (arranged / discounts).sum(axis=1) / ideal
        else:
            raise DataError(f"unknown metric {metric!r}")

    estimate = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(trials)) if trials > 1 else float("nan")
    out = {
        "metric": metric,
        "n_candidates": n_candidates,
        "trials": trials,
        "seed": seed,
        "estimate": estimate,
        "standard_error": se,
    }
    if metric == "recall":
        out["k"] = k
    if closed_form is not None:
        out["closed_form"] = closed_form
    return out


# -- agreement ----------------------------------------------------------------


def quadratic_weighted_kappa(
    a: Sequence[int], b: Sequence[int], categories: Sequence[int] = (1, 2, 3)
) -> float:
    """Chance-corrected ordinal agreement with (i-j)^2 disagreement weights:
    kappa = 1 - sum(w * O) / sum(w * E) with E the marginal outer product."""
    a = list(a)
    b = list(b)
    if len(a) != len(b):
        raise DataError("paired ratings must have equal length")
    if not a:
        raise DataError("need at least one rating pair")
    cats = list(categories)
    cat_index = {c: i for i, c in enumerate(cats)}
    K = len(cats)
    observed = np.zeros((K, K), dtype=np.float64)
    for x, y in zip(a, b):
        if x not in cat_index or y not in cat_index:
            raise DataError(f"rating outside categories {cats}: ({x}, {y})")
        observed[cat_index[x], cat_index[y]] += 1.0
    n = observed.sum()
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / n
    idx = np.arange(K, dtype=np.float64)
    weights = (idx[:, None] - idx[None, :]) ** 2 / (K - 1) ** 2
    expected_disagreement = float((weights * expected).sum())
    observed_disagreement = float((weights * observed).sum())
    if expected_disagreement == 0.0:
        # Both raters constant; agreement is perfect iff all mass is diagonal.
        if observed_disagreement == 0.0:
            return 1.0
        raise NumericError("zero expected disagreement with observed disagreement")
    return 1.0 - observed_disagreement / expected_disagreement


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size:
        raise DataError("paired sequences must have equal length")
    if x.size < 2:
        raise DataError("correlation needs at least two pairs")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        raise NumericError("zero variance in correlation input")
    return float((xc * yc).sum() / denom)


@dataclass(frozen=True)
class LeaveOneOutReport:
    per_rater: tuple[float, ...]
    mean: float


def leave_one_out_correlation(matrix: np.ndarray) -> LeaveOneOutReport:
    """Per-rater Pearson correlation with the item-wise mean of all other
    raters, and the average over raters.

    matrix is (items, raters) with NaN for missing ratings; each rater must
    share at least two items with the others' mean and have nonzero variance.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] < 2:
        raise DataError("rating matrix must be (items, >=2 raters)")
    correlations = []
    for r in range(m.shape[1]):
        own = m[:, r]
        others = np.delete(m, r, axis=1)
        with np.errstate(invalid="ignore"):
            others_mean = np.nanmean(others, axis=1)
        mask = ~np.isnan(own) & ~np.isnan(others_mean)
        if mask.sum() < 2:
            raise DataError(f"rater {r} shares fewer than 2 items with the others")
        correlations.append(pearson(own[mask], others_mean[mask]))
    return LeaveOneOutReport(
        per_rater=tuple(correlations), mean=float(np.mean(correlations))
    )
