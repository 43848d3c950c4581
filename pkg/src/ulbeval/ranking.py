"""Per-query rankings: score-derived and reference policies.

A Ranking is a permutation of document indices into the query's row
order. Ties are always broken by ascending original index, so every
constructor here is deterministic across platforms and thread counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Corpus, QueryDocs
from .errors import UlbevalError

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(text: str) -> int:
    """64-bit FNV-1a hash of the UTF-8 bytes of text."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def derive_seed(seed: int, qid: str) -> int:
    """Per-query RNG seed: user seed XOR fnv1a64(qid).

    Fixed and documented so that parallel evaluation order can never
    change which permutation a query receives.
    """
    return (seed ^ fnv1a64(qid)) & _MASK64


@dataclass(eq=False)
class Ranking:
    """A permutation of 0..n-1 for one query's documents."""

    qid: str
    order: np.ndarray

    def __post_init__(self) -> None:
        self.order = np.asarray(self.order, dtype=np.int64)

    def validate(self, n: int) -> None:
        o = self.order
        if len(o) != n or not np.array_equal(np.sort(o), np.arange(n)):
            raise UlbevalError(f"query {self.qid}: order is not a permutation of 0..{n - 1}")


def _descending_order(keys: np.ndarray) -> np.ndarray:
    # np.argsort is stable for kind="stable", so sorting by negated key
    # keeps ascending original index among ties.
    return np.argsort(-keys, kind="stable")


def ranking_from_scores(q: QueryDocs, scores) -> Ranking:
    """Sort descending by score; ties keep ascending document index."""
    arr = np.asarray(scores, dtype=np.float64)
    if arr.shape != (len(q),):
        raise UlbevalError(
            f"query {q.qid}: got {arr.shape[0] if arr.ndim == 1 else 'non-1d'} scores "
            f"for {len(q)} docs"
        )
    if not np.all(np.isfinite(arr)):
        raise UlbevalError(f"query {q.qid}: non-finite score")
    return Ranking(qid=q.qid, order=_descending_order(arr))


def ideal_ranking(q: QueryDocs) -> Ranking:
    """Labels non-increasing along the ranking (the perfect ordering)."""
    return Ranking(qid=q.qid, order=_descending_order(q.labels.astype(np.float64)))


def worst_ranking(q: QueryDocs) -> Ranking:
    """Labels non-decreasing along the ranking."""
    order = np.argsort(q.labels, kind="stable")
    return Ranking(qid=q.qid, order=order)


def random_ranking(q: QueryDocs, seed: int) -> Ranking:
    """Uniform random permutation, deterministic for a given (qid, seed)."""
    rng = np.random.default_rng(derive_seed(seed, q.qid))
    return Ranking(qid=q.qid, order=rng.permutation(len(q)))


def feature_ranking(q: QueryDocs, feature_id: int) -> Ranking:
    """Sort descending by one feature's value; absent features count as 0."""
    if feature_id < 1:
        raise UlbevalError(f"feature_id must be positive, got {feature_id}")
    return Ranking(qid=q.qid, order=_descending_order(q.feature_values(feature_id)))


def ranking_from_trec(q: QueryDocs, entries: list[tuple[str, float]]) -> Ranking:
    """Build a Ranking from parsed TREC run entries for one query.

    Listed documents sort by descending score (ties by file position);
    documents the run omits follow in ascending index order. A doc id the
    corpus does not know is an error.
    """
    index_of = {doc.doc_id: i for i, doc in enumerate(q.docs)}
    listed: list[int] = []
    seen = set()
    order_keys = sorted(range(len(entries)), key=lambda i: (-entries[i][1], i))
    for i in order_keys:
        doc_id, _score = entries[i]
        idx = index_of.get(doc_id)
        if idx is None:
            raise UlbevalError(f"query {q.qid}: run references unknown docid {doc_id!r}")
        if idx in seen:
            raise UlbevalError(f"query {q.qid}: run lists docid {doc_id!r} twice")
        seen.add(idx)
        listed.append(idx)
    tail = [i for i in range(len(q)) if i not in seen]
    return Ranking(qid=q.qid, order=np.array(listed + tail, dtype=np.int64))


def write_trec_run(
    rankings: dict[str, Ranking],
    corpus: Corpus,
    tag: str = "run",
    scores: dict[str, np.ndarray] | None = None,
) -> str:
    """Emit rankings as TREC run text in ascending qid order.

    Without explicit scores, position p (0-based) gets score n - p so that
    re-parsing and re-sorting by score reconstructs the same order.
    """
    lines = []
    for qid in sorted(rankings):
        q = corpus.queries.get(qid)
        if q is None:
            raise UlbevalError(f"ranking for unknown query {qid!r}")
        ranking = rankings[qid]
        ranking.validate(len(q))
        n = len(q)
        for pos, idx in enumerate(ranking.order):
            if scores is not None:
                score = repr(float(scores[qid][idx]))
            else:
                score = str(n - pos)
            lines.append(f"{qid} Q0 {q.docs[idx].doc_id} {pos + 1} {score} {tag}")
    return "\n".join(lines) + ("\n" if lines else "")
