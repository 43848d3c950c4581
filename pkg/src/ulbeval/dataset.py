"""LETOR and TREC-run parsing plus per-query label statistics.

The corpus model is deliberately small: a query is an ordered list of
labeled documents, a corpus is a map from query id to query with a fixed
grade scale. Everything downstream (rankings, metrics, bounds) works on
document indices into that per-query order, so parsing is the only place
where file formats matter.

Accepted LETOR line grammar:

    LABEL WS 'qid:' QID (WS FID ':' FLOAT)* (WS? '#' ANY*)?

where LABEL is a base-10 non-negative integer and FID a positive integer.
A comment may carry ``docid = <id>`` (the MQ2007 convention); rows without
one get a synthesized ``<qid>:<row-index>`` id so every document has a
stable identity in run files.

Accepted TREC run line grammar:

    QID WS 'Q0' WS DOCID WS RANK WS SCORE WS TAG
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

import numpy as np

from .errors import ParseError, UlbevalError

_DOCID_RE = re.compile(r"docid\s*=\s*(\S+)")


@dataclass(frozen=True)
class GradeScale:
    """Relevance label scale 0..g_max (4 for MSLR-class, 2 for MQ2007-class)."""

    g_max: int

    def __post_init__(self) -> None:
        if self.g_max < 1:
            raise UlbevalError(f"g_max must be >= 1, got {self.g_max}")


@dataclass(frozen=True)
class DocEntry:
    """One query-document row: graded label, stable id, sparse features."""

    label: int
    doc_id: str
    features: tuple[tuple[int, float], ...] = ()


@dataclass(eq=False)
class QueryDocs:
    """All documents of one query, in dataset row order."""

    qid: str
    docs: list[DocEntry]

    def __post_init__(self) -> None:
        if not self.qid:
            raise UlbevalError("qid must be non-empty")
        if not self.docs:
            raise UlbevalError(f"query {self.qid!r} has no documents")

    def __len__(self) -> int:
        return len(self.docs)

    @property
    def labels(self) -> np.ndarray:
        """Label vector in row order (cached)."""
        arr = getattr(self, "_labels", None)
        if arr is None:
            arr = np.array([d.label for d in self.docs], dtype=np.int64)
            arr.setflags(write=False)
            self._labels = arr
        return arr

    def feature_values(self, feature_id: int) -> np.ndarray:
        """Dense vector of one feature across docs; missing entries are 0."""
        out = np.zeros(len(self.docs), dtype=np.float64)
        for i, doc in enumerate(self.docs):
            for fid, val in doc.features:
                if fid == feature_id:
                    out[i] = val
                    break
        return out


@dataclass(eq=False)
class Corpus:
    """Immutable set of queries sharing one grade scale.

    Iteration and ``qids()`` follow ascending lexicographic qid order, which
    is the canonical order for every deterministic reduce in this package.
    """

    scale: GradeScale
    queries: dict[str, QueryDocs] = field(default_factory=dict)

    def qids(self) -> list[str]:
        return sorted(self.queries)

    def __iter__(self) -> Iterator[QueryDocs]:
        for qid in self.qids():
            yield self.queries[qid]

    def __len__(self) -> int:
        return len(self.queries)


@dataclass(frozen=True)
class LabelHistogram:
    """Per-grade document counts n_j for one query; n is the total."""

    n: int
    counts: tuple[int, ...]


@dataclass(frozen=True)
class BinaryCounts:
    """Relevant/non-relevant split of a histogram at a threshold."""

    n_pos: int
    n_neg: int


def parse_letor(stream: Iterable[str] | TextIO, scale: GradeScale | None = None) -> Corpus:
    """Parse a LETOR-style stream into a Corpus.

    Args:
        stream: iterable of lines (an open text file works).
        scale: optional explicit grade scale. When omitted the scale is
            inferred as the maximum observed label (at least 1).

    Returns:
        Corpus grouping rows by qid, preserving row order within each query.
        An empty stream yields an empty corpus.

    Raises:
        ParseError: on a malformed line, carrying its 1-based line number.
    """
    queries: dict[str, QueryDocs] = {}
    max_label = 0
    for line_no, raw in enumerate(stream, start=1):
        body, _, comment = raw.partition("#")
        tokens = body.split()
        if not tokens:
            if raw.strip():
                raise ParseError("comment-only line has no label or qid", line_no)
            continue
        if len(tokens) < 2:
            raise ParseError("expected '<label> qid:<qid> ...'", line_no)
        if not tokens[0].isdigit():
            raise ParseError(f"label {tokens[0]!r} is not a non-negative integer", line_no)
        label = int(tokens[0])
        if not tokens[1].startswith("qid:") or len(tokens[1]) <= 4:
            raise ParseError(f"expected 'qid:<qid>', got {tokens[1]!r}", line_no)
        qid = tokens[1][4:]

        features = []
        last_fid = 0
        for tok in tokens[2:]:
            fid_s, sep, val_s = tok.partition(":")
            if not sep or not fid_s.isdigit() or int(fid_s) < 1:
                raise ParseError(f"bad feature pair {tok!r}", line_no)
            fid = int(fid_s)
            try:
                val = float(val_s)
            except ValueError:
                raise ParseError(f"bad feature value in {tok!r}", line_no) from None
            if not math.isfinite(val):
                raise ParseError(f"non-finite feature value in {tok!r}", line_no)
            if fid <= last_fid:
                raise ParseError(f"feature ids not strictly increasing at {tok!r}", line_no)
            last_fid = fid
            features.append((fid, val))

        if scale is not None and label > scale.g_max:
            raise ParseError(
                f"label {label} exceeds g_max={scale.g_max}", line_no
            )
        max_label = max(max_label, label)

        q = queries.get(qid)
        row_index = len(q.docs) if q is not None else 0
        m = _DOCID_RE.search(comment)
        doc_id = m.group(1) if m else f"{qid}:{row_index}"
        entry = DocEntry(label=label, doc_id=doc_id, features=tuple(features))
        if q is None:
            queries[qid] = QueryDocs(qid=qid, docs=[entry])
        else:
            q.docs.append(entry)

    if scale is None:
        scale = GradeScale(max(max_label, 1))
    return Corpus(scale=scale, queries=queries)


def histogram(q: QueryDocs, scale: GradeScale) -> LabelHistogram:
    """Count documents per grade; counts[j] is n_j for grade j."""
    counts = [0] * (scale.g_max + 1)
    for doc in q.docs:
        if not 0 <= doc.label <= scale.g_max:
            raise UlbevalError(
                f"query {q.qid}: label {doc.label} outside scale 0..{scale.g_max}"
            )
        counts[doc.label] += 1
    return LabelHistogram(n=len(q.docs), counts=tuple(counts))


def binarize(h: LabelHistogram, threshold: int = 0) -> BinaryCounts:
    """Split a histogram into relevant (label > threshold) and the rest."""
    if not 0 <= threshold < len(h.counts):
        raise UlbevalError(f"threshold {threshold} outside grade range")
    n_pos = sum(h.counts[threshold + 1 :])
    return BinaryCounts(n_pos=n_pos, n_neg=h.n - n_pos)


def parse_trec_run(stream: Iterable[str] | TextIO) -> dict[str, list[tuple[str, float]]]:
    """Parse a TREC run stream into qid -> [(doc_id, score)] in file order.

    Ranks in the file are informative only; consumers re-sort by score.
    Unknown doc ids are not checked here, that happens at evaluation time
    against a concrete corpus.
    """
    runs: dict[str, list[tuple[str, float]]] = {}
    for line_no, raw in enumerate(stream, start=1):
        tokens = raw.split()
        if not tokens:
            continue
        if len(tokens) != 6:
            raise ParseError(
                f"expected 6 fields 'qid Q0 docid rank score tag', got {len(tokens)}",
                line_no,
            )
        qid, q0, doc_id, rank_s, score_s, _tag = tokens
        if q0 != "Q0":
            raise ParseError(f"second field must be 'Q0', got {q0!r}", line_no)
        try:
            int(rank_s)
        except ValueError:
            raise ParseError(f"rank {rank_s!r} is not an integer", line_no) from None
        try:
            score = float(score_s)
        except ValueError:
            raise ParseError(f"score {score_s!r} is not a number", line_no) from None
        if not math.isfinite(score):
            raise ParseError(f"score {score_s!r} is not finite", line_no)
        runs.setdefault(qid, []).append((doc_id, score))
    return runs


def format_trec_run(
    runs: dict[str, list[tuple[str, float]]], tag: str = "run"
) -> str:
    """Render qid -> [(doc_id, score)] as TREC run text.

    Entries are emitted in ascending qid order, re-sorted by descending
    score (ties by file position) so the text round-trips through
    parse_trec_run into the same ordering.
    """
    lines = []
    for qid in sorted(runs):
        entries = runs[qid]
        order = sorted(range(len(entries)), key=lambda i: (-entries[i][1], i))
        for rank, i in enumerate(order, start=1):
            doc_id, score = entries[i]
            lines.append(f"{qid} Q0 {doc_id} {rank} {score!r} {tag}")
    return "\n".join(lines) + ("\n" if lines else "")


def subsample(corpus: Corpus, n: int, seed: int) -> Corpus:
    """Draw n queries without replacement, deterministically from seed."""
    qids = corpus.qids()
    if not 1 <= n <= len(qids):
        raise UlbevalError(
            f"subsample size {n} not in 1..{len(qids)} (corpus has {len(qids)} queries)"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(qids), size=n, replace=False)
    keep = {qids[i] for i in chosen}
    return Corpus(scale=corpus.scale, queries={q: corpus.queries[q] for q in sorted(keep)})
