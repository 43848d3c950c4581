"""Shared fixtures and small corpus builders."""

from __future__ import annotations

import random

import pytest

from ulbeval.dataset import Corpus, DocEntry, GradeScale, QueryDocs


def make_query(labels, qid="q0", features=None):
    """QueryDocs from a plain label list; docids are positional."""
    docs = []
    for i, g in enumerate(labels):
        feats = tuple(features[i]) if features is not None else ()
        docs.append(DocEntry(label=int(g), doc_id=f"{qid}-d{i}", features=feats))
    return QueryDocs(qid=qid, docs=docs)


def make_corpus(label_lists, g_max=None, qid_prefix="q"):
    """Corpus from lists of label lists; scale is inferred unless given."""
    queries = {}
    for i, labels in enumerate(label_lists):
        qid = f"{qid_prefix}{i:04d}"
        queries[qid] = make_query(labels, qid=qid)
    if g_max is None:
        g_max = max((max(ls) for ls in label_lists if ls), default=1)
        g_max = max(g_max, 1)
    return Corpus(scale=GradeScale(g_max), queries=queries)


def letor_text(label_lists, qid_prefix="q", with_docids=True, n_features=2, seed=0):
    """Synthetic LETOR text matching make_corpus qids and doc order."""
    rng = random.Random(seed)
    lines = []
    for i, labels in enumerate(label_lists):
        qid = f"{qid_prefix}{i:04d}"
        for d, g in enumerate(labels):
            feats = " ".join(
                f"{f}:{rng.uniform(-2, 2):.6f}" for f in range(1, n_features + 1)
            )
            line = f"{g} qid:{qid} {feats}"
            if with_docids:
                line += f" # docid = {qid}-d{d}"
            lines.append(line)
    return "\n".join(lines) + "\n"


def random_label_lists(rng, n_queries, n_range=(4, 8), g_max=2, ensure_pos=False):
    out = []
    for _ in range(n_queries):
        n = rng.randint(*n_range)
        labels = [rng.randint(0, g_max) for _ in range(n)]
        if ensure_pos and not any(labels):
            labels[rng.randrange(n)] = rng.randint(1, g_max)
        out.append(labels)
    return out


@pytest.fixture
def rng():
    return random.Random(20240817)
