"""
Normalizing between a random floor and an ideal ceiling
=======================================================

Dividing by the ideal score (the classical normalization) maps the
ideal ranking to 1 but maps a random ranking to whatever the query's
difficulty dictates, so easy queries inflate averages.  The two joint
variants also anchor the random-ranking expectation: v1 damps scores
below it smoothly, v2 maps the floor to 0 and rescales both sides.
"""

import random

from ulbeval import (
    DocEntry,
    MetricSpec,
    QueryDocs,
    Corpus,
    GradeScale,
    RankerConfig,
    build_score_matrix,
    generate_run,
    normalize_upper,
    normalize_v1,
    normalize_v2,
)

# ----------------------------------------------------------------------
# The three maps on a query whose ideal score is 10 and whose random
# expectation is 4.  a is the actual metric value.
# ----------------------------------------------------------------------

iub, rlb = 10.0, 4.0
print(f"{'a':>6} {'upper':>8} {'v1':>8} {'v2':>8}")
for a in (10.0, 7.0, 4.0, 2.0, 0.0):
    u = normalize_upper(a, iub)
    v1 = normalize_v1(a, iub, rlb)
    v2 = normalize_v2(a, iub, rlb)
    print(f"{a:6.1f} {u.value:8.4f} {v1.value:8.4f} {v2.value:8.4f}")

# Anchors: at a = iub, upper and v2 give exactly 1, while v1 tops out
# at iub/(iub + rlb) because its damping factor never quite releases.
# At a = rlb, v2 gives exactly 0 while upper still reports 0.4 (the
# query's easiness leaking through).  At a = 0, v2 gives -1: as far
# below the floor as possible.

# ----------------------------------------------------------------------
# Calibration in aggregate.  Build 80 balanced binary queries, score
# 50 random rankers, and average.  With five relevant documents in ten
# and a cutoff of five, a random ranking is expected to capture half
# the ideal dcg, so upper normalization centers near 0.5; v2 subtracts
# that floor out and centers near 0 by design.
# ----------------------------------------------------------------------

rng = random.Random(424242)
queries = {}
for i in range(80):
    labels = [1] * 5 + [0] * 5
    rng.shuffle(labels)
    qid = f"q{i:03d}"
    queries[qid] = QueryDocs(
        qid=qid,
        docs=[DocEntry(label=g, doc_id=f"{qid}-d{j}") for j, g in enumerate(labels)],
    )
corpus = Corpus(scale=GradeScale(g_max=1), queries=queries)

runs = {
    f"rand{j:02d}": generate_run(corpus, RankerConfig(policy="random", tag=f"rand{j:02d}", seed=j))
    for j in range(50)
}

spec = MetricSpec(metric="dcg", k=5, scale=corpus.scale)
for variant in ("upper", "v1", "v2"):
    matrix = build_score_matrix(
        corpus, runs, spec, variant, ks=[5], bound_mode="exhaustive"
    )
    grand = float(matrix.values.mean())
    spread = float(matrix.values.mean(axis=(1, 2)).std())
    print(f"{variant:5}: mean over rankers {grand:+.4f} (ranker spread {spread:.4f})")

# v2's mean sits within sampling noise of zero: a ranker that does no
# better than chance reports no better than chance.
