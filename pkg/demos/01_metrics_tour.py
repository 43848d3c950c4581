"""
A tour of the graded ranking metrics
====================================

One hand-built query, three metric families, and the two ways to ask
for a score: a scalar at one cutoff, or the whole prefix curve at once.
"""

import numpy as np

from ulbeval import (
    DocEntry,
    GradeScale,
    MetricSpec,
    QueryDocs,
    Ranking,
    dcg_at_k,
    ideal_ranking,
    metric_prefix,
    ndcg_at_k,
    err_at_k,
    evaluate,
    sp_at_k,
    ap_at_k,
)

# ----------------------------------------------------------------------
# A query with six documents on a 0..4 grade scale.  Row order is the
# dataset order; nothing is ranked yet.
# ----------------------------------------------------------------------

labels = [3, 0, 4, 1, 0, 2]
q = QueryDocs(
    qid="demo",
    docs=[DocEntry(label=g, doc_id=f"d{i}") for i, g in enumerate(labels)],
)
scale = GradeScale(g_max=4)

print("labels in dataset order:", labels)

# A Ranking is a permutation of row indices, best-first.  Rank documents
# d2 (grade 4), d3 (grade 1), d0 (grade 3), then the rest.
sys_rank = Ranking(qid="demo", order=(2, 3, 0, 1, 4, 5))
print("system ranking puts grades", [labels[i] for i in sys_rank.order])

# ----------------------------------------------------------------------
# Scalars at a cutoff.  dcg uses exponential gain (2^g - 1) with a log2
# position discount; ndcg divides by the ideal reordering's dcg.
# ----------------------------------------------------------------------

for k in (1, 3, 6):
    d = dcg_at_k(sys_rank, q.labels, k).value
    nd = ndcg_at_k(sys_rank, q, k).value
    print(f"k={k}: dcg={d:.6f}  ndcg={nd:.6f}")

# The ideal ranking scores ndcg exactly 1 at every depth.
ideal = ideal_ranking(q)
print("ideal ndcg@6 =", ndcg_at_k(ideal, q, 6).value)

# ----------------------------------------------------------------------
# The precision family binarizes grades at a threshold (grade > 0 by
# default).  sp sums precision at each relevant rank; ap divides by k.
# ----------------------------------------------------------------------

print("sp@6 =", sp_at_k(sys_rank, q, 6).value)
print("ap@6 =", ap_at_k(sys_rank, q, 6).value)

# ----------------------------------------------------------------------
# err models a user scanning down the list and stopping with
# probability (2^g - 1) / 2^g_max at each document.
# ----------------------------------------------------------------------

print("err@6 =", err_at_k(sys_rank, q, 6, scale).value)

# ----------------------------------------------------------------------
# The prefix form evaluates every depth 1..n in one vectorized pass.
# metric_prefix takes the labels already in ranked order.
# ----------------------------------------------------------------------

ranked = q.labels[list(sys_rank.order)]
spec = MetricSpec(metric="err", k=6, scale=scale)
curve = metric_prefix(spec, ranked)
print("err prefix curve:", np.round(curve, 6))

# Each prefix entry equals the scalar at that depth.
for k in range(1, 7):
    scalar = evaluate(spec.at_k(k), sys_rank, q).value
    assert abs(curve[k - 1] - scalar) < 1e-15
print("prefix curve matches the scalar metric at every depth")
