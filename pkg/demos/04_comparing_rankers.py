"""
Does the normalization change who wins?
=======================================

Score several rankers under plain, upper-normalized, and v2-normalized
metrics, then ask the comparison questions: do the leaderboards agree
(Kendall tau, swap rate), how far apart are the systems (percentage
absolute difference), and how many pairwise wins are statistically
significant at each cutoff.
"""

import random

from ulbeval import (
    Corpus,
    DocEntry,
    GradeScale,
    MetricSpec,
    QueryDocs,
    RankerConfig,
    build_score_matrices,
    count_conflicts,
    generate_run,
    kendall_tau,
    pad_pairs,
    rank_methods,
    significance_table,
    swap_rate,
)

# ----------------------------------------------------------------------
# A synthetic corpus: 60 queries, 8 to 14 docs each, grades 0..4 with
# at least one relevant doc per query.
# ----------------------------------------------------------------------

rng = random.Random(20240820)
queries = {}
for i in range(60):
    n = rng.randint(8, 14)
    labels = [rng.randint(0, 4) for _ in range(n)]
    if max(labels) == 0:
        labels[rng.randrange(n)] = rng.randint(1, 4)
    qid = f"q{i:03d}"
    queries[qid] = QueryDocs(
        qid=qid,
        docs=[
            DocEntry(
                label=g,
                doc_id=f"{qid}-d{j}",
                features=((1, rng.random()), (2, g + rng.gauss(0, 1.5))),
            )
            for j, g in enumerate(labels)
        ],
    )
corpus = Corpus(scale=GradeScale(g_max=4), queries=queries)

# Five systems of varying quality: the ideal reordering, a noisy-signal
# feature, a pure-noise feature, and two random shufflers.
configs = [
    RankerConfig(policy="ideal", tag="oracle"),
    RankerConfig(policy="feature", tag="signal", feature_id=2),
    RankerConfig(policy="feature", tag="noise", feature_id=1),
    RankerConfig(policy="random", tag="shuffleA", seed=1),
    RankerConfig(policy="random", tag="shuffleB", seed=2),
]
runs = {c.tag: generate_run(corpus, c) for c in configs}

# ----------------------------------------------------------------------
# One pass builds all three variants over shared bounds: raw dcg,
# upper-normalized (ndcg), and v2.
# ----------------------------------------------------------------------

spec = MetricSpec(metric="dcg", k=10, scale=corpus.scale)
ks = [5, 10]
matrices = build_score_matrices(corpus, runs, spec, ["none", "upper", "v2"], ks)

rankings = {v: rank_methods(matrices[v]) for v in matrices}
for v, r in rankings.items():
    ordered = ", ".join(f"{m}={r.scores[m]:.4f}" for m in r.methods)
    print(f"{v:5} leaderboard: {ordered}")

# ----------------------------------------------------------------------
# Agreement between the upper and v2 leaderboards.
# ----------------------------------------------------------------------

tau = kendall_tau(rankings["upper"], rankings["v2"])
swaps = swap_rate(rankings["upper"], rankings["v2"])
print(f"\nupper vs v2: kendall tau {tau:.4f}, swap rate {swaps:.4f}")

# ----------------------------------------------------------------------
# How spread out the systems look depends on the variant.  PAD is the
# mean percentage absolute difference over the 10 system pairs.
# ----------------------------------------------------------------------

for v, r in rankings.items():
    rows = pad_pairs(r.scores)
    mean_pad = sum(row[2] for row in rows) / len(rows)
    flagged = sum(1 for row in rows if row[3])
    print(f"{v:5} PAD {mean_pad:8.2f}%  (degenerate pairs: {flagged})")

# ----------------------------------------------------------------------
# Significance: paired t-tests on every system pair at every cutoff,
# and the number of verdicts that flip between the two variants.
# ----------------------------------------------------------------------

for v in ("upper", "v2"):
    table = significance_table(matrices[v], alpha=0.05)
    print(f"{v:5} significant pairs by k: {table} of 10 per cutoff")

flips = count_conflicts(matrices["upper"], matrices["v2"], alpha=0.05)
print(f"verdict conflicts between upper and v2: {flips} of 20 comparisons")
