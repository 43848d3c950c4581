"""
Expected-value lower bounds and their oracles
=============================================

The randomized lower bound rlb is the expected metric of a uniformly
random ranking.  There are three ways to get it: a closed form, an
exhaustive enumeration over distinct label prefixes, and Monte Carlo
sampling.  This script compares all three on one query and shows where
the closed forms are exact and where they carry a small bias.
"""

from ulbeval import (
    DocEntry,
    GradeScale,
    MetricSpec,
    QueryDocs,
    TractabilityError,
    compute_bounds,
    expected_gain_stats,
    histogram,
    iub,
    rlb_exhaustive,
)

# ----------------------------------------------------------------------
# A small query: grades [2, 1, 1, 0, 0] on a 0..2 scale, cutoff 3.
# ----------------------------------------------------------------------

labels = [2, 1, 1, 0, 0]
q = QueryDocs(
    qid="demo",
    docs=[DocEntry(label=g, doc_id=f"d{i}") for i, g in enumerate(labels)],
)
scale = GradeScale(g_max=2)
k = 3

stats = expected_gain_stats(histogram(q, scale), scale)
print(f"mean exponential gain per doc: {stats.e_gain:.6f}")
print(f"mean stop probability per doc: {stats.e_prob:.6f}")

# ----------------------------------------------------------------------
# For each metric family: ideal upper bound, closed-form rlb, exhaustive
# rlb (the exact expectation), and a Monte Carlo estimate.
# ----------------------------------------------------------------------

print(f"\n{'metric':6} {'iub':>10} {'closed':>10} {'exact':>10} {'mc':>10} {'bias':>11}")
for metric in ("dcg", "sp", "err"):
    spec = MetricSpec(metric=metric, k=k, scale=scale)
    upper = iub(spec, q)
    closed = compute_bounds(spec, q, mode="closed").rlb
    exact = rlb_exhaustive(spec, q)
    mc = compute_bounds(spec, q, mode="montecarlo", mc_samples=200_000, seed=7)
    print(
        f"{metric:6} {upper:10.6f} {closed:10.6f} {exact:10.6f}"
        f" {mc.rlb:10.6f} {closed - exact:11.2e}"
    )

# dcg's expectation is a sum of per-position terms, so its closed form
# is exact (bias at machine precision).  sp and err average interacting
# per-document quantities, so their closed forms approximate: the
# exhaustive column is the ground truth there, and the Monte Carlo
# column converges to it as samples grow.

# ----------------------------------------------------------------------
# The exhaustive oracle walks distinct label prefixes, not individual
# permutations, so queries with few distinct grades stay cheap even at
# moderate length.  It still refuses genuinely intractable inputs.
# ----------------------------------------------------------------------

wide_labels = list(range(5)) * 6  # 30 docs, all five grades six times
wide = QueryDocs(
    qid="wide",
    docs=[DocEntry(label=g, doc_id=f"w{i}") for i, g in enumerate(wide_labels)],
)
spec = MetricSpec(metric="err", k=10, scale=GradeScale(g_max=4))
try:
    rlb_exhaustive(spec, wide)
except TractabilityError as exc:
    print(f"\nintractable query refused: {exc}")

# Monte Carlo has no such limit; it just takes samples.
mc = compute_bounds(spec, wide, mode="montecarlo", mc_samples=50_000, seed=11)
print(f"monte carlo handles it anyway: rlb={mc.rlb:.6f} (se={mc.mc_stderr:.2e})")
