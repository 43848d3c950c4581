"""Comparative analysis across ranking methods.

Builds dense per-query score matrices (raw or normalized), then derives
the comparison artifacts: induced method rankings, Kendall tau, swap
rate, percentage absolute difference, paired significance tests with
conflict counting, and the uninformative/ideal query categorization.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.stats

from .bounds import (
    DEFAULT_PREFIX_LIMIT,
    closed_rlb_curve,
    exhaustive_curve,
    expected_upper_curve,
    iub_curve,
    montecarlo_curve,
)
from .dataset import Corpus
from .errors import CoverageError, UlbevalError
from .metrics import MetricSpec, metric_at_ks, ranked_labels
from .ranking import Ranking
from .ulnorm import EPS, VARIANTS, NormalizedScore, normalize_upper, normalize_v1, normalize_v2

ALL_VARIANTS = ("none",) + VARIANTS

_BOOT_CHUNK = 256


@dataclass(eq=False)
class ScoreMatrix:
    """Dense (method, qid, k) block of scores for one metric and variant."""

    metric: str
    variant: str
    methods: list[str]
    ks: list[int]
    qids: list[str]
    values: np.ndarray
    degenerate: np.ndarray
    clamped_rlb: int = 0

    def method_index(self, method: str) -> int:
        return self.methods.index(method)


@dataclass(eq=False)
class MethodRanking:
    """Methods ordered best-first by average score over queries and ks."""

    methods: list[str]
    scores: dict[str, float]


@dataclass(eq=False)
class QueryGapTable:
    """Per-query actual-minus-expected gaps, ascending by (gap, qid)."""

    entries: list[tuple[str, float]]


def _normalize_block(
    variant: str, raw: np.ndarray, iub_k: np.ndarray, rlb_k: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized normalization of a (methods, ks) block for one query.

    Mirrors the scalar ulnorm functions exactly (tests assert the
    equivalence); raw values may poke above iub by float noise, anything
    past the slack is a bounds bug and raises.
    """
    if np.any(raw > iub_k + EPS):
        raise UlbevalError("metric value exceeds its upper bound beyond slack")
    a = np.minimum(raw, iub_k)
    if variant == "none":
        return raw.copy(), np.zeros_like(raw, dtype=bool)
    if variant == "upper":
        degen = np.broadcast_to(iub_k == 0.0, a.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(degen, 0.0, a / np.where(iub_k == 0.0, 1.0, iub_k))
        return vals, degen.copy()
    if variant == "v1":
        degen = (iub_k == 0.0) | ((a == 0.0) & (rlb_k == 0.0))
        denom_u = np.where(iub_k == 0.0, 1.0, iub_k)
        denom_r = np.where(a + rlb_k == 0.0, 1.0, a + rlb_k)
        vals = np.where(degen, 0.0, (a / denom_u) * (a / denom_r))
        return vals, degen
    if variant == "v2":
        rlb = np.minimum(rlb_k, iub_k)
        degen = np.broadcast_to(iub_k - rlb <= EPS, a.shape)
        gap = np.where(iub_k - rlb <= EPS, 1.0, iub_k - rlb)
        lower = np.where(rlb == 0.0, 1.0, rlb)
        # np.where evaluates the branch not taken as well; a tiny rlb can
        # overflow there before being discarded
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            vals = np.where(a >= rlb, (a - rlb) / gap, (a - rlb) / lower)
        vals = np.where(degen, 0.0, vals)
        return vals, degen.copy()
    raise UlbevalError(f"unknown variant {variant!r}")


def _query_rlb(
    spec: MetricSpec,
    q,
    ks: Sequence[int],
    mode: str,
    mc_samples: int,
    seed: int,
    limit: int,
) -> tuple[np.ndarray, int]:
    """(rlb at each k, clamp count) for one query under the given mode."""
    if mode == "closed":
        rlb = closed_rlb_curve(spec, q, ks)
    elif mode == "exhaustive":
        curve = exhaustive_curve(spec, q, max_k=max(ks), limit=limit)
        idx = np.minimum(np.asarray(ks, dtype=np.int64), len(curve)) - 1
        rlb = curve[idx]
    elif mode == "montecarlo":
        rlb, _stderr = montecarlo_curve(spec, q, ks, mc_samples, seed)
    else:
        raise UlbevalError(f"unknown bound mode {mode!r}")
    upper = iub_curve(spec, q, ks)
    clamped = int(np.sum(rlb > upper))
    return np.minimum(rlb, upper), clamped


def _chunked_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def check_coverage(corpus: Corpus, runs: Mapping[str, Mapping[str, Ranking]]) -> None:
    """Every run must cover every corpus query."""
    qids = corpus.qids()
    for method in sorted(runs):
        missing = [qid for qid in qids if qid not in runs[method]]
        if missing:
            shown = ", ".join(missing[:5])
            more = f" (+{len(missing) - 5} more)" if len(missing) > 5 else ""
            raise CoverageError(f"run {method!r} is missing queries: {shown}{more}")


def build_score_matrices(
    corpus: Corpus,
    runs: Mapping[str, Mapping[str, Ranking]],
    spec: MetricSpec,
    variants: Sequence[str],
    ks: Sequence[int],
    bound_mode: str = "closed",
    mc_samples: int = 100_000,
    seed: int = 0,
    limit: int = DEFAULT_PREFIX_LIMIT,
    threads: int = 1,
) -> dict[str, ScoreMatrix]:
    """One ScoreMatrix per requested variant, sharing bounds and raw scores.

    Per-query work (metric curves, bounds, normalization) runs on a
    worker pool; the reduce into the dense arrays is single-threaded in
    ascending qid order, so results do not depend on the thread count.
    """
    for v in variants:
        if v not in ALL_VARIANTS:
            raise UlbevalError(f"unknown variant {v!r}")
    ks = list(ks)
    if not ks or sorted(set(ks)) != ks:
        raise UlbevalError(f"cutoff list must be non-empty and strictly increasing: {ks}")
    check_coverage(corpus, runs)
    methods = sorted(runs)
    qids = corpus.qids()
    needs_rlb = any(v in ("v1", "v2") for v in variants)

    def eval_query(qid: str):
        q = corpus.queries[qid]
        iub_k = iub_curve(spec, q, ks)
        if needs_rlb:
            rlb_k, clamped = _query_rlb(spec, q, ks, bound_mode, mc_samples, seed, limit)
        else:
            rlb_k, clamped = np.zeros(len(ks)), 0
        raw = np.empty((len(methods), len(ks)), dtype=np.float64)
        for mi, method in enumerate(methods):
            labels = ranked_labels(runs[method][qid], q)
            raw[mi] = metric_at_ks(spec, labels, ks)
        blocks = {v: _normalize_block(v, raw, iub_k, rlb_k) for v in variants}
        return blocks, clamped

    results = _chunked_map(eval_query, qids, threads)

    out: dict[str, ScoreMatrix] = {}
    shape = (len(methods), len(qids), len(ks))
    for v in variants:
        out[v] = ScoreMatrix(
            metric=spec.metric,
            variant=v,
            methods=methods,
            ks=ks,
            qids=qids,
            values=np.empty(shape, dtype=np.float64),
            degenerate=np.zeros(shape, dtype=bool),
        )
    total_clamped = 0
    for qi, (blocks, clamped) in enumerate(results):
        total_clamped += clamped
        for v in variants:
            vals, degen = blocks[v]
            out[v].values[:, qi, :] = vals
            out[v].degenerate[:, qi, :] = degen
    for v in variants:
        out[v].clamped_rlb = total_clamped
    return out


def build_score_matrix(
    corpus: Corpus,
    runs: Mapping[str, Mapping[str, Ranking]],
    spec: MetricSpec,
    variant: str,
    ks: Sequence[int],
    **kwargs,
) -> ScoreMatrix:
    return build_score_matrices(corpus, runs, spec, [variant], ks, **kwargs)[variant]


def method_averages(matrix: ScoreMatrix) -> dict[str, float]:
    """Per-method mean over queries and cutoffs."""
    means = matrix.values.mean(axis=(1, 2))
    return {m: float(means[i]) for i, m in enumerate(matrix.methods)}


def rank_methods(matrix: ScoreMatrix) -> MethodRanking:
    """Best-first method ordering; score ties break by ascending method id."""
    scores = method_averages(matrix)
    ordered = sorted(scores, key=lambda m: (-scores[m], m))
    return MethodRanking(methods=ordered, scores=scores)


def _aligned_scores(r1: MethodRanking, r2: MethodRanking) -> tuple[np.ndarray, np.ndarray]:
    if set(r1.methods) != set(r2.methods):
        raise UlbevalError("method sets differ between the two rankings")
    methods = sorted(r1.methods)
    x = np.array([r1.scores[m] for m in methods])
    y = np.array([r2.scores[m] for m in methods])
    return x, y


def kendall_tau(r1: MethodRanking, r2: MethodRanking) -> float:
    """Tau-b between the score vectors underlying two method rankings.

    Tie-aware: tied averages (which the degenerate-to-0 conventions can
    produce) shrink the denominator instead of counting either way. A
    fully tied vector has no ordering information; 0.0 is returned.
    """
    x, y = _aligned_scores(r1, r2)
    if np.all(x == x[0]) or np.all(y == y[0]):
        return 0.0
    tau = scipy.stats.kendalltau(x, y, variant="b").statistic
    return float(tau)


def swap_rate(r1: MethodRanking, r2: MethodRanking) -> float:
    """Fraction of method pairs whose relative order flips."""
    x, y = _aligned_scores(r1, r2)
    m = len(x)
    if m < 2:
        raise UlbevalError("need at least 2 methods")
    discordant = 0
    for i in range(m):
        for j in range(i + 1, m):
            if (x[i] - x[j]) * (y[i] - y[j]) < 0:
                discordant += 1
    return discordant / math.comb(m, 2)


def pad_pairs(avg_scores: Mapping[str, float]) -> list[tuple[str, str, float, bool]]:
    """Percentage absolute difference per method pair.

    Normal pairs divide |x - y| by max(x, y). A pair whose max is <= 0
    (possible under v2) divides by |max| instead and is flagged
    degenerate; when the max is exactly 0 with a nonzero difference the
    denominator falls back to max(|x|, |y|) to stay finite. Two zeros
    contribute 0.
    """
    methods = sorted(avg_scores)
    if len(methods) < 2:
        raise UlbevalError("PAD needs at least 2 methods")
    rows = []
    for i, m1 in enumerate(methods):
        for m2 in methods[i + 1 :]:
            x, y = avg_scores[m1], avg_scores[m2]
            hi = max(x, y)
            if x == 0.0 and y == 0.0:
                rows.append((m1, m2, 0.0, False))
            elif hi > 0.0:
                rows.append((m1, m2, abs(x - y) / hi * 100.0, False))
            else:
                denom = abs(hi) if hi != 0.0 else max(abs(x), abs(y))
                rows.append((m1, m2, abs(x - y) / denom * 100.0, True))
    return rows


def pad(avg_scores: Mapping[str, float]) -> float:
    """Mean percentage absolute difference over all method pairs."""
    rows = pad_pairs(avg_scores)
    return float(np.mean([r[2] for r in rows]))


def _paired_diffs(x, y) -> np.ndarray:
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise UlbevalError("paired samples must be 1-d and equal length")
    if len(xa) < 2:
        raise UlbevalError("paired tests need at least 2 observations")
    return xa - ya


def paired_ttest(x, y) -> float:
    """Two-sided paired t-test p-value on x - y.

    Zero-variance differences are a convention corner: identical samples
    give p = 1, a constant nonzero shift gives p = 0.
    """
    d = _paired_diffs(x, y)
    sd = d.std(ddof=1)
    if sd == 0.0:
        return 1.0 if d.mean() == 0.0 else 0.0
    t = d.mean() / (sd / math.sqrt(len(d)))
    return float(2.0 * scipy.stats.t.sf(abs(t), len(d) - 1))


def bootstrap_test(x, y, b: int = 1000, seed: int = 0) -> float:
    """Studentised paired bootstrap p-value.

    Resamples the centered differences b times with replacement and
    compares the observed t statistic against the resampled null t
    distribution. Deterministic given seed. Samples with zero variance
    short-circuit to the paired_ttest conventions.
    """
    if b < 100:
        raise UlbevalError(f"bootstrap needs b >= 100, got {b}")
    d = _paired_diffs(x, y)
    n = len(d)
    sd = d.std(ddof=1)
    if sd == 0.0:
        return 1.0 if d.mean() == 0.0 else 0.0
    t_obs = abs(d.mean() / (sd / math.sqrt(n)))
    centered = d - d.mean()
    rng = np.random.default_rng(seed)
    exceed = 0
    done = 0
    while done < b:
        chunk = min(_BOOT_CHUNK, b - done)
        idx = rng.integers(0, n, size=(chunk, n))
        s = centered[idx]
        means = s.mean(axis=1)
        sds = s.std(axis=1, ddof=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_star = np.abs(means / (sds / math.sqrt(n)))
        # a monochrome resample has sd 0: t is 0 for a zero mean,
        # unbounded otherwise (counts as exceeding any observed t)
        t_star = np.where(sds == 0.0, np.where(means == 0.0, 0.0, np.inf), t_star)
        exceed += int(np.sum(t_star >= t_obs))
        done += chunk
    return exceed / b


def count_significant_pairs(
    matrix: ScoreMatrix, alpha: float = 0.05, test: Callable = paired_ttest
) -> int:
    """Comparisons (method pair x cutoff) with p below alpha."""
    m = len(matrix.methods)
    if m < 2:
        raise UlbevalError("need at least 2 methods")
    count = 0
    for ki in range(len(matrix.ks)):
        for i in range(m):
            for j in range(i + 1, m):
                p = test(matrix.values[i, :, ki], matrix.values[j, :, ki])
                if p < alpha:
                    count += 1
    return count


def significance_table(
    matrix: ScoreMatrix, alpha: float = 0.05, test: Callable = paired_ttest
) -> dict[int, int]:
    """Significant-pair count per cutoff k."""
    m = len(matrix.methods)
    if m < 2:
        raise UlbevalError("need at least 2 methods")
    out: dict[int, int] = {}
    for ki, k in enumerate(matrix.ks):
        c = 0
        for i in range(m):
            for j in range(i + 1, m):
                if test(matrix.values[i, :, ki], matrix.values[j, :, ki]) < alpha:
                    c += 1
        out[k] = c
    return out


def count_conflicts(
    matrix_a: ScoreMatrix,
    matrix_b: ScoreMatrix,
    alpha: float = 0.05,
    test: Callable = paired_ttest,
) -> int:
    """Comparisons where exactly one of the two matrices finds significance."""
    if (
        matrix_a.methods != matrix_b.methods
        or matrix_a.qids != matrix_b.qids
        or matrix_a.ks != matrix_b.ks
    ):
        raise UlbevalError("matrices must share methods, qids and ks")
    m = len(matrix_a.methods)
    conflicts = 0
    for ki in range(len(matrix_a.ks)):
        for i in range(m):
            for j in range(i + 1, m):
                sig_a = test(matrix_a.values[i, :, ki], matrix_a.values[j, :, ki]) < alpha
                sig_b = test(matrix_b.values[i, :, ki], matrix_b.values[j, :, ki]) < alpha
                if sig_a != sig_b:
                    conflicts += 1
    return conflicts


def build_query_gap_table(
    corpus: Corpus,
    runs: Mapping[str, Mapping[str, Ranking]],
    spec: MetricSpec,
    ks: Sequence[int],
    threads: int = 1,
) -> QueryGapTable:
    """Actual-vs-expected gap per query.

    gap(q) = mean over methods and ks of the upper-normalized metric,
    minus the expected upper-normalized value of a random ranking
    (closed-form rlb / iub, averaged over ks). Small gaps mark queries
    where methods barely beat random; large gaps mark queries where the
    ranking signal is strong.
    """
    matrix = build_score_matrix(corpus, runs, spec, "upper", ks, threads=threads)

    def expected_mean(qid: str) -> float:
        return float(expected_upper_curve(spec, corpus.queries[qid], ks).mean())

    expected = _chunked_map(expected_mean, matrix.qids, threads)
    actual = matrix.values.mean(axis=(0, 2))
    entries = [
        (qid, float(actual[i] - expected[i])) for i, qid in enumerate(matrix.qids)
    ]
    entries.sort(key=lambda e: (e[1], e[0]))
    return QueryGapTable(entries=entries)


def categorize_queries(
    gaps: QueryGapTable, top_n: int
) -> tuple[list[str], list[str]]:
    """Split off the top_n smallest-gap and top_n largest-gap queries.

    Operates on the table's canonical ascending (gap, qid) order:
    uninformative is the first top_n qids, ideal the last top_n
    (largest gap first). The two slices cannot overlap because top_n is
    capped at half the query count.
    """
    n = len(gaps.entries)
    if top_n < 0 or top_n > n // 2:
        raise UlbevalError(f"top_n {top_n} must be between 0 and |Q|/2 = {n // 2}")
    uninformative = [qid for qid, _ in gaps.entries[:top_n]]
    ideal = [qid for qid, _ in gaps.entries[n - top_n :]][::-1]
    return uninformative, ideal
