"""Per-query metric bounds: ideal upper bound and randomized lower bound.

The ideal upper bound (iub) is the metric evaluated on the perfect
label-descending ranking. The randomized lower bound (rlb) is the
expected metric under a uniformly random permutation of the query's
documents, available three ways:

* closed forms, computed from the label histogram alone. The DCG form
  is exact (the metric is linear in per-position gains). The SP and ERR
  forms carry independence assumptions and are generally biased; they
  are implemented exactly as stated so the bias can be measured, not
  hidden.
* an exhaustive oracle that enumerates distinct label prefixes of the
  first min(k, n) positions with their multinomial probabilities. Exact,
  guarded by a configurable tractability limit on the number of
  distinct prefixes.
* a Monte Carlo oracle over seeded random rankings, for queries the
  guard rejects.

Closed forms, with n_j the count of grade j, n the total, e_gain the
mean of 2^R - 1, p the mean cascade stop probability, and p_rel the
fraction of relevant documents:

    E[DCG@k] = e_gain * sum_{i<=min(k,n)} 1/log_b(i+1)
    E[SP@k]  = min(k, n) * p_rel^2
    E[ERR@k] = sum_{r<=min(k,n)} (1/r) * (1-p)^{r-1} * p
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import GradeScale, LabelHistogram, QueryDocs, binarize, histogram
from .errors import TractabilityError, UlbevalError
from .metrics import (
    MetricSpec,
    discounts,
    err_probability,
    metric_at_ks,
    metric_rows,
    metric_rows_prefix,
    ranked_labels,
)
from .ranking import derive_seed, ideal_ranking

DEFAULT_PREFIX_LIMIT = 10**6
_MC_CHUNK = 16384


@dataclass(frozen=True)
class BoundSet:
    iub: float
    rlb: float
    rlb_method: str
    mc_stderr: float | None = None


@dataclass(frozen=True)
class ExpectedGainStats:
    """Histogram-level expectations reused by every closed form."""

    e_gain: float
    e_prob: float
    e_one_minus_prob: float
    p_rel: float


def expected_gain_stats(
    h: LabelHistogram, scale: GradeScale, threshold: int = 0, err_map: str = "gain"
) -> ExpectedGainStats:
    if h.n < 1:
        raise UlbevalError("histogram is empty")
    e_gain = sum((2**j - 1) * c for j, c in enumerate(h.counts)) / h.n
    e_prob = sum(err_probability(j, scale.g_max, err_map) * c for j, c in enumerate(h.counts)) / h.n
    pos = binarize(h, threshold)
    return ExpectedGainStats(
        e_gain=float(e_gain),
        e_prob=float(e_prob),
        e_one_minus_prob=float(1.0 - e_prob),
        p_rel=pos.n_pos / h.n,
    )


def _scale_for(q: QueryDocs, scale: GradeScale | None) -> GradeScale:
    if scale is not None:
        return scale
    return GradeScale(max(1, int(q.labels.max(initial=0))))


def iub(spec: MetricSpec, q: QueryDocs) -> float:
    """Metric value on the ideal ranking of q."""
    return float(iub_curve(spec, q, [spec.k])[0])


def iub_curve(spec: MetricSpec, q: QueryDocs, ks) -> np.ndarray:
    labels = ranked_labels(ideal_ranking(q), q)
    return metric_at_ks(spec, labels, ks)


def rlb_dcg_closed(
    q: QueryDocs, k: int, log_base: float = 2.0, scale: GradeScale | None = None
) -> float:
    """Exact expected DCG@k under random ranking (linearity of expectation)."""
    scale = _scale_for(q, scale)
    stats = expected_gain_stats(histogram(q, scale), scale)
    eff_k = min(k, len(q))
    return stats.e_gain * float(discounts(eff_k, log_base).sum())


def rlb_sp_closed(q: QueryDocs, k: int, threshold: int = 0) -> float:
    """Approximate expected SP@k: min(k, n) * p_rel^2.

    Treats Prec(i) and the relevance at position i as independent, which
    uniform permutations violate; compare against rlb_exhaustive to see
    the bias.
    """
    scale = _scale_for(q, None)
    stats = expected_gain_stats(histogram(q, scale), scale, threshold)
    return min(k, len(q)) * stats.p_rel**2


def rlb_err_closed(
    q: QueryDocs, k: int, scale: GradeScale | None = None, err_map: str = "gain"
) -> float:
    """Approximate expected ERR@k treating positions as independent draws."""
    scale = _scale_for(q, scale)
    stats = expected_gain_stats(histogram(q, scale), scale, err_map=err_map)
    eff_k = min(k, len(q))
    r = np.arange(1, eff_k + 1, dtype=np.float64)
    return float(np.sum(stats.e_one_minus_prob ** (r - 1) * stats.e_prob / r))


def closed_rlb_curve(spec: MetricSpec, q: QueryDocs, ks) -> np.ndarray:
    """Closed-form rlb of spec's metric at each cutoff in ks."""
    scale = _scale_for(q, spec.scale)
    stats = expected_gain_stats(histogram(q, scale), scale, spec.threshold, spec.err_map)
    n = len(q)
    eff = np.minimum(np.asarray(ks, dtype=np.int64), n)
    if spec.metric == "dcg":
        disc_cum = np.cumsum(discounts(int(eff.max()), spec.log_base))
        return stats.e_gain * disc_cum[eff - 1]
    if spec.metric == "sp":
        return eff * stats.p_rel**2
    r = np.arange(1, int(eff.max()) + 1, dtype=np.float64)
    terms_cum = np.cumsum(stats.e_one_minus_prob ** (r - 1) * stats.e_prob / r)
    return terms_cum[eff - 1]


def distinct_prefix_count(counts, m: int) -> int:
    """Number of distinct length-m label sequences drawable from counts.

    Memoized recursion over remaining-count vectors; the state space is
    bounded by the number of sub-multisets of size <= m, far below the
    sequence count itself.
    """
    counts = tuple(int(c) for c in counts)
    if m < 0 or m > sum(counts):
        return 0
    memo: dict[tuple[int, tuple[int, ...]], int] = {}

    def rec(left: int, state: tuple[int, ...]) -> int:
        if left == 0:
            return 1
        key = (left, state)
        got = memo.get(key)
        if got is not None:
            return got
        total = 0
        for g, c in enumerate(state):
            if c:
                total += rec(left - 1, state[:g] + (c - 1,) + state[g + 1 :])
        memo[key] = total
        return total

    return rec(m, counts)


def exhaustive_curve(
    spec: MetricSpec,
    q: QueryDocs,
    max_k: int | None = None,
    limit: int = DEFAULT_PREFIX_LIMIT,
) -> np.ndarray:
    """Exact E[metric@d] for every depth d = 1..min(max_k, n).

    One depth-first walk over distinct label prefixes accumulates all
    depths at once, weighting each prefix by its probability under a
    uniform random permutation.

    Raises:
        TractabilityError: when the distinct-prefix count at the deepest
            requested depth exceeds `limit`; use rlb_montecarlo instead.
    """
    n = len(q)
    m = min(max_k if max_k is not None else spec.k, n)
    h = histogram(q, _scale_for(q, spec.scale))
    count = distinct_prefix_count(h.counts, m)
    if count > limit:
        raise TractabilityError(
            f"query {q.qid}: {count} distinct {m}-prefixes exceed the limit {limit}; "
            "use the Monte Carlo oracle"
        )

    grades = [g for g, c in enumerate(h.counts) if c]
    counts = {g: h.counts[g] for g in grades}
    out = np.zeros(m, dtype=np.float64)

    if spec.metric == "dcg":
        disc = discounts(m, spec.log_base)
        gain = {g: float(2**g - 1) for g in grades}

        def walk(depth: int, left: int, prob: float, value: float) -> None:
            for g in grades:
                c = counts[g]
                if not c:
                    continue
                p = prob * c / left
                v = value + gain[g] * disc[depth]
                out[depth] += p * v
                if depth + 1 < m:
                    counts[g] = c - 1
                    walk(depth + 1, left - 1, p, v)
                    counts[g] = c

        walk(0, n, 1.0, 0.0)
    elif spec.metric == "sp":
        rel = {g: g > spec.threshold for g in grades}

        def walk(depth: int, left: int, prob: float, value: float, hits: int) -> None:
            for g in grades:
                c = counts[g]
                if not c:
                    continue
                p = prob * c / left
                if rel[g]:
                    h2 = hits + 1
                    v = value + h2 / (depth + 1)
                else:
                    h2 = hits
                    v = value
                out[depth] += p * v
                if depth + 1 < m:
                    counts[g] = c - 1
                    walk(depth + 1, left - 1, p, v, h2)
                    counts[g] = c

        walk(0, n, 1.0, 0.0, 0)
    else:
        scale = _scale_for(q, spec.scale)
        stop = {g: err_probability(g, scale.g_max, spec.err_map) for g in grades}

        def walk(depth: int, left: int, prob: float, value: float, cont: float) -> None:
            for g in grades:
                c = counts[g]
                if not c:
                    continue
                p = prob * c / left
                v = value + cont * stop[g] / (depth + 1)
                out[depth] += p * v
                if depth + 1 < m:
                    counts[g] = c - 1
                    walk(depth + 1, left - 1, p, v, cont * (1.0 - stop[g]))
                    counts[g] = c

        walk(0, n, 1.0, 0.0, 1.0)

    return out


def rlb_exhaustive(
    spec: MetricSpec, q: QueryDocs, limit: int = DEFAULT_PREFIX_LIMIT
) -> float:
    """Exact expected metric at spec.k via prefix enumeration."""
    curve = exhaustive_curve(spec, q, limit=limit)
    return float(curve[-1])


def rlb_montecarlo(
    spec: MetricSpec, q: QueryDocs, samples: int, seed: int
) -> tuple[float, float]:
    """Sample mean and standard error over seeded random rankings.

    Deterministic for a given (q, samples, seed): one generator derived
    from the qid drives every draw, consumed in fixed-size chunks.
    """
    if samples < 2:
        raise UlbevalError(f"need at least 2 samples, got {samples}")
    n = len(q)
    m = min(spec.k, n)
    labels = q.labels
    rng = np.random.default_rng(derive_seed(seed, q.qid))
    values = np.empty(samples, dtype=np.float64)
    done = 0
    base = np.arange(n, dtype=np.int64)
    while done < samples:
        chunk = min(_MC_CHUNK, samples - done)
        idx = np.tile(base, (chunk, 1))
        rng.permuted(idx, axis=1, out=idx)
        values[done : done + chunk] = metric_rows(spec, labels[idx[:, :m]])
        done += chunk
    est = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(samples))
    return est, stderr


def montecarlo_curve(
    spec: MetricSpec, q: QueryDocs, ks, samples: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo rlb estimates and standard errors at several cutoffs.

    Each sampled permutation is evaluated at every cutoff, so the
    estimates across ks share draws. Uses the same seed derivation and
    chunk schedule as rlb_montecarlo, hence the same permutations; only
    float summation order may differ between the two entry points.
    """
    if samples < 2:
        raise UlbevalError(f"need at least 2 samples, got {samples}")
    n = len(q)
    ks_arr = np.asarray(ks, dtype=np.int64)
    idx_k = np.minimum(ks_arr, n) - 1
    m = int(idx_k.max()) + 1
    labels = q.labels
    rng = np.random.default_rng(derive_seed(seed, q.qid))
    values = np.empty((samples, len(ks_arr)), dtype=np.float64)
    done = 0
    base = np.arange(n, dtype=np.int64)
    while done < samples:
        chunk = min(_MC_CHUNK, samples - done)
        idx = np.tile(base, (chunk, 1))
        rng.permuted(idx, axis=1, out=idx)
        curves = metric_rows_prefix(spec, labels[idx[:, :m]])
        values[done : done + chunk] = curves[:, idx_k]
        done += chunk
    est = values.mean(axis=0)
    stderr = values.std(axis=0, ddof=1) / np.sqrt(samples)
    return est, stderr


def compute_bounds(
    spec: MetricSpec,
    q: QueryDocs,
    mode: str = "closed",
    mc_samples: int = 100_000,
    seed: int = 0,
    limit: int = DEFAULT_PREFIX_LIMIT,
) -> BoundSet:
    """iub plus rlb by the requested mode, as one record."""
    upper = iub(spec, q)
    if mode == "closed":
        if spec.metric == "dcg":
            rlb = rlb_dcg_closed(q, spec.k, spec.log_base, spec.scale)
        elif spec.metric == "sp":
            rlb = rlb_sp_closed(q, spec.k, spec.threshold)
        else:
            rlb = rlb_err_closed(q, spec.k, spec.scale, spec.err_map)
        return BoundSet(iub=upper, rlb=rlb, rlb_method="closed")
    if mode == "exhaustive":
        return BoundSet(iub=upper, rlb=rlb_exhaustive(spec, q, limit), rlb_method="exhaustive")
    if mode == "montecarlo":
        est, stderr = rlb_montecarlo(spec, q, mc_samples, seed)
        return BoundSet(iub=upper, rlb=est, rlb_method="montecarlo", mc_stderr=stderr)
    raise UlbevalError(f"unknown bound mode {mode!r}")


def expected_upper_curve(spec: MetricSpec, q: QueryDocs, ks) -> np.ndarray:
    """Closed-form rlb divided by iub at each cutoff (0 where iub is 0).

    This is the expected upper-normalized score of a random ranking, the
    quantity query categorization and the expectation histogram use.
    """
    upper = iub_curve(spec, q, ks)
    lower = closed_rlb_curve(spec, q, ks)
    out = np.zeros(len(upper), dtype=np.float64)
    nz = upper > 0
    out[nz] = lower[nz] / upper[nz]
    return out
