"""Raw ranking metrics at cutoff k: DCG/nDCG, SP/AP, ERR/nERR.

Definitions, with R_i the label at ranked position i and sums truncated
at min(k, n):

    DCG@k  = sum_i (2^{R_i} - 1) / log_b(i + 1)
    nDCG@k = DCG@k / DCG@k(ideal ranking), 0 when the ideal DCG is 0
    SP@k   = sum_i Prec(i) * rel_i           (rel_i = R_i > threshold)
    AP@k   = SP@k / k                        (divisor stays k when n < k)
    ERR@k  = sum_r (1/r) * prod_{i<r}(1 - p_i) * p_r
    nERR@k = ERR@k / ERR@k(ideal ranking), 0 when the ideal ERR is 0

where p is the cascade stop probability of a grade, by default
(2^g - 1) / 2^{g_max}.

Scalar functions return a MetricValue; the *_prefix helpers return the
whole value-by-depth curve for one ranked label vector and are the fast
path used by bounds computation and the CLI.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace

import numpy as np

from .dataset import GradeScale, QueryDocs
from .errors import UlbevalError
from .ranking import Ranking, ideal_ranking

METRICS = ("dcg", "sp", "err")
ERR_MAPS = ("gain", "identity")


@dataclass(frozen=True)
class MetricSpec:
    """Everything needed to evaluate one raw metric at one cutoff.

    log_base applies to dcg only, threshold to sp only, and scale plus
    err_map to err only; unrelated fields are ignored by the other
    metrics so one spec can be reused across a family sweep.
    """

    metric: str
    k: int
    log_base: float = 2.0
    threshold: int = 0
    scale: GradeScale | None = None
    err_map: str = "gain"

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise UlbevalError(f"unknown metric {self.metric!r}, expected one of {METRICS}")
        if self.k < 1:
            raise UlbevalError(f"cutoff k must be >= 1, got {self.k}")
        if self.log_base <= 1.0:
            raise UlbevalError(f"log base must be > 1, got {self.log_base}")
        if self.err_map not in ERR_MAPS:
            raise UlbevalError(f"unknown err_map {self.err_map!r}")
        if self.metric == "err":
            if self.scale is None:
                raise UlbevalError("err requires a GradeScale")
            if self.err_map == "identity" and self.scale.g_max != 1:
                raise UlbevalError("err_map='identity' is only valid for g_max=1")

    def at_k(self, k: int) -> "MetricSpec":
        return replace(self, k=k)


@dataclass(frozen=True)
class MetricValue:
    value: float
    effective_k: int


@functools.lru_cache(maxsize=128)
def discounts(n: int, log_base: float) -> np.ndarray:
    """1 / log_b(i + 1) for positions i = 1..n, cached and read-only."""
    d = 1.0 / (np.log(np.arange(2, n + 2, dtype=np.float64)) / np.log(log_base))
    d.setflags(write=False)
    return d


def err_probability(g: int, g_max: int, mapping: str = "gain") -> float:
    """Cascade stop probability for a grade.

    The default map is (2^g - 1) / 2^{g_max}. The alternate 'identity'
    map uses the raw label and is accepted only for g_max = 1, where a
    probability reading of the label is coherent.
    """
    if not 0 <= g <= g_max:
        raise UlbevalError(f"grade {g} outside 0..{g_max}")
    if mapping == "gain":
        return float(2**g - 1) / float(2**g_max)
    if mapping == "identity":
        if g_max != 1:
            raise UlbevalError("err_map='identity' is only valid for g_max=1")
        return float(g)
    raise UlbevalError(f"unknown err_map {mapping!r}")


def ranked_labels(ranking: Ranking, q: QueryDocs) -> np.ndarray:
    ranking.validate(len(q))
    return q.labels[ranking.order]


def _err_probs(labels: np.ndarray, scale: GradeScale, mapping: str) -> np.ndarray:
    if mapping == "identity":
        if scale.g_max != 1:
            raise UlbevalError("err_map='identity' is only valid for g_max=1")
        return labels.astype(np.float64)
    return (np.exp2(labels.astype(np.float64)) - 1.0) / float(2**scale.g_max)


def dcg_prefix(labels_in_rank_order: np.ndarray, log_base: float = 2.0) -> np.ndarray:
    """DCG@d for every depth d = 1..n of one ranked label vector."""
    gains = np.exp2(labels_in_rank_order.astype(np.float64)) - 1.0
    return np.cumsum(gains * discounts(len(gains), log_base))


def sp_prefix(labels_in_rank_order: np.ndarray, threshold: int = 0) -> np.ndarray:
    """SP@d for every depth d."""
    rel = (labels_in_rank_order > threshold).astype(np.float64)
    hits = np.cumsum(rel)
    prec = hits / np.arange(1, len(rel) + 1, dtype=np.float64)
    return np.cumsum(prec * rel)


def err_prefix(
    labels_in_rank_order: np.ndarray, scale: GradeScale, mapping: str = "gain"
) -> np.ndarray:
    """ERR@d for every depth d."""
    p = _err_probs(labels_in_rank_order, scale, mapping)
    cont = np.cumprod(1.0 - p)
    stop_before = np.empty_like(cont)
    stop_before[0] = 1.0
    stop_before[1:] = cont[:-1]
    terms = stop_before * p / np.arange(1, len(p) + 1, dtype=np.float64)
    return np.cumsum(terms)


def metric_prefix(spec: MetricSpec, labels_in_rank_order: np.ndarray) -> np.ndarray:
    """Value-by-depth curve for spec's metric (cutoff field unused)."""
    if spec.metric == "dcg":
        return dcg_prefix(labels_in_rank_order, spec.log_base)
    if spec.metric == "sp":
        return sp_prefix(labels_in_rank_order, spec.threshold)
    return err_prefix(labels_in_rank_order, spec.scale, spec.err_map)


def metric_at_ks(spec: MetricSpec, labels_in_rank_order: np.ndarray, ks) -> np.ndarray:
    """Metric at each cutoff in ks (truncated at n), via one prefix pass."""
    curve = metric_prefix(spec, labels_in_rank_order)
    n = len(curve)
    idx = np.minimum(np.asarray(ks, dtype=np.int64), n) - 1
    return curve[idx]


def evaluate(spec: MetricSpec, ranking: Ranking, q: QueryDocs) -> MetricValue:
    """Raw metric of spec on one ranking."""
    labels = ranked_labels(ranking, q)
    eff_k = min(spec.k, len(labels))
    curve = metric_prefix(spec, labels[: eff_k])
    return MetricValue(value=float(curve[eff_k - 1]), effective_k=eff_k)


def dcg_at_k(ranking: Ranking, labels, k: int, log_base: float = 2.0) -> MetricValue:
    arr = np.asarray(labels, dtype=np.int64)
    ranking.validate(len(arr))
    ranked = arr[ranking.order]
    eff_k = min(k, len(arr))
    if k < 1:
        raise UlbevalError(f"cutoff k must be >= 1, got {k}")
    value = float(dcg_prefix(ranked[:eff_k], log_base)[eff_k - 1])
    return MetricValue(value=value, effective_k=eff_k)


def ndcg_at_k(ranking: Ranking, q: QueryDocs, k: int, log_base: float = 2.0) -> MetricValue:
    actual = dcg_at_k(ranking, q.labels, k, log_base)
    ideal = dcg_at_k(ideal_ranking(q), q.labels, k, log_base)
    if ideal.value == 0.0:
        return MetricValue(value=0.0, effective_k=actual.effective_k)
    return MetricValue(value=actual.value / ideal.value, effective_k=actual.effective_k)


def sp_at_k(ranking: Ranking, q: QueryDocs, k: int, threshold: int = 0) -> MetricValue:
    spec = MetricSpec(metric="sp", k=k, threshold=threshold)
    return evaluate(spec, ranking, q)


def ap_at_k(ranking: Ranking, q: QueryDocs, k: int, threshold: int = 0) -> MetricValue:
    """SP@k / k. The divisor is k even when the query has fewer docs."""
    sp = sp_at_k(ranking, q, k, threshold)
    return MetricValue(value=sp.value / k, effective_k=sp.effective_k)


def err_at_k(
    ranking: Ranking, q: QueryDocs, k: int, scale: GradeScale, err_map: str = "gain"
) -> MetricValue:
    spec = MetricSpec(metric="err", k=k, scale=scale, err_map=err_map)
    return evaluate(spec, ranking, q)


def nerr_at_k(
    ranking: Ranking, q: QueryDocs, k: int, scale: GradeScale, err_map: str = "gain"
) -> MetricValue:
    actual = err_at_k(ranking, q, k, scale, err_map)
    ideal = err_at_k(ideal_ranking(q), q, k, scale, err_map)
    if ideal.value == 0.0:
        return MetricValue(value=0.0, effective_k=actual.effective_k)
    return MetricValue(value=actual.value / ideal.value, effective_k=actual.effective_k)


def aggregate_mean(values, degenerate=None, exclude_degenerate: bool = False) -> float:
    """Arithmetic mean over queries.

    Degenerate queries (where a division-by-zero convention produced 0)
    are included by default; pass their flag vector and
    exclude_degenerate=True to drop them.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise UlbevalError("cannot aggregate an empty value list")
    if exclude_degenerate:
        if degenerate is None:
            raise UlbevalError("exclude_degenerate requires the degenerate flags")
        mask = ~np.asarray(degenerate, dtype=bool)
        if not mask.any():
            raise UlbevalError("all values are degenerate, nothing to aggregate")
        arr = arr[mask]
    return float(arr.mean())


# Row-wise evaluators over a matrix of ranked label prefixes, one row per
# sampled ranking. These back the Monte Carlo oracle.

def dcg_rows(ranked: np.ndarray, log_base: float) -> np.ndarray:
    gains = np.exp2(ranked.astype(np.float64)) - 1.0
    return gains @ discounts(ranked.shape[1], log_base)


def sp_rows(ranked: np.ndarray, threshold: int) -> np.ndarray:
    rel = (ranked > threshold).astype(np.float64)
    hits = np.cumsum(rel, axis=1)
    prec = hits / np.arange(1, ranked.shape[1] + 1, dtype=np.float64)
    return (prec * rel).sum(axis=1)


def err_rows(ranked: np.ndarray, scale: GradeScale, mapping: str) -> np.ndarray:
    m = ranked.shape[1]
    if mapping == "identity":
        p = ranked.astype(np.float64)
    else:
        p = (np.exp2(ranked.astype(np.float64)) - 1.0) / float(2**scale.g_max)
    cont = np.cumprod(1.0 - p, axis=1)
    stop_before = np.empty_like(cont)
    stop_before[:, 0] = 1.0
    stop_before[:, 1:] = cont[:, :-1]
    terms = stop_before * p / np.arange(1, m + 1, dtype=np.float64)
    return terms.sum(axis=1)


def metric_rows(spec: MetricSpec, ranked: np.ndarray) -> np.ndarray:
    if spec.metric == "dcg":
        return dcg_rows(ranked, spec.log_base)
    if spec.metric == "sp":
        return sp_rows(ranked, spec.threshold)
    return err_rows(ranked, spec.scale, spec.err_map)


def metric_rows_prefix(spec: MetricSpec, ranked: np.ndarray) -> np.ndarray:
    """Per-row value-by-depth curves: element [s, d] is the metric of row
    s truncated at depth d + 1."""
    m = ranked.shape[1]
    if spec.metric == "dcg":
        gains = np.exp2(ranked.astype(np.float64)) - 1.0
        return np.cumsum(gains * discounts(m, spec.log_base), axis=1)
    if spec.metric == "sp":
        rel = (ranked > spec.threshold).astype(np.float64)
        hits = np.cumsum(rel, axis=1)
        prec = hits / np.arange(1, m + 1, dtype=np.float64)
        return np.cumsum(prec * rel, axis=1)
    if spec.err_map == "identity":
        p = ranked.astype(np.float64)
    else:
        p = (np.exp2(ranked.astype(np.float64)) - 1.0) / float(2**spec.scale.g_max)
    cont = np.cumprod(1.0 - p, axis=1)
    stop_before = np.empty_like(cont)
    stop_before[:, 0] = 1.0
    stop_before[:, 1:] = cont[:, :-1]
    terms = stop_before * p / np.arange(1, m + 1, dtype=np.float64)
    return np.cumsum(terms, axis=1)
