"""Ranking evaluation with ideal upper and randomized lower bounds.

The package splits into dataset/ranking plumbing, classical metrics,
expected-value bounds with two verification oracles, the joint
normalization variants, and comparison statistics. The CLI in
`ulbeval.cli` ties the pieces into report files.
"""

from .bounds import (
    BoundSet,
    compute_bounds,
    closed_rlb_curve,
    exhaustive_curve,
    expected_gain_stats,
    expected_upper_curve,
    iub,
    iub_curve,
    montecarlo_curve,
    rlb_dcg_closed,
    rlb_err_closed,
    rlb_exhaustive,
    rlb_montecarlo,
    rlb_sp_closed,
)
from .dataset import (
    BinaryCounts,
    Corpus,
    DocEntry,
    GradeScale,
    LabelHistogram,
    QueryDocs,
    binarize,
    format_trec_run,
    histogram,
    parse_letor,
    parse_trec_run,
    subsample,
)
from .errors import (
    BoundsError,
    CoverageError,
    ParseError,
    TractabilityError,
    UlbevalError,
)
from .harness import RankerConfig, generate_run, run_to_trec
from .metrics import (
    MetricSpec,
    MetricValue,
    ap_at_k,
    dcg_at_k,
    err_at_k,
    evaluate,
    metric_at_ks,
    metric_prefix,
    ndcg_at_k,
    nerr_at_k,
    sp_at_k,
)
from .ranking import (
    Ranking,
    derive_seed,
    feature_ranking,
    ideal_ranking,
    random_ranking,
    ranking_from_scores,
    ranking_from_trec,
    worst_ranking,
    write_trec_run,
)
from .ulnorm import (
    NormalizedScore,
    clamp_rlb,
    normalize_upper,
    normalize_v1,
    normalize_v2,
)
from .analysis import (
    MethodRanking,
    QueryGapTable,
    ScoreMatrix,
    bootstrap_test,
    build_query_gap_table,
    build_score_matrices,
    build_score_matrix,
    categorize_queries,
    count_conflicts,
    count_significant_pairs,
    kendall_tau,
    pad,
    pad_pairs,
    paired_ttest,
    rank_methods,
    significance_table,
    swap_rate,
)

__version__ = "0.1.0"
