"""Command-line interface.

Subcommands mirror the evaluation pipeline stages:

    eval        per-query and aggregate scores for one or more runs
    bounds      per-query iub/rlb table, optionally with oracle columns
    compare     Kendall/swap/PAD/significance/conflict reports
    categorize  uninformative and ideal query lists
    rank        reference-policy run files
    report      eval + compare + categorize in one pass

Every command is deterministic given its flags (seeds included): file
bytes do not depend on --threads, and reruns reproduce identical
outputs. CSV columns are documented in the README; each CSV has a JSON
mirror when --format json or both is selected.
"""

from __future__ import annotations

import argparse
import functools
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, bounds as bounds_mod
from .dataset import Corpus, GradeScale, parse_letor, parse_trec_run, subsample
from .errors import TractabilityError, UlbevalError
from .harness import RankerConfig, generate_run
from .metrics import MetricSpec
from .ranking import Ranking, ranking_from_trec, write_trec_run

FAMILIES = {"ndcg": "dcg", "map": "sp", "err": "err"}
NORMS = ("none", "upper", "v1", "v2")
DEFAULT_KS = (5, 10, 15, 20, 30)


@dataclass
class CliConfig:
    """Resolved flag values shared by the pipeline commands."""

    dataset: str
    runs: list[tuple[str, str]] = field(default_factory=list)
    metrics: list[str] = field(default_factory=lambda: list(FAMILIES))
    ks: list[int] = field(default_factory=lambda: list(DEFAULT_KS))
    norms: list[str] = field(default_factory=lambda: list(NORMS))
    bound_mode: str = "closed"
    mc_samples: int = 100_000
    seed: int = 0
    threshold: int = 0
    gmax: int | None = None
    subsample: tuple[int, int] | None = None
    top_n: int | None = None
    alpha: float = 0.05
    test: str = "ttest"
    bootstrap_b: int = 1000
    threads: int = 1
    out: str = "."
    format: str = "csv"
    histogram: bool = False
    bin_width: float = 0.05

    def public_dict(self) -> dict:
        # threads and out are excluded: neither may influence file bytes
        d = {
            "dataset": self.dataset,
            "runs": {name: path for name, path in self.runs},
            "metrics": self.metrics,
            "ks": self.ks,
            "norms": self.norms,
            "bounds": self.bound_mode
            if self.bound_mode != "montecarlo"
            else f"mc:{self.mc_samples}",
            "seed": self.seed,
            "threshold": self.threshold,
            "gmax": self.gmax,
            "subsample": None if self.subsample is None else list(self.subsample),
            "top_n": self.top_n,
            "alpha": self.alpha,
            "test": self.test,
            "bootstrap_b": self.bootstrap_b,
            "format": self.format,
        }
        return d


def _parse_ks(text: str) -> list[int]:
    try:
        ks = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UlbevalError(f"bad --k list {text!r}") from None
    if not ks or any(b <= a for a, b in zip(ks, ks[1:])) or ks[0] < 1:
        raise UlbevalError(f"--k must be positive and strictly increasing, got {text!r}")
    return ks


def _parse_bounds(text: str) -> tuple[str, int]:
    if text == "closed":
        return "closed", 0
    if text == "exhaustive":
        return "exhaustive", 0
    if text.startswith("mc:"):
        try:
            n = int(text[3:])
        except ValueError:
            raise UlbevalError(f"bad --bounds {text!r}") from None
        if n < 2:
            raise UlbevalError("--bounds mc:N needs N >= 2")
        return "montecarlo", n
    raise UlbevalError(f"--bounds must be closed, exhaustive or mc:N, got {text!r}")


def _parse_subsample(text: str) -> tuple[int, int]:
    n_s, sep, seed_s = text.partition(":")
    if not sep:
        raise UlbevalError(f"--subsample expects N:SEED, got {text!r}")
    try:
        return int(n_s), int(seed_s)
    except ValueError:
        raise UlbevalError(f"--subsample expects N:SEED, got {text!r}") from None


def _parse_choice_list(text: str, universe: tuple, flag: str) -> list[str]:
    """'all', one value, or a comma list; result in canonical order."""
    if text == "all":
        return list(universe)
    picked = [tok.strip() for tok in text.split(",") if tok.strip()]
    bad = [tok for tok in picked if tok not in universe]
    if bad or not picked:
        raise UlbevalError(
            f"{flag} must be from {', '.join(universe)} or all; got {text!r}"
        )
    return [v for v in universe if v in picked]


def _parse_metrics(text: str) -> list[str]:
    return _parse_choice_list(text, tuple(FAMILIES), "--metric")


def _parse_norms(text: str) -> list[str]:
    return _parse_choice_list(text, NORMS, "--norm")


def _load_corpus(config: CliConfig) -> Corpus:
    path = Path(config.dataset)
    if not path.exists():
        raise UlbevalError(f"dataset file not found: {path}")
    scale = GradeScale(config.gmax) if config.gmax is not None else None
    with open(path, "r", encoding="utf-8") as fh:
        try:
            corpus = parse_letor(fh, scale)
        except UlbevalError as exc:
            raise UlbevalError(f"{path}: {exc}") from None
    if len(corpus) == 0:
        raise UlbevalError(f"dataset {path} contains no queries")
    if config.subsample is not None:
        n, seed = config.subsample
        corpus = subsample(corpus, n, seed)
    return corpus


def _load_runs(config: CliConfig, corpus: Corpus) -> dict[str, dict[str, Ranking]]:
    if not config.runs:
        raise UlbevalError("at least one --run NAME=PATH is required")
    out: dict[str, dict[str, Ranking]] = {}
    for name, path_s in config.runs:
        path = Path(path_s)
        if not path.exists():
            raise UlbevalError(f"run file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            try:
                entries = parse_trec_run(fh)
            except UlbevalError as exc:
                raise UlbevalError(f"{path}: {exc}") from None
        rankings: dict[str, Ranking] = {}
        for qid in corpus.qids():
            q = corpus.queries[qid]
            if qid in entries:
                rankings[qid] = ranking_from_trec(q, entries[qid])
        out[name] = rankings
    analysis.check_coverage(corpus, out)
    return out


def _spec_for(family: str, config: CliConfig, corpus: Corpus) -> MetricSpec:
    return MetricSpec(
        metric=FAMILIES[family],
        k=config.ks[-1],
        threshold=config.threshold,
        scale=corpus.scale,
    )


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_table(config: CliConfig, name: str, header: list[str], rows: list[list]) -> None:
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if config.format in ("csv", "both"):
        with open(out_dir / f"{name}.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    if config.format in ("json", "both"):
        records = [
            {key: (float(v) if isinstance(v, np.floating) else v) for key, v in zip(header, row)}
            for row in rows
        ]
        with open(out_dir / f"{name}.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(records, fh, sort_keys=True, indent=2)
            fh.write("\n")


def _write_config(config: CliConfig, command: str) -> None:
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, **config.public_dict()}
    with open(out_dir / "run_config.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _build_family_matrices(
    family: str,
    config: CliConfig,
    corpus: Corpus,
    runs: dict[str, dict[str, Ranking]],
    variants: list[str],
) -> dict[str, analysis.ScoreMatrix]:
    spec = _spec_for(family, config, corpus)
    matrices = analysis.build_score_matrices(
        corpus,
        runs,
        spec,
        variants,
        config.ks,
        bound_mode=config.bound_mode,
        mc_samples=config.mc_samples,
        seed=config.seed,
        threads=config.threads,
    )
    if family == "map" and "none" in matrices:
        # raw SP presented as AP so aggregates read as MAP@k
        m = matrices["none"]
        m.values = m.values / np.asarray(config.ks, dtype=np.float64)
    return matrices


def cmd_eval(config: CliConfig) -> int:
    corpus = _load_corpus(config)
    runs = _load_runs(config, corpus)
    agg_rows: list[list] = []
    per_rows: list[list] = []
    for family in config.metrics:
        matrices = _build_family_matrices(family, config, corpus, runs, config.norms)
        for variant in config.norms:
            matrix = matrices[variant]
            for mi, method in enumerate(matrix.methods):
                for ki, k in enumerate(matrix.ks):
                    col = matrix.values[mi, :, ki]
                    degen = int(matrix.degenerate[mi, :, ki].sum())
                    agg_rows.append(
                        [method, family, variant, k, float(col.mean()), len(matrix.qids), degen]
                    )
            for mi, method in enumerate(matrix.methods):
                for qi, qid in enumerate(matrix.qids):
                    for ki, k in enumerate(matrix.ks):
                        per_rows.append(
                            [
                                method,
                                qid,
                                family,
                                k,
                                variant,
                                float(matrix.values[mi, qi, ki]),
                                bool(matrix.degenerate[mi, qi, ki]),
                            ]
                        )
    _write_table(
        config,
        "aggregate",
        ["method", "metric", "variant", "k", "mean", "queries", "degenerate"],
        agg_rows,
    )
    _write_table(
        config,
        "per_query",
        ["method", "qid", "metric", "k", "variant", "value", "degenerate"],
        per_rows,
    )
    _write_config(config, "eval")
    return 0


def cmd_bounds(config: CliConfig) -> int:
    corpus = _load_corpus(config)
    rows: list[list] = []
    hist_values: dict[tuple[str, int], list[float]] = {}
    for family in config.metrics:
        spec = _spec_for(family, config, corpus)
        for qid in corpus.qids():
            q = corpus.queries[qid]
            iub_k = bounds_mod.iub_curve(spec, q, config.ks)
            closed_k = bounds_mod.closed_rlb_curve(spec, q, config.ks)
            exh_k: list[float | None] = [None] * len(config.ks)
            mc_k: list[float | None] = [None] * len(config.ks)
            se_k: list[float | None] = [None] * len(config.ks)
            if config.bound_mode == "exhaustive":
                try:
                    curve = bounds_mod.exhaustive_curve(spec, q, max_k=max(config.ks))
                    idx = np.minimum(np.asarray(config.ks), len(curve)) - 1
                    exh_k = [float(curve[i]) for i in idx]
                except TractabilityError as exc:
                    print(f"warning: {exc}", file=sys.stderr)
            elif config.bound_mode == "montecarlo":
                est, se = bounds_mod.montecarlo_curve(
                    spec, q, config.ks, config.mc_samples, config.seed
                )
                mc_k = [float(v) for v in est]
                se_k = [float(v) for v in se]
            if config.histogram:
                expected = bounds_mod.expected_upper_curve(spec, q, config.ks)
                for ki, k in enumerate(config.ks):
                    hist_values.setdefault((family, k), []).append(float(expected[ki]))
            for ki, k in enumerate(config.ks):
                oracle = exh_k[ki] if exh_k[ki] is not None else mc_k[ki]
                gap = None if oracle is None else oracle - float(closed_k[ki])
                rows.append(
                    [
                        qid,
                        family,
                        k,
                        float(iub_k[ki]),
                        float(closed_k[ki]),
                        "" if exh_k[ki] is None else exh_k[ki],
                        "" if mc_k[ki] is None else mc_k[ki],
                        "" if se_k[ki] is None else se_k[ki],
                        "" if gap is None else gap,
                    ]
                )
    _write_table(
        config,
        "bounds",
        ["qid", "metric", "k", "iub", "rlb_closed", "rlb_exhaustive", "rlb_mc", "mc_stderr", "gap"],
        rows,
    )
    if config.histogram:
        edges = np.linspace(0.0, 1.0, round(1.0 / config.bin_width) + 1)
        hist_rows: list[list] = []
        for (family, k), values in sorted(hist_values.items()):
            counts, _ = np.histogram(np.clip(values, 0.0, 1.0), bins=edges)
            for bi, count in enumerate(counts):
                hist_rows.append(
                    [family, k, float(edges[bi]), float(edges[bi + 1]), int(count)]
                )
        _write_table(
            config,
            "expected_hist",
            ["metric", "k", "bin_lo", "bin_hi", "count"],
            hist_rows,
        )
    _write_config(config, "bounds")
    return 0


def _test_callable(config: CliConfig):
    if config.test == "ttest":
        return analysis.paired_ttest
    if config.test == "bootstrap":
        return functools.partial(analysis.bootstrap_test, b=config.bootstrap_b, seed=config.seed)
    raise UlbevalError(f"--test must be ttest or bootstrap, got {config.test!r}")


def _submatrix(matrix: analysis.ScoreMatrix, qids: list[str]) -> analysis.ScoreMatrix:
    index = {qid: i for i, qid in enumerate(matrix.qids)}
    idx = [index[qid] for qid in qids]
    return analysis.ScoreMatrix(
        metric=matrix.metric,
        variant=matrix.variant,
        methods=matrix.methods,
        ks=matrix.ks,
        qids=list(qids),
        values=matrix.values[:, idx, :],
        degenerate=matrix.degenerate[:, idx, :],
        clamped_rlb=matrix.clamped_rlb,
    )


def cmd_compare(config: CliConfig) -> int:
    corpus = _load_corpus(config)
    runs = _load_runs(config, corpus)
    if len(runs) < 2:
        raise UlbevalError("compare needs at least 2 runs")
    test = _test_callable(config)

    kendall_rows: list[list] = []
    swap_rows: list[list] = []
    pad_rows: list[list] = []
    sig_rows: list[list] = []
    conflict_rows: list[list] = []

    for family in config.metrics:
        matrices = _build_family_matrices(family, config, corpus, runs, config.norms)
        subsets: list[tuple[str, list[str] | None]] = [("all", None)]
        if config.top_n is not None:
            spec = _spec_for(family, config, corpus)
            gaps = analysis.build_query_gap_table(
                corpus, runs, spec, config.ks, threads=config.threads
            )
            uninformative, ideal = analysis.categorize_queries(gaps, config.top_n)
            subsets.append(("uninformative", sorted(uninformative)))
            subsets.append(("ideal", sorted(ideal)))

        n_pairs = len(runs) * (len(runs) - 1) // 2
        for subset_name, subset_qids in subsets:
            views = {
                v: (matrices[v] if subset_qids is None else _submatrix(matrices[v], subset_qids))
                for v in config.norms
            }
            rankings = {v: analysis.rank_methods(views[v]) for v in config.norms}
            for vi, va in enumerate(config.norms):
                for vb in config.norms[vi + 1 :]:
                    tau = analysis.kendall_tau(rankings[va], rankings[vb])
                    sw = analysis.swap_rate(rankings[va], rankings[vb])
                    kendall_rows.append([family, subset_name, va, vb, tau])
                    swap_rows.append([family, subset_name, va, vb, sw])
                    conflicts = analysis.count_conflicts(
                        views[va], views[vb], config.alpha, test
                    )
                    conflict_rows.append(
                        [family, subset_name, va, vb, conflicts, n_pairs * len(config.ks)]
                    )
            for v in config.norms:
                pairs = analysis.pad_pairs(rankings[v].scores)
                pad_rows.append(
                    [
                        family,
                        subset_name,
                        v,
                        float(np.mean([r[2] for r in pairs])),
                        sum(1 for r in pairs if r[3]),
                    ]
                )
                table = analysis.significance_table(views[v], config.alpha, test)
                for k, c in table.items():
                    sig_rows.append([family, subset_name, v, k, c, n_pairs])
                sig_rows.append(
                    [family, subset_name, v, "all", sum(table.values()), n_pairs * len(config.ks)]
                )

    _write_table(
        config, "kendall", ["metric", "subset", "variant_a", "variant_b", "tau"], kendall_rows
    )
    _write_table(
        config, "swap_rate", ["metric", "subset", "variant_a", "variant_b", "swap"], swap_rows
    )
    _write_table(
        config, "pad", ["metric", "subset", "variant", "pad", "degenerate_pairs"], pad_rows
    )
    _write_table(
        config,
        "sig_counts",
        ["metric", "subset", "variant", "k", "significant", "pairs"],
        sig_rows,
    )
    _write_table(
        config,
        "conflicts",
        ["metric", "subset", "variant_a", "variant_b", "conflicts", "comparisons"],
        conflict_rows,
    )
    _write_config(config, "compare")
    return 0


def cmd_categorize(config: CliConfig) -> int:
    corpus = _load_corpus(config)
    runs = _load_runs(config, corpus)
    if len(config.metrics) != 1:
        raise UlbevalError("categorize needs a single --metric family (not all)")
    family = config.metrics[0]
    spec = _spec_for(family, config, corpus)
    gaps = analysis.build_query_gap_table(corpus, runs, spec, config.ks, threads=config.threads)
    top_n = config.top_n if config.top_n is not None else len(gaps.entries) // 10
    uninformative, ideal = analysis.categorize_queries(gaps, top_n)

    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_table(config, "query_gaps", ["qid", "gap"], [[qid, g] for qid, g in gaps.entries])
    with open(out_dir / "uninformative.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(qid + "\n" for qid in uninformative)
    with open(out_dir / "ideal.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(qid + "\n" for qid in ideal)
    _write_config(config, "categorize")
    return 0


def cmd_rank(config: CliConfig, policy: str, feature_id: int, tag: str) -> int:
    corpus = _load_corpus(config)
    ranker = RankerConfig(policy=policy, tag=tag, seed=config.seed, feature_id=feature_id)
    run = generate_run(corpus, ranker)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{tag}.run", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_trec_run(run, corpus, tag=tag))
    _write_config(config, "rank")
    return 0


def cmd_report(config: CliConfig) -> int:
    cmd_eval(config)
    if len(config.runs) >= 2:
        cmd_compare(config)
    cat_config = config if len(config.metrics) == 1 else _replace_metrics(config, ["ndcg"])
    cmd_categorize(cat_config)
    _write_config(config, "report")
    return 0


def _replace_metrics(config: CliConfig, metrics: list[str]) -> CliConfig:
    import copy

    clone = copy.copy(config)
    clone.metrics = metrics
    return clone


def _add_common(p: argparse.ArgumentParser, runs: bool = True) -> None:
    p.add_argument("--dataset", required=True, help="LETOR-format dataset file")
    if runs:
        p.add_argument(
            "--run",
            action="append",
            default=[],
            metavar="NAME=PATH",
            help="TREC run file with a method name (repeatable)",
        )
    p.add_argument("--metric", default="all", help="ndcg, map, err (comma list) or all")
    p.add_argument("--k", default="5,10,15,20,30", help="comma-separated cutoffs")
    p.add_argument("--norm", default="all", help="none, upper, v1, v2 (comma list) or all")
    p.add_argument("--bounds", default="closed", help="closed, exhaustive or mc:N")
    p.add_argument("--seed", type=int, default=0, help="base seed for every RNG use")
    p.add_argument("--threshold", type=int, default=0, help="binarization threshold")
    p.add_argument("--gmax", type=int, default=None, help="grade scale override")
    p.add_argument("--subsample", default=None, metavar="N:SEED", help="query subsample")
    p.add_argument("--top-n", type=int, default=None, help="query category size")
    p.add_argument("--alpha", type=float, default=0.05, help="significance threshold")
    p.add_argument("--test", default="ttest", help="ttest or bootstrap")
    p.add_argument("--bootstrap-b", type=int, default=1000, help="bootstrap resamples")
    p.add_argument("--threads", type=int, default=1, help="worker threads")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", default="csv", choices=["csv", "json", "both"])


def _config_from(args: argparse.Namespace) -> CliConfig:
    runs = []
    for item in getattr(args, "run", []) or []:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise UlbevalError(f"--run expects NAME=PATH, got {item!r}")
        if name in dict(runs):
            raise UlbevalError(f"duplicate run name {name!r}")
        runs.append((name, path))
    mode, mc_samples = _parse_bounds(args.bounds)
    config = CliConfig(
        dataset=args.dataset,
        runs=runs,
        metrics=_parse_metrics(args.metric),
        ks=_parse_ks(args.k),
        norms=_parse_norms(args.norm),
        bound_mode=mode,
        mc_samples=mc_samples or 100_000,
        seed=args.seed,
        threshold=args.threshold,
        gmax=args.gmax,
        subsample=_parse_subsample(args.subsample) if args.subsample else None,
        top_n=args.top_n,
        alpha=args.alpha,
        test=args.test,
        bootstrap_b=args.bootstrap_b,
        threads=max(1, args.threads),
        out=args.out,
        format=args.format,
        histogram=getattr(args, "histogram", False),
        bin_width=getattr(args, "bin_width", 0.05),
    )
    if config.test not in ("ttest", "bootstrap"):
        raise UlbevalError(f"--test must be ttest or bootstrap, got {config.test!r}")
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ulbeval",
        description="Ranking evaluation with ideal upper and randomized lower bounds",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="score runs against a dataset")
    _add_common(p_eval)

    p_bounds = sub.add_parser("bounds", help="per-query bound table")
    _add_common(p_bounds, runs=False)
    p_bounds.add_argument(
        "--histogram", action="store_true", help="emit expected-score histogram counts"
    )
    p_bounds.add_argument("--bin-width", type=float, default=0.05, help="histogram bin width")

    p_cmp = sub.add_parser("compare", help="cross-variant comparison reports")
    _add_common(p_cmp)

    p_cat = sub.add_parser("categorize", help="uninformative/ideal query lists")
    _add_common(p_cat)

    p_rank = sub.add_parser("rank", help="write a reference-policy run file")
    _add_common(p_rank, runs=False)
    p_rank.add_argument("--policy", default="random", choices=["ideal", "worst", "random", "feature"])
    p_rank.add_argument("--feature-id", type=int, default=1)
    p_rank.add_argument("--tag", default="run")

    p_rep = sub.add_parser("report", help="eval + compare + categorize")
    _add_common(p_rep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from(args)
        if args.command == "eval":
            return cmd_eval(config)
        if args.command == "bounds":
            return cmd_bounds(config)
        if args.command == "compare":
            return cmd_compare(config)
        if args.command == "categorize":
            return cmd_categorize(config)
        if args.command == "rank":
            return cmd_rank(config, args.policy, args.feature_id, args.tag)
        if args.command == "report":
            return cmd_report(config)
        raise UlbevalError(f"unknown command {args.command!r}")
    except UlbevalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
