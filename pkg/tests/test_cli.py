import csv
import filecmp
import json
from pathlib import Path

import pytest

from ulbeval.cli import main

from conftest import letor_text, random_label_lists


@pytest.fixture
def dataset(tmp_path, rng):
    lists = random_label_lists(rng, 14, n_range=(4, 8), g_max=2, ensure_pos=True)
    path = tmp_path / "data.txt"
    path.write_text(letor_text(lists))
    return path


@pytest.fixture
def runs(tmp_path, dataset):
    out = tmp_path / "runs"
    paths = {}
    for policy, extra in (("random", ["--seed", "3"]), ("feature", []), ("ideal", [])):
        tag = policy[:4]
        rc = main(
            ["rank", "--dataset", str(dataset), "--policy", policy, "--tag", tag,
             "--out", str(out), *extra]
        )
        assert rc == 0
        paths[tag] = out / f"{tag}.run"
    return paths


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_args(runs):
    args = []
    for name, path in sorted(runs.items()):
        args += ["--run", f"{name}={path}"]
    return args


# ------------------------------------------------------------------------ rank

def test_rank_files_parse_and_are_deterministic(tmp_path, dataset):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    for out in (out1, out2):
        assert main(
            ["rank", "--dataset", str(dataset), "--policy", "random", "--seed", "9",
             "--tag", "t", "--out", str(out)]
        ) == 0
    assert (out1 / "t.run").read_bytes() == (out2 / "t.run").read_bytes()
    first = (out1 / "t.run").read_text().split("\n")[0].split()
    assert len(first) == 6 and first[1] == "Q0" and first[5] == "t"


# ------------------------------------------------------------------------ eval

def test_eval_outputs_and_aggregate_consistency(tmp_path, dataset, runs):
    out = tmp_path / "ev"
    rc = main(
        ["eval", "--dataset", str(dataset), *run_args(runs), "--metric", "all",
         "--k", "2,4", "--norm", "all", "--out", str(out), "--format", "both"]
    )
    assert rc == 0
    agg = read_csv(out / "aggregate.csv")
    per = read_csv(out / "per_query.csv")
    assert list(agg[0].keys()) == [
        "method", "metric", "variant", "k", "mean", "queries", "degenerate"
    ]
    assert list(per[0].keys()) == [
        "method", "qid", "metric", "k", "variant", "value", "degenerate"
    ]
    # 3 methods x 3 families x 4 variants x 2 ks
    assert len(agg) == 3 * 3 * 4 * 2
    assert len(per) == 3 * 14 * 3 * 4 * 2

    # aggregate mean must equal the mean of the per-query column
    probe = agg[0]
    cells = [
        float(r["value"])
        for r in per
        if r["method"] == probe["method"]
        and r["metric"] == probe["metric"]
        and r["variant"] == probe["variant"]
        and r["k"] == probe["k"]
    ]
    assert float(probe["mean"]) == pytest.approx(sum(cells) / len(cells), rel=1e-12)

    # json mirrors exist and carry the same rows
    assert json.loads((out / "aggregate.json").read_text())[0]["method"] == agg[0]["method"]
    assert (out / "per_query.json").exists()


def test_eval_ideal_run_upper_is_one(tmp_path, dataset, runs):
    out = tmp_path / "ev1"
    main(
        ["eval", "--dataset", str(dataset), "--run", f"idea={runs['idea']}",
         "--metric", "ndcg", "--k", "2,4", "--norm", "upper", "--out", str(out)]
    )
    for row in read_csv(out / "aggregate.csv"):
        assert float(row["mean"]) == 1.0
        assert row["degenerate"] == "0"


def test_eval_map_family_reports_ap(tmp_path, dataset, runs):
    out = tmp_path / "ev2"
    main(
        ["eval", "--dataset", str(dataset), "--run", f"idea={runs['idea']}",
         "--metric", "map", "--k", "4", "--norm", "none", "--out", str(out)]
    )
    # AP of the ideal ranking at k: SP@k / k <= 1
    for row in read_csv(out / "per_query.csv"):
        assert 0.0 <= float(row["value"]) <= 1.0


def test_eval_format_json_only(tmp_path, dataset, runs):
    out = tmp_path / "ev3"
    main(
        ["eval", "--dataset", str(dataset), "--run", f"rand={runs['rand']}",
         "--metric", "ndcg", "--k", "2", "--norm", "none", "--out", str(out),
         "--format", "json"]
    )
    assert not (out / "aggregate.csv").exists()
    assert (out / "aggregate.json").exists()


def test_eval_subsample(tmp_path, dataset, runs):
    out = tmp_path / "ev4"
    main(
        ["eval", "--dataset", str(dataset), "--run", f"rand={runs['rand']}",
         "--metric", "ndcg", "--k", "2", "--norm", "none",
         "--subsample", "5:77", "--out", str(out)]
    )
    rows = read_csv(out / "per_query.csv")
    assert len(rows) == 5
    again = tmp_path / "ev4b"
    main(
        ["eval", "--dataset", str(dataset), "--run", f"rand={runs['rand']}",
         "--metric", "ndcg", "--k", "2", "--norm", "none",
         "--subsample", "5:77", "--out", str(again)]
    )
    assert {r["qid"] for r in rows} == {r["qid"] for r in read_csv(again / "per_query.csv")}


def test_run_config_omits_threads_and_out(tmp_path, dataset, runs):
    out = tmp_path / "cfg"
    main(
        ["eval", "--dataset", str(dataset), "--run", f"rand={runs['rand']}",
         "--metric", "ndcg", "--k", "2", "--norm", "none", "--out", str(out),
         "--threads", "3"]
    )
    config = json.loads((out / "run_config.json").read_text())
    assert "threads" not in config and "out" not in config
    assert config["command"] == "eval"
    assert config["ks"] == [2]


# ---------------------------------------------------------------------- bounds

def test_bounds_closed_only_leaves_oracle_fields_empty(tmp_path, dataset):
    out = tmp_path / "b1"
    main(["bounds", "--dataset", str(dataset), "--metric", "ndcg", "--k", "2,4",
          "--out", str(out)])
    rows = read_csv(out / "bounds.csv")
    assert list(rows[0].keys()) == [
        "qid", "metric", "k", "iub", "rlb_closed", "rlb_exhaustive",
        "rlb_mc", "mc_stderr", "gap",
    ]
    assert all(r["rlb_exhaustive"] == "" and r["rlb_mc"] == "" and r["gap"] == "" for r in rows)
    assert len(rows) == 14 * 2


def test_bounds_exhaustive_fills_gap_and_dcg_gap_is_zero(tmp_path, dataset):
    out = tmp_path / "b2"
    main(["bounds", "--dataset", str(dataset), "--metric", "ndcg", "--k", "2,4",
          "--bounds", "exhaustive", "--out", str(out)])
    for r in read_csv(out / "bounds.csv"):
        assert r["rlb_exhaustive"] != ""
        assert abs(float(r["gap"])) < 1e-10  # dcg closed form is exact


def test_bounds_sp_audit_values(tmp_path):
    # one binary two-doc query: closed 0.5, exact 0.75, gap 0.25
    data = tmp_path / "tiny.txt"
    data.write_text("1 qid:a 1:1.0\n0 qid:a 1:0.5\n")
    out = tmp_path / "b3"
    main(["bounds", "--dataset", str(data), "--metric", "map", "--k", "2",
          "--bounds", "exhaustive", "--out", str(out)])
    row = read_csv(out / "bounds.csv")[0]
    assert float(row["rlb_closed"]) == pytest.approx(0.5, abs=1e-12)
    assert float(row["rlb_exhaustive"]) == pytest.approx(0.75, abs=1e-12)
    assert float(row["gap"]) == pytest.approx(0.25, abs=1e-12)


def test_bounds_mc_mode_and_histogram(tmp_path, dataset):
    out = tmp_path / "b4"
    main(["bounds", "--dataset", str(dataset), "--metric", "err", "--k", "2",
          "--bounds", "mc:500", "--histogram", "--out", str(out)])
    rows = read_csv(out / "bounds.csv")
    assert all(r["rlb_mc"] != "" and r["mc_stderr"] != "" for r in rows)
    hist = read_csv(out / "expected_hist.csv")
    assert list(hist[0].keys()) == ["metric", "k", "bin_lo", "bin_hi", "count"]
    assert len(hist) == 20
    assert sum(int(r["count"]) for r in hist) == 14


def test_bounds_intractable_query_warns_not_fails(tmp_path, capsys):
    # 12 docs over 3 grades: far beyond a prefix limit this small corpus
    # cannot hit, so force the issue with a wide spread and tiny limit via
    # a long query plus exhaustive mode at full depth
    labels = [0, 1, 2, 3, 4] * 6
    lines = [f"{g} qid:wide 1:0.0" for g in labels]
    lines.append("1 qid:slim 1:0.0")
    lines.append("0 qid:slim 1:0.0")
    data = tmp_path / "wide.txt"
    data.write_text("\n".join(lines) + "\n")
    out = tmp_path / "b5"
    rc = main(["bounds", "--dataset", str(data), "--metric", "ndcg", "--k", "30",
               "--bounds", "exhaustive", "--out", str(out)])
    assert rc == 0
    err = capsys.readouterr().err
    assert "wide" in err and "warning" in err
    rows = {r["qid"]: r for r in read_csv(out / "bounds.csv")}
    assert rows["wide"]["rlb_exhaustive"] == "" and rows["wide"]["gap"] == ""
    assert rows["slim"]["rlb_exhaustive"] != ""


# --------------------------------------------------------------------- compare

def test_compare_outputs(tmp_path, dataset, runs):
    out = tmp_path / "c1"
    rc = main(
        ["compare", "--dataset", str(dataset), *run_args(runs), "--metric", "ndcg",
         "--k", "2,4", "--norm", "all", "--top-n", "3", "--out", str(out)]
    )
    assert rc == 0
    kend = read_csv(out / "kendall.csv")
    assert list(kend[0].keys()) == ["metric", "subset", "variant_a", "variant_b", "tau"]
    # 6 variant pairs x 3 subsets
    assert len(kend) == 6 * 3
    assert {r["subset"] for r in kend} == {"all", "uninformative", "ideal"}
    swap = read_csv(out / "swap_rate.csv")
    assert len(swap) == 18
    for kr, sr in zip(kend, swap):
        assert -1.0 <= float(kr["tau"]) <= 1.0
        assert 0.0 <= float(sr["swap"]) <= 1.0
    padr = read_csv(out / "pad.csv")
    assert len(padr) == 4 * 3  # variants x subsets
    sig = read_csv(out / "sig_counts.csv")
    # per variant and subset: one row per k plus a total row
    assert len(sig) == 4 * 3 * (2 + 1)
    totals = [r for r in sig if r["k"] == "all"]
    for t in totals:
        ks_rows = [
            r for r in sig
            if r["k"] != "all" and r["variant"] == t["variant"] and r["subset"] == t["subset"]
        ]
        assert int(t["significant"]) == sum(int(r["significant"]) for r in ks_rows)
        assert int(t["pairs"]) == 6  # C(3,2) pairs x 2 ks
    conf = read_csv(out / "conflicts.csv")
    assert len(conf) == 6 * 3
    for r in conf:
        assert 0 <= int(r["conflicts"]) <= int(r["comparisons"]) == 6


def test_compare_without_topn_has_only_all_subset(tmp_path, dataset, runs):
    out = tmp_path / "c2"
    rc = main(
        ["compare", "--dataset", str(dataset), *run_args(runs), "--metric", "ndcg",
         "--k", "2", "--norm", "all", "--out", str(out)]
    )
    assert rc == 0
    kend = read_csv(out / "kendall.csv")
    assert {r["subset"] for r in kend} == {"all"}
    assert len(kend) == 6


def test_compare_bootstrap_test_path(tmp_path, dataset, runs):
    out = tmp_path / "c3"
    rc = main(
        ["compare", "--dataset", str(dataset), *run_args(runs), "--metric", "ndcg",
         "--k", "2", "--norm", "none", "--test", "bootstrap", "--bootstrap-b", "200",
         "--out", str(out)]
    )
    assert rc == 0
    sig = read_csv(out / "sig_counts.csv")
    assert {r["subset"] for r in sig} == {"all"}


# ------------------------------------------------------------------ categorize

def test_categorize_outputs_and_default_topn(tmp_path, dataset, runs):
    out = tmp_path / "cat"
    rc = main(
        ["categorize", "--dataset", str(dataset), "--run", f"feat={runs['feat']}",
         "--metric", "ndcg", "--k", "2,4", "--out", str(out)]
    )
    assert rc == 0
    gaps = read_csv(out / "query_gaps.csv")
    assert len(gaps) == 14
    vals = [float(r["gap"]) for r in gaps]
    assert vals == sorted(vals)
    # default top_n is 10% of |Q| = 1
    uninf = (out / "uninformative.txt").read_text().split()
    ideal = (out / "ideal.txt").read_text().split()
    assert len(uninf) == len(ideal) == 1
    assert uninf[0] == gaps[0]["qid"]
    assert ideal[0] == gaps[-1]["qid"]


def test_categorize_rejects_metric_all(tmp_path, dataset, runs, capsys):
    rc = main(
        ["categorize", "--dataset", str(dataset), "--run", f"feat={runs['feat']}",
         "--metric", "all", "--out", str(tmp_path / "x")]
    )
    assert rc == 1
    assert "single --metric" in capsys.readouterr().err


# ---------------------------------------------------------------------- report

def test_report_chains_everything(tmp_path, dataset, runs):
    out = tmp_path / "rep"
    rc = main(
        ["report", "--dataset", str(dataset), *run_args(runs), "--metric", "all",
         "--k", "2,4", "--norm", "all", "--top-n", "3", "--out", str(out)]
    )
    assert rc == 0
    for name in (
        "aggregate.csv", "per_query.csv", "kendall.csv", "swap_rate.csv", "pad.csv",
        "sig_counts.csv", "conflicts.csv", "query_gaps.csv", "uninformative.txt",
        "ideal.txt", "run_config.json",
    ):
        assert (out / name).exists(), name
    assert json.loads((out / "run_config.json").read_text())["command"] == "report"


# ------------------------------------------------------------------ determinism

def assert_dirs_equal(a: Path, b: Path):
    cmp = filecmp.dircmp(a, b)
    assert not cmp.left_only and not cmp.right_only
    match, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    assert not mismatch and not errors


def test_outputs_byte_identical_across_reruns_and_threads(tmp_path, dataset, runs):
    outs = [tmp_path / f"d{i}" for i in range(3)]
    threads = ["1", "1", "4"]
    for out, t in zip(outs, threads):
        rc = main(
            ["report", "--dataset", str(dataset), *run_args(runs), "--metric", "ndcg",
             "--k", "2,4", "--norm", "all", "--top-n", "3", "--threads", t,
             "--out", str(out)]
        )
        assert rc == 0
    assert_dirs_equal(outs[0], outs[1])
    assert_dirs_equal(outs[0], outs[2])


# ------------------------------------------------------------------ error paths

@pytest.mark.parametrize(
    "args,fragment",
    [
        (["eval", "--dataset", "/definitely/absent.txt", "--run", "a=b", "--k", "2"],
         "absent.txt"),
        (["eval", "--dataset", "DATA", "--k", "2"], "--run"),
        (["eval", "--dataset", "DATA", "--run", "noequals", "--k", "2"], "NAME=PATH"),
        (["eval", "--dataset", "DATA", "--run", "a=RUN", "--run", "a=RUN", "--k", "2"],
         "duplicate"),
        (["eval", "--dataset", "DATA", "--run", "a=RUN", "--k", "4,2"], "increasing"),
        (["eval", "--dataset", "DATA", "--run", "a=RUN", "--k", "2", "--bounds", "magic"],
         "--bounds"),
        (["eval", "--dataset", "DATA", "--run", "a=RUN", "--k", "2", "--metric", "f1"],
         "--metric"),
        (["eval", "--dataset", "DATA", "--run", "a=RUN", "--k", "2", "--norm", "zscore"],
         "--norm"),
        (["eval", "--dataset", "DATA", "--run", "a=RUN", "--k", "2", "--subsample", "5"],
         "N:SEED"),
        (["eval", "--dataset", "DATA", "--run", "a=RUN", "--k", "2", "--test", "wilcoxon"],
         "--test"),
        (["compare", "--dataset", "DATA", "--run", "a=RUN", "--k", "2"], "2 runs"),
    ],
)
def test_cli_errors(tmp_path, dataset, runs, capsys, args, fragment):
    run_path = str(runs["rand"])
    args = [a.replace("DATA", str(dataset)).replace("RUN", run_path) for a in args]
    rc = main(args)
    assert rc == 1
    assert fragment in capsys.readouterr().err


def test_missing_run_file_message_contains_path(tmp_path, dataset, capsys):
    rc = main(
        ["eval", "--dataset", str(dataset), "--run", "a=/nowhere/gone.run", "--k", "2"]
    )
    assert rc == 1
    assert "/nowhere/gone.run" in capsys.readouterr().err


def test_run_missing_query_coverage_error(tmp_path, dataset, runs, capsys):
    partial = tmp_path / "partial.run"
    lines = runs["rand"].read_text().strip().split("\n")
    kept = [ln for ln in lines if not ln.startswith("q0000 ")]
    partial.write_text("\n".join(kept) + "\n")
    rc = main(
        ["eval", "--dataset", str(dataset), "--run", f"p={partial}", "--k", "2",
         "--out", str(tmp_path / "x")]
    )
    assert rc == 1
    err = capsys.readouterr().err
    assert "q0000" in err and "missing" in err
