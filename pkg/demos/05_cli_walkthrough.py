"""
The command line, end to end
============================

Everything the library does is reachable from the `ulbeval` command:
generate reference runs, evaluate them, audit the bounds, compare
systems, and flag uninformative queries.  This script writes a small
dataset to a temporary directory and walks the subcommands over it,
showing each command line and the head of what it produced.
"""

import random
import subprocess
import sys
import tempfile
from pathlib import Path

work = Path(tempfile.mkdtemp(prefix="ulbeval_demo_"))
print(f"working in {work}\n")

# ----------------------------------------------------------------------
# A dataset in the svmlight-style labeled format: one doc per line,
# grade first, then qid, then sparse features.  Feature 2 is a noisy
# copy of the grade so the feature ranker has signal to find.
# ----------------------------------------------------------------------

rng = random.Random(99)
lines = []
for i in range(25):
    qid = f"{i + 1:03d}"
    n = rng.randint(6, 12)
    labels = [rng.randint(0, 4) for _ in range(n)]
    if max(labels) == 0:
        labels[0] = rng.randint(1, 4)
    for j, g in enumerate(labels):
        noisy = g + rng.gauss(0.0, 1.0)
        lines.append(f"{g} qid:{qid} 1:{rng.random():.4f} 2:{noisy:.4f} # doc{qid}_{j}")
dataset = work / "demo.txt"
dataset.write_text("\n".join(lines) + "\n")
print(f"wrote {dataset.name}: {len(lines)} docs over 25 queries")


def run(*args: str) -> None:
    print(f"\n$ ulbeval {' '.join(args)}")
    proc = subprocess.run(
        [sys.executable, "-m", "ulbeval.cli", *args],
        capture_output=True,
        text=True,
    )
    if proc.stderr:
        print(proc.stderr.rstrip())
    if proc.returncode != 0:
        raise SystemExit(f"command failed ({proc.returncode})")


def show(path: Path, n: int = 5) -> None:
    text = path.read_text().splitlines()
    print(f"--- {path.name} ({len(text) - 1} data rows) ---")
    for line in text[:n]:
        print(line)
    if len(text) > n:
        print("...")


# ----------------------------------------------------------------------
# rank: generate reference runs from built-in policies.
# ----------------------------------------------------------------------

runs = work / "runs"
run("rank", "--dataset", str(dataset), "--policy", "feature", "--feature-id", "2",
    "--tag", "signal", "--out", str(runs))
run("rank", "--dataset", str(dataset), "--policy", "random", "--seed", "3",
    "--tag", "shuffle", "--out", str(runs))
show(runs / "signal.run", 3)

# ----------------------------------------------------------------------
# eval: score the runs.  Comma lists select several cutoffs and
# normalization variants in one pass.
# ----------------------------------------------------------------------

evaldir = work / "eval"
run("eval", "--dataset", str(dataset),
    "--run", f"signal={runs / 'signal.run'}",
    "--run", f"shuffle={runs / 'shuffle.run'}",
    "--metric", "ndcg", "--k", "5,10", "--norm", "all",
    "--out", str(evaldir))
show(evaldir / "aggregate.csv", 9)

# ----------------------------------------------------------------------
# bounds: per-query upper and lower bounds, with the exhaustive oracle
# alongside the closed form and the gap between them.
# ----------------------------------------------------------------------

boundsdir = work / "bounds"
run("bounds", "--dataset", str(dataset), "--metric", "err", "--k", "5",
    "--bounds", "exhaustive", "--out", str(boundsdir))
show(boundsdir / "bounds.csv", 4)

# ----------------------------------------------------------------------
# compare: leaderboard agreement, PAD, significance counts, conflicts.
# ----------------------------------------------------------------------

comparedir = work / "compare"
run("compare", "--dataset", str(dataset),
    "--run", f"signal={runs / 'signal.run'}",
    "--run", f"shuffle={runs / 'shuffle.run'}",
    "--metric", "ndcg", "--k", "5,10", "--out", str(comparedir))
show(comparedir / "sig_counts.csv", 12)

# ----------------------------------------------------------------------
# categorize: which queries fail to separate systems from chance, and
# which separate them best.
# ----------------------------------------------------------------------

catdir = work / "categorize"
run("categorize", "--dataset", str(dataset),
    "--run", f"signal={runs / 'signal.run'}",
    "--run", f"shuffle={runs / 'shuffle.run'}",
    "--metric", "ndcg", "--k", "5,10", "--top-n", "3",
    "--out", str(catdir))
show(catdir / "query_gaps.csv", 4)
print("uninformative:", (catdir / "uninformative.txt").read_text().split())
print("ideal:", (catdir / "ideal.txt").read_text().split())

# Every output directory also holds run_config.json recording the exact
# configuration, so any result can be reproduced from its folder alone.
print("\nrun_config.json keys:",
      sorted(__import__("json").loads((catdir / "run_config.json").read_text())))
