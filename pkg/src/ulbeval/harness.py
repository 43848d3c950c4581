"""Reference rankers over a corpus, for end-to-end pipelines without
trained models."""

from __future__ import annotations

from dataclasses import dataclass

from .dataset import Corpus
from .errors import UlbevalError
from .ranking import (
    Ranking,
    feature_ranking,
    ideal_ranking,
    random_ranking,
    worst_ranking,
    write_trec_run,
)

POLICIES = ("ideal", "worst", "random", "feature")


@dataclass(frozen=True)
class RankerConfig:
    """One reference ranker: a policy plus its parameter and output tag."""

    policy: str
    tag: str = "run"
    seed: int = 0
    feature_id: int = 1

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise UlbevalError(f"unknown policy {self.policy!r}, expected one of {POLICIES}")
        if self.policy == "feature" and self.feature_id < 1:
            raise UlbevalError("feature policy needs a positive feature_id")
        # an empty or spaced tag would break the 6-token run line format
        if not self.tag or any(ch.isspace() for ch in self.tag):
            raise UlbevalError(f"tag must be non-empty without whitespace, got {self.tag!r}")


def generate_run(corpus: Corpus, config: RankerConfig) -> dict[str, Ranking]:
    """One ranking per corpus query under the configured policy."""
    out: dict[str, Ranking] = {}
    for q in corpus:
        if config.policy == "ideal":
            out[q.qid] = ideal_ranking(q)
        elif config.policy == "worst":
            out[q.qid] = worst_ranking(q)
        elif config.policy == "random":
            out[q.qid] = random_ranking(q, config.seed)
        else:
            out[q.qid] = feature_ranking(q, config.feature_id)
    return out


def run_to_trec(corpus: Corpus, config: RankerConfig) -> str:
    """Generate a run and render it as TREC run text."""
    return write_trec_run(generate_run(corpus, config), corpus, tag=config.tag)
