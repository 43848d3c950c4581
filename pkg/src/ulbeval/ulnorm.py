"""Joint upper-and-lower-bound normalization of raw metric values.

Given a raw value a, ideal upper bound iub and randomized lower bound
rlb for the same query and cutoff:

    upper: a / iub
    v1:    (a / iub) * (a / (a + rlb))          range [0, 1]
    v2:    (a - rlb) / (iub - rlb)  if a >= rlb
           (a - rlb) / rlb          otherwise    range [-1, 1]

v2 reads as: +1 perfect ranking, 0 indistinguishable from random, -1
nothing relevant retrieved. Division-by-zero corners collapse to 0 with
the degenerate flag set so corpus averages stay total and countable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BoundsError

EPS = 1e-9

VARIANTS = ("upper", "v1", "v2")


@dataclass(frozen=True)
class NormalizedScore:
    value: float
    variant: str
    degenerate: bool = False


def _check(a: float, iub: float, rlb: float | None = None) -> float:
    """Validate preconditions, clamp epsilon-scale float overshoot of a."""
    if a < 0 or iub < 0:
        raise BoundsError(f"negative input: a={a}, iub={iub}")
    if a > iub + EPS:
        raise BoundsError(f"metric value {a} exceeds iub {iub} beyond slack")
    if rlb is not None:
        if rlb < 0:
            raise BoundsError(f"negative rlb {rlb}")
        if rlb > iub + EPS:
            raise BoundsError(f"rlb {rlb} exceeds iub {iub} beyond slack")
    return min(a, iub)


def clamp_rlb(iub: float, rlb: float) -> tuple[float, bool]:
    """Defensively clamp an approximate rlb into [0, iub].

    The SP and ERR closed forms are approximations and may overshoot the
    iub on peculiar queries; callers count the True flags and report them.
    """
    if rlb > iub:
        return iub, True
    return rlb, False


def normalize_upper(a: float, iub: float) -> NormalizedScore:
    a = _check(a, iub)
    if iub == 0.0:
        return NormalizedScore(0.0, "upper", degenerate=True)
    return NormalizedScore(a / iub, "upper")


def normalize_v1(a: float, iub: float, rlb: float) -> NormalizedScore:
    a = _check(a, iub, rlb)
    if iub == 0.0 or (a == 0.0 and rlb == 0.0):
        return NormalizedScore(0.0, "v1", degenerate=True)
    return NormalizedScore((a / iub) * (a / (a + rlb)), "v1")


def normalize_v2(a: float, iub: float, rlb: float) -> NormalizedScore:
    a = _check(a, iub, rlb)
    rlb = min(rlb, iub)
    # iub == rlb covers all-same-label queries (and iub == 0): the ranking
    # can neither beat nor lose to random, so the score is pinned to 0.
    # The comparison uses the epsilon slack because iub and rlb usually
    # come from different float summation orders of the same quantity.
    if iub - rlb <= EPS:
        return NormalizedScore(0.0, "v2", degenerate=True)
    if a >= rlb:
        return NormalizedScore((a - rlb) / (iub - rlb), "v2")
    return NormalizedScore((a - rlb) / rlb, "v2")
