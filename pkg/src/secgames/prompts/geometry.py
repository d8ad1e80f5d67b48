"""Distances between structured prompts and how smoothly policies respond to them.

``prompt_distance`` mixes two views with equal weight: the normalized
token-level edit distance of the rendered text, and the mean of the four
slot distances (an absent slot against a present one counts as 1). The mix
is symmetric and zero exactly on identical prompts, but need not satisfy the
triangle inequality; :func:`triangle_violation_rate` measures how often it
fails on a given prompt set.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

from secgames.errors import InvalidInputError
from secgames.prompts.policy import SLOTS, InfoContext, ReasoningPolicy, StructuredPrompt, policy_action_distribution

RENDERED_WEIGHT = 0.5


def tokens(text: str) -> list[str]:
    return text.split()


def edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Levenshtein distance between token sequences (unit insert/delete/substitute)."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def normalized_edit_distance(a: str, b: str) -> float:
    ta, tb = tokens(a), tokens(b)
    longest = max(len(ta), len(tb))
    return 0.0 if longest == 0 else edit_distance(ta, tb) / longest


def slot_distance(a: Optional[str], b: Optional[str]) -> float:
    if a is None and b is None:
        return 0.0
    if a is None or b is None:
        return 1.0
    return normalized_edit_distance(a, b)


def prompt_distance(a: StructuredPrompt, b: StructuredPrompt) -> float:
    """Equal-weight mix of rendered-text and mean slot edit distances, in [0, 1]."""
    slots = sum(slot_distance(getattr(a, s), getattr(b, s)) for s in SLOTS) / len(SLOTS)
    return RENDERED_WEIGHT * normalized_edit_distance(a.rendered, b.rendered) + (1 - RENDERED_WEIGHT) * slots


@dataclass(frozen=True)
class StabilityPair:
    first: str
    second: str
    distance: float
    output_gap: float


@dataclass(frozen=True)
class StabilityProfile:
    """All prompt pairs with their distance and L1 output gap.

    ``lipschitz`` is ``max(gap / distance)`` over pairs at positive distance,
    or ``None`` if every pair is at distance 0.
    """

    pairs: tuple[StabilityPair, ...]
    lipschitz: Optional[float]


def stability_profile(
    policy: ReasoningPolicy, prompts: Sequence[StructuredPrompt], info: InfoContext, seed: Optional[int] = None
) -> StabilityProfile:
    if len(prompts) < 2:
        raise InvalidInputError("a stability profile needs at least two prompts")
    dists = [policy_action_distribution(policy, p, info, seed) for p in prompts]
    pairs = []
    for (i, a), (j, b) in itertools.combinations(enumerate(prompts), 2):
        pairs.append(StabilityPair(a.id, b.id, prompt_distance(a, b), dists[i].l1(dists[j])))
    ratios = [p.output_gap / p.distance for p in pairs if p.distance > 0]
    return StabilityProfile(tuple(pairs), max(ratios) if ratios else None)


def triangle_violation_rate(prompts: Sequence[StructuredPrompt], tol: float = 1e-12) -> float:
    """Fraction of ordered triples with ``d(a, c) > d(a, b) + d(b, c)``."""
    n = len(prompts)
    if n < 3:
        return 0.0
    d = [[prompt_distance(a, b) for b in prompts] for a in prompts]
    triples = [(i, j, k) for i, j, k in itertools.permutations(range(n), 3)]
    bad = sum(d[i][k] > d[i][j] + d[j][k] + tol for i, j, k in triples)
    return bad / len(triples)
