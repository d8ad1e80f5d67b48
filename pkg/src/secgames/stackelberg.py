"""Leader commitment in two-player Markov games.

The leader fixes a stationary state-feedback policy; the follower, seeing
it, faces an ordinary MDP. The leader's problem is solved by enumerating its
pure stationary policies, which is exact for that restricted class only.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass, field
from typing import Literal, Mapping, Optional

import numpy as np

from secgames.core import Distribution
from secgames.errors import ConvergenceError, InvalidInputError, UnsupportedSizeError
from secgames.markov import MAX_SWEEPS, VALUE_TOL, MarkovGame, MarkovPolicy, state_values

MAX_LEADER_POLICIES = 100_000
TIE_TOL = 1e-9

TieBreak = Literal["lowest", "pessimistic"]


@dataclass(frozen=True, eq=False)
class StackelbergMarkovGame:
    """A Markov game with a designated leader and optional type-indexed payoffs.

    ``variants`` maps a type profile ``(theta_leader, theta_follower)`` to
    replacement utilities in the same layout as ``MarkovGame.utilities``;
    ``type_profile`` picks one of them.
    """

    base: MarkovGame
    leader: int = 0
    type_profile: Optional[tuple[str, str]] = None
    variants: Mapping[tuple[str, str], tuple] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.leader not in (0, 1):
            raise InvalidInputError(f"leader must be player 0 or 1, got {self.leader!r}")
        if self.type_profile is not None:
            profile = tuple(self.type_profile)
            if profile not in self.variants:
                raise InvalidInputError(f"type profile {profile!r} has no payoff variant")
            object.__setattr__(self, "type_profile", profile)

    @property
    def follower(self) -> int:
        return 1 - self.leader

    @property
    def game(self) -> MarkovGame:
        """The base game with the selected payoff variant applied."""
        if self.type_profile is None:
            return self.base
        return dataclasses.replace(self.base, utilities=self.variants[self.type_profile])


def _ordered(leader: int, leader_policy: MarkovPolicy, follower_policy: MarkovPolicy) -> list[MarkovPolicy]:
    return [leader_policy, follower_policy] if leader == 0 else [follower_policy, leader_policy]


def _follower_arrays(sgame: StackelbergMarkovGame, leader_policy: MarkovPolicy, stage: int | None):
    """Per state: leader-averaged rewards for both players ``(2, |B|)`` and kernel ``(|B|, |S|)``."""
    game = sgame.game
    out = []
    for s in range(len(game.states)):
        mix = leader_policy.at(s, stage).probs
        if sgame.leader == 0:
            rewards = np.stack([mix @ game.utilities[i][s] for i in range(2)])
            kernel = np.tensordot(mix, game.transitions[s], axes=(0, 0))
        else:
            rewards = np.stack([game.utilities[i][s] @ mix for i in range(2)])
            kernel = np.tensordot(game.transitions[s], mix, axes=(1, 0))
        out.append((rewards, kernel))
    return out


def _ties(q: np.ndarray) -> np.ndarray:
    return np.flatnonzero(q >= q.max() - TIE_TOL * max(1.0, abs(q.max())))


@dataclass(frozen=True)
class FollowerResponse:
    policy: MarkovPolicy
    values: np.ndarray


def _deterministic(game: MarkovGame, player: int, choice) -> tuple[Distribution, ...]:
    return tuple(Distribution.point(game.action_spaces[player][s], int(b)) for s, b in enumerate(choice))


def _greedy(arrays, values: np.ndarray, discount: float, who: int, minimize_for: int | None, allowed=None):
    """Per-state best actions for player ``who``; optionally refined by another player's min."""
    choice = []
    for s, (rewards, kernel) in enumerate(arrays):
        q = rewards[who] + discount * kernel @ values[who]
        best = _ties(q) if allowed is None else allowed[s]
        if minimize_for is not None:
            other = rewards[minimize_for] + discount * kernel @ values[minimize_for]
            sub = other[best]
            best = best[sub <= sub.min() + TIE_TOL * max(1.0, abs(sub.min()))]
        choice.append(int(best[0]))
    return choice


def follower_best_response_mdp(
    sgame: StackelbergMarkovGame,
    leader_policy: MarkovPolicy,
    tie_break: TieBreak = "lowest",
    tol: float = VALUE_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> FollowerResponse:
    """Deterministic optimal follower policy against a fixed leader policy.

    Value iteration runs to ``tol``; the greedy policy is then evaluated
    exactly and improved until stable, so the returned values are those of
    the returned policy. ``tie_break="lowest"`` takes the lowest-index
    optimal action; ``"pessimistic"`` takes, among follower-optimal actions,
    the ones minimizing the leader's value, then the lowest index.
    """
    if tie_break not in ("lowest", "pessimistic"):
        raise InvalidInputError(f"unknown tie_break {tie_break!r}")
    game = sgame.game
    leader, follower = sgame.leader, sgame.follower
    leader_policy.check(game, leader)
    n = len(game.states)

    if game.horizon is not None:
        return _finite_response(sgame, leader_policy, tie_break)

    arrays = _follower_arrays(sgame, leader_policy, None)
    v = np.zeros(n)
    for _ in range(max_sweeps):
        new = np.array([(r[follower] + game.discount * k @ v).max() for r, k in arrays])
        delta = np.abs(new - v).max()
        v = new
        if delta < tol:
            break
    else:
        raise ConvergenceError(f"follower value iteration did not settle in {max_sweeps} sweeps", v, max_sweeps)

    def evaluate(choice):
        pol = MarkovPolicy(_deterministic(game, follower, choice))
        return pol, state_values(game, _ordered(leader, leader_policy, pol))

    values = np.zeros((2, n))
    values[follower] = v
    choice = _greedy(arrays, values, game.discount, follower, None)
    while True:  # policy iteration from the greedy policy; finite since each switch strictly improves
        pol, values = evaluate(choice)
        q = [r[follower] + game.discount * k @ values[follower] for r, k in arrays]
        improved = [c if c in _ties(qs) else int(np.argmax(qs)) for c, qs in zip(choice, q)]
        if improved == choice:
            break
        choice = improved
    if tie_break == "lowest":
        choice = _greedy(arrays, values, game.discount, follower, None)
        pol, values = evaluate(choice)
        return FollowerResponse(pol, values[follower].copy())

    # restricted MDP: follower-optimal actions only, leader value minimized
    allowed = [_ties(r[follower] + game.discount * k @ values[follower]) for r, k in arrays]
    w = values[leader].copy()
    for _ in range(max_sweeps):
        new = np.array([(r[leader] + game.discount * k @ w)[allowed[s]].min() for s, (r, k) in enumerate(arrays)])
        delta = np.abs(new - w).max()
        w = new
        if delta < tol:
            break
    else:  # pragma: no cover - same contraction modulus as above
        raise ConvergenceError("pessimistic tie-break iteration did not settle", w, max_sweeps)
    both = values.copy()
    both[leader] = w
    choice = _greedy(arrays, both, game.discount, follower, leader, allowed)
    pol, values = evaluate(choice)
    return FollowerResponse(pol, values[follower].copy())


def _finite_response(sgame: StackelbergMarkovGame, leader_policy: MarkovPolicy, tie_break: TieBreak) -> FollowerResponse:
    game = sgame.game
    leader, follower = sgame.leader, sgame.follower
    n = len(game.states)
    values = np.zeros((2, n))
    stages: list[tuple[Distribution, ...]] = []
    for k in range(game.horizon - 1, -1, -1):
        arrays = _follower_arrays(sgame, leader_policy, k)
        choice = _greedy(arrays, values, game.discount, follower, leader if tie_break == "pessimistic" else None)
        new = np.zeros((2, n))
        for s, (r, ker) in enumerate(arrays):
            for i in range(2):
                new[i, s] = r[i, choice[s]] + game.discount * ker[choice[s]] @ values[i]
        values = new
        stages.insert(0, _deterministic(game, follower, choice))
    return FollowerResponse(MarkovPolicy(stages[0], tuple(stages)), values[follower].copy())


@dataclass(frozen=True)
class CommitmentResult:
    """Best pure stationary leader commitment and the follower's reply.

    ``metadata`` records the searched policy class and tie-break order.
    """

    leader_policy: MarkovPolicy
    leader_value: float
    follower_policy: MarkovPolicy
    follower_value: float
    evaluated: int
    metadata: Mapping[str, str]


def leader_policy_count(sgame: StackelbergMarkovGame) -> int:
    return math.prod(len(space) for space in sgame.game.action_spaces[sgame.leader])


def solve_leader_commitment(
    sgame: StackelbergMarkovGame,
    start_state: str | int,
    policy_space: Literal["purePerState"] = "purePerState",
    tie_break: TieBreak = "pessimistic",
) -> CommitmentResult:
    """Enumerate pure stationary leader policies and keep the best at ``start_state``.

    Policies are visited in lexicographic order of their per-state action
    indices; a later policy replaces the incumbent only if strictly better.
    """
    if policy_space != "purePerState":
        raise InvalidInputError(f"unsupported leader policy space {policy_space!r}")
    game = sgame.game
    start = game.state_index(start_state)
    count = leader_policy_count(sgame)
    if count > MAX_LEADER_POLICIES:
        raise UnsupportedSizeError(f"{count} pure leader policies exceed {MAX_LEADER_POLICIES}", MAX_LEADER_POLICIES, count)
    spaces = game.action_spaces[sgame.leader]
    best: CommitmentResult | None = None
    for encoding in itertools.product(*(range(len(sp)) for sp in spaces)):
        lp = MarkovPolicy(tuple(Distribution.point(sp, a) for sp, a in zip(spaces, encoding)))
        reply = follower_best_response_mdp(sgame, lp, tie_break)
        values = state_values(game, _ordered(sgame.leader, lp, reply.policy))
        value = float(values[sgame.leader, start])
        if best is None or value > best.leader_value + TIE_TOL * max(1.0, abs(best.leader_value)):
            best = CommitmentResult(lp, value, reply.policy, float(values[sgame.follower, start]), 0, {})
    metadata = {
        "policySpace": policy_space,
        "restriction": "stationary state-feedback leader policies; history-dependent commitments not searched",
        "followerTieBreak": "follower-optimal, then leader-worst, then lowest index"
        if tie_break == "pessimistic"
        else "follower-optimal, then lowest index",
    }
    return dataclasses.replace(best, evaluated=count, metadata=metadata)


@dataclass(frozen=True)
class EpisodeStep:
    stage: int
    state: str
    leader_action: str
    follower_action: str
    leader_payoff: float
    follower_payoff: float


@dataclass(frozen=True)
class EpisodeResult:
    """Sampled trajectory and the realized discounted returns of both sides."""

    trace: tuple[EpisodeStep, ...]
    j_leader: float
    j_follower: float

    def to_records(self) -> list[dict]:
        return [dataclasses.asdict(step) for step in self.trace]


def _sample(cdf: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)


def run_deception_episode(
    sgame: StackelbergMarkovGame,
    leader_policy: MarkovPolicy,
    follower_policy: MarkovPolicy,
    start_state: str | int,
    horizon: int,
    seed: int,
) -> EpisodeResult:
    """Simulate ``horizon`` stages; one seeded generator drives every draw."""
    if horizon < 1:
        raise InvalidInputError("horizon must be a positive integer")
    game = sgame.game
    leader, follower = sgame.leader, sgame.follower
    leader_policy.check(game, leader)
    follower_policy.check(game, follower)
    rng = np.random.default_rng(seed)
    s = game.state_index(start_state)
    steps = []
    j = [0.0, 0.0]
    weight = 1.0
    for k in range(horizon):
        stage = k if game.horizon is not None else None
        a = _sample(np.cumsum(leader_policy.at(s, stage).probs), rng.random())
        b = _sample(np.cumsum(follower_policy.at(s, stage).probs), rng.random())
        joint = (a, b) if leader == 0 else (b, a)
        pay = [float(game.utilities[i][s][joint]) for i in range(2)]
        steps.append(
            EpisodeStep(
                k,
                game.states[s],
                game.action_spaces[leader][s].labels[a],
                game.action_spaces[follower][s].labels[b],
                pay[leader],
                pay[follower],
            )
        )
        j[0] += weight * pay[leader]
        j[1] += weight * pay[follower]
        weight *= game.discount
        s = _sample(np.cumsum(game.transitions[s][joint]), rng.random())
    return EpisodeResult(tuple(steps), j[0], j[1])
