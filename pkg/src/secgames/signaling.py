"""One-shot sender/receiver signaling games and pure PBNE enumeration.

The sender (defender) learns its type, sends a signal; the receiver
(attacker) sees only the signal, forms a belief over types and acts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from secgames.core import ActionSpace, Distribution, _frozen, as_space
from secgames.errors import InvalidInputError, UnsupportedSizeError

MAX_GAME_SIZE = 1000
MAX_CANDIDATES = 1_000_000
OPTIMALITY_TOL = 1e-9

Classification = Literal["separating", "pooling", "hybrid"]


@dataclass(frozen=True, eq=False)
class SignalingGame:
    """Types, prior, signals, receiver actions and the two utility tensors.

    Both tensors are indexed ``[type, signal, action]``.
    """

    types: ActionSpace
    prior: Distribution
    signals: ActionSpace
    actions: ActionSpace
    sender_utility: np.ndarray
    receiver_utility: np.ndarray

    def __post_init__(self) -> None:
        for name in ("types", "signals", "actions"):
            object.__setattr__(self, name, as_space(getattr(self, name)))
        if self.prior.space != self.types:
            raise InvalidInputError("prior must be a distribution over the types")
        shape = (len(self.types), len(self.signals), len(self.actions))
        for name in ("sender_utility", "receiver_utility"):
            arr = _frozen(getattr(self, name))
            if arr.shape != shape:
                raise InvalidInputError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} must be finite")
            object.__setattr__(self, name, arr)

    @property
    def size(self) -> int:
        return len(self.types) * len(self.signals) * len(self.actions)


def bayes_update(
    prior: Distribution, sender_strategy: Sequence[Distribution], signal: str | int
) -> Optional[Distribution]:
    """Posterior over types after ``signal``; ``None`` when the signal is off-path.

    ``sender_strategy[t]`` is the signal distribution of type ``t``.
    """
    if len(sender_strategy) != len(prior):
        raise InvalidInputError("sender strategy needs one signal distribution per type")
    space = sender_strategy[0].space
    if any(d.space != space for d in sender_strategy):
        raise InvalidInputError("all sender distributions must share one signal space")
    s = space.index(signal)
    joint = [p * d.probs[s] for p, d in zip(prior.probs, sender_strategy)]
    total = math.fsum(joint)
    if total == 0:
        return None
    return Distribution(prior.space, [j / total for j in joint])


@dataclass(frozen=True)
class BeliefSystem:
    """One belief per signal, with on-path flags and where each belief came from.

    ``sources[s]`` is ``"bayes"`` on path; off path it names the witness from
    the search set: ``"point:<type>"``, ``"prior"`` or ``"uniform"``.
    """

    beliefs: tuple[Distribution, ...]
    on_path: tuple[bool, ...]
    sources: tuple[str, ...]


@dataclass(frozen=True)
class PBNEAssessment:
    """A pure assessment: signal index per type, action index per signal, beliefs."""

    sender: tuple[int, ...]
    receiver: tuple[int, ...]
    beliefs: BeliefSystem
    classification: Classification

    def sender_map(self, game: SignalingGame) -> dict[str, str]:
        return {game.types.labels[t]: game.signals.labels[s] for t, s in enumerate(self.sender)}

    def receiver_map(self, game: SignalingGame) -> dict[str, str]:
        return {game.signals.labels[s]: game.actions.labels[a] for s, a in enumerate(self.receiver)}


def pure_sender_strategy(game: SignalingGame, sender: Sequence[int]) -> tuple[Distribution, ...]:
    return tuple(Distribution.point(game.signals, s) for s in sender)


def _optimal_actions(game: SignalingGame, belief: np.ndarray, signal: int) -> tuple[int, ...]:
    values = belief @ game.receiver_utility[:, signal, :]
    best = values.max()
    tol = OPTIMALITY_TOL * max(1.0, abs(best))
    return tuple(int(a) for a in np.flatnonzero(values >= best - tol))


def off_path_search_set(game: SignalingGame) -> list[tuple[str, Distribution]]:
    """Candidate off-path beliefs in the order they are tried."""
    points = [(f"point:{label}", Distribution.point(game.types, label)) for label in game.types]
    return points + [("prior", game.prior), ("uniform", Distribution.uniform(game.types))]


def classify(sender: Sequence[int], n_types: int) -> Classification:
    distinct = len(set(sender))
    if distinct == 1:
        return "pooling"
    if distinct == n_types:
        return "separating"
    return "hybrid"


def enumerate_pure_pbne(game: SignalingGame) -> list[PBNEAssessment]:
    """All pure perfect Bayesian assessments, sender maps in lexicographic order.

    For each sender map the receiver is restricted to actions that are
    optimal at the Bayes posterior (on-path signals) or under some belief of
    the off-path search set; the sender's incentive condition is then checked
    against that receiver map. The first witnessing belief is recorded.
    """
    if game.size > MAX_GAME_SIZE:
        raise UnsupportedSizeError(
            f"|types|*|signals|*|actions| = {game.size} exceeds {MAX_GAME_SIZE}", MAX_GAME_SIZE, game.size
        )
    n_types, n_signals = len(game.types), len(game.signals)
    search = off_path_search_set(game)
    found: list[PBNEAssessment] = []
    for sender in itertools.product(range(n_signals), repeat=n_types):
        strategy = pure_sender_strategy(game, sender)
        # per signal: list of (action, belief, source) choices
        options: list[list[tuple[int, Distribution, str]]] = []
        for s in range(n_signals):
            posterior = bayes_update(game.prior, strategy, s)
            if posterior is not None:
                options.append([(a, posterior, "bayes") for a in _optimal_actions(game, posterior.probs, s)])
                continue
            witnessed: dict[int, tuple[Distribution, str]] = {}
            for source, belief in search:
                for a in _optimal_actions(game, belief.probs, s):
                    witnessed.setdefault(a, (belief, source))
            options.append([(a, *witnessed[a]) for a in sorted(witnessed)])
        count = math.prod(len(o) for o in options)
        if count > MAX_CANDIDATES:
            raise UnsupportedSizeError(
                f"{count} receiver candidates for one sender map exceed {MAX_CANDIDATES}", MAX_CANDIDATES, count
            )
        for choice in itertools.product(*options):
            receiver = tuple(a for a, _, _ in choice)
            if not _sender_optimal(game, sender, receiver):
                continue
            beliefs = BeliefSystem(
                tuple(b for _, b, _ in choice),
                tuple(src == "bayes" for _, _, src in choice),
                tuple(src for _, _, src in choice),
            )
            found.append(PBNEAssessment(sender, receiver, beliefs, classify(sender, n_types)))
    return found


def _sender_optimal(game: SignalingGame, sender: Sequence[int], receiver: Sequence[int]) -> bool:
    u = game.sender_utility
    for t, s in enumerate(sender):
        payoffs = [u[t, k, receiver[k]] for k in range(len(receiver))]
        best = max(payoffs)
        if payoffs[s] < best - OPTIMALITY_TOL * max(1.0, abs(best)):
            return False
    return True


def build_honeypot_game(
    cost_signal: float,
    attack_gain_real: float,
    attack_loss_honeypot: float,
    prior_real: float,
    defender_stakes: bool = False,
) -> SignalingGame:
    """Real-system vs honeypot deception template.

    Types ``(real, honeypot)``, signals ``(lookReal, lookFake)``, attacker
    actions ``(attack, withdraw)``. The attacker earns ``attack_gain_real``
    by attacking a real system and loses ``attack_loss_honeypot`` attacking a
    honeypot. Disguising (a real system looking fake, or a honeypot looking
    real) costs the defender ``cost_signal``; every other payoff is 0.

    With ``defender_stakes`` the defender additionally receives the negative
    of the attacker's outcome, so its signal choice depends on the response.
    """
    if not 0 < prior_real < 1:
        raise InvalidInputError(f"prior_real must lie in (0, 1), got {prior_real}")
    receiver = np.zeros((2, 2, 2))
    receiver[0, :, 0] = attack_gain_real
    receiver[1, :, 0] = -attack_loss_honeypot
    sender = np.zeros((2, 2, 2))
    sender[0, 1, :] = -cost_signal
    sender[1, 0, :] = -cost_signal
    if defender_stakes:
        sender = sender - receiver
    return SignalingGame(
        ActionSpace(("real", "honeypot")),
        Distribution(("real", "honeypot"), [prior_real, 1 - prior_real]),
        ActionSpace(("lookReal", "lookFake")),
        ActionSpace(("attack", "withdraw")),
        sender,
        receiver,
    )
