"""Finite game primitives: action spaces, mixed strategies, payoff containers.

Everything here is immutable. Payoff arrays are stored as read-only float64
numpy arrays so a constructed game can be shared freely between threads.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Literal, Mapping, Sequence, Union

import numpy as np

from secgames.errors import ConvergenceError, InvalidInputError

SIMPLEX_TOL = 1e-9
RESCALE_TOL = 1e-12
TIE_TOL = 1e-12

Player = Union[int, Literal["row", "col"]]


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _player_index(player: Player) -> int:
    if player in (0, "row"):
        return 0
    if player in (1, "col"):
        return 1
    raise InvalidInputError(f"player must be 'row'/'col' or 0/1, got {player!r}")


@dataclass(frozen=True)
class ActionSpace:
    """Ordered, duplicate-free set of action labels.

    The label order is canonical: every probability vector and payoff axis
    indexed by this space follows it.
    """

    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        if not labels:
            raise InvalidInputError("action space must be nonempty")
        if any(not isinstance(label, str) for label in labels):
            raise InvalidInputError(f"action labels must be strings: {labels!r}")
        if len(set(labels)) != len(labels):
            raise InvalidInputError(f"duplicate action labels in {labels!r}")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[str]:
        return iter(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def index(self, label: str | int) -> int:
        if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
            if not 0 <= label < len(self.labels):
                raise InvalidInputError(f"action index {label} out of range for {self.labels!r}")
            return int(label)
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvalidInputError(f"unknown action {label!r}; expected one of {self.labels!r}") from None


def as_space(space: ActionSpace | Iterable[str]) -> ActionSpace:
    return space if isinstance(space, ActionSpace) else ActionSpace(tuple(space))


@dataclass(frozen=True, eq=False)
class Distribution:
    """A point on the probability simplex over ``space``.

    Inputs whose total is within 1e-9 of one are renormalized (totals within
    rounding noise are kept as given); anything further off is rejected, as
    are negative entries.
    """

    space: ActionSpace
    probs: np.ndarray

    def __post_init__(self) -> None:
        space = as_space(self.space)
        raw = [float(Fraction(p)) if isinstance(p, str) else float(p) for p in np.ravel(self.probs)]
        if len(raw) != len(space):
            raise InvalidInputError(
                f"distribution has {len(raw)} entries but the space has {len(space)} actions"
            )
        if any(not math.isfinite(p) for p in raw):
            raise InvalidInputError(f"non-finite probability in {raw!r}")
        if any(p < 0 for p in raw):
            raise InvalidInputError(f"negative probability in {raw!r}")
        total = math.fsum(raw)
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise InvalidInputError(f"probabilities sum to {total:.12g}, not 1")
        # rescaled vectors land inside this band, so reloading a distribution is a no-op
        if abs(total - 1.0) > RESCALE_TOL:
            raw = [p / total for p in raw]
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "probs", _frozen(raw))

    @classmethod
    def uniform(cls, space: ActionSpace | Iterable[str]) -> Distribution:
        space = as_space(space)
        n = len(space)
        return cls(space, [1.0 / n] * n)

    @classmethod
    def point(cls, space: ActionSpace | Iterable[str], action: str | int) -> Distribution:
        space = as_space(space)
        probs = [0.0] * len(space)
        probs[space.index(action)] = 1.0
        return cls(space, probs)

    @classmethod
    def from_mapping(cls, space: ActionSpace | Iterable[str], weights: Mapping[str, float]) -> Distribution:
        space = as_space(space)
        unknown = set(weights) - set(space.labels)
        if unknown:
            raise InvalidInputError(f"labels {sorted(unknown)!r} not in {space.labels!r}")
        return cls(space, [weights.get(label, 0.0) for label in space.labels])

    def __len__(self) -> int:
        return len(self.space)

    def __getitem__(self, action: str | int) -> float:
        return float(self.probs[self.space.index(action)])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.probs, other.probs)

    def __hash__(self) -> int:
        return hash((self.space, self.probs.tobytes()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{label}={p:.6g}" for label, p in zip(self.space.labels, self.probs))
        return f"Distribution({inner})"

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.probs > 0))

    def as_dict(self) -> dict[str, float]:
        return {label: float(p) for label, p in zip(self.space.labels, self.probs)}

    def l1(self, other: Distribution) -> float:
        if self.space != other.space:
            raise InvalidInputError("L1 distance needs distributions over the same space")
        return math.fsum(abs(a - b) for a, b in zip(self.probs, other.probs))


@dataclass(frozen=True, eq=False)
class PayoffTensor:
    """N-player normal-form game: one utility tensor per player."""

    spaces: tuple[ActionSpace, ...]
    utilities: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        spaces = tuple(as_space(s) for s in self.spaces)
        if len(spaces) < 2:
            raise InvalidInputError("a game needs at least two players")
        shape = tuple(len(s) for s in spaces)
        utilities = tuple(_frozen(u) for u in self.utilities)
        if len(utilities) != len(spaces):
            raise InvalidInputError(f"{len(spaces)} players but {len(utilities)} utility tensors")
        for i, u in enumerate(utilities):
            if u.shape != shape:
                raise InvalidInputError(f"utility tensor {i} has shape {u.shape}, expected {shape}")
            if not np.all(np.isfinite(u)):
                raise InvalidInputError(f"utility tensor {i} has non-finite entries")
        object.__setattr__(self, "spaces", spaces)
        object.__setattr__(self, "utilities", utilities)

    @property
    def player_count(self) -> int:
        return len(self.spaces)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.spaces)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PayoffTensor):
            return NotImplemented
        return self.spaces == other.spaces and all(
            np.array_equal(a, b) for a, b in zip(self.utilities, other.utilities)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class BimatrixGame:
    """Two-player game; player 0 picks rows, player 1 picks columns."""

    row_space: ActionSpace
    col_space: ActionSpace
    row_payoff: np.ndarray
    col_payoff: np.ndarray
    zero_sum: bool = False

    def __post_init__(self) -> None:
        row_space, col_space = as_space(self.row_space), as_space(self.col_space)
        a, b = _frozen(self.row_payoff), _frozen(self.col_payoff)
        shape = (len(row_space), len(col_space))
        for name, m in (("row", a), ("column", b)):
            if m.shape != shape:
                raise InvalidInputError(f"{name} payoff has shape {m.shape}, expected {shape}")
            if not np.all(np.isfinite(m)):
                raise InvalidInputError(f"{name} payoff has non-finite entries")
        if self.zero_sum and not np.array_equal(b, -a):
            raise InvalidInputError("zero-sum flag set but column payoff is not the exact negation")
        object.__setattr__(self, "row_space", row_space)
        object.__setattr__(self, "col_space", col_space)
        object.__setattr__(self, "row_payoff", a)
        object.__setattr__(self, "col_payoff", b)

    @classmethod
    def from_zero_sum(cls, row_space, col_space, payoff) -> BimatrixGame:
        a = np.array(payoff, dtype=float)
        return cls(row_space, col_space, a, -a, zero_sum=True)

    @property
    def shape(self) -> tuple[int, int]:
        return self.row_payoff.shape  # type: ignore[return-value]

    def space(self, player: Player) -> ActionSpace:
        return (self.row_space, self.col_space)[_player_index(player)]

    def payoff(self, player: Player) -> np.ndarray:
        return (self.row_payoff, self.col_payoff)[_player_index(player)]

    def to_tensor(self) -> PayoffTensor:
        return PayoffTensor((self.row_space, self.col_space), (self.row_payoff, self.col_payoff))

    def permuted(self, row_perm: Sequence[int], col_perm: Sequence[int]) -> BimatrixGame:
        """Reorder actions: new row ``i`` is old row ``row_perm[i]``."""
        rp, cp = list(row_perm), list(col_perm)
        return BimatrixGame(
            [self.row_space.labels[i] for i in rp],
            [self.col_space.labels[j] for j in cp],
            self.row_payoff[np.ix_(rp, cp)],
            self.col_payoff[np.ix_(rp, cp)],
            zero_sum=self.zero_sum,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BimatrixGame):
            return NotImplemented
        return (
            self.row_space == other.row_space
            and self.col_space == other.col_space
            and self.zero_sum == other.zero_sum
            and np.array_equal(self.row_payoff, other.row_payoff)
            and np.array_equal(self.col_payoff, other.col_payoff)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ProspectParams:
    """Value-function shape for prospect-theoretic payoffs.

    Defaults are the conventional Tversky-Kahneman estimates.
    """

    gain_exponent: float = 0.88
    loss_exponent: float = 0.88
    loss_aversion: float = 2.25
    reference_point: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.gain_exponent <= 1:
            raise InvalidInputError(f"gain exponent must lie in (0, 1], got {self.gain_exponent}")
        if not 0 < self.loss_exponent <= 1:
            raise InvalidInputError(f"loss exponent must lie in (0, 1], got {self.loss_exponent}")
        if self.loss_aversion < 1:
            raise InvalidInputError(f"loss aversion must be >= 1, got {self.loss_aversion}")
        if not math.isfinite(self.reference_point):
            raise InvalidInputError("reference point must be finite")


@dataclass(frozen=True)
class BestResponse:
    value: float
    actions: frozenset[int]


@dataclass(frozen=True)
class NashCheck:
    ok: bool
    gains: tuple[float, ...] = field(default_factory=tuple)

    def __bool__(self) -> bool:
        return self.ok


def _as_tensor(game: PayoffTensor | BimatrixGame) -> PayoffTensor:
    return game.to_tensor() if isinstance(game, BimatrixGame) else game


def _check_profile(game: PayoffTensor, profile: Sequence[Distribution]) -> None:
    if len(profile) != game.player_count:
        raise InvalidInputError(f"profile has {len(profile)} strategies for {game.player_count} players")
    for i, (space, sigma) in enumerate(zip(game.spaces, profile)):
        if not isinstance(sigma, Distribution):
            raise InvalidInputError(f"strategy {i} is not a Distribution")
        if sigma.space != space:
            raise InvalidInputError(f"strategy {i} is over {sigma.space.labels!r}, expected {space.labels!r}")


def expected_utility(
    game: PayoffTensor | BimatrixGame, profile: Sequence[Distribution], player: Player
) -> float:
    """Expected payoff of ``player`` under independent mixed strategies.

    Sums probability-weighted utilities over every joint action with
    ``math.fsum``, so symmetric cancellations come out exactly zero.
    """
    tensor = _as_tensor(game)
    _check_profile(tensor, profile)
    i = player if isinstance(player, int) else _player_index(player)
    if not 0 <= i < tensor.player_count:
        raise InvalidInputError(f"player index {i} out of range")
    u = tensor.utilities[i]
    supports = [[(a, float(sigma.probs[a])) for a in sigma.support] for sigma in profile]
    terms = []
    for joint in itertools.product(*supports):
        weight = 1.0
        for _, p in joint:
            weight *= p
        terms.append(weight * u[tuple(a for a, _ in joint)])
    return math.fsum(terms)


def deviation_payoffs(
    game: PayoffTensor | BimatrixGame, profile: Sequence[Distribution], player: int
) -> np.ndarray:
    """Payoff of each pure action of ``player`` against the others' mixes."""
    tensor = _as_tensor(game)
    _check_profile(tensor, profile)
    u = tensor.utilities[player]
    # contract opponents from the last axis down so axis numbers stay valid
    for j in reversed(range(tensor.player_count)):
        if j != player:
            u = np.tensordot(u, profile[j].probs, axes=([j], [0]))
    return np.asarray(u, dtype=float)


def best_response(game: BimatrixGame, opponent_mix: Distribution, player: Player) -> BestResponse:
    """Best pure-response value and the full set of maximizing actions."""
    i = _player_index(player)
    opp_space = game.space(1 - i)
    if not isinstance(opponent_mix, Distribution) or opponent_mix.space != opp_space:
        raise InvalidInputError(f"opponent mix must be a Distribution over {opp_space.labels!r}")
    m = game.payoff(i) if i == 0 else game.payoff(i).T
    values = np.array([math.fsum(row * opponent_mix.probs) for row in m])
    best = float(values.max())
    tol = TIE_TOL * max(1.0, float(np.abs(m).max(initial=0.0)))
    return BestResponse(best, frozenset(int(a) for a in np.flatnonzero(values >= best - tol)))


def is_epsilon_nash(
    game: PayoffTensor | BimatrixGame, profile: Sequence[Distribution], epsilon: float
) -> NashCheck:
    """Check that no player gains more than ``epsilon`` from a pure deviation.

    The returned ``gains`` are each player's best deviation gain, floored at 0.
    """
    if epsilon < 0:
        raise InvalidInputError("epsilon must be nonnegative")
    tensor = _as_tensor(game)
    _check_profile(tensor, profile)
    gains = []
    for i in range(tensor.player_count):
        current = expected_utility(tensor, profile, i)
        best = float(deviation_payoffs(tensor, profile, i).max())
        gains.append(max(0.0, best - current))
    return NashCheck(all(g <= epsilon for g in gains), tuple(gains))


def _logit(values: np.ndarray, rationality: float) -> np.ndarray:
    z = rationality * (values - values.max())
    w = np.exp(z)
    return w / w.sum()


def quantal_response_equilibrium(
    game: BimatrixGame,
    rationality: float,
    damping: float = 0.5,
    max_iter: int = 100_000,
    tol: float = 1e-10,
) -> tuple[Distribution, Distribution]:
    """Logit quantal response equilibrium by damped fixed-point iteration.

    Both players update simultaneously toward their logit responses,
    ``sigma <- (1 - damping) * sigma + damping * logit(sigma)``, starting
    from uniform play.

    Raises:
        ConvergenceError: sup-norm change still >= ``tol`` after ``max_iter``
            sweeps. ``last_iterate`` holds the final pair of Distributions.
    """
    if rationality < 0:
        raise InvalidInputError("rationality must be nonnegative")
    if not 0 < damping <= 1:
        raise InvalidInputError("damping must lie in (0, 1]")
    a, b = game.row_payoff, game.col_payoff
    m, n = game.shape
    p = np.full(m, 1.0 / m)
    q = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        p_new = (1 - damping) * p + damping * _logit(a @ q, rationality)
        q_new = (1 - damping) * q + damping * _logit(b.T @ p, rationality)
        p_new /= p_new.sum()
        q_new /= q_new.sum()
        change = max(np.abs(p_new - p).max(), np.abs(q_new - q).max())
        p, q = p_new, q_new
        if change < tol:
            return Distribution(game.row_space, p), Distribution(game.col_space, q)
    raise ConvergenceError(
        f"logit iteration did not settle within {max_iter} sweeps",
        last_iterate=(Distribution(game.row_space, p), Distribution(game.col_space, q)),
        iterations=max_iter,
    )


def level_k_strategies(game: BimatrixGame, k: int) -> list[tuple[Distribution, Distribution]]:
    """Level-0 is uniform; level j best-responds (lowest index) to level j-1."""
    if k < 0:
        raise InvalidInputError("k must be nonnegative")
    levels = [(Distribution.uniform(game.row_space), Distribution.uniform(game.col_space))]
    for _ in range(k):
        prev_row, prev_col = levels[-1]
        row_br = min(best_response(game, prev_col, "row").actions)
        col_br = min(best_response(game, prev_row, "col").actions)
        levels.append((Distribution.point(game.row_space, row_br), Distribution.point(game.col_space, col_br)))
    return levels


def prospect_transform(payoffs, params: ProspectParams | None = None) -> np.ndarray:
    """Map each payoff through the reference-dependent value function.

    Gains ``z >= r`` become ``(z - r) ** alpha``; losses become
    ``-lambda * (r - z) ** beta``.
    """
    params = params or ProspectParams()
    z = np.asarray(payoffs, dtype=float)
    r = params.reference_point
    gains = np.clip(z - r, 0.0, None) ** params.gain_exponent
    losses = -params.loss_aversion * np.clip(r - z, 0.0, None) ** params.loss_exponent
    return np.where(z >= r, gains, losses)
