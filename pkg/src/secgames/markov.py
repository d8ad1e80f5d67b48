"""Two-player discounted stochastic games.

A :class:`MarkovGame` stores, for every state, the joint-action transition
kernel as an array of shape ``(|A_row(s)|, |A_col(s)|, |S|)`` and one stage
payoff matrix per player. Infinite-horizon games use stationary policies;
finite-horizon games (``horizon=K``) run stages ``0..K-1`` and may carry one
policy per stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from secgames.core import SIMPLEX_TOL, ActionSpace, BimatrixGame, Distribution, _frozen, _player_index, as_space
from secgames.equilibrium import solve_zero_sum
from secgames.errors import ConvergenceError, InvalidInputError

VALUE_TOL = 1e-8
MAX_SWEEPS = 100_000
RESIDUAL_TOL = 1e-10


def _stochastic(kernel: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(kernel)) or (kernel < 0).any():
        raise InvalidInputError(f"{what} must be finite and nonnegative")
    sums = kernel.sum(axis=-1)
    bad = np.abs(sums - 1.0) > SIMPLEX_TOL
    if bad.any():
        raise InvalidInputError(f"{what} rows must sum to 1, found {sums[bad].ravel()[0]!r}")


@dataclass(frozen=True)
class ObservationModel:
    """Per-player noisy observation kernels, kept for round-tripping only.

    ``kernels[i][s]`` has shape ``(|A_row(s)|, |A_col(s)|, |labels[i]|)``.
    """

    labels: tuple[ActionSpace, ...]
    kernels: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(as_space(s) for s in self.labels))
        kernels = tuple(tuple(_frozen(k) for k in per_player) for per_player in self.kernels)
        if len(kernels) != len(self.labels):
            raise InvalidInputError("one observation kernel list per player is required")
        for i, per_player in enumerate(kernels):
            for k in per_player:
                if k.ndim != 3 or k.shape[-1] != len(self.labels[i]):
                    raise InvalidInputError(f"observation kernel of player {i} has shape {k.shape}")
                _stochastic(k, f"observation kernel of player {i}")
        object.__setattr__(self, "kernels", kernels)


@dataclass(frozen=True, eq=False)
class MarkovGame:
    states: tuple[str, ...]
    action_spaces: tuple[tuple[ActionSpace, ...], tuple[ActionSpace, ...]]
    transitions: tuple[np.ndarray, ...]
    utilities: tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...]]
    discount: float
    horizon: Optional[int] = None
    observation: Optional[ObservationModel] = None

    def __post_init__(self) -> None:
        states = tuple(self.states)
        if not states or len(set(states)) != len(states):
            raise InvalidInputError("states must be a nonempty list of distinct labels")
        n = len(states)
        if len(self.action_spaces) != 2 or len(self.utilities) != 2:
            raise InvalidInputError("Markov games here have exactly two players")
        spaces = tuple(tuple(as_space(a) for a in per_player) for per_player in self.action_spaces)
        if any(len(per_player) != n for per_player in spaces):
            raise InvalidInputError("each player needs one action space per state")
        if len(self.transitions) != n:
            raise InvalidInputError("one transition array per state is required")
        transitions = tuple(_frozen(t) for t in self.transitions)
        utilities = tuple(tuple(_frozen(u) for u in per_player) for per_player in self.utilities)
        for s in range(n):
            shape = (len(spaces[0][s]), len(spaces[1][s]))
            if transitions[s].shape != shape + (n,):
                raise InvalidInputError(f"transition at state {states[s]!r} has shape {transitions[s].shape}, expected {shape + (n,)}")
            _stochastic(transitions[s], f"transition at state {states[s]!r}")
            for i in range(2):
                if len(utilities[i]) != n:
                    raise InvalidInputError("each player needs one stage utility per state")
                if utilities[i][s].shape != shape:
                    raise InvalidInputError(f"utility of player {i} at state {states[s]!r} has shape {utilities[i][s].shape}")
                if not np.all(np.isfinite(utilities[i][s])):
                    raise InvalidInputError("stage utilities must be finite")
        if self.horizon is None:
            if not 0 < self.discount < 1:
                raise InvalidInputError(f"infinite-horizon discount must lie in (0, 1), got {self.discount}")
        else:
            if int(self.horizon) != self.horizon or self.horizon < 1:
                raise InvalidInputError("horizon must be a positive integer or None")
            if not 0 < self.discount <= 1:
                raise InvalidInputError(f"finite-horizon discount must lie in (0, 1], got {self.discount}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "action_spaces", spaces)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "utilities", utilities)

    @classmethod
    def single_state(
        cls, stage: BimatrixGame, discount: float, horizon: Optional[int] = None, state: str = "s0"
    ) -> MarkovGame:
        """Repeat one bimatrix stage game forever (or for ``horizon`` stages)."""
        m, n = stage.shape
        return cls(
            (state,),
            ((stage.row_space,), (stage.col_space,)),
            (np.ones((m, n, 1)),),
            ((stage.row_payoff,), (stage.col_payoff,)),
            discount,
            horizon,
        )

    @property
    def zero_sum(self) -> bool:
        return all(np.array_equal(u, -v) for u, v in zip(*self.utilities))

    def state_index(self, state: str | int) -> int:
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if not 0 <= state < len(self.states):
                raise InvalidInputError(f"state index {state} out of range")
            return int(state)
        try:
            return self.states.index(state)
        except ValueError:
            raise InvalidInputError(f"unknown state {state!r}") from None

    def stage_game(self, state: str | int, continuation: Sequence[float] | None = None) -> BimatrixGame:
        """Stage payoffs at ``state`` plus discounted expected continuation values."""
        s = self.state_index(state)
        payoffs = [self.utilities[i][s] for i in range(2)]
        if continuation is not None:
            cont = np.asarray(continuation, dtype=float)
            if cont.ndim == 1:
                cont = np.stack([cont, -cont]) if self.zero_sum else np.stack([cont, cont])
            payoffs = [payoffs[i] + self.discount * (self.transitions[s] @ cont[i]) for i in range(2)]
        if self.zero_sum:
            # negation commutes exactly with the float ops above, so the row matrix suffices
            return BimatrixGame.from_zero_sum(self.action_spaces[0][s], self.action_spaces[1][s], payoffs[0])
        return BimatrixGame(self.action_spaces[0][s], self.action_spaces[1][s], payoffs[0], payoffs[1])


@dataclass(frozen=True)
class MarkovPolicy:
    """One distribution per state, or per stage and state for finite horizons.

    When ``stages`` is given, ``stages[k][s]`` is played at stage ``k`` and
    ``dists`` is ignored by finite-horizon evaluation.
    """

    dists: tuple[Distribution, ...]
    stages: Optional[tuple[tuple[Distribution, ...], ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "dists", tuple(self.dists))
        if self.stages is not None:
            object.__setattr__(self, "stages", tuple(tuple(stage) for stage in self.stages))

    @classmethod
    def uniform(cls, game: MarkovGame, player: int | str) -> MarkovPolicy:
        i = _player_index(player)
        return cls(tuple(Distribution.uniform(space) for space in game.action_spaces[i]))

    def at(self, state: int, stage: int | None = None) -> Distribution:
        if stage is not None and self.stages is not None:
            return self.stages[stage][state]
        return self.dists[state]

    def check(self, game: MarkovGame, player: int) -> None:
        tables = [self.dists] if self.stages is None else list(self.stages)
        if self.stages is not None and game.horizon is not None and len(self.stages) != game.horizon:
            raise InvalidInputError(f"policy has {len(self.stages)} stages, game horizon is {game.horizon}")
        for table in tables:
            if len(table) != len(game.states):
                raise InvalidInputError(f"policy covers {len(table)} states, game has {len(game.states)}")
            for s, dist in enumerate(table):
                if dist.space != game.action_spaces[player][s]:
                    raise InvalidInputError(f"policy of player {player} at state {game.states[s]!r} is on the wrong action space")


def _check_policies(game: MarkovGame, policies: Sequence[MarkovPolicy]) -> None:
    if len(policies) != 2:
        raise InvalidInputError("one policy per player is required")
    for i, pol in enumerate(policies):
        pol.check(game, i)


def _induced(game: MarkovGame, policies: Sequence[MarkovPolicy], stage: int | None):
    """Per-state expected stage rewards (2, |S|) and state-to-state matrix."""
    n = len(game.states)
    rewards = np.zeros((2, n))
    chain = np.zeros((n, n))
    for s in range(n):
        p, q = policies[0].at(s, stage).probs, policies[1].at(s, stage).probs
        joint = np.outer(p, q)
        for i in range(2):
            rewards[i, s] = math.fsum((joint * game.utilities[i][s]).ravel())
        chain[s] = np.tensordot(joint, game.transitions[s], axes=([0, 1], [0, 1]))
    return rewards, chain


def state_values(game: MarkovGame, policies: Sequence[MarkovPolicy], stage: int = 0) -> np.ndarray:
    """Value of every state for both players, shape ``(2, |S|)``.

    Infinite horizon solves ``(I - gamma P) V = r``. Finite horizons run
    backward induction from a zero terminal value; ``stage`` picks which
    stage's value-to-go is returned.
    """
    _check_policies(game, policies)
    n = len(game.states)
    if game.horizon is None:
        rewards, chain = _induced(game, policies, None)
        system = np.eye(n) - game.discount * chain
        values = np.linalg.solve(system, rewards.T).T
        residual = np.abs(values @ system.T - rewards).max()
        if residual >= RESIDUAL_TOL * max(1.0, np.abs(rewards).max()):  # pragma: no cover
            raise ArithmeticError(f"policy evaluation residual {residual} too large")
        return values
    if not 0 <= stage <= game.horizon:
        raise InvalidInputError(f"stage {stage} outside 0..{game.horizon}")
    values = np.zeros((2, n))
    for k in range(game.horizon - 1, stage - 1, -1):
        rewards, chain = _induced(game, policies, k)
        values = rewards + game.discount * values @ chain.T
    return values


def evaluate_discounted_value(
    game: MarkovGame, policies: Sequence[MarkovPolicy], start_state: str | int, player: int | str
) -> float:
    """Expected discounted sum of ``player``'s stage utilities from ``start_state``."""
    return float(state_values(game, policies)[_player_index(player), game.state_index(start_state)])


@dataclass(frozen=True)
class ShapleyResult:
    """Converged state values (row player's view) and saddle policies.

    ``deltas[t]`` is the sup-norm change made by sweep ``t``.
    """

    values: np.ndarray
    policies: tuple[MarkovPolicy, MarkovPolicy]
    sweeps: int
    deltas: tuple[float, ...] = field(default=())


def shapley_value_iteration(
    game: MarkovGame, tol: float = VALUE_TOL, max_sweeps: int = MAX_SWEEPS
) -> ShapleyResult:
    """Zero-sum value iteration ``V <- val(u + gamma * P V)`` state by state.

    Infinite horizons iterate from ``V = 0`` until a sweep changes no state
    value by ``tol`` or more. Finite horizons run exactly ``K`` backward
    steps and return per-stage policies.
    """
    if not game.zero_sum:
        raise InvalidInputError("value iteration needs zero-sum stage utilities")
    n = len(game.states)
    values = np.zeros(n)
    deltas: list[float] = []

    def sweep(cont: np.ndarray):
        new = np.empty(n)
        rows, cols = [], []
        for s in range(n):
            res = solve_zero_sum(game.stage_game(s, cont))
            new[s] = res.game_value
            rows.append(res.row_strategy)
            cols.append(res.col_strategy)
        return new, rows, cols

    if game.horizon is not None:
        stage_rows, stage_cols = [], []
        for _ in range(game.horizon):
            new, rows, cols = sweep(values)
            deltas.append(float(np.abs(new - values).max()))
            values = new
            stage_rows.insert(0, tuple(rows))
            stage_cols.insert(0, tuple(cols))
        policies = (
            MarkovPolicy(stage_rows[0], tuple(stage_rows)),
            MarkovPolicy(stage_cols[0], tuple(stage_cols)),
        )
        return ShapleyResult(values, policies, game.horizon, tuple(deltas))

    for t in range(1, max_sweeps + 1):
        new, rows, cols = sweep(values)
        delta = float(np.abs(new - values).max())
        deltas.append(delta)
        values = new
        if delta < tol:
            return ShapleyResult(values, (MarkovPolicy(tuple(rows)), MarkovPolicy(tuple(cols))), t, tuple(deltas))
    raise ConvergenceError(
        f"value iteration still moving by {deltas[-1]} after {max_sweeps} sweeps",
        last_iterate=values,
        iterations=max_sweeps,
    )


@dataclass(frozen=True)
class MarkovPerfectCheck:
    """Largest one-shot deviation gain per player.

    ``gains[i]`` has shape ``(|S|,)`` for infinite horizons and ``(K, |S|)``
    for finite ones.
    """

    ok: bool
    gains: tuple[np.ndarray, np.ndarray]

    def __bool__(self) -> bool:
        return self.ok


def _one_shot_gains(game: MarkovGame, policies: Sequence[MarkovPolicy], cont: np.ndarray, stage: int | None) -> np.ndarray:
    n = len(game.states)
    gains = np.zeros((2, n))
    for s in range(n):
        p, q = policies[0].at(s, stage).probs, policies[1].at(s, stage).probs
        for i, (mine, theirs) in enumerate(((p, q), (q, p))):
            q_values = game.utilities[i][s] + game.discount * (game.transitions[s] @ cont[i])
            action_values = q_values @ theirs if i == 0 else q_values.T @ theirs
            current = math.fsum(mine * action_values)
            gains[i, s] = max(0.0, float(action_values.max()) - current)
    return gains


def verify_markov_perfect(game: MarkovGame, policies: Sequence[MarkovPolicy], epsilon: float) -> MarkovPerfectCheck:
    """One-shot deviation test at every state (and stage) for both players."""
    if epsilon < 0:
        raise InvalidInputError("epsilon must be nonnegative")
    _check_policies(game, policies)
    if game.horizon is None:
        gains = _one_shot_gains(game, policies, state_values(game, policies), None)
        per_player = (gains[0], gains[1])
    else:
        rows = [_one_shot_gains(game, policies, state_values(game, policies, k + 1), k) for k in range(game.horizon)]
        stacked = np.stack(rows)  # (K, 2, |S|)
        per_player = (stacked[:, 0, :], stacked[:, 1, :])
    ok = all(float(g.max()) <= epsilon for g in per_player)
    return MarkovPerfectCheck(ok, per_player)
