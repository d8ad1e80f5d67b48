"""Equilibria over prompt spaces.

Each player picks a prompt; its reasoning policy turns the prompt into a
mixed action, and the base bimatrix game scores the resulting pair. The
prompt-level game is therefore a finite game whose "actions" are prompts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Mapping, Optional, Sequence

import numpy as np

from secgames.core import ActionSpace, BimatrixGame, Distribution, as_space, expected_utility
from secgames.errors import InvalidInputError, UnsupportedSizeError
from secgames.prompts.policy import (
    InfoContext,
    ReasoningPolicy,
    StructuredPrompt,
    check_unique_ids,
    evaluate_prompts,
)

EQUILIBRIUM_TOL = 1e-9
MAX_PROMPT_PROFILES = 10_000


@dataclass(frozen=True, eq=False)
class PromptSpaceGame:
    base: BimatrixGame
    prompts_row: tuple[StructuredPrompt, ...]
    prompts_col: tuple[StructuredPrompt, ...]
    row_policy: ReasoningPolicy
    col_policy: ReasoningPolicy
    info_row: InfoContext = field(default_factory=lambda: InfoContext("row"))
    info_col: InfoContext = field(default_factory=lambda: InfoContext("col"))

    def __post_init__(self) -> None:
        object.__setattr__(self, "prompts_row", tuple(self.prompts_row))
        object.__setattr__(self, "prompts_col", tuple(self.prompts_col))
        if not self.prompts_row or not self.prompts_col:
            raise InvalidInputError("both prompt spaces must be nonempty")
        check_unique_ids(self.prompts_row, "row prompt space")
        check_unique_ids(self.prompts_col, "column prompt space")
        if self.row_policy.space != self.base.row_space:
            raise InvalidInputError("row policy acts on a different action space than the base game")
        if self.col_policy.space != self.base.col_space:
            raise InvalidInputError("column policy acts on a different action space than the base game")

    def row_distributions(self) -> list[Distribution]:
        return evaluate_prompts(self.row_policy, self.prompts_row, self.info_row)

    def col_distributions(self) -> list[Distribution]:
        return evaluate_prompts(self.col_policy, self.prompts_col, self.info_col)


@dataclass(frozen=True)
class LLMNashResult:
    """Prompt-level payoff matrices, equilibrium prompt pairs and induced behavior.

    ``equilibria`` holds ``(i, j)`` index pairs into the prompt spaces;
    ``behavioral[k]`` is the action-distribution pair of ``equilibria[k]``.
    """

    row_payoffs: np.ndarray
    col_payoffs: np.ndarray
    equilibria: tuple[tuple[int, int], ...]
    behavioral: tuple[tuple[Distribution, Distribution], ...]
    row_distributions: tuple[Distribution, ...]
    col_distributions: tuple[Distribution, ...]

    def equilibrium_ids(self, game: PromptSpaceGame) -> list[tuple[str, str]]:
        return [(game.prompts_row[i].id, game.prompts_col[j].id) for i, j in self.equilibria]

    def deviation_gains(self, i: int, j: int) -> tuple[float, float]:
        """Best unilateral prompt-switch gain for each player at ``(i, j)``."""
        return (
            float(self.row_payoffs[:, j].max() - self.row_payoffs[i, j]),
            float(self.col_payoffs[i, :].max() - self.col_payoffs[i, j]),
        )


def prompt_payoff_matrices(
    base: BimatrixGame, row_dists: Sequence[Distribution], col_dists: Sequence[Distribution]
) -> tuple[np.ndarray, np.ndarray]:
    row = np.array([[expected_utility(base, [p, q], 0) for q in col_dists] for p in row_dists])
    col = np.array([[expected_utility(base, [p, q], 1) for q in col_dists] for p in row_dists])
    return row, col


def llm_nash_equilibria(game: PromptSpaceGame, tol: float = EQUILIBRIUM_TOL) -> LLMNashResult:
    """All pure prompt pairs from which neither player gains more than ``tol`` by switching prompt."""
    size = len(game.prompts_row) * len(game.prompts_col)
    if size > MAX_PROMPT_PROFILES:
        raise UnsupportedSizeError(f"{size} prompt pairs exceed {MAX_PROMPT_PROFILES}", MAX_PROMPT_PROFILES, size)
    row_dists, col_dists = game.row_distributions(), game.col_distributions()
    g_row, g_col = prompt_payoff_matrices(game.base, row_dists, col_dists)
    best_row = g_row.max(axis=0)
    best_col = g_col.max(axis=1)
    equilibria = tuple(
        (i, j)
        for i in range(len(row_dists))
        for j in range(len(col_dists))
        if g_row[i, j] >= best_row[j] - tol and g_col[i, j] >= best_col[i] - tol
    )
    return LLMNashResult(
        g_row,
        g_col,
        equilibria,
        tuple((row_dists[i], col_dists[j]) for i, j in equilibria),
        tuple(row_dists),
        tuple(col_dists),
    )


@dataclass(frozen=True)
class LLMStackelbergResult:
    """Sender prompt, receiver prompt per message, and the sender's value.

    ``receiver_prompts[m]`` is ``None`` only for a message no sender prompt
    can produce and for which no receiver prompts were supplied.
    ``unsent_messages`` lists messages with zero probability under the chosen
    sender prompt; their receiver choice does not affect the value.
    """

    sender_prompt: StructuredPrompt
    receiver_prompts: Mapping[str, Optional[StructuredPrompt]]
    sender_value: float
    sender_values: tuple[float, ...]
    receiver_values: Mapping[str, tuple[float, ...]]
    unsent_messages: tuple[str, ...]
    unreachable_messages: tuple[str, ...]


def _argmax_lowest(values: Sequence[float], tol: float) -> int:
    best = max(values)
    return next(k for k, v in enumerate(values) if v >= best - tol)


def llm_stackelberg_solve(
    game: PromptSpaceGame,
    sender_role: Literal["row", "col"],
    message_space: ActionSpace | Sequence[str],
    receiver_prompt_map: Optional[Mapping[str, Sequence[StructuredPrompt]]] = None,
    tol: float = EQUILIBRIUM_TOL,
) -> LLMStackelbergResult:
    """Sender-leads prompt game: receiver answers each message, sender anticipates.

    The sender is the base-game player whose actions are the messages; the
    receiver's actions are the other player's. For every message ``m`` the
    receiver prompt maximizing the receiver's expected payoff is chosen
    (lowest index on ties), with the receiver's info context carrying ``m``
    as the observed message. The sender then picks the prompt whose
    message-averaged payoff under those replies is largest.
    """
    if sender_role not in ("row", "col"):
        raise InvalidInputError(f"sender_role must be 'row' or 'col', got {sender_role!r}")
    messages = as_space(message_space)
    s_idx = 0 if sender_role == "row" else 1
    r_idx = 1 - s_idx
    if game.base.space(s_idx) != messages:
        raise InvalidInputError("the sender's action space in the base game must be the message space")
    sender_prompts = game.prompts_row if s_idx == 0 else game.prompts_col
    sender_policy = game.row_policy if s_idx == 0 else game.col_policy
    sender_info = game.info_row if s_idx == 0 else game.info_col
    receiver_policy = game.col_policy if s_idx == 0 else game.row_policy
    receiver_info = game.info_col if s_idx == 0 else game.info_row
    default_receiver = game.prompts_col if s_idx == 0 else game.prompts_row
    prompt_map = {m: tuple(default_receiver) for m in messages} if receiver_prompt_map is None else dict(receiver_prompt_map)
    unknown = set(prompt_map) - set(messages.labels)
    if unknown:
        raise InvalidInputError(f"receiver prompt map has unknown messages {sorted(unknown)}")

    # payoffs with the sender on axis 0
    u_s = game.base.payoff(s_idx) if s_idx == 0 else game.base.payoff(s_idx).T
    u_r = game.base.payoff(r_idx) if s_idx == 0 else game.base.payoff(r_idx).T

    sender_dists = evaluate_prompts(sender_policy, sender_prompts, sender_info)
    reachable = {m for k, m in enumerate(messages.labels) if any(d.probs[k] > 0 for d in sender_dists)}

    replies: dict[str, Optional[StructuredPrompt]] = {}
    reply_dists: dict[str, Distribution] = {}
    receiver_values: dict[str, tuple[float, ...]] = {}
    for k, m in enumerate(messages.labels):
        candidates = tuple(prompt_map.get(m, ()))
        if not candidates:
            if m in reachable:
                raise InvalidInputError(f"message {m!r} can be sent but has no receiver prompts")
            replies[m] = None
            receiver_values[m] = ()
            continue
        check_unique_ids(candidates, f"receiver prompts for {m!r}")
        dists = evaluate_prompts(receiver_policy, candidates, receiver_info.with_message(m))
        values = tuple(math.fsum(d.probs * u_r[k]) for d in dists)
        best = _argmax_lowest(values, tol)
        replies[m] = candidates[best]
        reply_dists[m] = dists[best]
        receiver_values[m] = values

    def sender_value(dist: Distribution) -> float:
        terms = []
        for k, m in enumerate(messages.labels):
            if dist.probs[k] > 0:
                terms.append(dist.probs[k] * math.fsum(reply_dists[m].probs * u_s[k]))
        return math.fsum(terms)

    values = tuple(sender_value(d) for d in sender_dists)
    x_star = _argmax_lowest(values, tol)
    unsent = tuple(m for k, m in enumerate(messages.labels) if sender_dists[x_star].probs[k] == 0)
    unreachable = tuple(m for m in messages.labels if m not in reachable)
    return LLMStackelbergResult(
        sender_prompts[x_star], replies, values[x_star], values, receiver_values, unsent, unreachable
    )
