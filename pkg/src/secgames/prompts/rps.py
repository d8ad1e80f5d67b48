"""Prompt-space Rock-Paper-Scissors: fixed prompt tables and a payoff audit.

The attacker (row) and defender (column) each have five prompts whose
induced action distributions are fixed tables. :func:`audit_rps` recomputes
the prompt-level payoffs for a few cells whose values were reported
elsewhere, compares them, and checks the reported equilibrium pair.
"""

from __future__ import annotations

from fractions import Fraction

from secgames.core import BimatrixGame, Distribution
from secgames.equilibrium import solve_zero_sum
from secgames.prompts.games import PromptSpaceGame, llm_nash_equilibria
from secgames.prompts.policy import InfoContext, StructuredPrompt, TablePolicy

ACTIONS = ("Rock", "Paper", "Scissors")
PAYOFF = ((0, -1, 1), (1, 0, -1), (-1, 1, 0))
THIRD = Fraction(1, 3)

ATTACKER_TABLE = {
    "x1": (0.2, 0.6, 0.2),
    "x2": (THIRD, THIRD, THIRD),
    "x3": (0.4, 0.3, 0.3),
    "x4": (0.25, 0.5, 0.25),
    "x5": (0.3, 0.4, 0.3),
}
DEFENDER_TABLE = {
    "y1": (THIRD, THIRD, THIRD),
    "y2": (0.3, 0.4, 0.3),
    "y3": (0.2, 0.6, 0.2),
    "y4": (0.25, 0.5, 0.25),
    "y5": (0.3, 0.2, 0.5),
}

# (row prompt, column prompt) -> attacker payoff as reported with the tables
REPORTED_CELLS = {("x1", "y3"): 0.0, ("x3", "y5"): 0.04, ("x4", "y4"): 0.0, ("x5", "y3"): 0.02}
REPORTED_EQUILIBRIUM = ("x5", "y3")
AUDIT_TOL = 1e-12


def base_game() -> BimatrixGame:
    return BimatrixGame.from_zero_sum(ACTIONS, ACTIONS, PAYOFF)


def _prompts(table: dict, who: str) -> tuple[StructuredPrompt, ...]:
    return tuple(StructuredPrompt(pid, f"{who} reasoning prompt {pid}") for pid in table)


def rps_prompt_game() -> PromptSpaceGame:
    return PromptSpaceGame(
        base_game(),
        _prompts(ATTACKER_TABLE, "attacker"),
        _prompts(DEFENDER_TABLE, "defender"),
        TablePolicy(ACTIONS, {k: Distribution(ACTIONS, v) for k, v in ATTACKER_TABLE.items()}),
        TablePolicy(ACTIONS, {k: Distribution(ACTIONS, v) for k, v in DEFENDER_TABLE.items()}),
        InfoContext("row"),
        InfoContext("col"),
    )


def audit_rps(game: PromptSpaceGame | None = None) -> dict:
    """Recompute reported cells, the equilibrium set, and the reported pair's deviations.

    Returns a JSON-ready dict with ``cells`` (reported vs recomputed attacker
    payoff and a discrepancy flag), ``classicalValue``, ``equilibria``,
    ``payoffMatrix`` and ``reportedPair`` (gains of the best deviation of
    each player at the reported pair).
    """
    game = game or rps_prompt_game()
    result = llm_nash_equilibria(game)
    row_ids = [p.id for p in game.prompts_row]
    col_ids = [p.id for p in game.prompts_col]
    cells = []
    for (x, y), reported in REPORTED_CELLS.items():
        recomputed = float(result.row_payoffs[row_ids.index(x), col_ids.index(y)])
        cells.append(
            {
                "cell": f"U_{x[1:]}{y[1:]}",
                "rowPrompt": x,
                "colPrompt": y,
                "reported": reported,
                "recomputed": recomputed,
                "discrepancy": abs(recomputed - reported) > AUDIT_TOL,
            }
        )
    i, j = row_ids.index(REPORTED_EQUILIBRIUM[0]), col_ids.index(REPORTED_EQUILIBRIUM[1])
    row_gain, col_gain = result.deviation_gains(i, j)
    best_row = row_ids[int(result.row_payoffs[:, j].argmax())]
    best_col = col_ids[int(result.col_payoffs[i, :].argmax())]
    classical = solve_zero_sum(game.base)
    return {
        "classicalValue": classical.game_value,
        "classicalStrategies": [classical.row_strategy.as_dict(), classical.col_strategy.as_dict()],
        "cells": cells,
        "equilibria": [list(pair) for pair in result.equilibrium_ids(game)],
        "payoffMatrix": {"rows": row_ids, "cols": col_ids, "row": result.row_payoffs.tolist()},
        "reportedPair": {
            "pair": list(REPORTED_EQUILIBRIUM),
            "isEquilibrium": (i, j) in result.equilibria,
            "rowDeviation": {"to": best_row if row_gain > AUDIT_TOL else None, "gain": row_gain},
            "colDeviation": {"to": best_col if col_gain > AUDIT_TOL else None, "gain": col_gain},
        },
    }
