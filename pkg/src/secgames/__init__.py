"""Security games: classical equilibria, dynamic and Bayesian games, interdiction, prompt-space games and agent workflows."""

from secgames.core import (
    ActionSpace,
    BimatrixGame,
    Distribution,
    PayoffTensor,
    ProspectParams,
    best_response,
    expected_utility,
    is_epsilon_nash,
    level_k_strategies,
    prospect_transform,
    quantal_response_equilibrium,
)
from secgames.equilibrium import EquilibriumResult, solve_bimatrix, solve_zero_sum

__version__ = "0.1.0"

__all__ = [
    "ActionSpace",
    "BimatrixGame",
    "Distribution",
    "EquilibriumResult",
    "PayoffTensor",
    "ProspectParams",
    "best_response",
    "expected_utility",
    "is_epsilon_nash",
    "level_k_strategies",
    "prospect_transform",
    "quantal_response_equilibrium",
    "solve_bimatrix",
    "solve_zero_sum",
]
