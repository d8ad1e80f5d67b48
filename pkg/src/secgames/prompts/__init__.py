"""Prompt-space games: reasoning policies, prompt-level equilibria and prompt geometry."""

from secgames.prompts.alignment import dpo_loss, elbo_value
from secgames.prompts.games import (
    LLMNashResult,
    LLMStackelbergResult,
    PromptSpaceGame,
    llm_nash_equilibria,
    llm_stackelberg_solve,
)
from secgames.prompts.geometry import prompt_distance, stability_profile, triangle_violation_rate
from secgames.prompts.policy import (
    ExternalPolicy,
    InfoContext,
    ReasoningPolicy,
    ResponseCache,
    StructuredPrompt,
    TablePolicy,
    policy_action_distribution,
)
from secgames.prompts.rag import RagDocument, RagStore, rag_retrieve

__all__ = [
    "ExternalPolicy",
    "InfoContext",
    "LLMNashResult",
    "LLMStackelbergResult",
    "PromptSpaceGame",
    "RagDocument",
    "RagStore",
    "ReasoningPolicy",
    "ResponseCache",
    "StructuredPrompt",
    "TablePolicy",
    "dpo_loss",
    "elbo_value",
    "llm_nash_equilibria",
    "llm_stackelberg_solve",
    "policy_action_distribution",
    "prompt_distance",
    "rag_retrieve",
    "stability_profile",
    "triangle_violation_rate",
]
