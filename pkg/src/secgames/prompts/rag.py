"""Tag-overlap retrieval over a small document store."""

from __future__ import annotations

import re
from dataclasses import dataclass

from secgames.errors import InvalidInputError
from secgames.prompts.policy import InfoContext, StructuredPrompt

_WORD = re.compile(r"\w+")


@dataclass(frozen=True)
class RagDocument:
    key: str
    tags: frozenset[str]
    body: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "tags", frozenset(t.lower() for t in self.tags))


@dataclass(frozen=True)
class RagStore:
    documents: tuple[RagDocument, ...]
    capacity: int = 3

    def __post_init__(self) -> None:
        docs = tuple(self.documents)
        keys = [d.key for d in docs]
        if len(set(keys)) != len(keys):
            raise InvalidInputError(f"duplicate document keys: {keys}")
        if self.capacity < 1:
            raise InvalidInputError("retrieval capacity must be at least 1")
        object.__setattr__(self, "documents", docs)


def query_tokens(prompt: StructuredPrompt, info: InfoContext) -> set[str]:
    text = " ".join([prompt.rendered, *info.info.values()])
    return {w.lower() for w in _WORD.findall(text)}


def rag_retrieve(store: RagStore, prompt: StructuredPrompt, info: InfoContext) -> list[RagDocument]:
    """Top ``capacity`` documents by tag overlap, ties by key; never empty for a nonempty store."""
    if not store.documents:
        raise InvalidInputError("cannot retrieve from an empty store")
    words = query_tokens(prompt, info)
    ranked = sorted(store.documents, key=lambda d: (-len(d.tags & words), d.key))
    return ranked[: store.capacity]
