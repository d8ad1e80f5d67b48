"""Prompts, private context, and the policies that turn them into action distributions.

Two backends exist. :class:`TablePolicy` looks distributions up in a fixed
table. :class:`ExternalPolicy` asks an HTTP endpoint for sampled action
labels and turns the counts into add-one smoothed frequencies; responses are
memoized in a :class:`ResponseCache` so reruns never touch the network.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Optional, Protocol, Sequence, Union, runtime_checkable

import numpy as np

from secgames.core import ActionSpace, Distribution, as_space
from secgames.errors import EndpointUnreachableError, InvalidInputError, PolicyError, UnparseableActionError

Role = Literal["sender", "receiver", "row", "col", "agent"]
ROLES = ("sender", "receiver", "row", "col", "agent")
SLOTS = ("cot", "bias", "tom", "memory")

URL_ENV = "SECGAMES_POLICY_URL"
TIMEOUT_ENV = "SECGAMES_POLICY_TIMEOUT"
DEFAULT_TIMEOUT = 10.0
DEFAULT_MAX_IN_FLIGHT = 4


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class StructuredPrompt:
    """A prompt with its full text and four optional reasoning slots."""

    id: str
    rendered: str
    cot: Optional[str] = None
    bias: Optional[str] = None
    tom: Optional[str] = None
    memory: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise InvalidInputError("prompt id must be nonempty")
        if not self.rendered or not self.rendered.strip():
            raise InvalidInputError(f"prompt {self.id!r} has empty rendered text")

    def slots(self) -> dict[str, Optional[str]]:
        return {name: getattr(self, name) for name in SLOTS}


def check_unique_ids(prompts: Sequence[StructuredPrompt], what: str = "prompt space") -> None:
    ids = [p.id for p in prompts]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise InvalidInputError(f"duplicate prompt ids in {what}: {dupes}")


@dataclass(frozen=True)
class InfoContext:
    """A player's private information and, for receivers, the observed message."""

    role: Role
    private_info: tuple[tuple[str, str], ...] = ()
    observed_message: Optional[str] = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise InvalidInputError(f"role must be one of {ROLES}, got {self.role!r}")
        items = self.private_info.items() if isinstance(self.private_info, Mapping) else self.private_info
        items = tuple((str(k), str(v)) for k, v in items)
        keys = [k for k, _ in items]
        if len(set(keys)) != len(keys):
            raise InvalidInputError(f"duplicate private-info keys: {keys}")
        object.__setattr__(self, "private_info", tuple(sorted(items)))

    @property
    def info(self) -> dict[str, str]:
        return dict(self.private_info)

    def with_message(self, message: Optional[str]) -> InfoContext:
        return InfoContext(self.role, self.private_info, message)

    def to_json(self) -> dict:
        return {"role": self.role, "private_info": self.info, "observed_message": self.observed_message}

    def digest(self) -> str:
        """Stable hash over key-sorted canonical JSON."""
        return hashlib.sha256(canonical_json(self.to_json()).encode()).hexdigest()


@runtime_checkable
class ReasoningPolicy(Protocol):
    backend: str
    deterministic: bool
    space: ActionSpace

    def evaluate(self, prompt: StructuredPrompt, info: InfoContext) -> Distribution: ...


TableKey = Union[str, tuple[str, Optional[str]]]


@dataclass(frozen=True)
class TablePolicy:
    """Fixed prompt-to-distribution table.

    Keys are prompt ids (or rendered text when ``key="rendered"``), or
    ``(prompt key, observed message)`` pairs for message-dependent rows. The
    pair is tried first, then the bare key, then ``default``.
    """

    space: ActionSpace
    table: Mapping[TableKey, Distribution]
    default: Optional[Distribution] = None
    key: Literal["id", "rendered"] = "id"
    backend: str = field(default="table", init=False)
    deterministic: bool = field(default=True, init=False)

    def __post_init__(self) -> None:
        space = as_space(self.space)
        object.__setattr__(self, "space", space)
        if self.key not in ("id", "rendered"):
            raise InvalidInputError(f"table key must be 'id' or 'rendered', got {self.key!r}")
        table = {}
        for k, d in self.table.items():
            d = d if isinstance(d, Distribution) else Distribution(space, d)
            if d.space != space:
                raise InvalidInputError(f"table row {k!r} is over {d.space.labels}, expected {space.labels}")
            table[k] = d
        object.__setattr__(self, "table", table)
        if self.default is not None and self.default.space != space:
            raise InvalidInputError("default distribution is over the wrong action space")

    def evaluate(self, prompt: StructuredPrompt, info: InfoContext) -> Distribution:
        k = prompt.id if self.key == "id" else prompt.rendered
        for candidate in ((k, info.observed_message), k):
            if candidate in self.table:
                return self.table[candidate]
        if self.default is not None:
            return self.default
        raise PolicyError("no table entry", prompt_id=prompt.id)


class ResponseCache:
    """Request-hash to sampled-labels map, persisted as append-only JSON lines.

    Readers share the in-memory dict; writes go through one lock so the file
    only ever grows by whole records.
    """

    def __init__(self, path: str | os.PathLike | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._entries: dict[str, list[str]] = {}
        if self.path is not None and self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        record = json.loads(line)
                        self._entries[record["key"]] = list(record["samples"])

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> Optional[list[str]]:
        return self._entries.get(key)

    def put(self, key: str, samples: Sequence[str]) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = list(samples)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(canonical_json({"key": key, "samples": list(samples)}) + "\n")


def laplace_frequencies(space: ActionSpace, samples: Sequence[str]) -> Distribution:
    counts = np.ones(len(space))
    for s in samples:
        counts[space.index(s)] += 1
    return Distribution(space, counts / counts.sum())


class ExternalPolicy:
    """Policy backed by an HTTP endpoint that returns sampled action labels.

    Request body: ``{prompt_id, rendered_prompt, role, info, action_labels,
    seed, n_samples}``; response: ``{samples: [label, ...]}``. Each sample
    must equal an action label exactly. Results are deterministic given
    ``(seed, sample_count)`` and the cache contents.
    """

    backend = "external"
    deterministic = False

    def __init__(
        self,
        space: ActionSpace | Sequence[str],
        url: Optional[str] = None,
        sample_count: int = 64,
        seed: int = 0,
        timeout: Optional[float] = None,
        retries: int = 0,
        cache: Optional[ResponseCache] = None,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
    ) -> None:
        self.space = as_space(space)
        self.url = url or os.environ.get(URL_ENV)
        if not self.url:
            raise InvalidInputError(f"no endpoint URL given and {URL_ENV} is unset")
        if sample_count < 1:
            raise InvalidInputError("sample_count must be at least 1")
        if max_in_flight < 1:
            raise InvalidInputError("max_in_flight must be at least 1")
        self.sample_count = sample_count
        self.seed = seed
        self.timeout = timeout if timeout is not None else float(os.environ.get(TIMEOUT_ENV, DEFAULT_TIMEOUT))
        self.retries = retries
        self.cache = cache if cache is not None else ResponseCache()
        self.max_in_flight = max_in_flight
        self._count_lock = threading.Lock()
        self.requests_sent = 0

    def cache_key(self, prompt: StructuredPrompt, info: InfoContext, seed: int, sample_count: int) -> str:
        ident = {
            "prompt_id": prompt.id,
            "info": info.digest(),
            "seed": seed,
            "n_samples": sample_count,
            "labels": list(self.space.labels),
        }
        return hashlib.sha256(canonical_json(ident).encode()).hexdigest()

    def _request(self, prompt: StructuredPrompt, info: InfoContext, seed: int, sample_count: int) -> list[str]:
        body = {
            "prompt_id": prompt.id,
            "rendered_prompt": prompt.rendered,
            "role": info.role,
            "info": info.info,
            "action_labels": list(self.space.labels),
            "seed": seed,
            "n_samples": sample_count,
        }
        data = canonical_json(body).encode()
        last: Exception | None = None
        for _ in range(self.retries + 1):
            req = urllib.request.Request(self.url, data=data, headers={"Content-Type": "application/json"}, method="POST")
            with self._count_lock:
                self.requests_sent += 1
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    payload = json.loads(resp.read().decode())
            except urllib.error.HTTPError as err:
                raise PolicyError(f"endpoint answered HTTP {err.code}", prompt.id) from err
            except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as err:
                last = err
                continue
            except json.JSONDecodeError as err:
                raise PolicyError(f"endpoint returned invalid JSON: {err}", prompt.id) from err
            samples = payload.get("samples") if isinstance(payload, dict) else None
            if not isinstance(samples, list) or not all(isinstance(s, str) for s in samples):
                raise PolicyError("endpoint response lacks a string 'samples' list", prompt.id)
            return samples
        raise EndpointUnreachableError(f"policy endpoint {self.url} unreachable: {last}", prompt.id)

    def evaluate(
        self, prompt: StructuredPrompt, info: InfoContext, seed: Optional[int] = None, sample_count: Optional[int] = None
    ) -> Distribution:
        seed = self.seed if seed is None else seed
        n = self.sample_count if sample_count is None else sample_count
        if n < 1:
            raise InvalidInputError("sample_count must be at least 1")
        key = self.cache_key(prompt, info, seed, n)
        samples = self.cache.get(key)
        if samples is None:
            samples = self._request(prompt, info, seed, n)
            bad = [s for s in samples if s not in self.space]
            if bad:
                raise UnparseableActionError(bad, self.space.labels, prompt.id)
            if len(samples) != n:
                raise PolicyError(f"asked for {n} samples, got {len(samples)}", prompt.id)
            self.cache.put(key, samples)
        return laplace_frequencies(self.space, samples)

    def evaluate_many(self, requests: Sequence[tuple[StructuredPrompt, InfoContext]]) -> list[Distribution]:
        """Evaluate several prompts with at most ``max_in_flight`` open requests; results keep input order."""
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(lambda pair: self.evaluate(*pair), requests))


def policy_action_distribution(
    policy: ReasoningPolicy,
    prompt: StructuredPrompt,
    info: InfoContext,
    seed: Optional[int] = None,
    sample_count: Optional[int] = None,
) -> Distribution:
    """Action distribution of ``policy`` at ``prompt``; tables ignore seed and sample count."""
    if isinstance(policy, ExternalPolicy):
        return policy.evaluate(prompt, info, seed, sample_count)
    if sample_count is not None and sample_count < 1:
        raise InvalidInputError("sample_count must be at least 1")
    return policy.evaluate(prompt, info)


def evaluate_prompts(
    policy: ReasoningPolicy, prompts: Sequence[StructuredPrompt], info: InfoContext
) -> list[Distribution]:
    """Evaluate every prompt; failures surface as PolicyError naming the prompt."""
    if isinstance(policy, ExternalPolicy):
        return policy.evaluate_many([(p, info) for p in prompts])
    out = []
    for p in prompts:
        try:
            out.append(policy.evaluate(p, info))
        except PolicyError as err:
            if err.prompt_id is None:
                raise PolicyError(str(err), p.id) from err
            raise
        except Exception as err:
            raise PolicyError(f"policy failed: {err}", p.id) from err
    return out
