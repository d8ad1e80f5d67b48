"""JSON game-spec documents: schema validation, loading and canonical serialization.

A document is ``{"kind", "version": 1, "body", "metadata"}``. Structural
problems are reported by JSON Schema with a JSON-pointer location;
semantic problems (shapes, simplices, wiring) are reported by the domain
constructors and re-raised at the location of the offending field.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, TypeVar

import jsonschema
from jsonschema.exceptions import best_match

from secgames.core import ActionSpace, BimatrixGame, Distribution
from secgames.errors import ConfigurationError, InvalidInputError, KindMismatchError, ValidationError
from secgames.interdiction import Edge, NetworkInstance
from secgames.markov import MarkovGame
from secgames.prompts.games import PromptSpaceGame
from secgames.prompts.policy import ExternalPolicy, InfoContext, ResponseCache, StructuredPrompt, TablePolicy
from secgames.signaling import SignalingGame
from secgames.stackelberg import StackelbergMarkovGame
from secgames.workflow import AgentNode, FailurePlan, WorkflowEdge, WorkflowGraph, inject_failure

KINDS = ("matrix", "markov", "signaling", "stackelberg", "interdiction", "promptGame", "workflow")
VERSION = 1

T = TypeVar("T")

LABELS = {"type": "array", "items": {"type": "string", "minLength": 1}, "minItems": 1}
NUMBER = {"type": "number"}
PROB = {"anyOf": [{"type": "number"}, {"type": "string", "pattern": r"^\s*\d+\s*/\s*\d+\s*$"}]}
PROBS = {"type": "array", "items": PROB, "minItems": 1}
MATRIX = {"type": "array", "items": {"type": "array", "items": NUMBER, "minItems": 1}, "minItems": 1}
TENSOR3 = {"type": "array", "items": MATRIX, "minItems": 1}
OPT_TEXT = {"type": ["string", "null"]}

PROMPT = {
    "type": "object",
    "required": ["id", "rendered"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "rendered": {"type": "string", "minLength": 1},
        "cot": OPT_TEXT,
        "bias": OPT_TEXT,
        "tom": OPT_TEXT,
        "memory": OPT_TEXT,
    },
}
POLICY = {
    "type": "object",
    "required": ["type"],
    "additionalProperties": False,
    "properties": {
        "type": {"enum": ["table", "external"]},
        "actions": LABELS,
        "key": {"enum": ["id", "rendered"]},
        "table": {"type": "object", "additionalProperties": PROBS},
        "messageTable": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["prompt", "message", "probs"],
                "additionalProperties": False,
                "properties": {"prompt": {"type": "string"}, "message": {"type": "string"}, "probs": PROBS},
            },
        },
        "default": {"anyOf": [PROBS, {"type": "null"}]},
        "url": {"type": "string"},
        "sampleCount": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "timeout": {"type": "number", "exclusiveMinimum": 0},
        "retries": {"type": "integer", "minimum": 0},
        "maxInFlight": {"type": "integer", "minimum": 1},
        "cache": {"type": ["string", "null"]},
    },
}
BIMATRIX_PROPS = {
    "rowActions": LABELS,
    "colActions": LABELS,
    "rowPayoff": MATRIX,
    "colPayoff": MATRIX,
    "zeroSum": {"type": "boolean"},
}
MARKOV = {
    "type": "object",
    "required": ["states", "actions", "transitions", "utilities", "discount"],
    "additionalProperties": False,
    "properties": {
        "states": LABELS,
        "actions": {
            "type": "object",
            "required": ["row", "col"],
            "additionalProperties": False,
            "properties": {"row": {"type": "array", "items": LABELS}, "col": {"type": "array", "items": LABELS}},
        },
        "transitions": {"type": "array", "items": TENSOR3, "minItems": 1},
        "utilities": {
            "type": "object",
            "required": ["row", "col"],
            "additionalProperties": False,
            "properties": {"row": {"type": "array", "items": MATRIX}, "col": {"type": "array", "items": MATRIX}},
        },
        "discount": NUMBER,
        "horizon": {"type": ["integer", "null"], "minimum": 1},
    },
}
EDGE = {
    "type": "array",
    "prefixItems": [{"type": "string"}, {"type": "string"}, NUMBER, NUMBER],
    "minItems": 2,
    "maxItems": 4,
}
NODE = {
    "type": "object",
    "required": ["id"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "role": {"type": "string"},
        "template": {"anyOf": [PROMPT, {"type": "null"}]},
        "policy": {"anyOf": [POLICY, {"type": "null"}]},
        "inputPorts": {"type": "array", "items": {"type": "string"}},
        "outputPorts": {"type": "array", "items": {"type": "string"}},
        "combiner": {"type": "boolean"},
        "weights": {"type": "object", "additionalProperties": NUMBER},
        "standby": {"type": "boolean"},
    },
}
FAILURES = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "events": {
            "type": "array",
            "items": {
                "type": "array",
                "prefixItems": [{"type": "string"}, {"type": "integer"}, {"enum": ["silent", "corrupt", "crash"]}],
                "minItems": 3,
                "maxItems": 3,
            },
        },
        "fallback": {"type": "object", "additionalProperties": {"type": "string"}},
    },
}

BODY_SCHEMAS: dict[str, dict] = {
    "matrix": {
        "type": "object",
        "required": ["rowActions", "colActions", "rowPayoff"],
        "additionalProperties": False,
        "properties": {
            **BIMATRIX_PROPS,
            "strategies": {
                "type": "object",
                "required": ["row", "col"],
                "additionalProperties": False,
                "properties": {"row": PROBS, "col": PROBS},
            },
        },
    },
    "markov": MARKOV,
    "signaling": {
        "type": "object",
        "required": ["types", "prior", "signals", "actions", "senderUtility", "receiverUtility"],
        "additionalProperties": False,
        "properties": {
            "types": LABELS,
            "prior": PROBS,
            "signals": LABELS,
            "actions": LABELS,
            "senderUtility": TENSOR3,
            "receiverUtility": TENSOR3,
        },
    },
    "stackelberg": {
        "type": "object",
        "required": ["game", "startState"],
        "additionalProperties": False,
        "properties": {
            "game": MARKOV,
            "leader": {"enum": [0, 1]},
            "startState": {"type": "string"},
            "policySpace": {"type": "string"},
            "tieBreak": {"enum": ["pessimistic", "lowest"]},
        },
    },
    "interdiction": {
        "type": "object",
        "required": ["nodes", "edges", "source", "sink", "metric"],
        "additionalProperties": False,
        "properties": {
            "nodes": LABELS,
            "edges": {"type": "array", "items": EDGE},
            "source": {"type": "string"},
            "sink": {"type": "string"},
            "metric": {"enum": ["shortestPathLength", "maxFlowValue"]},
            "attackerBudget": {"type": "integer", "minimum": 0},
            "defenderBudget": {"type": "integer", "minimum": 0},
            "undirected": {"type": "boolean"},
        },
    },
    "promptGame": {
        "type": "object",
        "required": ["rowActions", "colActions", "rowPayoff", "rowPrompts", "colPrompts", "rowPolicy", "colPolicy"],
        "additionalProperties": False,
        "properties": {
            **BIMATRIX_PROPS,
            "rowPrompts": {"type": "array", "items": PROMPT, "minItems": 1},
            "colPrompts": {"type": "array", "items": PROMPT, "minItems": 1},
            "rowPolicy": POLICY,
            "colPolicy": POLICY,
            "rowRole": {"enum": ["row", "sender", "receiver"]},
            "colRole": {"enum": ["col", "sender", "receiver"]},
        },
    },
    "workflow": {
        "type": "object",
        "required": ["nodes", "edges"],
        "additionalProperties": False,
        "properties": {
            "nodes": {"type": "array", "items": NODE, "minItems": 1},
            "edges": {
                "type": "array",
                "items": {
                    "type": "array",
                    "prefixItems": [{"type": "string"}, {"type": "string"}, {"enum": ["forward", "feedback"]}],
                    "minItems": 2,
                    "maxItems": 3,
                },
            },
            "topology": {"enum": ["chain", "star", "parallel", "feedback", "hybrid"]},
            "maxFeedbackIterations": {"type": "integer", "minimum": 1},
            "initialInputs": {"type": "object", "additionalProperties": {"type": "string"}},
            "failures": FAILURES,
        },
    },
}
DOCUMENT_SCHEMA = {
    "type": "object",
    "required": ["kind", "version", "body"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(KINDS)},
        "version": {"const": VERSION},
        "body": {"type": "object"},
        "metadata": {"type": "object"},
    },
}


@dataclass(frozen=True)
class MatrixProblem:
    game: BimatrixGame
    profile: Optional[tuple[Distribution, Distribution]] = None


@dataclass(frozen=True)
class StackelbergProblem:
    sgame: StackelbergMarkovGame
    start_state: str
    policy_space: str = "purePerState"
    tie_break: str = "pessimistic"


@dataclass(frozen=True)
class WorkflowProblem:
    graph: WorkflowGraph
    initial_inputs: Mapping[str, str] = field(default_factory=dict)
    failures: Optional[FailurePlan] = None


@dataclass(frozen=True)
class GameSpecDocument:
    kind: str
    version: int
    body: Any
    metadata: Mapping[str, Any] = field(default_factory=dict)


def _pointer(path) -> str:
    parts = [str(p).replace("~", "~0").replace("/", "~1") for p in path]
    return "/" + "/".join(parts) if parts else "/"


def _check_schema(instance: Any, schema: dict, prefix: tuple = ()) -> None:
    error = best_match(jsonschema.Draft202012Validator(schema).iter_errors(instance))
    if error is not None:
        raise ValidationError(error.message, _pointer(prefix + tuple(error.absolute_path)))


def _at(location: str, build: Callable[[], T]) -> T:
    """Run a domain constructor, re-raising its complaint at ``location``."""
    try:
        return build()
    except ValidationError:
        raise
    except (InvalidInputError, ConfigurationError, ValueError, TypeError) as err:
        raise ValidationError(str(err), location) from err


def _probs(raw) -> list[float]:
    return [float(Fraction(p.replace(" ", ""))) if isinstance(p, str) else float(p) for p in raw]


def _distribution(space, raw, location: str) -> Distribution:
    name = location.rsplit("/", 2)
    label = ".".join(name[-2:]) if len(name) >= 2 else location

    def build():
        try:
            return Distribution(space, _probs(raw))
        except InvalidInputError as err:
            total = math.fsum(_probs(raw))
            raise InvalidInputError(f"distribution {label} (sum {total:.12g}) is invalid: {err}") from None

    return _at(location, build)


def _bimatrix(body: dict, loc: str) -> BimatrixGame:
    row, col = body["rowActions"], body["colActions"]
    if body.get("zeroSum", False):
        if "colPayoff" in body:
            raise ValidationError("zero-sum games take only rowPayoff", f"{loc}/colPayoff")
        return _at(f"{loc}/rowPayoff", lambda: BimatrixGame.from_zero_sum(row, col, body["rowPayoff"]))
    if "colPayoff" not in body:
        raise ValidationError("colPayoff is required unless zeroSum is true", loc)
    return _at(loc, lambda: BimatrixGame(row, col, body["rowPayoff"], body["colPayoff"]))


def _markov(body: dict, loc: str) -> MarkovGame:
    return _at(
        loc,
        lambda: MarkovGame(
            body["states"],
            (tuple(body["actions"]["row"]), tuple(body["actions"]["col"])),
            tuple(body["transitions"]),
            (tuple(body["utilities"]["row"]), tuple(body["utilities"]["col"])),
            body["discount"],
            body.get("horizon"),
        ),
    )


def _policy(spec: dict, space: Optional[ActionSpace], loc: str, cache_path: Optional[str]):
    if "actions" in spec:
        declared = _at(f"{loc}/actions", lambda: ActionSpace(tuple(spec["actions"])))
        if space is not None and declared != space:
            raise ValidationError(f"policy actions {declared.labels} differ from the game's {space.labels}", f"{loc}/actions")
        space = declared
    if space is None:
        raise ValidationError("policy needs an 'actions' list", loc)
    if spec["type"] == "external":
        cache = cache_path if cache_path is not None else spec.get("cache")
        return _at(
            loc,
            lambda: ExternalPolicy(
                space,
                spec.get("url"),
                spec.get("sampleCount", 64),
                spec.get("seed", 0),
                spec.get("timeout"),
                spec.get("retries", 0),
                ResponseCache(cache) if cache else None,
                spec.get("maxInFlight", 4),
            ),
        )
    table: dict = {k: _distribution(space, v, f"{loc}/table/{k}") for k, v in spec.get("table", {}).items()}
    for i, row in enumerate(spec.get("messageTable", [])):
        table[(row["prompt"], row["message"])] = _distribution(space, row["probs"], f"{loc}/messageTable/{i}/probs")
    default = spec.get("default")
    default = None if default is None else _distribution(space, default, f"{loc}/default")
    return _at(loc, lambda: TablePolicy(space, table, default, spec.get("key", "id")))


def _prompt(spec: dict, loc: str) -> StructuredPrompt:
    return _at(loc, lambda: StructuredPrompt(**spec))


def _body_matrix(body: dict, cache_path) -> MatrixProblem:
    game = _bimatrix(body, "/body")
    profile = None
    if "strategies" in body:
        profile = (
            _distribution(game.row_space, body["strategies"]["row"], "/body/strategies/row"),
            _distribution(game.col_space, body["strategies"]["col"], "/body/strategies/col"),
        )
    return MatrixProblem(game, profile)


def _body_signaling(body: dict, cache_path) -> SignalingGame:
    prior = _distribution(body["types"], body["prior"], "/body/prior")
    return _at(
        "/body",
        lambda: SignalingGame(
            body["types"], prior, body["signals"], body["actions"], body["senderUtility"], body["receiverUtility"]
        ),
    )


def _body_stackelberg(body: dict, cache_path) -> StackelbergProblem:
    game = _markov(body["game"], "/body/game")
    sgame = _at("/body/leader", lambda: StackelbergMarkovGame(game, body.get("leader", 0)))
    _at("/body/startState", lambda: game.state_index(body["startState"]))
    return StackelbergProblem(sgame, body["startState"], body.get("policySpace", "purePerState"), body.get("tieBreak", "pessimistic"))


def _body_interdiction(body: dict, cache_path) -> NetworkInstance:
    edges = [Edge(*e) for e in body["edges"]]
    kwargs = dict(
        metric=body["metric"], attacker_budget=body.get("attackerBudget", 0), defender_budget=body.get("defenderBudget", 0)
    )
    if body.get("undirected", False):
        return _at("/body", lambda: NetworkInstance.undirected(body["nodes"], edges, body["source"], body["sink"], **kwargs))
    return _at("/body", lambda: NetworkInstance(tuple(body["nodes"]), tuple(edges), body["source"], body["sink"], **kwargs))


def _body_prompt_game(body: dict, cache_path) -> PromptSpaceGame:
    base = _bimatrix(body, "/body")
    rows = [_prompt(p, f"/body/rowPrompts/{i}") for i, p in enumerate(body["rowPrompts"])]
    cols = [_prompt(p, f"/body/colPrompts/{i}") for i, p in enumerate(body["colPrompts"])]
    row_policy = _policy(body["rowPolicy"], base.row_space, "/body/rowPolicy", cache_path)
    col_policy = _policy(body["colPolicy"], base.col_space, "/body/colPolicy", cache_path)
    info_row = InfoContext(body.get("rowRole", "row"))
    info_col = InfoContext(body.get("colRole", "col"))
    return _at("/body", lambda: PromptSpaceGame(base, rows, cols, row_policy, col_policy, info_row, info_col))


def _body_workflow(body: dict, cache_path) -> WorkflowProblem:
    nodes = []
    for i, spec in enumerate(body["nodes"]):
        loc = f"/body/nodes/{i}"
        policy = None if spec.get("policy") is None else _policy(spec["policy"], None, f"{loc}/policy", cache_path)
        template = None if spec.get("template") is None else _prompt(spec["template"], f"{loc}/template")
        nodes.append(
            _at(
                loc,
                lambda spec=spec, policy=policy, template=template: AgentNode(
                    spec["id"],
                    spec.get("role", ""),
                    policy,
                    template,
                    tuple(spec.get("inputPorts", ("in",))),
                    tuple(spec.get("outputPorts", ("out",))),
                    spec.get("combiner", False),
                    spec.get("weights", {}),
                    spec.get("standby", False),
                ),
            )
        )
    edges = [_at(f"/body/edges/{i}", lambda e=e: WorkflowEdge(*e)) for i, e in enumerate(body["edges"])]
    graph = _at(
        "/body",
        lambda: WorkflowGraph(nodes, edges, body.get("topology", "hybrid"), body.get("maxFeedbackIterations", 1)),
    )
    failures = None
    if "failures" in body:
        failures = _failure_plan(body["failures"], graph, "/body/failures")
    return WorkflowProblem(graph, dict(body.get("initialInputs", {})), failures)


def _failure_plan(spec: dict, graph: WorkflowGraph, loc: str) -> FailurePlan:
    return _at(loc, lambda: inject_failure(graph, [tuple(e) for e in spec.get("events", [])], spec.get("fallback", {})))


BUILDERS: dict[str, Callable[[dict, Optional[str]], Any]] = {
    "matrix": _body_matrix,
    "markov": lambda body, cache: _markov(body, "/body"),
    "signaling": _body_signaling,
    "stackelberg": _body_stackelberg,
    "interdiction": _body_interdiction,
    "promptGame": _body_prompt_game,
    "workflow": _body_workflow,
}


def _read(source: str | os.PathLike | Mapping) -> Any:
    if isinstance(source, Mapping):
        return dict(source)
    text = str(source)
    if isinstance(source, os.PathLike) or (text.strip() and text.lstrip()[0] not in "{["):
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as err:
            raise ValidationError(f"cannot read document: {err}", "/") from err
    if not text.strip():
        raise ValidationError("empty document", "/")
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ValidationError(f"not valid JSON: {err}", "/") from err


def load_game_spec(
    source: str | os.PathLike | Mapping,
    expected_kind: Optional[str] = None,
    cache_path: Optional[str] = None,
) -> GameSpecDocument:
    """Parse, validate and build a game-spec document.

    ``source`` is a file path, JSON text or an already-parsed mapping.
    ``expected_kind`` turns a kind mismatch into :class:`KindMismatchError`;
    ``cache_path`` overrides the response cache of every external policy.
    """
    doc = _read(source)
    _check_schema(doc, DOCUMENT_SCHEMA)
    if expected_kind is not None and doc["kind"] != expected_kind:
        raise KindMismatchError(expected_kind, doc["kind"])
    _check_schema(doc["body"], BODY_SCHEMAS[doc["kind"]], ("body",))
    body = BUILDERS[doc["kind"]](doc["body"], cache_path)
    return GameSpecDocument(doc["kind"], VERSION, body, dict(doc.get("metadata", {})))


def load_failure_plan(source: str | os.PathLike | Mapping, graph: WorkflowGraph) -> FailurePlan:
    spec = _read(source)
    _check_schema(spec, FAILURES)
    return _failure_plan(spec, graph, "/")


# serialization -------------------------------------------------------------


def _floats(arr) -> Any:
    return [_floats(x) for x in arr] if hasattr(arr, "__len__") else float(arr)


def _prompt_json(p: StructuredPrompt) -> dict:
    out = {"id": p.id, "rendered": p.rendered}
    for slot in ("cot", "bias", "tom", "memory"):
        if getattr(p, slot) is not None:
            out[slot] = getattr(p, slot)
    return out


def _policy_json(policy, with_actions: bool) -> dict:
    if isinstance(policy, ExternalPolicy):
        out = {
            "type": "external",
            "url": policy.url,
            "sampleCount": policy.sample_count,
            "seed": policy.seed,
            "timeout": policy.timeout,
            "retries": policy.retries,
            "maxInFlight": policy.max_in_flight,
        }
        if policy.cache.path is not None:
            out["cache"] = str(policy.cache.path)
    elif isinstance(policy, TablePolicy):
        out = {
            "type": "table",
            "key": policy.key,
            "table": {k: _floats(d.probs) for k, d in policy.table.items() if isinstance(k, str)},
        }
        rows = [
            {"prompt": k[0], "message": k[1], "probs": _floats(d.probs)}
            for k, d in policy.table.items()
            if not isinstance(k, str)
        ]
        if rows:
            out["messageTable"] = rows
        if policy.default is not None:
            out["default"] = _floats(policy.default.probs)
    else:
        raise InvalidInputError(f"cannot serialize policy of type {type(policy).__name__}")
    if with_actions:
        out["actions"] = list(policy.space.labels)
    return out


def _bimatrix_json(game: BimatrixGame) -> dict:
    out = {"rowActions": list(game.row_space.labels), "colActions": list(game.col_space.labels), "rowPayoff": _floats(game.row_payoff)}
    if game.zero_sum:
        out["zeroSum"] = True
    else:
        out["colPayoff"] = _floats(game.col_payoff)
    return out


def _markov_json(game: MarkovGame) -> dict:
    return {
        "states": list(game.states),
        "actions": {
            "row": [list(a.labels) for a in game.action_spaces[0]],
            "col": [list(a.labels) for a in game.action_spaces[1]],
        },
        "transitions": [_floats(t) for t in game.transitions],
        "utilities": {"row": [_floats(u) for u in game.utilities[0]], "col": [_floats(u) for u in game.utilities[1]]},
        "discount": float(game.discount),
        "horizon": game.horizon,
    }


def _body_json(kind: str, body: Any) -> dict:
    if kind == "matrix":
        out = _bimatrix_json(body.game)
        if body.profile is not None:
            out["strategies"] = {"row": _floats(body.profile[0].probs), "col": _floats(body.profile[1].probs)}
        return out
    if kind == "markov":
        return _markov_json(body)
    if kind == "signaling":
        return {
            "types": list(body.types.labels),
            "prior": _floats(body.prior.probs),
            "signals": list(body.signals.labels),
            "actions": list(body.actions.labels),
            "senderUtility": _floats(body.sender_utility),
            "receiverUtility": _floats(body.receiver_utility),
        }
    if kind == "stackelberg":
        if body.sgame.type_profile is not None:
            raise InvalidInputError("type-indexed payoff variants have no document form")
        return {
            "game": _markov_json(body.sgame.base),
            "leader": body.sgame.leader,
            "startState": body.start_state,
            "policySpace": body.policy_space,
            "tieBreak": body.tie_break,
        }
    if kind == "interdiction":
        return {
            "nodes": list(body.nodes),
            "edges": [[e.u, e.v, float(e.weight), float(e.capacity)] for e in body.edges],
            "source": body.source,
            "sink": body.sink,
            "metric": body.metric,
            "attackerBudget": body.attacker_budget,
            "defenderBudget": body.defender_budget,
        }
    if kind == "promptGame":
        out = _bimatrix_json(body.base)
        out["rowPrompts"] = [_prompt_json(p) for p in body.prompts_row]
        out["colPrompts"] = [_prompt_json(p) for p in body.prompts_col]
        out["rowPolicy"] = _policy_json(body.row_policy, False)
        out["colPolicy"] = _policy_json(body.col_policy, False)
        out["rowRole"] = body.info_row.role
        out["colRole"] = body.info_col.role
        return out
    if kind == "workflow":
        graph = body.graph
        nodes = []
        for n in graph.nodes:
            node = {
                "id": n.id,
                "role": n.role,
                "inputPorts": list(n.input_ports),
                "outputPorts": list(n.output_ports),
                "combiner": n.combiner,
                "standby": n.standby,
            }
            if n.template is not None:
                node["template"] = _prompt_json(n.template)
            if n.policy is not None:
                node["policy"] = _policy_json(n.policy, True)
            if n.weights:
                node["weights"] = {k: float(v) for k, v in n.weights.items()}
            nodes.append(node)
        out = {
            "nodes": nodes,
            "edges": [[e.source, e.target, e.kind] for e in graph.edges],
            "topology": graph.topology,
            "maxFeedbackIterations": graph.max_feedback_iterations,
            "initialInputs": dict(body.initial_inputs),
        }
        if body.failures is not None:
            out["failures"] = {
                "events": [[e.node, e.round, e.mode] for e in body.failures.events],
                "fallback": dict(body.failures.fallback),
            }
        return out
    raise InvalidInputError(f"unknown kind {kind!r}")


def to_document(doc: GameSpecDocument) -> dict:
    return {"kind": doc.kind, "version": doc.version, "body": _body_json(doc.kind, doc.body), "metadata": dict(doc.metadata)}


def serialize_game_spec(doc: GameSpecDocument) -> str:
    """Canonical JSON text: fixed field order per kind, sorted metadata."""
    out = to_document(doc)
    out["metadata"] = dict(sorted(out["metadata"].items()))
    return json.dumps(out, indent=2) + "\n"
