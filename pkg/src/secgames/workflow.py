"""Multi-agent workflow execution over port-wired agent graphs.

Agents are wired output port to input port. Forward edges must form a DAG
and are executed layer by layer within a round; feedback edges deliver a
round's output at the start of the next round. A run ends when the feedback
traffic of two consecutive rounds is textually identical, when the round cap
is reached, or when a permanent failure starves a terminal agent.

Every random choice is drawn from a generator keyed by
``sha256(seed, round, node)``, so traces depend on nothing but the inputs.
"""

from __future__ import annotations

import hashlib
import json
import math
import string
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Literal, Mapping, Optional, Sequence, Union

import numpy as np

from secgames.core import Distribution
from secgames.errors import ConfigurationError, InvalidInputError, SecGamesError
from secgames.prompts.games import PromptSpaceGame
from secgames.prompts.policy import InfoContext, ReasoningPolicy, StructuredPrompt, policy_action_distribution

EdgeKind = Literal["forward", "feedback"]
Topology = Literal["chain", "star", "parallel", "feedback", "hybrid"]
FailureMode = Literal["silent", "corrupt", "crash"]
Termination = Literal["completed", "iterationCap", "failureUnrecovered"]

TOPOLOGIES = ("chain", "star", "parallel", "feedback", "hybrid")
FAILURE_MODES = ("silent", "corrupt", "crash")
TEMPLATE_FIELDS = ("rendered", "cot", "bias", "tom", "memory")


def _digest_int(*parts: object) -> int:
    text = "\x00".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def _uniform(*parts: object) -> float:
    return _digest_int(*parts) / 2.0**64


def sample_action(dist: Distribution, *key: object) -> str:
    """Inverse-CDF draw keyed by ``key``; point masses are returned exactly."""
    cdf = np.cumsum(dist.probs)
    idx = int(np.searchsorted(cdf, _uniform(*key) * cdf[-1], side="right"))
    idx = min(idx, len(cdf) - 1)
    while dist.probs[idx] == 0:  # guard against landing on a zero-mass tail label
        idx -= 1
    return dist.space.labels[idx]


def scramble(payload: str, *key: object) -> str:
    """Deterministic corruption: a keyed permutation of the characters behind a ``#`` marker."""
    rng = np.random.default_rng(_digest_int("corrupt", *key))
    chars = list(payload)
    return "#" + "".join(chars[i] for i in rng.permutation(len(chars)))


def template_placeholders(template: StructuredPrompt) -> set[str]:
    names = set()
    for name in TEMPLATE_FIELDS:
        text = getattr(template, name)
        if text is None:
            continue
        try:
            parsed = list(string.Formatter().parse(text))
        except ValueError as err:
            raise ConfigurationError(f"template {template.id!r} field {name!r} is malformed: {err}") from err
        for _, field_name, _, _ in parsed:
            if field_name is not None:
                if not field_name.isidentifier():
                    raise ConfigurationError(
                        f"template {template.id!r} has placeholder {{{field_name}}}; only {{port}} names are allowed"
                    )
                names.add(field_name)
    return names


def render_template(template: StructuredPrompt, values: Mapping[str, str], memory_suffix: str = "") -> StructuredPrompt:
    filled = {
        name: None if getattr(template, name) is None else getattr(template, name).format_map(values)
        for name in TEMPLATE_FIELDS
    }
    if memory_suffix:
        filled["memory"] = memory_suffix if not filled["memory"] else f"{filled['memory']}\n{memory_suffix}"
    return StructuredPrompt(template.id, **filled)


@dataclass(frozen=True, eq=False)
class AgentNode:
    """One agent in a workflow.

    A policy agent renders ``template`` with its input payloads (``{port}``
    placeholders), asks ``policy`` for an action distribution and emits the
    sampled action on every output port. A combiner (``combiner=True``) has
    no policy: it runs :func:`aggregate_decisions` over all incoming messages,
    weighting each by ``weights[source node]`` (default 1). Standby agents are
    not wired; they only run as failure fallbacks. ``stage_game`` optionally
    attaches a prompt-space game to the node and is carried, not executed.
    """

    id: str
    role: str
    policy: Optional[ReasoningPolicy] = None
    template: Optional[StructuredPrompt] = None
    input_ports: tuple[str, ...] = ("in",)
    output_ports: tuple[str, ...] = ("out",)
    combiner: bool = False
    weights: Mapping[str, float] = field(default_factory=dict)
    standby: bool = False
    stage_game: Optional[PromptSpaceGame] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_ports", tuple(self.input_ports))
        object.__setattr__(self, "output_ports", tuple(self.output_ports))
        object.__setattr__(self, "weights", dict(self.weights))
        if not self.id or "." in self.id:
            raise ConfigurationError(f"node id {self.id!r} must be nonempty and free of '.'")
        for ports in (self.input_ports, self.output_ports):
            if len(set(ports)) != len(ports) or any(not p or "." in p for p in ports):
                raise ConfigurationError(f"node {self.id!r} has duplicate or malformed port names {ports}")
        if any(w < 0 or not math.isfinite(w) for w in self.weights.values()):
            raise ConfigurationError(f"node {self.id!r} has a negative or non-finite vote weight")
        if self.combiner:
            if self.policy is not None:
                raise ConfigurationError(f"combiner {self.id!r} must not carry a policy")
            return
        if self.policy is None or self.template is None:
            raise ConfigurationError(f"agent {self.id!r} needs both a policy and a prompt template")
        missing = template_placeholders(self.template) - set(self.input_ports)
        if missing:
            raise ConfigurationError(
                f"agent {self.id!r} template placeholders {sorted(missing)} match no input port {list(self.input_ports)}"
            )


def _split_port(ref: str) -> tuple[str, str]:
    node, sep, port = ref.partition(".")
    if not sep or not node or not port:
        raise ConfigurationError(f"port reference {ref!r} must look like 'node.port'")
    return node, port


@dataclass(frozen=True)
class WorkflowEdge:
    source: str
    target: str
    kind: EdgeKind = "forward"

    def __post_init__(self) -> None:
        if self.kind not in ("forward", "feedback"):
            raise ConfigurationError(f"edge kind must be 'forward' or 'feedback', got {self.kind!r}")
        _split_port(self.source)
        _split_port(self.target)

    @property
    def source_node(self) -> str:
        return _split_port(self.source)[0]

    @property
    def target_node(self) -> str:
        return _split_port(self.target)[0]


@dataclass(frozen=True, eq=False)
class WorkflowGraph:
    nodes: tuple[AgentNode, ...]
    edges: tuple[WorkflowEdge, ...]
    topology: Topology = "hybrid"
    max_feedback_iterations: int = 1

    def __post_init__(self) -> None:
        nodes = tuple(self.nodes)
        edges = tuple(e if isinstance(e, WorkflowEdge) else WorkflowEdge(*e) for e in self.edges)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        if not nodes:
            raise ConfigurationError("a workflow needs at least one node")
        ids = [n.id for n in nodes]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"duplicate node ids in {ids}")
        if self.topology not in TOPOLOGIES:
            raise ConfigurationError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        if int(self.max_feedback_iterations) != self.max_feedback_iterations or self.max_feedback_iterations < 1:
            raise ConfigurationError("max_feedback_iterations must be an integer >= 1")
        by_id = self.node_map
        for e in edges:
            src, sport = _split_port(e.source)
            dst, dport = _split_port(e.target)
            for node_id in (src, dst):
                if node_id not in by_id:
                    raise ConfigurationError(f"edge {e.source} -> {e.target} names unknown node {node_id!r}")
                if by_id[node_id].standby:
                    raise ConfigurationError(f"standby node {node_id!r} cannot be wired")
            if sport not in by_id[src].output_ports:
                raise ConfigurationError(f"{e.source} is not an output port")
            if dport not in by_id[dst].input_ports:
                raise ConfigurationError(f"{e.target} is not an input port")
        if len(set(edges)) != len(edges):
            raise ConfigurationError("duplicate edges")
        self.layers()  # raises on forward cycles

    @property
    def node_map(self) -> dict[str, AgentNode]:
        return {n.id: n for n in self.nodes}

    @property
    def active_ids(self) -> list[str]:
        return sorted(n.id for n in self.nodes if not n.standby)

    def layers(self) -> tuple[tuple[str, ...], ...]:
        """Kahn generations of the forward DAG, each sorted by node id."""
        active = self.active_ids
        indegree = {n: 0 for n in active}
        succ: dict[str, set[str]] = defaultdict(set)
        for e in self.edges:
            if e.kind == "forward" and e.target_node not in succ[e.source_node]:
                succ[e.source_node].add(e.target_node)
                indegree[e.target_node] += 1
        frontier = sorted(n for n in active if indegree[n] == 0)
        layers, seen = [], 0
        while frontier:
            layers.append(tuple(frontier))
            seen += len(frontier)
            nxt = []
            for n in frontier:
                for m in succ[n]:
                    indegree[m] -= 1
                    if indegree[m] == 0:
                        nxt.append(m)
            frontier = sorted(nxt)
        if seen != len(active):
            stuck = sorted(n for n, d in indegree.items() if d > 0)
            raise ConfigurationError(f"forward edges form a cycle through {stuck}; mark one edge as feedback")
        return tuple(layers)

    @property
    def has_feedback(self) -> bool:
        return any(e.kind == "feedback" for e in self.edges)

    def incoming(self, port_ref: str, kind: EdgeKind) -> list[WorkflowEdge]:
        return sorted((e for e in self.edges if e.target == port_ref and e.kind == kind), key=lambda e: e.source)

    def outgoing(self, node_id: str) -> list[WorkflowEdge]:
        return sorted((e for e in self.edges if e.source_node == node_id), key=lambda e: (e.source, e.target))

    def source_ports(self) -> list[str]:
        """Input ports of wired agents that no edge feeds; initial inputs must cover them."""
        fed = {e.target for e in self.edges}
        return sorted(
            f"{n.id}.{p}" for n in self.nodes if not n.standby for p in n.input_ports if f"{n.id}.{p}" not in fed
        )

    def terminals(self) -> list[str]:
        has_forward_out = {e.source_node for e in self.edges if e.kind == "forward"}
        return [n for n in self.active_ids if n not in has_forward_out]


@dataclass(frozen=True)
class Message:
    source_port: str
    target_port: str
    payload: str
    round: int
    provenance: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.round < 0:
            raise InvalidInputError("message round must be >= 0")
        if not self.provenance:
            raise InvalidInputError("message provenance must name at least one node")


@dataclass(frozen=True)
class FailureEvent:
    node: str
    round: int
    mode: FailureMode


@dataclass(frozen=True)
class FailurePlan:
    """Validated failure schedule plus fallback routing; build with :func:`inject_failure`."""

    events: tuple[FailureEvent, ...] = ()
    fallback: Mapping[str, str] = field(default_factory=dict)

    def mode(self, node: str, round_: int) -> Optional[str]:
        for e in self.events:
            if e.node == node and e.round == round_:
                return e.mode
        return None


def inject_failure(
    graph: WorkflowGraph,
    plan: Iterable[FailureEvent | tuple[str, int, str]],
    fallback: Optional[Mapping[str, str]] = None,
) -> FailurePlan:
    """Check a failure schedule against ``graph`` and return it for :func:`run_workflow`.

    ``silent`` drops one round of output, ``corrupt`` replaces it by a keyed
    scramble, ``crash`` takes the node out for the rest of the run. A crashed
    or policy-failed node with a registered fallback is replaced by the backup
    from the following round on. Backups must be standby nodes with the same
    ports and must not be scheduled to crash themselves.
    """
    events = tuple(e if isinstance(e, FailureEvent) else FailureEvent(*e) for e in plan)
    fallback = dict(fallback or {})
    nodes = graph.node_map
    seen = set()
    for e in events:
        if e.node not in nodes:
            raise ConfigurationError(f"failure plan names unknown node {e.node!r}")
        if e.mode not in FAILURE_MODES:
            raise ConfigurationError(f"failure mode must be one of {FAILURE_MODES}, got {e.mode!r}")
        if int(e.round) != e.round or not 1 <= e.round <= graph.max_feedback_iterations:
            raise ConfigurationError(
                f"failure round {e.round} for {e.node!r} outside 1..{graph.max_feedback_iterations}"
            )
        if (e.node, e.round) in seen:
            raise ConfigurationError(f"two failures scheduled for {e.node!r} in round {e.round}")
        seen.add((e.node, e.round))
    crashing = {e.node for e in events if e.mode == "crash"}
    for primary, backup in fallback.items():
        if primary not in nodes or backup not in nodes:
            raise ConfigurationError(f"fallback {primary!r} -> {backup!r} names an unknown node")
        if backup == primary or backup in crashing or backup in fallback:
            raise ConfigurationError(f"fallback target {backup!r} for {primary!r} is itself a failing node")
        if not nodes[backup].standby:
            raise ConfigurationError(f"fallback target {backup!r} must be a standby node")
        if set(nodes[backup].input_ports) != set(nodes[primary].input_ports) or set(
            nodes[backup].output_ports
        ) != set(nodes[primary].output_ports):
            raise ConfigurationError(f"fallback {backup!r} does not expose the ports of {primary!r}")
    if len(set(fallback.values())) != len(fallback):
        raise ConfigurationError("one backup cannot stand in for two nodes")
    return FailurePlan(events, fallback)


@dataclass(frozen=True)
class TraceEntry:
    """One line of the run log.

    ``node`` is the workflow slot; ``actor`` is whoever actually ran in it
    (the backup after a reroute). ``status`` is one of fired, corrupt,
    silent, crashed, failed, starved, down or reroute.
    """

    round: int
    node: str
    actor: str
    status: str
    inputs: Mapping[str, str] = field(default_factory=dict)
    output: Optional[str] = None
    distribution: Optional[Mapping[str, float]] = None
    tally: Optional[Mapping[str, float]] = None
    detail: Optional[str] = None

    def to_json(self) -> dict[str, Any]:
        return {
            "round": self.round,
            "node": self.node,
            "actor": self.actor,
            "status": self.status,
            "inputs": dict(self.inputs),
            "output": self.output,
            "distribution": None if self.distribution is None else dict(self.distribution),
            "tally": None if self.tally is None else dict(self.tally),
            "detail": self.detail,
        }


FIRED = ("fired", "corrupt")


@dataclass(frozen=True)
class TraceRecord:
    entries: tuple[TraceEntry, ...]
    termination: Termination
    rounds: int
    outputs: Mapping[str, str]
    messages: tuple[Message, ...] = ()

    def firings(self, round_: Optional[int] = None) -> list[TraceEntry]:
        return [e for e in self.entries if e.status in FIRED and (round_ is None or e.round == round_)]

    def to_jsonl(self) -> str:
        """Line-delimited JSON: one object per entry, then a summary line."""
        lines = [json.dumps(e.to_json(), sort_keys=True) for e in self.entries]
        lines.append(
            json.dumps(
                {"terminationReason": self.termination, "rounds": self.rounds, "outputs": dict(self.outputs)},
                sort_keys=True,
            )
        )
        return "\n".join(lines) + "\n"


def _join(messages: Sequence[Message]) -> str:
    return "\n".join(m.payload for m in sorted(messages, key=lambda m: m.source_port))


def _distribution_snapshot(dist: Distribution) -> dict[str, float]:
    return {label: float(p) for label, p in zip(dist.space.labels, dist.probs)}


def _policy_output(
    node: AgentNode, inputs: Mapping[str, str], seed: int, round_: int, slot: str
) -> tuple[str, dict[str, float]]:
    prompt = render_template(node.template, inputs)
    info = InfoContext("agent", {"agentRole": node.role, **inputs})
    dist = policy_action_distribution(node.policy, prompt, info, seed=_digest_int("policy", seed, round_, slot))
    return sample_action(dist, "sample", seed, round_, slot), _distribution_snapshot(dist)


def run_workflow(
    graph: WorkflowGraph,
    initial_inputs: Mapping[str, str],
    seed: int = 0,
    failures: Optional[FailurePlan] = None,
) -> TraceRecord:
    """Execute ``graph`` round by round and return the full trace.

    ``initial_inputs`` maps ``"node.port"`` to text. Every unfed input port
    must be covered; feedback-fed ports may be seeded here for round 1 and
    otherwise start empty. A policy agent fires once all of its forward-fed
    ports received a message this round; a combiner fires on whatever
    arrived. Within a round, agents run by forward-DAG layer and by id inside
    a layer, which is also the trace order.
    """
    plan = failures or FailurePlan()
    nodes = graph.node_map
    missing = [p for p in graph.source_ports() if p not in initial_inputs]
    if missing:
        raise ConfigurationError(f"initial inputs do not cover source ports {missing}")
    for ref in initial_inputs:
        node_id, port = _split_port(ref)
        if node_id not in nodes or port not in nodes[node_id].input_ports:
            raise ConfigurationError(f"initial input {ref!r} is not an input port")
    for e in plan.events:
        if e.node not in nodes:
            raise ConfigurationError(f"failure plan names unknown node {e.node!r}")

    layers = graph.layers()
    terminals = graph.terminals()
    feedback_state = {
        ref: str(text)
        for ref, text in initial_inputs.items()
        if graph.incoming(ref, "feedback") and not graph.incoming(ref, "forward")
    }
    down: dict[str, int] = {}  # slot -> round it went down
    acting: dict[str, str] = {}  # slot -> backup currently running it
    dead: set[str] = set()  # actors that crashed or failed
    entries: list[TraceEntry] = []
    messages: list[Message] = []
    previous_feedback: Optional[dict[str, str]] = None
    outputs: dict[str, str] = {}
    termination: Termination = "iterationCap"
    round_ = 0

    for round_ in range(1, graph.max_feedback_iterations + 1):
        for slot in sorted(down):
            backup = plan.fallback.get(slot)
            if backup is not None and backup not in dead and slot not in acting and down[slot] < round_:
                acting[slot] = backup
                entries.append(TraceEntry(round_, slot, backup, "reroute", detail=f"{slot} replaced by {backup}"))
        inbox: dict[str, list[Message]] = defaultdict(list)
        feedback_out: dict[str, list[Message]] = defaultdict(list)
        emitted: set[str] = set()
        for layer in layers:
            for slot in layer:
                node = nodes[slot]
                actor_id = acting.get(slot, slot)
                actor = nodes[actor_id]
                if slot in down and slot not in acting:
                    entries.append(TraceEntry(round_, slot, actor_id, "down"))
                    continue
                inputs: dict[str, str] = {}
                received: list[Message] = []
                starved = []
                for port in node.input_ports:
                    ref = f"{slot}.{port}"
                    if graph.incoming(ref, "forward"):
                        got = inbox.get(ref, [])
                        received += got
                        if got:
                            inputs[port] = _join(got)
                        else:
                            starved.append(port)
                    elif graph.incoming(ref, "feedback"):
                        inputs[port] = feedback_state.get(ref, "")
                    else:
                        inputs[port] = str(initial_inputs[ref])
                if (starved and not node.combiner) or (node.combiner and not received and starved):
                    entries.append(TraceEntry(round_, slot, actor_id, "starved", inputs, detail=f"no input on {starved}"))
                    continue
                mode = plan.mode(actor_id, round_)
                if mode == "crash":
                    down[slot] = round_
                    dead.add(actor_id)
                    acting.pop(slot, None)
                    entries.append(TraceEntry(round_, slot, actor_id, "crashed", inputs))
                    continue
                if mode == "silent":
                    entries.append(TraceEntry(round_, slot, actor_id, "silent", inputs))
                    continue
                dist = tally = None
                try:
                    if actor.combiner:
                        votes = [
                            (m.source_port.partition(".")[0], m.payload, actor.weights.get(m.source_port.partition(".")[0], 1.0))
                            for m in sorted(received, key=lambda m: m.source_port)
                        ]
                        output, tally = aggregate_decisions(votes)
                    else:
                        output, dist = _policy_output(actor, inputs, seed, round_, slot)
                except SecGamesError as err:
                    down[slot] = round_
                    dead.add(actor_id)
                    acting.pop(slot, None)
                    entries.append(TraceEntry(round_, slot, actor_id, "failed", inputs, detail=str(err)))
                    continue
                status = "fired"
                if mode == "corrupt":
                    output = scramble(output, seed, round_, actor_id)
                    status = "corrupt"
                entries.append(TraceEntry(round_, slot, actor_id, status, inputs, output, dist, tally))
                emitted.add(slot)
                provenance = tuple(dict.fromkeys([p for m in received for p in m.provenance] + [actor_id]))
                for e in graph.outgoing(slot):
                    msg = Message(e.source, e.target, output, round_, provenance)
                    messages.append(msg)
                    (inbox if e.kind == "forward" else feedback_out)[e.target].append(msg)
                if slot in terminals:
                    for port in node.output_ports:
                        outputs[f"{slot}.{port}"] = output

        current_feedback = {ref: _join(msgs) for ref, msgs in sorted(feedback_out.items())}
        for ref, text in current_feedback.items():
            feedback_state[ref] = text
        terminals_ok = all(t in emitted for t in terminals)
        permanent = any(slot not in acting and plan.fallback.get(slot, slot) in dead for slot in down)
        if not terminals_ok and (permanent or not graph.has_feedback):
            termination = "failureUnrecovered"
            break
        if not graph.has_feedback:
            termination = "completed"
            break
        if previous_feedback is not None and current_feedback == previous_feedback and terminals_ok:
            termination = "completed"
            break
        previous_feedback = current_feedback
    return TraceRecord(tuple(entries), termination, round_, dict(sorted(outputs.items())), tuple(messages))


Vote = tuple[str, str, float]


def aggregate_decisions(inputs: Sequence[Union[Vote, tuple[str, str]]]) -> tuple[str, dict[str, float]]:
    """Weighted plurality with ties going to the lexicographically smallest action.

    Each input is ``(node_id, action, weight)``; the weight defaults to 1.
    Returns the winning action and the per-action tally (sorted by action).
    """
    if not inputs:
        raise InvalidInputError("aggregate_decisions needs at least one vote")
    totals: dict[str, list[float]] = defaultdict(list)
    for item in inputs:
        node_id, action, weight = (*item, 1.0) if len(item) == 2 else item
        weight = float(weight)
        if weight < 0 or not math.isfinite(weight):
            raise InvalidInputError(f"vote weight for {node_id!r} must be finite and >= 0, got {weight}")
        totals[str(action)].append(weight)
    tally = {action: math.fsum(ws) for action, ws in sorted(totals.items())}
    if all(v == 0 for v in tally.values()):
        raise InvalidInputError("all vote weights are zero")
    best = max(tally.values())
    return min(a for a, v in tally.items() if v == best), tally


@dataclass(frozen=True)
class DebateTurn:
    round: int
    agent: str
    status: str
    stance: Optional[str] = None
    detail: Optional[str] = None

    def line(self) -> str:
        return f"{self.agent}: {self.stance}"


@dataclass(frozen=True)
class DebateResult:
    answer: Optional[str]
    transcript: tuple[DebateTurn, ...]
    termination: Termination
    tally: Optional[Mapping[str, float]] = None


def debate_protocol(
    agents: Sequence[AgentNode],
    question: str,
    rounds: int,
    judge: Union[AgentNode, Literal["vote"]] = "vote",
    seed: int = 0,
    failures: Iterable[FailureEvent | tuple[str, int, str]] = (),
) -> DebateResult:
    """Round-robin debate followed by a judge or a vote.

    In each round the agents speak in list order. A speaker's prompt is its
    template rendered with ``{question}``, with every earlier turn appended to
    the memory slot as ``"agent: stance"`` lines (the same text is passed as
    the observed message). After the last round the judge reads the whole
    transcript the same way, or, with ``judge="vote"``, the agents' final
    stances go through :func:`aggregate_decisions`. A policy error or crash
    removes the agent; once fewer than two remain the debate aborts.
    """
    if len(agents) < 2:
        raise InvalidInputError("a debate needs at least two agents")
    if int(rounds) != rounds or rounds < 1:
        raise InvalidInputError("rounds must be an integer >= 1")
    ids = [a.id for a in agents]
    if len(set(ids)) != len(ids):
        raise InvalidInputError(f"duplicate agent ids {ids}")
    if any(a.combiner for a in agents):
        raise InvalidInputError("debaters must be policy agents")
    events = {(e.node, e.round): e.mode for e in (f if isinstance(f, FailureEvent) else FailureEvent(*f) for f in failures)}

    transcript: list[DebateTurn] = []
    out: set[str] = set()
    last: dict[str, str] = {}

    def speak(agent: AgentNode, round_: int) -> tuple[str, Optional[dict[str, float]]]:
        history = "\n".join(t.line() for t in transcript if t.stance is not None)
        prompt = render_template(agent.template, {"question": question}, history)
        info = InfoContext("agent", {"agentRole": agent.role, "question": question}, history or None)
        dist = policy_action_distribution(agent.policy, prompt, info, seed=_digest_int("debate", seed, round_, agent.id))
        return sample_action(dist, "debate", seed, round_, agent.id), dist

    for round_ in range(1, rounds + 1):
        for agent in agents:
            if agent.id in out:
                continue
            mode = events.get((agent.id, round_))
            if mode == "crash":
                out.add(agent.id)
                transcript.append(DebateTurn(round_, agent.id, "crashed"))
            elif mode == "silent":
                transcript.append(DebateTurn(round_, agent.id, "silent"))
            else:
                try:
                    stance, _ = speak(agent, round_)
                except SecGamesError as err:
                    out.add(agent.id)
                    transcript.append(DebateTurn(round_, agent.id, "failed", detail=str(err)))
                else:
                    if mode == "corrupt":
                        stance = scramble(stance, seed, round_, agent.id)
                    last[agent.id] = stance
                    transcript.append(DebateTurn(round_, agent.id, "corrupt" if mode == "corrupt" else "spoke", stance))
            if len(agents) - len(out) < 2:
                return DebateResult(None, tuple(transcript), "failureUnrecovered")

    if judge == "vote":
        votes = [(a.id, last[a.id]) for a in agents if a.id not in out and a.id in last]
        if not votes:
            return DebateResult(None, tuple(transcript), "failureUnrecovered")
        answer, tally = aggregate_decisions(votes)
        return DebateResult(answer, tuple(transcript), "completed", tally)
    try:
        answer, _ = speak(judge, rounds + 1)
    except SecGamesError as err:
        transcript.append(DebateTurn(rounds + 1, judge.id, "failed", detail=str(err)))
        return DebateResult(None, tuple(transcript), "failureUnrecovered")
    transcript.append(DebateTurn(rounds + 1, judge.id, "judged", answer))
    return DebateResult(answer, tuple(transcript), "completed")
