from __future__ import annotations

import json
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secgames.core import Distribution
from secgames.errors import KindMismatchError, ValidationError
from secgames.interdiction import NetworkInstance
from secgames.prompts import ExternalPolicy, TablePolicy
from secgames.prompts.rps import rps_prompt_game
from secgames.spec_io import load_failure_plan, load_game_spec, serialize_game_spec

FIXTURE = resources.files("secgames") / "data" / "rps_prompt_game.json"


def doc(kind, body, **extra):
    return {"kind": kind, "version": 1, "body": body, **extra}


MATRIX = doc("matrix", {"rowActions": ["a", "b"], "colActions": ["c", "d"], "rowPayoff": [[1, 0], [0, 1]], "colPayoff": [[0, 1], [1, 0]]})
MARKOV = doc(
    "markov",
    {
        "states": ["s", "t"],
        "actions": {"row": [["u", "v"], ["w"]], "col": [["x"], ["y", "z"]]},
        "transitions": [[[[0.5, 0.5]], [[0, 1]]], [[[1, 0], [0.25, 0.75]]]],
        "utilities": {"row": [[[1], [2]], [[3, 4]]], "col": [[[-1], [-2]], [[-3, -4]]]},
        "discount": 0.9,
    },
)
SIGNALING = doc(
    "signaling",
    {
        "types": ["real", "honeypot"],
        "prior": [0.7, 0.3],
        "signals": ["lookReal", "lookFake"],
        "actions": ["attack", "withdraw"],
        "senderUtility": [[[1, 0], [0, 1]], [[1, 0], [0, 1]]],
        "receiverUtility": [[[2, 0], [2, 0]], [[-3, 0], [-3, 0]]],
    },
)
STACKELBERG = doc("stackelberg", {"game": MARKOV["body"], "startState": "s", "leader": 1, "tieBreak": "lowest"})
INTERDICTION = doc(
    "interdiction",
    {
        "nodes": ["s", "a", "t"],
        "edges": [["s", "a", 1, 2], ["a", "t"], ["s", "t", 5]],
        "source": "s",
        "sink": "t",
        "metric": "shortestPathLength",
        "attackerBudget": 1,
        "defenderBudget": 1,
        "undirected": True,
    },
)
WORKFLOW = doc(
    "workflow",
    {
        "nodes": [
            {
                "id": "a",
                "role": "triage",
                "template": {"id": "ta", "rendered": "triage {in}"},
                "policy": {"type": "table", "actions": ["esc", "drop"], "key": "rendered", "table": {"triage alert": [1, 0]}},
            },
            {"id": "hub", "combiner": True, "inputPorts": ["in"], "weights": {"a": 2}},
            {
                "id": "a2",
                "standby": True,
                "template": {"id": "ta", "rendered": "triage {in}"},
                "policy": {"type": "table", "actions": ["esc", "drop"], "default": ["1/2", "1/2"]},
            },
        ],
        "edges": [["a.out", "hub.in"]],
        "topology": "chain",
        "initialInputs": {"a.in": "alert"},
        "failures": {"events": [["a", 1, "silent"]], "fallback": {"a": "a2"}},
    },
)
EXTERNAL = doc(
    "promptGame",
    {
        "rowActions": ["l", "r"],
        "colActions": ["u"],
        "rowPayoff": [[1], [0]],
        "colPayoff": [[0], [0]],
        "rowPrompts": [{"id": "p", "rendered": "go", "cot": "think"}],
        "colPrompts": [{"id": "q", "rendered": "stay"}],
        "rowPolicy": {"type": "external", "url": "http://127.0.0.1:9/", "sampleCount": 16, "seed": 3},
        "colPolicy": {"type": "table", "table": {"q": [1]}, "messageTable": [{"prompt": "q", "message": "m", "probs": [1]}]},
        "rowRole": "sender",
        "colRole": "receiver",
    },
)
ALL = [MATRIX, MARKOV, SIGNALING, STACKELBERG, INTERDICTION, WORKFLOW, EXTERNAL, json.loads(FIXTURE.read_text())]


@pytest.mark.parametrize("document", ALL, ids=lambda d: d["kind"])
def test_round_trip(document):
    first = load_game_spec(json.dumps(document))
    text = serialize_game_spec(first)
    second = load_game_spec(text)
    assert serialize_game_spec(second) == text
    assert second.kind == first.kind and second.metadata == first.metadata


def test_round_trip_domain_equality():
    a = load_game_spec(json.dumps(MATRIX))
    b = load_game_spec(serialize_game_spec(a))
    assert a.body.game == b.body.game
    net = load_game_spec(json.dumps(INTERDICTION)).body
    assert load_game_spec(serialize_game_spec(load_game_spec(json.dumps(INTERDICTION)))).body == net
    assert isinstance(net, NetworkInstance) and len(net.edges) == 6


def test_fixture_is_the_rps_game():
    loaded = load_game_spec(FIXTURE.read_text()).body
    game = rps_prompt_game()
    assert len(loaded.prompts_row) == len(loaded.prompts_col) == 5
    assert loaded.base == game.base and loaded.prompts_row == game.prompts_row and loaded.prompts_col == game.prompts_col
    assert loaded.row_policy == game.row_policy and loaded.col_policy == game.col_policy


def test_load_from_path_and_mapping(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(MATRIX))
    assert load_game_spec(path).body.game == load_game_spec(MATRIX).body.game == load_game_spec(str(path)).body.game


def test_built_objects():
    wf = load_game_spec(WORKFLOW).body
    assert wf.graph.node_map["hub"].weights == {"a": 2.0}
    assert wf.failures.fallback == {"a": "a2"}
    ext = load_game_spec(EXTERNAL, cache_path="/tmp/ignored-cache.jsonl").body
    assert isinstance(ext.row_policy, ExternalPolicy) and ext.row_policy.sample_count == 16
    assert str(ext.row_policy.cache.path) == "/tmp/ignored-cache.jsonl"
    assert isinstance(ext.col_policy, TablePolicy) and ("q", "m") in ext.col_policy.table
    assert ext.info_row.role == "sender"


class TestErrors:
    def location(self, source) -> str:
        with pytest.raises(ValidationError) as err:
            load_game_spec(source)
        return err.value.location

    def test_empty_document(self):
        assert self.location("") == "/"
        assert self.location("{}") == "/"

    def test_not_json(self):
        assert self.location("{kind: matrix") == "/"

    def test_simplex_violation_names_field_and_sum(self):
        bad = json.loads(json.dumps(MATRIX))
        bad["body"]["strategies"] = {"row": [0.5, 0.6], "col": [0.5, 0.5]}
        with pytest.raises(ValidationError) as err:
            load_game_spec(bad)
        assert err.value.location == "/body/strategies/row"
        assert "strategies.row" in str(err.value) and "1.1" in str(err.value)

    def test_schema_errors_have_pointers(self):
        bad = json.loads(json.dumps(MATRIX))
        bad["body"]["rowPayoff"][1][0] = "x"
        assert self.location(bad) == "/body/rowPayoff/1/0"
        bad = json.loads(json.dumps(MATRIX))
        bad["version"] = 2
        assert self.location(bad) == "/version"
        bad = json.loads(json.dumps(WORKFLOW))
        bad["body"]["edges"][0] = ["a.out", "hub.in", "sideways"]
        assert self.location(bad) == "/body/edges/0/2"

    def test_semantic_errors_have_locations(self):
        bad = json.loads(json.dumps(MATRIX))
        bad["body"]["rowPayoff"] = [[1, 0, 0], [0, 1, 0]]
        assert self.location(bad) == "/body"
        bad = json.loads(json.dumps(MARKOV))
        bad["body"]["transitions"][0][0][0] = [0.5, 0.6]
        assert self.location(bad) == "/body"
        bad = json.loads(json.dumps(WORKFLOW))
        bad["body"]["nodes"][0]["template"]["rendered"] = "triage {ghost}"
        assert self.location(bad) == "/body/nodes/0"
        bad = json.loads(json.dumps(STACKELBERG))
        bad["body"]["startState"] = "nowhere"
        assert self.location(bad) == "/body/startState"
        bad = json.loads(json.dumps(SIGNALING))
        bad["body"]["prior"] = [0.7, 0.4]
        assert self.location(bad) == "/body/prior"

    def test_kind_mismatch(self):
        with pytest.raises(KindMismatchError) as err:
            load_game_spec(MATRIX, expected_kind="workflow")
        assert err.value.location == "/kind" and err.value.actual == "matrix"

    def test_failure_plan_file(self, tmp_path):
        graph = load_game_spec(WORKFLOW).body.graph
        plan = load_failure_plan({"events": [["a", 1, "crash"]], "fallback": {"a": "a2"}}, graph)
        assert plan.fallback == {"a": "a2"}
        with pytest.raises(ValidationError):
            load_failure_plan({"events": [["a", 1, "crash"]], "fallback": {"a": "hub"}}, graph)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), m=st.integers(1, 4), n=st.integers(1, 4), zero=st.booleans())
def test_random_matrix_round_trip(seed, m, n, zero):
    rng = np.random.default_rng(seed)
    body = {
        "rowActions": [f"r{i}" for i in range(m)],
        "colActions": [f"c{j}" for j in range(n)],
        "rowPayoff": rng.normal(size=(m, n)).tolist(),
        "strategies": {"row": rng.dirichlet(np.ones(m)).tolist(), "col": rng.dirichlet(np.ones(n)).tolist()},
    }
    if zero:
        body["zeroSum"] = True
    else:
        body["colPayoff"] = rng.normal(size=(m, n)).tolist()
    a = load_game_spec(doc("matrix", body, metadata={"seed": seed}))
    b = load_game_spec(serialize_game_spec(a))
    assert a.body.game == b.body.game and a.body.profile == b.body.profile and b.metadata == {"seed": seed}
    assert isinstance(b.body.profile[0], Distribution)
