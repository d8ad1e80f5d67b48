"""Command-line front end: ``secgames solve|audit-rps|run-workflow|stability``.

Exit codes: 0 on success, 2 for invalid documents or wiring, 3 when an
iterative solver runs out of iterations, 1 for any other engine error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Optional, Sequence

from secgames.core import is_epsilon_nash, expected_utility
from secgames.equilibrium import fictitious_play, solve_bimatrix, solve_zero_sum
from secgames.errors import ConfigurationError, ConvergenceError, InvalidInputError, SecGamesError, ValidationError
from secgames.interdiction import solve_minmax_interdiction
from secgames.markov import MAX_SWEEPS, VALUE_TOL, shapley_value_iteration
from secgames.prompts.games import EQUILIBRIUM_TOL, llm_nash_equilibria
from secgames.prompts.geometry import stability_profile, triangle_violation_rate
from secgames.prompts.rps import audit_rps
from secgames.signaling import enumerate_pure_pbne
from secgames.spec_io import GameSpecDocument, load_failure_plan, load_game_spec
from secgames.stackelberg import solve_leader_commitment
from secgames.workflow import run_workflow

EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_CONVERGENCE = 0, 1, 2, 3


def _num(x: float) -> Any:
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _equilibrium_json(res) -> dict:
    value = res.game_value
    return {
        "row": res.row_strategy.as_dict(),
        "col": res.col_strategy.as_dict(),
        "value": list(value) if isinstance(value, tuple) else value,
        "method": res.method,
        "epsilon": res.epsilon,
        "degenerate": res.degenerate,
    }


def solve_document(doc: GameSpecDocument, args: argparse.Namespace) -> dict:
    body, kind = doc.body, doc.kind
    if kind == "matrix":
        game = body.game
        out: dict[str, Any] = {"kind": kind}
        if args.method == "fictitiousPlay":
            kwargs = {}
            if args.epsilon is not None:
                kwargs["epsilon"] = args.epsilon
            if args.max_iter is not None:
                kwargs["max_iter"] = args.max_iter
            out["equilibria"] = [_equilibrium_json(fictitious_play(game, **kwargs))]
        elif game.zero_sum:
            out["equilibria"] = [_equilibrium_json(solve_zero_sum(game, args.method or "linearProgram"))]
        else:
            out["equilibria"] = [_equilibrium_json(r) for r in solve_bimatrix(game)]
        if body.profile is not None:
            eps = args.epsilon if args.epsilon is not None else 1e-8
            check = is_epsilon_nash(game, body.profile, eps)
            out["profile"] = {
                "payoffs": [expected_utility(game, body.profile, i) for i in range(2)],
                "isEpsilonNash": check.ok,
                "gains": list(check.gains),
                "epsilon": eps,
            }
        return out
    if kind == "markov":
        res = shapley_value_iteration(
            body,
            args.epsilon if args.epsilon is not None else VALUE_TOL,
            args.max_iter if args.max_iter is not None else MAX_SWEEPS,
        )
        policies = [[d.as_dict() for d in p.dists] for p in res.policies]
        return {
            "kind": kind,
            "values": dict(zip(body.states, map(float, res.values))),
            "sweeps": res.sweeps,
            "policies": {"row": dict(zip(body.states, policies[0])), "col": dict(zip(body.states, policies[1]))},
        }
    if kind == "signaling":
        out = []
        for a in enumerate_pure_pbne(body):
            out.append(
                {
                    "sender": a.sender_map(body),
                    "receiver": a.receiver_map(body),
                    "classification": a.classification,
                    "beliefs": {
                        s: {"belief": b.as_dict(), "source": src}
                        for s, b, src in zip(body.signals.labels, a.beliefs.beliefs, a.beliefs.sources)
                    },
                }
            )
        return {"kind": kind, "equilibria": out}
    if kind == "stackelberg":
        res = solve_leader_commitment(body.sgame, body.start_state, body.policy_space, body.tie_break)
        states = body.sgame.game.states
        return {
            "kind": kind,
            "leaderPolicy": dict(zip(states, (d.as_dict() for d in res.leader_policy.dists))),
            "followerPolicy": dict(zip(states, (d.as_dict() for d in res.follower_policy.dists))),
            "leaderValue": res.leader_value,
            "followerValue": res.follower_value,
            "evaluated": res.evaluated,
            "metadata": dict(res.metadata),
        }
    if kind == "interdiction":
        res = solve_minmax_interdiction(body)
        edge = lambda i: [body.edges[i].u, body.edges[i].v]  # noqa: E731
        return {
            "kind": kind,
            "defenderSet": [edge(i) for i in sorted(res.defender_set)],
            "attackerSet": [edge(i) for i in sorted(res.attacker_set)],
            "objective": _num(res.objective),
            "disconnected": res.disconnected,
            "metadata": dict(res.metadata),
        }
    if kind == "promptGame":
        tol = args.epsilon if args.epsilon is not None else EQUILIBRIUM_TOL
        res = llm_nash_equilibria(body, tol)
        return {
            "kind": kind,
            "equilibria": [list(p) for p in res.equilibrium_ids(body)],
            "behavioral": [[p.as_dict(), q.as_dict()] for p, q in res.behavioral],
            "payoffMatrix": {
                "rows": [p.id for p in body.prompts_row],
                "cols": [p.id for p in body.prompts_col],
                "row": res.row_payoffs.tolist(),
                "col": res.col_payoffs.tolist(),
            },
        }
    if kind == "workflow":
        trace = run_workflow(body.graph, body.initial_inputs, args.seed, body.failures)
        return {"kind": kind, "terminationReason": trace.termination, "rounds": trace.rounds, "outputs": dict(trace.outputs)}
    raise InvalidInputError(f"unknown kind {kind!r}")


def _flatten(obj: Any, prefix: str = "") -> list[tuple[str, Any]]:
    if isinstance(obj, dict):
        out = []
        for k, v in obj.items():
            out += _flatten(v, f"{prefix}.{k}" if prefix else str(k))
        return out
    if isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        out = []
        for i, v in enumerate(obj):
            out += _flatten(v, f"{prefix}[{i}]")
        return out
    return [(prefix, obj)]


def render_table(result: dict) -> str:
    rows = _flatten(result)
    width = max((len(k) for k, _ in rows), default=0)
    return "\n".join(f"{k.ljust(width)}  {json.dumps(v) if not isinstance(v, str) else v}" for k, v in rows)


def render_audit_table(report: dict) -> str:
    lines = [f"classical value: {report['classicalValue']:g}", "", "cell  prompts   reported  recomputed  status"]
    for c in report["cells"]:
        status = "DISCREPANCY" if c["discrepancy"] else "ok"
        lines.append(
            f"{c['cell']:<5} {c['rowPrompt']},{c['colPrompt']:<6} {c['reported']:>8.4f}  {c['recomputed']:>10.4f}  {status}"
        )
    pair = report["reportedPair"]
    lines += [
        "",
        "LLM-Nash equilibria: " + ", ".join(f"({x},{y})" for x, y in report["equilibria"]),
        f"reported pair ({pair['pair'][0]},{pair['pair'][1]}): "
        + ("equilibrium" if pair["isEquilibrium"] else "NOT an equilibrium"),
        f"  row best deviation -> {pair['rowDeviation']['to'] or 'none'} gain {pair['rowDeviation']['gain']:.4f}",
        f"  col best deviation -> {pair['colDeviation']['to'] or 'none'} gain {pair['colDeviation']['gain']:.4f}",
    ]
    return "\n".join(lines)


def _emit(result: dict, fmt: str, table: Optional[str] = None) -> None:
    if fmt == "json":
        print(json.dumps(result, indent=2, sort_keys=True))
    else:
        print(table if table is not None else render_table(result))


def cmd_solve(args: argparse.Namespace) -> int:
    doc = load_game_spec(args.spec, cache_path=args.cache)
    _emit(solve_document(doc, args), args.format)
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    report = audit_rps()
    _emit(report, args.format, render_audit_table(report))
    return EXIT_OK


def cmd_run_workflow(args: argparse.Namespace) -> int:
    doc = load_game_spec(args.spec, expected_kind="workflow", cache_path=args.cache)
    plan = doc.body.failures
    if args.failures is not None:
        plan = load_failure_plan(args.failures, doc.body.graph)
    trace = run_workflow(doc.body.graph, doc.body.initial_inputs, args.seed, plan)
    if args.format == "json":
        sys.stdout.write(trace.to_jsonl())
    else:
        for e in trace.entries:
            shown = e.output if e.output is not None else ""
            who = e.node if e.actor == e.node else f"{e.node}<-{e.actor}"
            print(f"round {e.round:>3}  {who:<20} {e.status:<8} {shown}")
        print(f"terminationReason: {trace.termination} after {trace.rounds} round(s)")
    return EXIT_OK


def cmd_stability(args: argparse.Namespace) -> int:
    doc = load_game_spec(args.spec, expected_kind="promptGame", cache_path=args.cache)
    game = doc.body
    out: dict[str, Any] = {}
    for side, policy, prompts, info in (
        ("row", game.row_policy, game.prompts_row, game.info_row),
        ("col", game.col_policy, game.prompts_col, game.info_col),
    ):
        if len(prompts) < 2:
            continue
        prof = stability_profile(policy, prompts, info, args.seed)
        out[side] = {
            "lipschitz": prof.lipschitz,
            "triangleViolationRate": triangle_violation_rate(prompts),
            "pairs": [
                {"first": p.first, "second": p.second, "distance": p.distance, "outputGap": p.output_gap}
                for p in prof.pairs
            ],
        }
    _emit(out, args.format)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "table"), default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--max-iter", type=int, default=None, help="iteration or sweep cap for iterative solvers")
    common.add_argument("--epsilon", type=float, default=None, help="convergence / equilibrium tolerance")
    common.add_argument("--cache", default=None, help="response cache file for external policies")

    parser = argparse.ArgumentParser(prog="secgames", description="Security game solvers and agent workflows")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="solve a game spec, dispatching on its kind")
    p.add_argument("spec")
    p.add_argument("--method", choices=("linearProgram", "fictitiousPlay"), default=None)
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("audit-rps", parents=[common], help="recompute the prompt-space RPS tables")
    p.set_defaults(func=cmd_audit)
    p = sub.add_parser("run-workflow", parents=[common], help="execute a workflow spec and print its trace")
    p.add_argument("spec")
    p.add_argument("--failures", default=None, help="failure plan JSON file")
    p.set_defaults(func=cmd_run_workflow)
    p = sub.add_parser("stability", parents=[common], help="prompt-distance stability profile of a prompt game")
    p.add_argument("spec")
    p.set_defaults(func=cmd_stability)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ConfigurationError, InvalidInputError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except SecGamesError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
