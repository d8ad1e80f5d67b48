"""Mixed Nash equilibria of small two-player games.

Support enumeration runs in two passes. A batched floating-point pass solves
the indifference system of every equal-size support pair and keeps the
plausible candidates; each candidate is then re-solved in exact rational
arithmetic and checked exactly. Games whose payoffs are exact binary
fractions (every float is) therefore get exact equilibria back, e.g. the
uniform RPS strategy is exactly ``1/3`` rounded once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Sequence, Union

import numpy as np
from scipy.optimize import linprog

from secgames.core import BimatrixGame, Distribution, is_epsilon_nash
from secgames.errors import ConvergenceError, InvalidInputError, UnsupportedSizeError

Method = Literal["supportEnumeration", "fictitiousPlay", "linearProgram"]

EXACT_EPSILON = 1e-8
FICTITIOUS_EPSILON = 1e-4
NEGATIVE_PROB_TOL = 1e-10
MAX_ZERO_SUM_DIM = 50
MAX_EXACT_ZERO_SUM_DIM = 9
MAX_BIMATRIX_DIM = 6


@dataclass(frozen=True)
class EquilibriumResult:
    row_strategy: Distribution
    col_strategy: Distribution
    game_value: Union[float, tuple[float, float]]
    method: Method
    epsilon: float
    degenerate: bool = False

    @property
    def supports(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return self.row_strategy.support, self.col_strategy.support


def _bordered(m: np.ndarray) -> np.ndarray:
    """Stack ``[[M, -1], [1, 0]]`` for a batch of square blocks."""
    p, k, _ = m.shape
    out = np.zeros((p, k + 1, k + 1))
    out[:, :k, :k] = m
    out[:, :k, k] = -1.0
    out[:, k, :k] = 1.0
    return out


def _batched_solve(systems: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``S z = e_last`` for each nonsingular system; returns (mask, z)."""
    rhs = np.zeros(systems.shape[1])
    rhs[-1] = 1.0
    dets = np.linalg.det(systems)
    scale = np.maximum(1.0, np.abs(systems).max(axis=(1, 2)))
    ok = np.abs(dets) > 1e-12 * scale ** (systems.shape[1] - 1)
    z = np.full((systems.shape[0], systems.shape[1]), np.nan)
    if ok.any():
        z[ok] = np.linalg.solve(systems[ok], np.broadcast_to(rhs, (int(ok.sum()), rhs.size))[..., None])[..., 0]
    ok &= np.all(np.isfinite(z), axis=1)
    return ok, z


def _solve_exact(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    """Gauss-Jordan elimination over the rationals; None when singular."""
    n = len(matrix)
    aug = [row[:] + [b] for row, b in zip(matrix, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            return None
        aug[col], aug[pivot] = aug[pivot], aug[col]
        pv = aug[col][col]
        aug[col] = [v / pv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [aug[r][n] for r in range(n)]


def _exact_indifference(block: list[list[Fraction]]) -> tuple[list[Fraction], Fraction] | None:
    k = len(block)
    system = [row + [Fraction(-1)] for row in block] + [[Fraction(1)] * k + [Fraction(0)]]
    sol = _solve_exact(system, [Fraction(0)] * k + [Fraction(1)])
    if sol is None:
        return None
    return sol[:k], sol[k]


@dataclass(frozen=True)
class _ExactEq:
    x: tuple[Fraction, ...]
    y: tuple[Fraction, ...]
    row_value: Fraction
    col_value: Fraction
    degenerate: bool


def _confirm(
    a: list[list[Fraction]], b: list[list[Fraction]], rows: tuple[int, ...], cols: tuple[int, ...]
) -> _ExactEq | None:
    m, n = len(a), len(a[0])
    col_part = _exact_indifference([[a[i][j] for j in cols] for i in rows])
    row_part = _exact_indifference([[b[i][j] for i in rows] for j in cols])
    if col_part is None or row_part is None:
        return None
    (ys, _), (xs, _) = col_part, row_part
    if min(xs) < 0 or min(ys) < 0:
        return None
    x = [Fraction(0)] * m
    y = [Fraction(0)] * n
    for i, p in zip(rows, xs):
        x[i] = p
    for j, p in zip(cols, ys):
        y[j] = p
    row_payoffs = [sum((a[i][j] * y[j] for j in cols), Fraction(0)) for i in range(m)]
    col_payoffs = [sum((b[i][j] * x[i] for i in rows), Fraction(0)) for j in range(n)]
    row_value = sum((x[i] * row_payoffs[i] for i in rows), Fraction(0))
    col_value = sum((y[j] * col_payoffs[j] for j in cols), Fraction(0))
    if max(row_payoffs) > row_value or max(col_payoffs) > col_value:
        return None
    row_br = sum(1 for v in row_payoffs if v == row_value)
    col_br = sum(1 for v in col_payoffs if v == col_value)
    supp_x = sum(1 for p in x if p > 0)
    supp_y = sum(1 for p in y if p > 0)
    return _ExactEq(tuple(x), tuple(y), row_value, col_value, row_br > supp_y or col_br > supp_x)


def _candidate_supports(a: np.ndarray, b: np.ndarray, k: int):
    """Yield support pairs of size ``k`` whose float solution looks feasible, in lexicographic order."""
    m, n = a.shape
    row_sets = np.array(list(itertools.combinations(range(m), k)), dtype=int)
    col_sets = np.array(list(itertools.combinations(range(n), k)), dtype=int)
    ri = np.repeat(row_sets, len(col_sets), axis=0)
    ci = np.tile(col_sets, (len(row_sets), 1))
    a_blocks = a[ri[:, :, None], ci[:, None, :]]
    b_blocks = np.transpose(b[ri[:, :, None], ci[:, None, :]], (0, 2, 1))
    ok_y, zy = _batched_solve(_bordered(a_blocks))
    ok_x, zx = _batched_solve(_bordered(b_blocks))
    ok = ok_x & ok_y
    ok &= np.all(zy[:, :k] >= -NEGATIVE_PROB_TOL, axis=1) & np.all(zx[:, :k] >= -NEGATIVE_PROB_TOL, axis=1)
    scale = max(1.0, float(np.abs(a).max()), float(np.abs(b).max()))
    for p in np.flatnonzero(ok):
        y = np.zeros(n)
        y[ci[p]] = np.clip(zy[p, :k], 0.0, None)
        x = np.zeros(m)
        x[ri[p]] = np.clip(zx[p, :k], 0.0, None)
        if (a @ y).max() > zy[p, k] + 1e-7 * scale or (x @ b).max() > zx[p, k] + 1e-7 * scale:
            continue
        yield tuple(int(i) for i in ri[p]), tuple(int(j) for j in ci[p])


def _to_fractions(m: np.ndarray) -> list[list[Fraction]]:
    return [[Fraction(float(v)) for v in row] for row in m]


def _enumerate(game: BimatrixGame, first_only: bool) -> list[_ExactEq]:
    # the float screen works on nonnegative shifted payoffs (same equilibria, better
    # scaled systems); the exact pass uses the original payoffs as rationals
    a = game.row_payoff - game.row_payoff.min()
    b = game.col_payoff - game.col_payoff.min()
    fa, fb = _to_fractions(game.row_payoff), _to_fractions(game.col_payoff)
    found: dict[tuple, _ExactEq] = {}
    for k in range(1, min(game.shape) + 1):
        for rows, cols in _candidate_supports(a, b, k):
            eq = _confirm(fa, fb, rows, cols)
            if eq is None:
                continue
            found.setdefault((eq.x, eq.y), eq)
            if first_only:
                return list(found.values())
    return list(found.values())


def _distributions(game: BimatrixGame, eq: _ExactEq) -> tuple[Distribution, Distribution]:
    return (
        Distribution(game.row_space, [float(p) for p in eq.x]),
        Distribution(game.col_space, [float(p) for p in eq.y]),
    )


def _verified(game: BimatrixGame, row: Distribution, col: Distribution, epsilon: float) -> None:
    check = is_epsilon_nash(game, [row, col], epsilon)
    if not check.ok:  # pragma: no cover - exact confirmation makes this unreachable
        raise RuntimeError(f"equilibrium failed verification, deviation gains {check.gains}")


def fictitious_play(
    game: BimatrixGame, epsilon: float = FICTITIOUS_EPSILON, max_iter: int = 1_000_000, check_every: int = 100
) -> EquilibriumResult:
    """Alternating fictitious play on a zero-sum game until both deviation gains are <= epsilon.

    Best responses use the lowest-index tie-break, so the run is deterministic.
    """
    if not game.zero_sum:
        raise InvalidInputError("fictitious play here is only guaranteed for zero-sum games")
    a = game.row_payoff
    m, n = a.shape
    row_counts = np.zeros(m)
    col_counts = np.zeros(n)
    row_cum = np.zeros(m)  # row payoff of each row vs column history
    col_cum = np.zeros(n)  # row payoff of each column vs row history (column minimizes)
    i = 0
    for t in range(1, max_iter + 1):
        row_counts[i] += 1
        col_cum += a[i]
        j = int(np.argmin(col_cum))
        col_counts[j] += 1
        row_cum += a[:, j]
        i = int(np.argmax(row_cum))
        if t % check_every == 0 or t == max_iter:
            p, q = row_counts / t, col_counts / t
            value = float(p @ a @ q)
            if float((a @ q).max()) - value <= epsilon and value - float((p @ a).min()) <= epsilon:
                row, col = Distribution(game.row_space, p), Distribution(game.col_space, q)
                _verified(game, row, col, epsilon)
                return EquilibriumResult(row, col, value, "fictitiousPlay", epsilon)
    raise ConvergenceError(
        f"fictitious play did not reach epsilon={epsilon} in {max_iter} iterations",
        last_iterate=(Distribution(game.row_space, row_counts / max_iter), Distribution(game.col_space, col_counts / max_iter)),
        iterations=max_iter,
    )


def _maximin_lp(a: np.ndarray) -> np.ndarray:
    """Optimal mixed strategy of the maximizing row player of ``a``."""
    m, n = a.shape
    # variables (x_1..x_m, v); maximize v s.t. x^T a_j >= v for every column j
    c = np.zeros(m + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-a.T, np.ones((n, 1))])
    a_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    bounds = [(0, None)] * m + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(n), A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if res.status != 0:  # pragma: no cover - a matrix game LP is always feasible and bounded
        raise ConvergenceError(f"LP solve failed: {res.message}")
    x = np.clip(res.x[:m], 0.0, None)
    return x / x.sum()


def linear_program(game: BimatrixGame, epsilon: float = EXACT_EPSILON) -> EquilibriumResult:
    """Zero-sum solve by the maximin linear program of each player."""
    if not game.zero_sum:
        raise InvalidInputError("the maximin LP needs a zero-sum game")
    a = game.row_payoff
    row = Distribution(game.row_space, _maximin_lp(a))
    col = Distribution(game.col_space, _maximin_lp(-a.T))
    check = is_epsilon_nash(game, [row, col], epsilon)
    if not check.ok:
        raise ConvergenceError(f"LP solution misses epsilon={epsilon}: gains {check.gains}", (row, col))
    return EquilibriumResult(row, col, float(row.probs @ a @ col.probs), "linearProgram", epsilon)


def solve_zero_sum(game: BimatrixGame, large_method: Method = "linearProgram") -> EquilibriumResult:
    """Value and optimal mixed strategies of a zero-sum matrix game.

    Games up to 9x9 are solved exactly by support enumeration and verified at
    epsilon 1e-8. Larger ones (up to 50x50) use ``large_method``: the maximin
    LP (verified at 1e-8) or fictitious play (epsilon 1e-4, which can exhaust
    its iteration cap on unlucky games).
    """
    if not game.zero_sum:
        raise InvalidInputError("solve_zero_sum needs a game with the zero-sum flag set")
    m, n = game.shape
    if max(m, n) > MAX_ZERO_SUM_DIM:
        raise UnsupportedSizeError(f"{m}x{n} exceeds {MAX_ZERO_SUM_DIM}x{MAX_ZERO_SUM_DIM}", MAX_ZERO_SUM_DIM, max(m, n))
    if max(m, n) > MAX_EXACT_ZERO_SUM_DIM:
        if large_method == "fictitiousPlay":
            return fictitious_play(game)
        if large_method == "linearProgram":
            return linear_program(game)
        raise InvalidInputError(f"unknown method {large_method!r} for large games")
    (eq,) = _enumerate(game, first_only=True)
    row, col = _distributions(game, eq)
    value = float(eq.row_value)
    _verified(game, row, col, EXACT_EPSILON)
    return EquilibriumResult(row, col, value, "supportEnumeration", EXACT_EPSILON)


def solve_bimatrix(game: BimatrixGame) -> list[EquilibriumResult]:
    """All equilibria reachable by equal-size support enumeration.

    Results are sorted by (row support, column support). For degenerate games
    only vertex equilibria are returned and every result has ``degenerate``
    set.
    """
    m, n = game.shape
    if max(m, n) > MAX_BIMATRIX_DIM:
        raise UnsupportedSizeError(f"{m}x{n} exceeds {MAX_BIMATRIX_DIM}x{MAX_BIMATRIX_DIM}", MAX_BIMATRIX_DIM, max(m, n))
    found = _enumerate(game, first_only=False)
    degenerate = any(eq.degenerate for eq in found)
    results = []
    for eq in found:
        row, col = _distributions(game, eq)
        _verified(game, row, col, EXACT_EPSILON)
        value = (float(eq.row_value), float(eq.col_value))
        results.append(EquilibriumResult(row, col, value, "supportEnumeration", EXACT_EPSILON, degenerate))
    results.sort(key=lambda r: r.supports)
    return results


def game_value(results: Sequence[EquilibriumResult]) -> float:
    """Row value shared by a list of zero-sum equilibria (raises if they disagree)."""
    values = [r.game_value if isinstance(r.game_value, float) else r.game_value[0] for r in results]
    if not values:
        raise InvalidInputError("no equilibria given")
    if max(values) - min(values) > EXACT_EPSILON:
        raise InvalidInputError(f"equilibria disagree on the value: {values}")
    return math.fsum(values) / len(values)
