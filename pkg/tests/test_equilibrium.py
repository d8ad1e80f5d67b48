from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import RPS, random_bimatrix
from secgames.core import BimatrixGame, Distribution, is_epsilon_nash
from secgames.equilibrium import (
    fictitious_play,
    game_value,
    linear_program,
    solve_bimatrix,
    solve_zero_sum,
)
from secgames.errors import ConvergenceError, InvalidInputError, UnsupportedSizeError


def oracle_equilibria(a: np.ndarray, b: np.ndarray, tol: float = 1e-9):
    """Plain equal-support enumeration with lstsq; only valid for nondegenerate games."""
    m, n = a.shape
    found = []
    for k in range(1, min(m, n) + 1):
        for rs in itertools.combinations(range(m), k):
            for cs in itertools.combinations(range(n), k):
                # column mix q makes rows in rs indifferent; row mix p makes cols in cs indifferent
                mq = np.vstack([np.hstack([a[np.ix_(rs, cs)], -np.ones((k, 1))]), np.r_[np.ones(k), 0]])
                mp = np.vstack([np.hstack([b[np.ix_(rs, cs)].T, -np.ones((k, 1))]), np.r_[np.ones(k), 0]])
                rhs = np.r_[np.zeros(k), 1]
                try:
                    sq, sp = np.linalg.solve(mq, rhs), np.linalg.solve(mp, rhs)
                except np.linalg.LinAlgError:
                    continue
                if (sq[:k] < -tol).any() or (sp[:k] < -tol).any():
                    continue
                p, q = np.zeros(m), np.zeros(n)
                p[list(rs)], q[list(cs)] = sp[:k], sq[:k]
                if (a @ q).max() > sq[k] + tol or (p @ b).max() > sp[k] + tol:
                    continue
                found.append((p, q))
    return found


class TestZeroSum:
    def test_rps_uniform(self, rps):
        res = solve_zero_sum(rps)
        assert res.game_value == 0.0
        assert res.row_strategy == Distribution.uniform(RPS)
        assert res.col_strategy == Distribution.uniform(RPS)
        assert res.method == "supportEnumeration"

    @pytest.mark.parametrize("c", [-3.5, 0.0, 7.0])
    def test_one_by_one(self, c):
        res = solve_zero_sum(BimatrixGame.from_zero_sum(["a"], ["x"], [[c]]))
        assert res.game_value == c
        assert res.row_strategy.probs.tolist() == [1.0]

    def test_matching_pennies(self, pennies):
        res = solve_zero_sum(pennies)
        assert res.game_value == 0.0
        assert res.row_strategy.probs.tolist() == [0.5, 0.5]
        assert res.col_strategy.probs.tolist() == [0.5, 0.5]

    def test_two_by_two_closed_form(self):
        # no saddle: p = (d-c)/(a-b-c+d), v = (ad-bc)/(a-b-c+d)
        a, b, c, d = 4, -1, -2, 3
        denom = a - b - c + d
        res = solve_zero_sum(BimatrixGame.from_zero_sum("uv", "xy", [[a, b], [c, d]]))
        assert res.game_value == pytest.approx((a * d - b * c) / denom, abs=1e-12)
        assert res.row_strategy["u"] == pytest.approx((d - c) / denom, abs=1e-12)
        assert res.col_strategy["x"] == pytest.approx((d - b) / denom, abs=1e-12)

    def test_saddle_point(self):
        res = solve_zero_sum(BimatrixGame.from_zero_sum("uv", "xy", [[3, 5], [1, 2]]))
        assert res.game_value == 3.0
        assert res.row_strategy["u"] == 1.0 and res.col_strategy["x"] == 1.0

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**16), n=st.integers(2, 7))
    def test_grid_oracle_for_two_row_games(self, seed, n):
        rng = np.random.default_rng(seed)
        game = random_bimatrix(rng, 2, n, zero_sum=True)
        a = game.row_payoff
        # value = max_p min_j over a parametric line; kinks lie where two columns cross
        candidates = [0.0, 1.0]
        for j, k in itertools.combinations(range(n), 2):
            slope = (a[0, j] - a[1, j]) - (a[0, k] - a[1, k])
            if slope != 0:
                t = (a[1, k] - a[1, j]) / slope
                if 0 <= t <= 1:
                    candidates.append(t)
        oracle = max(min(t * a[0, j] + (1 - t) * a[1, j] for j in range(n)) for t in candidates)
        assert solve_zero_sum(game).game_value == pytest.approx(oracle, abs=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**16), m=st.integers(1, 6), n=st.integers(1, 6))
    def test_support_enumeration_agrees_with_lp(self, seed, m, n):
        game = random_bimatrix(np.random.default_rng(seed), m, n, zero_sum=True)
        exact = solve_zero_sum(game)
        lp = linear_program(game)
        assert exact.game_value == pytest.approx(lp.game_value, abs=1e-8)
        assert is_epsilon_nash(game, [exact.row_strategy, exact.col_strategy], 1e-8).ok

    def test_large_game_uses_lp(self):
        game = random_bimatrix(np.random.default_rng(4), 20, 15, zero_sum=True)
        res = solve_zero_sum(game)
        assert res.method == "linearProgram"
        assert is_epsilon_nash(game, [res.row_strategy, res.col_strategy], 1e-8).ok

    def test_fictitious_play_small(self, pennies):
        res = fictitious_play(pennies)
        assert res.method == "fictitiousPlay"
        assert res.game_value == pytest.approx(0.0, abs=1e-4)
        assert is_epsilon_nash(pennies, [res.row_strategy, res.col_strategy], 1e-4).ok

    def test_fictitious_play_iteration_cap(self, rps):
        with pytest.raises(ConvergenceError) as err:
            fictitious_play(rps, epsilon=1e-12, max_iter=500)
        assert err.value.iterations == 500

    def test_oversize(self):
        game = BimatrixGame.from_zero_sum([f"r{i}" for i in range(51)], "ab", np.zeros((51, 2)))
        with pytest.raises(UnsupportedSizeError) as err:
            solve_zero_sum(game)
        assert err.value.bound == 50

    def test_requires_flag(self):
        with pytest.raises(InvalidInputError):
            solve_zero_sum(BimatrixGame("ab", "ab", [[1, 0], [0, 1]], [[-1, 0], [0, -1]]))


class TestBimatrix:
    def test_prisoners_dilemma(self):
        (res,) = solve_bimatrix(BimatrixGame("CD", "CD", [[3, 0], [5, 1]], [[3, 5], [0, 1]]))
        assert res.supports == ((1,), (1,))
        assert res.game_value == (1.0, 1.0)

    def test_battle_of_the_sexes(self):
        found = solve_bimatrix(BimatrixGame("OF", "OF", [[2, 0], [0, 1]], [[1, 0], [0, 2]]))
        assert [r.supports for r in found] == [((0,), (0,)), ((0, 1), (0, 1)), ((1,), (1,))]
        mixed = found[1]
        assert mixed.row_strategy.probs.tolist() == [2 / 3, 1 / 3]
        assert mixed.col_strategy.probs.tolist() == [1 / 3, 2 / 3]
        assert mixed.game_value == pytest.approx((2 / 3, 2 / 3), abs=1e-15)
        assert not any(r.degenerate for r in found)

    def test_zero_matrix_degenerate(self):
        found = solve_bimatrix(BimatrixGame("ab", "xy", np.zeros((2, 2)), np.zeros((2, 2))))
        assert [r.supports for r in found] == [((0,), (0,)), ((0,), (1,)), ((1,), (0,)), ((1,), (1,))]
        assert all(r.degenerate for r in found)

    def test_sorted_and_verified(self):
        game = random_bimatrix(np.random.default_rng(11), 5, 5)
        found = solve_bimatrix(game)
        assert found == sorted(found, key=lambda r: r.supports)
        for r in found:
            assert is_epsilon_nash(game, [r.row_strategy, r.col_strategy], 1e-8).ok

    def test_oversize(self):
        with pytest.raises(UnsupportedSizeError):
            solve_bimatrix(BimatrixGame([f"r{i}" for i in range(7)], "ab", np.zeros((7, 2)), np.zeros((7, 2))))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**16), m=st.integers(1, 4), n=st.integers(1, 4))
    def test_matches_oracle_on_generic_games(self, seed, m, n):
        rng = np.random.default_rng(seed)
        # continuous payoffs make the game nondegenerate with probability one
        a, b = rng.normal(size=(m, n)), rng.normal(size=(m, n))
        found = solve_bimatrix(BimatrixGame([f"r{i}" for i in range(m)], [f"c{j}" for j in range(n)], a, b))
        oracle = oracle_equilibria(a, b)
        assert len(found) == len(oracle)
        for (p, q), r in zip(sorted(oracle, key=lambda e: (tuple(np.flatnonzero(e[0] > 1e-12)), tuple(np.flatnonzero(e[1] > 1e-12)))), found):
            assert np.allclose(p, r.row_strategy.probs, atol=1e-9)
            assert np.allclose(q, r.col_strategy.probs, atol=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**16), m=st.integers(1, 5), n=st.integers(1, 5))
    def test_zero_sum_interchangeability(self, seed, m, n):
        game = random_bimatrix(np.random.default_rng(seed), m, n, zero_sum=True)
        found = solve_bimatrix(game)
        values = [r.game_value[0] for r in found]
        assert max(values) - min(values) <= 1e-8
        assert game_value(found) == pytest.approx(solve_zero_sum(game).game_value, abs=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**16), m=st.integers(1, 4), n=st.integers(1, 4))
    def test_permutation_equivariance(self, seed, m, n):
        rng = np.random.default_rng(seed)
        game = random_bimatrix(rng, m, n)
        rp, cp = rng.permutation(m), rng.permutation(n)
        original = {(tuple(r.row_strategy.probs[rp]), tuple(r.col_strategy.probs[cp])) for r in solve_bimatrix(game)}
        permuted = {(tuple(r.row_strategy.probs), tuple(r.col_strategy.probs)) for r in solve_bimatrix(game.permuted(rp, cp))}
        assert original == permuted


def test_exact_values_are_rational():
    # value 1/7 cannot survive a float shift-and-restore round trip unless the solve is exact
    game = BimatrixGame.from_zero_sum("ab", "xy", [[Fraction(3), Fraction(-1)], [Fraction(-2), Fraction(1)]])
    assert solve_zero_sum(game).game_value == float(Fraction(3 * 1 - 2, 7))
