import math

import numpy as np
import pytest

from datamarket.baselines import (
    accumulated_shapley,
    every_permutation,
    exact_round_shapley,
    perm_sampling_shapley,
    round_characteristic,
    shapley_revenue,
)
from datamarket.market import MarketConfig
from datamarket.scenarios import gen_mixture_regression
from oracles import shapley_by_all_orders


class Quadratic:
    def __init__(self, target, tau=5.0):
        self.target = np.asarray(target, dtype=float)
        self.tau = tau

    def evaluate(self, w):
        return float(np.exp(-np.sum((w - self.target) ** 2) / self.tau))


def random_round(n, d=3, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=d), rng.normal(size=(n, d)), Quadratic(rng.normal(size=d))


def test_characteristic_definitions():
    w, G, U = random_round(3)
    assert round_characteristic(w, G, 0.1, U, set()) == 0.0
    single = round_characteristic(w, G, 0.1, U, {1})
    assert single == U.evaluate(w + 0.1 * G[1]) - U.evaluate(w)
    same = np.tile(G[0], (2, 1))
    v1 = round_characteristic(w, same, 0.1, U, {0})
    assert v1 == round_characteristic(w, same, 0.1, U, {1}) == round_characteristic(w, same, 0.1, U, {0, 1})


def test_symmetric_providers_split_evenly():
    w, G, U = random_round(4, seed=1)
    same = np.tile(G[0], (4, 1))
    sv = exact_round_shapley(w, same, 0.2, U)
    total = round_characteristic(w, same, 0.2, U, range(4))
    np.testing.assert_allclose(sv, total / 4, atol=1e-15)


def test_two_player_closed_form():
    w, G, U = random_round(2, seed=2)
    v = lambda S: round_characteristic(w, G, 0.3, U, S)
    sv = exact_round_shapley(w, G, 0.3, U)
    assert sv[0] == pytest.approx(0.5 * (v({0}) + v({0, 1}) - v({1})), abs=1e-15)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_exact_matches_all_orders_oracle(n):
    w, G, U = random_round(n, seed=n)
    G[0] = 0.0  # null update still shifts the average, so its value is not zero in general
    sv = exact_round_shapley(w, G, 0.25, U)
    ref = shapley_by_all_orders(lambda S: round_characteristic(w, G, 0.25, U, S), n)
    np.testing.assert_allclose(sv, ref, atol=1e-12)


def test_efficiency():
    for seed in range(5):
        w, G, U = random_round(7, seed=seed)
        sv = exact_round_shapley(w, G, 0.4, U)
        assert abs(sv.sum() - round_characteristic(w, G, 0.4, U, range(7))) < 1e-10


def test_flat_utility_gives_zero_values():
    class Flat:
        def evaluate(self, w):
            return 0.7

    w, G, _ = random_round(5, seed=3)
    np.testing.assert_array_equal(exact_round_shapley(w, G, 0.5, Flat()), np.zeros(5))


def test_exact_refuses_large_n():
    w, G, U = random_round(17)
    with pytest.raises(ValueError):
        exact_round_shapley(w, G, 0.1, U)


def test_all_permutations_equal_exact():
    w, G, U = random_round(6, seed=11)
    exact = exact_round_shapley(w, G, 0.3, U)
    perm = perm_sampling_shapley(w, G, 0.3, U, 0, perms=every_permutation(6))
    np.testing.assert_allclose(perm, exact, atol=1e-12)


def test_sampled_permutations_two_players_converge():
    w, G, U = random_round(2, seed=12)
    exact = exact_round_shapley(w, G, 0.3, U)
    est = perm_sampling_shapley(w, G, 0.3, U, 4000, np.random.default_rng(0))
    # each sampled contribution takes one of two values; bound by their spread
    v = lambda S: round_characteristic(w, G, 0.3, U, S)
    spread = abs(v({0}) - (v({0, 1}) - v({1})))
    assert abs(est[0] - exact[0]) <= 3 * 0.5 * spread / math.sqrt(4000) + 1e-15


def test_sampled_permutations_are_efficient_per_sample():
    # every permutation distributes exactly v(N), so any sample average does too
    w, G, U = random_round(5, seed=13)
    est = perm_sampling_shapley(w, G, 0.3, U, 7, np.random.default_rng(1))
    assert abs(est.sum() - round_characteristic(w, G, 0.3, U, range(5))) < 1e-12


def test_identical_updates_credit_first_arrival():
    w, G, U = random_round(3, seed=14)
    same = np.tile(G[2], (3, 1))
    est = perm_sampling_shapley(w, same, 0.3, U, 0, perms=[(1, 0, 2)])
    np.testing.assert_allclose(est, [0.0, round_characteristic(w, same, 0.3, U, {0}), 0.0], atol=1e-15)


@pytest.mark.parametrize("values,revenue,expected", [
    ([2, -1, 2], 8, [4, 0, 4]),
    ([1, 1], 3, [1.5, 1.5]),
    ([0, 0, 5], 10, [0, 0, 10]),
])
def test_shapley_revenue(values, revenue, expected):
    pay, degenerate = shapley_revenue(values, revenue)
    np.testing.assert_allclose(pay, expected)
    assert not degenerate


def test_shapley_revenue_degenerate_falls_back_to_uniform():
    pay, degenerate = shapley_revenue([-1.0, 0.0, -3.0], 6.0)
    np.testing.assert_allclose(pay, [2.0, 2.0, 2.0])
    assert degenerate


def test_accumulated_shapley_report():
    sc = gen_mixture_regression(4, 3, 10, 2, seed=0)
    cfg = MarketConfig(n=4, B=12, K=2, eta=1.0, alpha=0.1, gamma=0.05, seed=0)
    rep = accumulated_shapley(cfg, sc.oracles(), sc.utility(5.0), sc.initial_params())
    assert rep.rounds_used == 6 and rep.permutations_per_round == 0
    assert rep.values.shape == (4,)
    rep2 = accumulated_shapley(cfg, sc.oracles(), sc.utility(5.0), sc.initial_params(), num_perms=24)
    assert rep2.permutations_per_round == 24
    np.testing.assert_allclose(rep2.values, rep.values, atol=0.5 * np.abs(rep.values).max())
