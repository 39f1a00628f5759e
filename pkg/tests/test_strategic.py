import itertools

import numpy as np
import pytest

from omrkit.agents import CopyPriceSeller, FixedWeightSeller, Shade, ThresholdDeceiver, Truthful
from omrkit.analysis import incentive_game
from omrkit.core import RoundPartition
from omrkit.environment import FixedEnvironment
from omrkit.strategic import (ExactGame, OpenLoop, SearchCapExceeded, TruthfulSwitch,
                              truthful_switch_check)


def copy_game(gamma=0.9, theta=0.8, grid=(0.0, 0.4, 0.8)):
    env = FixedEnvironment([[1.0], [1.0]], [theta, theta])
    return ExactGame(CopyPriceSeller(theta), env, RoundPartition.single(2), 1, gamma, bid_grid=grid)


def test_horizon_one_best_response_is_truthful():
    for price in (0.2, 0.5, 0.9):
        env = FixedEnvironment([[1.0]], [0.6])
        game = ExactGame(FixedWeightSeller([price]), env, RoundPartition.single(1), 1, 0.9,
                         bid_grid=np.linspace(0, 1, 9))
        br = game.best_response()
        assert br.value == pytest.approx(game.evaluate(Truthful()).value)
        assert list(br.strategy.table.values()) == [0.6]


def test_copy_price_best_response():
    game = copy_game()
    br = game.best_response()
    assert br.value == pytest.approx(0.72)
    assert game.evaluate(Truthful()).value == pytest.approx(0.0)
    bids = sorted(br.strategy.table.values())
    assert bids == [0.0, 0.8]


def test_copy_price_best_response_beats_every_open_loop_tree():
    game = copy_game()
    best = max(game.evaluate(OpenLoop(b)).value
               for b in itertools.product((0.0, 0.4, 0.8), repeat=2))
    assert game.best_response().value == pytest.approx(best)


def test_best_response_dominates_shipped_strategies():
    game, _ = incentive_game(0.25, 0.5, [0.75, 0.5], rho=0.5)
    br = game.best_response().value
    for s in (Truthful(), Shade(0.25), ThresholdDeceiver(2, 0.0), ThresholdDeceiver(1, 0.25)):
        assert game.evaluate(s).value <= br + 1e-12


def test_exact_evaluation_matches_hand_value():
    # No learning influence (rho = 0), values (0.75,): utility of truthful =
    # eps * E[(theta - lam)_+] + (1 - eps) * E over experts (0, 0.5) of theta - p.
    game, seller = incentive_game(0.25, 0.5, [0.75], rho=0.0)
    lam = [0.125, 0.375, 0.625, 0.875]
    rp = np.mean([max(0.75 - l, 0) for l in lam])
    expert = np.mean([0.75, 0.25])
    assert game.evaluate(Truthful()).value == pytest.approx(0.25 * rp + 0.75 * expert)


def test_rho_zero_misreport_loses_random_pricing_gap():
    eps, m = 0.25, 0.5
    game, seller = incentive_game(eps, 0.5, [0.75, 0.75], rho=0.0)
    strat = OpenLoop([0.75 - m, 0.75])
    rows = truthful_switch_check(game, strat, eps, seller.delta, seller.rho)
    assert len(rows) == 1 and rows[0]["t_star"] == 1
    assert rows[0]["gain"] >= eps * m ** 2 / 2 - 1e-12
    assert rows[0]["passed"]


def test_no_check_when_within_delta():
    game, seller = incentive_game(0.25, 0.5, [0.5, 0.5], rho=None)
    assert truthful_switch_check(game, Truthful(), 0.25, seller.delta, seller.rho) == []


def test_truthful_switch_keeps_later_bids():
    strat = OpenLoop([0.0, 0.25, 0.5])
    game, seller = incentive_game(0.25, 0.5, [0.75, 0.75, 0.75], rho=0.5)
    sw = TruthfulSwitch(strat, 2, 0.1)
    # At t* = 2 the bid becomes truthful; rounds 1 and 3 keep the original bids.
    base = game.evaluate(strat)
    switched = game.evaluate(sw)
    assert switched.value > base.value


def test_node_cap():
    game, _ = incentive_game(0.25, 0.5, [0.75, 0.75], rho=0.5)
    game.node_cap = 10
    with pytest.raises(SearchCapExceeded):
        game.evaluate(Truthful())


def test_best_response_needs_grid():
    env = FixedEnvironment([[1.0]], [0.6])
    with pytest.raises(ValueError):
        ExactGame(FixedWeightSeller([0.3]), env, RoundPartition.single(1), 1, 0.9).best_response()
