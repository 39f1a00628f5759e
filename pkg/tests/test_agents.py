from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from omrkit.agents import (CopyPriceSeller, FixedWeightSeller, OMRSeller, ProtocolError,
                           Shade, ThresholdDeceiver, Truthful, compute_delta, compute_rho,
                           delta_squared, deviation_margin)
from omrkit.core import RoundPartition
from omrkit.environment import FixedEnvironment, History, IIDEnvironment, sphere, uniform_values
from omrkit.agents import BuyerView, OwnRecord
from omrkit.experts import expert_regret
from omrkit.protocol import run_protocol
from omrkit.seeds import SeedStreams
from omrkit.sketch import Sketch, SketchBank

from helpers import e, omr, sum_seller, toy_bank


def test_compute_rho_examples():
    assert compute_rho(0.25, 0.5) == pytest.approx(0.25 ** 5 / 3)
    assert compute_rho(0.25, 0.0) == 1
    assert compute_rho(1.0, 0.01) == 1
    with pytest.raises(ValueError):
        compute_rho(0.25, 1.0)


def test_compute_delta_examples():
    eps = 0.25
    assert compute_delta(eps, 0.5, compute_rho(eps, 0.5)) == pytest.approx(0.0625)
    assert compute_delta(eps, 0.5, 0.0) == 0.0
    assert compute_delta(eps, 0.0, 1.0) == 0.0


@given(st.fractions(Fraction(1, 100), Fraction(1, 2)), st.fractions(Fraction(1, 100), Fraction(99, 100)))
def test_delta_is_epsilon_squared_when_unclamped(eps, g):
    rho = compute_rho(eps, g)
    if rho < 1:
        assert delta_squared(eps, g, rho) == eps ** 4


def test_deviation_margin_positive_at_default_rho():
    eps, g = 0.25, 0.5
    rho = compute_rho(eps, g)
    delta = compute_delta(eps, g, rho)
    assert deviation_margin(eps, 2 * delta, rho, g, 1) > 0


def test_buyer_strategies():
    view = BuyerView(1, 1, e(2), History([]), ())
    assert Truthful().bid(view, 0.8) == 0.8
    assert Shade(0.1).bid(view, 0.05) == 0.0
    d = ThresholdDeceiver(2, 0.0)
    bids = []
    own = ()
    for t in range(1, 5):
        v = BuyerView(1, t, e(2), History([]), own)
        bids.append(d.bid(v, 0.7))
        own = own + (OwnRecord(t, bids[-1], False),)
    assert bids == [0.0, 0.0, 0.7, 0.7]


def test_empty_sketch_seller_prices_zero():
    T = 5
    bank = SketchBank([Sketch((), (), 0.5)])
    env = FixedEnvironment([e(2)] * T, [0.6] * T)
    res = run_protocol(OMRSeller(bank, T, np.random.default_rng(0)), [Truthful()], env,
                       RoundPartition.single(T))
    assert all(r.sold and r.price == 0.0 for r in res.traces) and res.revenue == 0.0


def test_omr_two_experts_hand_computed():
    # Experts: constant-ish price 0.5 (support {1}, coefficient 0.5) and 0.8.
    X = [e(1)] * 3
    vals = [0.6, 0.9, 0.7]
    zs = [Sketch((1,), (1,), 0.5), Sketch((1,), (8,), 0.1)]
    bank = SketchBank(zs)
    s = OMRSeller(bank, 3, np.random.default_rng(0))
    env = FixedEnvironment(X, vals)
    res = run_protocol(s, [Truthful()], env, RoundPartition.single(3))
    # cumulative revenues: 0.5 * 3 = 1.5 and 0 + 0.8 + 0 = 0.8
    assert np.allclose(s.reward_totals, [1.5, 0.8])
    per_round = np.array([[0.5, 0.0], [0.5, 0.8], [0.5, 0.0]])
    chosen = [r.expert_chosen for r in res.traces]
    assert res.revenue == pytest.approx(per_round[np.arange(3), chosen].sum())


def test_omr_regret_matches_expert_regret():
    T = 30
    streams = SeedStreams(5)
    bank = toy_bank(T, 0.5, 2, 1)
    s = omr(bank, T, streams)
    env = IIDEnvironment(sphere(2), uniform_values(), streams.rng("environment"))
    rewards = []
    orig = s.feedback_with

    def spy(bid, xi):
        rewards.append(s.expert_rewards(bid))
        orig(bid, xi)

    s.feedback_with = spy
    res = run_protocol(s, [Truthful()], env, RoundPartition.single(T))
    R = np.array(rewards)
    chosen = [r.expert_chosen for r in res.traces]
    assert R.sum(axis=0).max() - res.revenue == pytest.approx(expert_regret(chosen, R))


def test_sum_reduces_to_omr():
    T = 25
    bank_a, bank_b = toy_bank(T), toy_bank(T)
    a = omr(bank_a, T, SeedStreams(1))
    b = sum_seller(bank_b, T, SeedStreams(1), rho=1.0, omega_prob=0.0)
    env_a = IIDEnvironment(sphere(2), uniform_values(), SeedStreams(2).rng("environment"))
    env_b = IIDEnvironment(sphere(2), uniform_values(), SeedStreams(2).rng("environment"))
    ra = run_protocol(a, [Truthful()], env_a, RoundPartition.single(T))
    rb = run_protocol(b, [Truthful()], env_b, RoundPartition.single(T))
    assert [r.price for r in ra.traces] == [r.price for r in rb.traces]
    assert [r.expert_chosen for r in ra.traces] == [r.expert_chosen for r in rb.traces]


def test_sum_forced_random_price():
    T = 3
    s = sum_seller(toy_bank(T), T, SeedStreams(0), omega_prob=1.0, lambda_support=[0.7])
    env = FixedEnvironment([e(2, 1)] * T, [0.1, 1.0, 0.0])
    res = run_protocol(s, [Truthful()], env, RoundPartition.single(T))
    assert all(r.price == pytest.approx(0.7) and r.coin_omega for r in res.traces)


def test_sum_xi_rate():
    T = 10_000
    s = sum_seller(toy_bank(1), T, SeedStreams(3))
    rho = compute_rho(0.25, 0.5)
    k = s.learner.gate.coins.sum()
    assert abs(k - rho * T) <= 5 * np.sqrt(T * rho * (1 - rho))


def test_sum_exact_branching_needs_finite_support():
    s = sum_seller(toy_bank(2), 2, SeedStreams(0))
    with pytest.raises(ProtocolError):
        s.branches()
    s2 = sum_seller(toy_bank(2), 2, SeedStreams(0), lambda_support=[0.25, 0.75])
    assert sum(p for p, _ in s2.branches()) == pytest.approx(1.0)


def test_seller_never_sees_true_values():
    s = CopyPriceSeller(0.3)
    w = s.step(e(1))
    s.feedback(0.9)
    assert w[0] == pytest.approx(0.3) and s.step(e(1))[0] == pytest.approx(0.9)
    f = FixedWeightSeller(0.4 * e(2))
    assert np.allclose(f.step(e(2)), 0.4 * e(2))
