from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from omrkit import analysis as A
from omrkit.core import unit_vectors
from omrkit.protocol import OptOracleConfig, opt_over_contexts


def test_report_line_and_dict():
    r = A.Report("x", True, 1.0, 3.0)
    assert r.margin == 2.0 and r.line().startswith("PASS x:")
    assert r.to_dict()["margin"] == 2.0


@given(st.integers(0, 10_000), st.integers(1, 8))
def test_exact_sup_dominates_grid(seed, T):
    rng = np.random.default_rng(seed)
    X = unit_vectors(rng, T, 2)
    vals = rng.random(T)
    exact = A.exact_sup_revenue(X, vals)
    grid = A.ball_grid(2, 0.02)
    assert exact >= A._total_revenue(grid, X, vals).max() - 1e-9
    assert exact <= vals.sum() + 1e-9


def test_exact_sup_matches_one_dimensional_search():
    X = np.array([[1.0], [-1.0], [1.0]])
    vals = np.array([0.3, 0.4, 0.9])
    assert A.exact_sup_revenue(X, vals) == pytest.approx(
        opt_over_contexts(X, vals, OptOracleConfig()).value)


def test_exact_sup_simple_2d():
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert A.exact_sup_revenue(X, [0.6, 0.6]) == pytest.approx(1.2)
    assert A.exact_sup_revenue(X, [0.9, 0.9]) == pytest.approx(np.sqrt(2))


def test_naive_reconstruct_matches_package():
    from omrkit.sketch import Sketch, reconstruct
    rng = np.random.default_rng(0)
    X = unit_vectors(rng, 6, 3)
    z = Sketch((1, 3, 6), (4, -3, 8), 0.25)
    for t in range(1, 7):
        assert np.allclose(A._reconstruct_naive(z.support, z.coefficients, X, t),
                           reconstruct(z, X[:t]))


@pytest.mark.parametrize("theta,bid,gap", [(0.8, 0.5, Fraction(9, 200)), (0.4, 0.4, 0),
                                           (1, 0, Fraction(1, 2))])
def test_random_pricing_exact(theta, bid, gap):
    assert A.random_pricing_gap_exact(Fraction(theta).limit_denominator(), Fraction(bid).limit_denominator()) == gap


@given(st.fractions(0, 1), st.fractions(0, 1))
def test_random_pricing_exact_formula(theta, bid):
    assert A.random_pricing_gap_exact(theta, bid) == (theta - bid) ** 2 / 2


def test_update_budget_rules():
    assert A.update_budget(0.5) == 64 and A.update_budget(0.5, "derived") == 256
    with pytest.raises(ValueError):
        A.update_budget(0.5, "other")


def test_small_verifiers_pass():
    assert A.verify_online_sketch(trials=5, T=60, d=4, epsilon=0.5, budget_rule="derived").passed
    assert A.verify_lazy_ogd(trials=1, M=200, beta=0.05, spacing=0.05).passed
    assert A.verify_rev_stability(trials=5, T=10, delta=0.04).passed
    assert A.verify_hedge_regret(K=4, T=64, replications=20).passed
    assert A.verify_sparse_regret(rho=0.3, K=4, T=64, replications=20).passed
    assert A.verify_random_pricing(samples=20_000).passed


def test_lazy_ogd_constant_loss():
    r = A.verify_lazy_ogd(trials=1, M=100, beta=0.05, kinds=("constant",), spacing=0.05)
    assert r.passed


def test_verifiers_are_deterministic():
    a = A.verify_rev_stability(trials=3, T=8, seed=4).to_dict()
    b = A.verify_rev_stability(trials=3, T=8, seed=4).to_dict()
    assert a == b


def test_naive_control_value():
    r = A.verify_naive_control()
    assert r.passed and r.measured == pytest.approx(0.72)


def test_truthfulness_small():
    r = A.verify_truthfulness_incentive(horizon=2)
    assert r.passed and r.params["delta"] == pytest.approx(0.0625)
    r0 = A.verify_truthfulness_incentive(horizon=2, rho=0.0)
    assert r0.passed


def test_truthful_regret_small():
    r = A.verify_truthful_regret(T=64, replications=3, adversaries=("iid", "tracker"),
                                 resolution=0.05, step=0.5, max_multiplier=2)
    assert r.passed
