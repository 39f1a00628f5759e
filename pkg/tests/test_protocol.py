import numpy as np
import pytest
from hypothesis import given, strategies as st

from omrkit.agents import (CopyPriceSeller, FixedWeightSeller, RandomBid, Shade,
                           ThresholdDeceiver, Truthful)
from omrkit.core import DiscountProfile, RoundPartition, unit_vectors
from omrkit.environment import Environment, FixedEnvironment, IIDEnvironment, sphere, uniform_values
from omrkit.protocol import (InformationLeak, OptOracleConfig, TripwireValue, acting,
                             opt_hindsight, opt_over_contexts, regret, run_protocol,
                             sreg_estimate)
from omrkit.seeds import SeedStreams
from omrkit.sketch import GridSpec, Sketch, SketchBank, enumerate_sketch_set

from helpers import e, omr, sum_seller, toy_bank


def one_round(w):
    env = FixedEnvironment([e(2)], [0.5])
    return run_protocol(FixedWeightSeller(w * e(2)), [Truthful()], env, RoundPartition.single(1),
                        DiscountProfile.uniform(1, 0.5))


def test_single_round_examples():
    sold = one_round(0.4)
    assert sold.traces[0].sold and sold.revenue == pytest.approx(0.4)
    assert sold.utilities[0] == pytest.approx(0.1)
    unsold = one_round(0.6)
    assert not unsold.traces[0].sold and unsold.revenue == 0 and unsold.utilities[0] == 0


def test_buyer_count_must_match():
    env = FixedEnvironment([e(2)], [0.5])
    with pytest.raises(ValueError):
        run_protocol(FixedWeightSeller(0 * e(2)), [Truthful(), Truthful()], env,
                     RoundPartition.single(1))


def _sum_run(seed, T=40):
    streams = SeedStreams(seed)
    s = sum_seller(toy_bank(T), T, streams, epsilon=0.25, rho=0.5)
    env = IIDEnvironment(sphere(2), uniform_values(), streams.rng("environment"))
    return run_protocol(s, [Truthful()], env, RoundPartition.single(T),
                        DiscountProfile.uniform(1, 0.5), opt_oracle=OptOracleConfig(resolution=0.05))


def test_determinism_and_accounting():
    a, b = _sum_run(11), _sum_run(11)
    key = lambda res: [(r.price, r.bid, r.true_value, r.sold, r.coin_omega, r.coin_xi,
                        r.expert_chosen, r.context.tobytes(), r.weight.tobytes()) for r in res.traces]
    assert key(a) == key(b)
    assert a.revenue == b.revenue and a.utilities == b.utilities
    assert a.revenue == pytest.approx(a.recomputed_revenue(), abs=0)
    for r in a.traces:
        r.check()
    assert key(_sum_run(12)) != key(a)


def test_opt_examples():
    X = np.array([[1.0], [1.0]])
    assert opt_over_contexts(X, [0.4, 0.8]).value == pytest.approx(0.8)
    assert opt_over_contexts(X, [0.0, 0.0]).value == 0.0
    assert opt_over_contexts(np.array([[1.0]]), [0.7]).value == pytest.approx(0.7)


def test_opt_one_dimensional_matches_fine_grid():
    rng = np.random.default_rng(0)
    X = np.sign(rng.standard_normal((12, 1)))
    vals = rng.random(12)
    W = np.linspace(-1, 1, 2001)
    P = np.outer(W, X[:, 0])
    brute = np.where(P <= vals + 1e-9, np.maximum(P, 0), 0).sum(axis=1).max()
    assert opt_over_contexts(X, vals).value >= brute - 1e-12


def test_opt_span_too_large():
    X = unit_vectors(np.random.default_rng(0), 6, 4)
    with pytest.raises(ValueError):
        opt_over_contexts(X, np.ones(6) * 0.5)


def test_opt_grid_error_bound():
    rng = np.random.default_rng(1)
    X = unit_vectors(rng, 15, 2)
    vals = rng.random(15)
    coarse = opt_over_contexts(X, vals, OptOracleConfig(resolution=0.05))
    fine = opt_over_contexts(X, vals, OptOracleConfig(resolution=0.005))
    assert coarse.value <= fine.value + fine.error_bound + 1e-9
    assert fine.value <= coarse.value + coarse.error_bound + 1e-9


def test_opt_sketch_mode():
    zs = enumerate_sketch_set(2, grid=GridSpec.coarse(0.5, 2, 1))
    X = np.array([[1.0], [1.0]])
    res = opt_over_contexts(X, [0.5, 0.5], OptOracleConfig(mode="sketch", experts=zs))
    assert res.value == pytest.approx(1.0) and res.mode == "sketch"
    with pytest.raises(ValueError):
        OptOracleConfig(mode="other")


def test_regret_oracle_seller_is_near_zero():
    T = 10
    rng = np.random.default_rng(3)
    X, vals = unit_vectors(rng, T, 2), rng.random(T)
    cfg = OptOracleConfig(resolution=0.01)
    best = opt_over_contexts(X, vals, cfg)
    stats = regret(lambda s: FixedWeightSeller(best.argmax), lambda s: FixedEnvironment(X, vals),
                   RoundPartition.single(T), replications=2, oracle=cfg)
    assert abs(stats["regret"].mean) <= 1e-9


def test_regret_empty_sketch_seller_equals_opt():
    T = 8
    bank = lambda: SketchBank([Sketch((), (), 0.5)])
    env = lambda s: IIDEnvironment(sphere(2), uniform_values(), s.rng("environment"))
    stats = regret(lambda s: omr(bank(), T, s), env, RoundPartition.single(T), replications=3,
                   oracle=OptOracleConfig(resolution=0.05))
    assert stats["revenue"].mean == 0.0
    assert stats["regret"].mean == pytest.approx(stats["opt"].mean)


# -- strategic regret estimator ------------------------------------------------

def test_sreg_empty_pool():
    with pytest.raises(ValueError):
        sreg_estimate(None, None, RoundPartition.single(2), DiscountProfile.uniform(1, 0.5), {}, {})


def test_sreg_truthful_against_sum_matches_regret():
    T, reps = 12, 6
    part = RoundPartition.single(T)
    seller = lambda s: sum_seller(toy_bank(T), T, s, epsilon=0.25)
    env = lambda s: IIDEnvironment(sphere(2), uniform_values(), s.rng("environment"))
    oracle = OptOracleConfig(resolution=0.05)
    out = sreg_estimate(seller, env, part, DiscountProfile.uniform(1, 0.5),
                        {"truthful": [lambda r: Truthful()]},
                        {"shade": lambda r: Shade(0.2), "lowball": lambda r: ThresholdDeceiver(T, 0.0)},
                        replications=reps, oracle=oracle)
    assert out["label"] == "lower-bound estimate of SReg"
    assert out["profiles"]["truthful"]["passed"]
    stats = regret(seller, env, part, reps, oracle=oracle)
    assert out["estimate"] == pytest.approx(stats["regret"].mean)


def test_sreg_deceiver_against_copy_price_is_linear():
    part = RoundPartition.single
    gaps = []
    for T in (4, 8, 16):
        env = lambda s, T=T: FixedEnvironment([e(1)] * T, [0.8] * T)
        out = sreg_estimate(lambda s: CopyPriceSeller(0.8), env, part(T),
                            DiscountProfile.uniform(1, 0.9),
                            {"deceiver": [lambda r, T=T: ThresholdDeceiver(T, 0.0)]},
                            {"truthful": lambda r: Truthful()}, replications=2)
        assert out["profiles"]["deceiver"]["passed"]
        gaps.append(out["estimate"])
    assert gaps == pytest.approx([0.8 * 4, 0.8 * 8, 0.8 * 16])


def test_sreg_reports_when_nothing_passes():
    T = 4
    env = lambda s: FixedEnvironment([e(1)] * T, [0.8] * T)
    out = sreg_estimate(lambda s: CopyPriceSeller(0.8), env, RoundPartition.single(T),
                        DiscountProfile.uniform(1, 0.9), {"truthful": [lambda r: Truthful()]},
                        {"deceiver": lambda r: ThresholdDeceiver(T, 0.0)}, replications=2)
    assert out["estimate"] is None and "error" in out


# -- information barriers ----------------------------------------------------

class PoisonedEnvironment(Environment):
    name = "poisoned"

    def __init__(self, inner):
        self.inner = inner

    def emit(self, view):
        x, theta = self.inner.emit(view)
        return x, TripwireValue(theta)


def test_tripwire_fires_for_seller_reads():
    v = TripwireValue(0.5)
    assert float(v) == 0.5
    with acting("seller"):
        with pytest.raises(InformationLeak):
            float(v)
        with pytest.raises(InformationLeak):
            _ = v + 1


@pytest.mark.parametrize("kind", ["omr", "sum"])
def test_sellers_never_read_true_values(kind):
    T = 30
    streams = SeedStreams(4)
    bank = toy_bank(T)
    s = omr(bank, T, streams) if kind == "omr" else sum_seller(bank, T, streams, rho=0.5)
    env = PoisonedEnvironment(IIDEnvironment(sphere(2), uniform_values(), streams.rng("environment")))
    res = run_protocol(s, [Truthful()], env, RoundPartition.single(T))
    assert len(res.traces) == T


class Recorder(Truthful):
    def __init__(self):
        self.views = []

    def bid(self, view, true_value):
        self.views.append((view.round, tuple((r.round, r.price, float(r.true_value))
                                             for r in view.public), view.own))
        return float(true_value)


def test_other_buyer_allocation_perturbation():
    # Buyer 2's bids (and hence allocations) change; buyer 1's view must not.
    T = 20
    rng = np.random.default_rng(0)
    X, vals = unit_vectors(rng, T, 2), rng.random(T)
    part = RoundPartition.round_robin(T, 2)
    views = []
    for other in (Truthful(), RandomBid(np.random.default_rng(5))):
        rec = Recorder()
        run_protocol(FixedWeightSeller(np.array([0.2, 0.1])), [rec, other],
                     FixedEnvironment(X, vals), part)
        views.append(rec.views)
    assert views[0] == views[1]


@given(st.integers(0, 500))
def test_revenue_identity_property(seed):
    T = 6
    streams = SeedStreams(seed)
    s = sum_seller(toy_bank(T), T, streams, rho=0.5)
    env = IIDEnvironment(sphere(2), uniform_values(), streams.rng("environment"))
    res = run_protocol(s, [Shade(0.1)], env, RoundPartition.single(T))
    assert res.revenue == res.recomputed_revenue()
