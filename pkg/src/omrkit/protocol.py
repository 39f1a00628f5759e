"""The repeated posted-price protocol and its revenue/regret accounting."""
from __future__ import annotations

import contextvars
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .agents import BuyerView, OwnRecord, Strategy, Truthful
from .core import (TOL, DiscountProfile, RoundPartition, RoundTrace, as_context, as_weight,
                   check_unit_interval, discounted_utility, is_sale, revenue_at_price)
from .environment import EnvironmentView, History, PublicRecord
from .seeds import SeedStreams

ACTIVE_PARTY = contextvars.ContextVar("active_party", default=None)


@contextmanager
def acting(party: str):
    token = ACTIVE_PARTY.set(party)
    try:
        yield
    finally:
        ACTIVE_PARTY.reset(token)


class InformationLeak(RuntimeError):
    """A party touched a variable outside its information set."""


class TripwireValue(float):
    """True value that raises if read while the seller is acting."""

    def _guard(self):
        if ACTIVE_PARTY.get() == "seller":
            raise InformationLeak("seller read a true value")

    def __float__(self):
        self._guard()
        return float.__float__(self)

    def __repr__(self):
        self._guard()
        return float.__repr__(self)


for _name in ("__add__", "__radd__", "__sub__", "__rsub__", "__mul__", "__rmul__",
              "__truediv__", "__rtruediv__", "__lt__", "__le__", "__gt__", "__ge__",
              "__eq__", "__ne__", "__neg__", "__abs__", "__hash__", "__bool__",
              "__format__", "__str__", "__round__"):
    def _make(op):
        base = getattr(float, op)

        def guarded(self, *args):
            self._guard()
            return base(self, *args)
        return guarded
    setattr(TripwireValue, _name, _make(_name))


@dataclass
class RunResult:
    traces: list
    revenue: float
    utilities: list
    opt_truth: Optional["OptResult"] = None
    opt_bids: Optional["OptResult"] = None
    metadata: dict = field(default_factory=dict)

    @property
    def regret(self) -> float:
        """Realized ``Opt(truth) - Rev`` (needs ``opt_truth``)."""
        return self.opt_truth.value - self.revenue

    def recomputed_revenue(self) -> float:
        return sum(revenue_at_price(r.price, r.bid) for r in self.traces)


def run_protocol(seller, buyers: Sequence[Strategy], environment, partition: RoundPartition,
                 discount: Optional[DiscountProfile] = None, *, opt_oracle=None,
                 metadata: Optional[dict] = None, tol: float = TOL) -> RunResult:
    """Run ``T = partition.horizon`` rounds.

    Round ``t``: the environment emits ``(x_t, theta_t)`` from the public
    history; the seller maps its (already drawn) round-t randomness and
    ``x_t`` to ``w_t``; buyer ``i_t`` bids from its view; the sale resolves
    at ``bid >= <w_t, x_t>``; the seller sees only the bid.
    """
    if len(buyers) != partition.n_buyers:
        raise ValueError(f"{len(buyers)} buyer strategies for {partition.n_buyers} slots")
    T = partition.horizon
    public: list = []
    own: list = [[] for _ in buyers]
    traces = []
    total = 0.0
    for t in range(1, T + 1):
        i = partition.buyer_of(t)
        with acting("environment"):
            x, theta = environment.emit(EnvironmentView(History(public)))
        x = as_context(x, tol)
        if not isinstance(theta, TripwireValue):
            theta = check_unit_interval(theta, "true value")
        with acting("seller"):
            w = seller.step(x)
        w = as_weight(w, tol)
        view = BuyerView(i, t, x, History(public), tuple(own[i - 1]))
        with acting(f"buyer-{i}"):
            b = buyers[i - 1].bid(view, theta)
        b = check_unit_interval(b, "bid")
        price = float(w @ x)
        sold = is_sale(b, price, tol)
        with acting("seller"):
            seller.feedback(b)
        coins = seller.coins
        traces.append(RoundTrace(t, i, x, w, price, b, float(theta), sold,
                                 bool(coins.omega), bool(coins.xi), coins.expert))
        total += revenue_at_price(price, b, tol)
        public.append(PublicRecord(t, x, price, w, theta))
        own[i - 1].append(OwnRecord(t, b, sold))
    utilities = []
    if discount is not None:
        utilities = [discounted_utility(traces, k, partition, discount, tol)
                     for k in range(1, partition.n_buyers + 1)]
    result = RunResult(traces, total, utilities, metadata=dict(metadata or {}))
    if opt_oracle is not None:
        result.opt_truth = opt_hindsight(traces, "truth", opt_oracle)
        result.opt_bids = opt_hindsight(traces, "bids", opt_oracle)
    return result


# -- hindsight optimum --------------------------------------------------------

@dataclass(frozen=True)
class OptOracleConfig:
    """``grid``: ball grid over an orthonormal basis of span(x_1..x_T) (span
    dimension <= 3; exact candidate search when the span is a line).
    ``sketch``: maximum over a supplied expert set (``experts``: sketches or a
    ``SketchBank``)."""

    mode: str = "grid"
    resolution: float = 0.01
    experts: object = None
    epsilon: Optional[float] = None
    chunk: int = 4096

    def __post_init__(self):
        if self.mode not in ("grid", "sketch"):
            raise ValueError(f"unknown oracle mode {self.mode!r}")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")


@dataclass
class OptResult:
    value: float
    mode: str
    error_bound: Optional[float]
    argmax: object = None
    note: str = ""

    def to_dict(self) -> dict:
        return {"value": self.value, "mode": self.mode, "error_bound": self.error_bound,
                "note": self.note}


def _values(traces, which: str) -> np.ndarray:
    if which == "truth":
        return np.array([float(r.true_value) for r in traces])
    if which == "bids":
        return np.array([r.bid for r in traces])
    raise ValueError("values must be 'truth' or 'bids'")


def span_basis(X: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return vt[:0]
    return vt[: int(np.sum(s > rtol * s[0]))]


def _revenue_sums(P: np.ndarray, vals: np.ndarray, tol: float) -> np.ndarray:
    return np.where(P <= vals + tol, np.maximum(P, 0.0), 0.0).sum(axis=1)


def grid_points(k: int, spacing: float) -> np.ndarray:
    m = int(math.floor(1.0 / spacing + 1e-9))
    axis = np.arange(-m, m + 1) * spacing
    pts = np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)
    return pts[np.einsum("ij,ij->i", pts, pts) <= 1.0 + 1e-12]


def opt_over_contexts(X, vals, oracle: OptOracleConfig = OptOracleConfig(),
                      tol: float = TOL) -> OptResult:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    vals = np.asarray(vals, dtype=float)
    T = X.shape[0]
    if T == 0:
        raise ValueError("need at least one round")
    if oracle.mode == "sketch":
        return _opt_sketch(X, vals, oracle, tol)
    B = span_basis(X)
    k = B.shape[0]
    if k == 0:
        return OptResult(0.0, "grid", 0.0, np.zeros(X.shape[1]))
    if k > 3:
        raise ValueError(f"context span has dimension {k} > 3; use sketch mode or a coarser problem")
    Y = X @ B.T
    if k == 1:
        y = Y[:, 0]
        nz = np.abs(y) > 1e-15
        cand = np.concatenate([vals[nz] / y[nz], [-1.0, 0.0, 1.0]])
        cand = cand[np.abs(cand) <= 1.0]
        sums = _revenue_sums(np.outer(cand, y), vals, tol)
        j = int(np.argmax(sums))
        return OptResult(float(sums[j]), "grid", 0.0, cand[j] * B[0], "exact line search")
    G = grid_points(k, oracle.resolution)
    best, arg = -1.0, None
    for s in range(0, G.shape[0], oracle.chunk):
        sums = _revenue_sums(G[s:s + oracle.chunk] @ Y.T, vals, tol)
        j = int(np.argmax(sums))
        if sums[j] > best:
            best, arg = float(sums[j]), G[s + j]
    r = oracle.resolution * math.sqrt(k) / 2
    return OptResult(best, "grid", T * (math.sqrt(r) + r), arg @ B,
                     f"grid spacing {oracle.resolution} over a {k}-dim span")


def _opt_sketch(X, vals, oracle, tol) -> OptResult:
    from .sketch import Sketch, SketchBank

    bank = oracle.experts
    if bank is None:
        raise ValueError("sketch mode needs an expert set")
    if not isinstance(bank, SketchBank):
        bank = SketchBank(list(bank))
    bank.reset()
    totals = np.zeros(bank.size)
    for t in range(X.shape[0]):
        p = bank.advance(X[t]) @ X[t]
        totals += np.where(p <= vals[t] + tol, np.maximum(p, 0.0), 0.0)
    j = int(np.argmax(totals))
    bound, note = None, "sketch-set maximum"
    if oracle.epsilon is not None and not bank.grid_overridden:
        bound = 4 * oracle.epsilon * X.shape[0]
    elif bank.grid_overridden:
        note = "sketch-set maximum over an overridden (coarse) grid: no theorem-level bound"
    return OptResult(float(totals[j]), "sketch", bound, bank.sketches[j], note)


def opt_hindsight(traces, values: str = "truth", oracle: OptOracleConfig = OptOracleConfig(),
                  tol: float = TOL) -> OptResult:
    """Best fixed linear price in hindsight against true values or bids."""
    if not traces:
        raise ValueError("need at least one round")
    X = np.array([r.context for r in traces])
    return opt_over_contexts(X, _values(traces, values), oracle, tol)


# -- replicated statistics ----------------------------------------------------

@dataclass
class Estimate:
    mean: float
    se: float
    values: list

    @classmethod
    def of(cls, xs) -> "Estimate":
        xs = [float(v) for v in xs]
        n = len(xs)
        mean = float(np.mean(xs))
        se = float(np.std(xs, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(mean, se, xs)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "standard_error": self.se, "replications": len(self.values)}


SellerFactory = Callable[[SeedStreams], object]
EnvFactory = Callable[[SeedStreams], object]


def regret(seller_factory: SellerFactory, env_factory: EnvFactory, partition: RoundPartition,
           replications: int, seed: int = 0, oracle: OptOracleConfig = OptOracleConfig(),
           tol: float = TOL) -> dict:
    """Mean/SE of ``Opt(truth) - Rev`` under truthful buyers over seeded replications."""
    regrets, revs, opts, bounds = [], [], [], []
    buyers = [Truthful() for _ in range(partition.n_buyers)]
    for r in range(replications):
        streams = SeedStreams(seed, r)
        res = run_protocol(seller_factory(streams), buyers, env_factory(streams), partition, tol=tol)
        opt = opt_hindsight(res.traces, "truth", oracle, tol)
        regrets.append(opt.value - res.revenue)
        revs.append(res.revenue)
        opts.append(opt.value)
        bounds.append(opt.error_bound)
    return {"regret": Estimate.of(regrets), "revenue": Estimate.of(revs),
            "opt": Estimate.of(opts), "opt_error_bound": max(b or 0.0 for b in bounds),
            "opt_mode": oracle.mode}


# -- strategic regret (lower-bound estimator) ---------------------------------

def _run_profile(seller_factory, env_factory, partition, discount, profile, streams, tol):
    buyers = [make(streams.buyer(i + 1)) for i, make in enumerate(profile)]
    return run_protocol(seller_factory(streams), buyers, env_factory(streams), partition,
                        discount, tol=tol)


def sreg_estimate(seller_factory: SellerFactory, env_factory: EnvFactory,
                  partition: RoundPartition, discount: DiscountProfile,
                  strategy_pool: dict, deviations: dict, replications: int = 20,
                  seed: int = 0, eps_nash: float = 1e-6,
                  oracle: OptOracleConfig = OptOracleConfig(), tol: float = TOL) -> dict:
    """Lower-bound estimate of strategic regret.

    ``strategy_pool`` maps a profile name to a list of per-buyer factories
    ``rng -> Strategy``; ``deviations`` maps names to single factories.  A
    profile passes when no unilateral deviation gains more than
    ``max(eps_nash, 2 * SE)`` (common random numbers across runs).  The
    reported value is the largest mean ``Opt(truth) - Rev`` among passing
    profiles.  Only the supplied deviations are searched, so this is a lower
    bound on the supremum over equilibria.
    """
    if not strategy_pool:
        raise ValueError("strategy pool is empty")
    profiles = {}
    for name, profile in strategy_pool.items():
        if len(profile) != partition.n_buyers:
            raise ValueError(f"profile {name!r} has {len(profile)} strategies for {partition.n_buyers} buyers")
        base_u, gaps = [], []
        for r in range(replications):
            streams = SeedStreams(seed, r)
            res = _run_profile(seller_factory, env_factory, partition, discount, profile, streams, tol)
            base_u.append(res.utilities)
            gaps.append(opt_hindsight(res.traces, "truth", oracle, tol).value - res.revenue)
        checks = []
        for i in range(partition.n_buyers):
            for dname, dev in deviations.items():
                alt = list(profile)
                alt[i] = dev
                diffs = []
                for r in range(replications):
                    res = _run_profile(seller_factory, env_factory, partition, discount, alt,
                                       SeedStreams(seed, r), tol)
                    diffs.append(res.utilities[i] - base_u[r][i])
                est = Estimate.of(diffs)
                tol_i = max(eps_nash, 2 * est.se)
                checks.append({"buyer": i + 1, "deviation": dname, "gain": est.mean,
                               "standard_error": est.se, "tolerance": tol_i,
                               "passed": est.mean <= tol_i})
        est = Estimate.of(gaps)
        profiles[name] = {"passed": all(c["passed"] for c in checks), "checks": checks,
                          "opt_minus_rev": est.to_dict()}
    passing = {k: v for k, v in profiles.items() if v["passed"]}
    out = {"label": "lower-bound estimate of SReg", "profiles": profiles,
           "note": "deviation search is limited to the supplied strategies"}
    if passing:
        best = max(passing, key=lambda k: passing[k]["opt_minus_rev"]["mean"])
        out.update(estimate=passing[best]["opt_minus_rev"]["mean"],
                   standard_error=passing[best]["opt_minus_rev"]["standard_error"], argmax=best)
    else:
        out.update(estimate=None, standard_error=None, error="no profile passed the deviation check")
    return out
