"""Exact expected utilities at tiny horizons.

The engine walks every seller coin outcome (``branches`` and
``feedback_branches``) instead of sampling, so expectations are exact sums.
The environment must be deterministic given the public history, and buyers
other than the focal one play fixed deterministic strategies.

A focal strategy is evaluated by expectation; a best response maximizes over
every deterministic history-dependent strategy with bids on a finite grid.
The buyer's information set at round ``t`` is the public record of rounds
``< t`` (prices and revealed weights) plus its own past bids.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .agents import BuyerView, OwnRecord, Strategy, deviation_margin
from .core import TOL, RoundPartition, is_sale
from .environment import EnvironmentView, History, PublicRecord

KEY_DIGITS = 9


class SearchCapExceeded(RuntimeError):
    pass


def observation(record: PublicRecord) -> tuple:
    """What every buyer learns about a finished round (rounded for hashing)."""
    return (round(float(record.price), KEY_DIGITS),
            tuple(round(float(c), KEY_DIGITS) for c in record.weight))


def history_key(public) -> tuple:
    return tuple(observation(r) for r in public)


def info_key(view: BuyerView) -> tuple:
    """Information set of a buyer about to bid: public record plus own bids."""
    return (history_key(view.public), tuple(round(r.bid, KEY_DIGITS) for r in view.own))


class TreeStrategy(Strategy):
    """Deterministic strategy given as a table ``info_key -> bid``."""

    name = "tree"

    def __init__(self, table: dict, default: Optional[Strategy] = None):
        self.table = dict(table)
        self.default = default

    def bid(self, view, true_value):
        key = info_key(view)
        if key in self.table:
            return self.table[key]
        if self.default is None:
            raise KeyError(f"no bid for information set at round {view.round}")
        return self.default.bid(view, true_value)


class OpenLoop(Strategy):
    """Bids a fixed sequence on the buyer's own rounds, ignoring history."""

    name = "open_loop"

    def __init__(self, bids: Sequence[float]):
        self.bids = [float(b) for b in bids]

    def bid(self, view, true_value):
        return self.bids[len(view.own)]


class TruthfulSwitch(Strategy):
    """``inner`` except at round ``t_star``, where any bid more than ``delta``
    away from the true value is replaced by the true value.

    Later rounds feed ``inner`` the view it would have had (its own original
    bid at ``t_star``); the true value and price of ``t_star`` are public by
    then, so the switch needs no memory.
    """

    name = "truthful_switch"

    def __init__(self, inner: Strategy, t_star: int, delta: float):
        self.inner = inner
        self.t_star = int(t_star)
        self.delta = float(delta)

    def bid(self, view, true_value):
        if view.round < self.t_star:
            return self.inner.bid(view, true_value)
        if view.round == self.t_star:
            b = self.inner.bid(view, true_value)
            return float(true_value) if abs(b - float(true_value)) > self.delta else b
        own = list(view.own)
        k = next(j for j, r in enumerate(own) if r.round == self.t_star)
        rec = view.public[self.t_star - 1]
        past = BuyerView(view.buyer_index, self.t_star, rec.context,
                         History(list(view.public[: self.t_star - 1])), tuple(own[:k]))
        b = self.inner.bid(past, rec.true_value)
        own[k] = OwnRecord(self.t_star, b, is_sale(b, rec.price))
        return self.inner.bid(BuyerView(view.buyer_index, view.round, view.context,
                                        view.public, tuple(own)), true_value)


@dataclass
class _Node:
    prob: float
    seller: object
    public: list
    own: dict


@dataclass
class Evaluation:
    value: float
    misreport_mass: dict = field(default_factory=dict)
    nodes: int = 0


@dataclass
class BestResponse:
    value: float
    strategy: TreeStrategy
    nodes: int = 0


def _merge(nodes: list) -> list:
    """Combine nodes whose sellers are in the same state (same public record
    and own records hold within a group by construction)."""
    out: dict = {}
    rest = []
    for n in nodes:
        k = n.seller.state_key()
        if k is None:
            rest.append(n)
        elif k in out:
            out[k].prob += n.prob
        else:
            out[k] = n
    return list(out.values()) + rest


class ExactGame:
    """One focal buyer facing a seller with finite coin supports."""

    def __init__(self, seller, environment, partition: RoundPartition, focal: int,
                 gamma: float, others: Optional[dict] = None, bid_grid: Sequence[float] = (),
                 node_cap: int = 2_000_000, tol: float = TOL):
        if not 1 <= focal <= partition.n_buyers:
            raise ValueError(f"focal buyer {focal} outside 1..{partition.n_buyers}")
        others = dict(others or {})
        missing = [i for i in range(1, partition.n_buyers + 1) if i != focal and i not in others]
        if missing:
            raise ValueError(f"no strategy for buyers {missing}")
        self.seller = seller
        self.environment = environment
        self.partition = partition
        self.focal = focal
        self.gamma = float(gamma)
        self.others = others
        self.bid_grid = sorted({float(b) for b in bid_grid})
        self.node_cap = int(node_cap)
        self.tol = tol

    def _copy(self, seller):
        return seller.clone()

    # -- public entry points --------------------------------------------------

    def evaluate(self, strategy: Strategy, misreport_threshold: float = np.inf) -> Evaluation:
        """Exact expected discounted utility of ``strategy``.

        ``misreport_mass[t]`` is the probability that the focal bid at round
        ``t`` differs from the true value by more than the threshold.
        """
        self._count = 0
        self._mass: dict = {}
        self._threshold = misreport_threshold
        root = _Node(1.0, self._copy(self.seller), [], {})
        value = self._solve(1, [root], strategy, None)
        return Evaluation(value, self._mass, self._count)

    def best_response(self) -> BestResponse:
        """Maximize over deterministic grid strategies (ties go to the bid
        closest to the true value, then the lower bid)."""
        if not self.bid_grid:
            raise ValueError("best response needs a bid grid")
        self._count = 0
        self._mass = {}
        self._threshold = np.inf
        table: dict = {}
        root = _Node(1.0, self._copy(self.seller), [], {})
        value = self._solve(1, [root], None, table)
        return BestResponse(value, TreeStrategy(table), self._count)

    # -- recursion --------------------------------------------------------------

    def _solve(self, t, nodes, strategy, table) -> float:
        if t > self.partition.horizon:
            return 0.0
        i = self.partition.buyer_of(t)
        expanded = []
        for n in nodes:
            x, theta = self.environment.emit(EnvironmentView(History(n.public)))
            x = np.asarray(x, dtype=float)
            for q, choice in n.seller.branches():
                if q <= 0:
                    continue
                s = self._copy(n.seller)
                w = np.asarray(s.step_with(choice, x), dtype=float)
                expanded.append((n.prob * q, s, n, x, float(theta), w))
                self._count += 1
                if self._count > self.node_cap:
                    raise SearchCapExceeded(f"more than {self.node_cap} nodes")
        if i != self.focal:
            return self._after(t, expanded, None, strategy, table)
        thetas = {e[4] for e in expanded}
        if len(thetas) != 1:
            raise ValueError("environment is not a function of the public history")
        theta = thetas.pop()
        n0 = expanded[0][2]
        view = BuyerView(i, t, expanded[0][3], History(n0.public), tuple(n0.own.get(i, ())))
        if table is None:
            b = float(strategy.bid(view, theta))
            if abs(b - theta) > self._threshold:
                self._mass[t] = self._mass.get(t, 0.0) + sum(n.prob for n in nodes)
            return self._after(t, expanded, b, strategy, table)
        grid = sorted(set(self.bid_grid) | {theta})
        best, best_b, best_sub = -np.inf, None, None
        for b in grid:
            sub: dict = {}
            v = self._after(t, expanded, b, None, sub)
            better = v > best + 1e-12 or (abs(v - best) <= 1e-12 and
                                          (abs(b - theta), b) < (abs(best_b - theta), best_b))
            if better:
                best, best_b, best_sub = v, b, sub
        table.update(best_sub)
        table[info_key(view)] = best_b
        return best

    def _after(self, t, expanded, focal_bid, strategy, table) -> float:
        i = self.partition.buyer_of(t)
        value = 0.0
        groups: dict = {}
        for prob, s, parent, x, theta, w in expanded:
            price = float(w @ x)
            if i == self.focal:
                b = focal_bid
            else:
                view = BuyerView(i, t, x, History(parent.public), tuple(parent.own.get(i, ())))
                b = float(self.others[i].bid(view, theta))
            sold = is_sale(b, price, self.tol)
            if i == self.focal and sold:
                value += prob * self.gamma ** (t - 1) * (theta - price)
            rec = PublicRecord(t, x, price, w, theta)
            own = dict(parent.own)
            own[i] = tuple(own.get(i, ())) + (OwnRecord(t, b, sold),)
            fb = [(r, xi) for r, xi in s.feedback_branches() if r > 0]
            for j, (r, xi) in enumerate(fb):
                s2 = s if j == len(fb) - 1 else self._copy(s)
                s2.feedback_with(b, xi)
                node = _Node(prob * r, s2, parent.public + [rec], own)
                groups.setdefault(observation(rec), []).append(node)
        for group in groups.values():
            value += self._solve(t + 1, _merge(group), strategy, table)
        return value


def truthful_switch_check(game: ExactGame, strategy: Strategy, epsilon: float, delta: float,
                          rho: float, tol: float = 1e-12) -> list:
    """For each round where ``strategy`` misreports by more than ``delta`` with
    positive probability, compare the exact gain of the truthful switch with
    ``P(misreport) * margin``."""
    base = game.evaluate(strategy, misreport_threshold=delta)
    out = []
    for t_star, mass in sorted(base.misreport_mass.items()):
        switched = game.evaluate(TruthfulSwitch(strategy, t_star, delta))
        gain = switched.value - base.value
        margin = deviation_margin(epsilon, delta, rho, game.gamma, t_star)
        required = mass * margin
        out.append({"t_star": t_star, "misreport_probability": mass, "gain": gain,
                    "margin": margin, "required": required, "passed": gain >= required - tol})
    return out
