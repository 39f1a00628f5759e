"""Sellers, buyer strategies and the sparse-update calibration.

Sellers expose their per-round randomness as explicit branches::

    branches()            -> [(prob, choice), ...]   drawn before x_t is seen
    step_with(choice, x)  -> w_t
    feedback_branches()   -> [(prob, xi), ...]
    feedback_with(bid, xi)

``step``/``feedback`` sample those branches from the seller's private
streams; the exact-enumeration engine walks them instead.  A seller never
receives true values.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import TOL, as_weight, check_unit_interval
from .environment import History
from .experts import Hedge, SparseGate, SparseWrapped


class ProtocolError(RuntimeError):
    pass


def compute_rho(epsilon, gamma_bar):
    """Update probability ``min(1, (1 - g) eps^5 / (3 g))``; 1 when ``g == 0``.

    Works on floats and on ``Fraction`` inputs.
    """
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    if not 0 <= gamma_bar < 1:
        raise ValueError("gamma_bar must lie in [0, 1)")
    if gamma_bar == 0:
        return 1
    return min(1, (1 - gamma_bar) * epsilon ** 5 / (3 * gamma_bar))


def delta_squared(epsilon, gamma_bar, rho):
    if epsilon <= 0 or not 0 <= gamma_bar < 1 or not 0 <= rho <= 1:
        raise ValueError("need epsilon > 0, gamma_bar in [0, 1), rho in [0, 1]")
    if gamma_bar == 0:
        return 0
    return 3 * rho * gamma_bar / (epsilon * (1 - gamma_bar))


def compute_delta(epsilon, gamma_bar, rho) -> float:
    """Truthfulness radius ``sqrt(3 rho g / (eps (1 - g)))``."""
    return math.sqrt(delta_squared(epsilon, gamma_bar, rho))


def deviation_margin(epsilon, delta, rho, gamma, t_star: int) -> float:
    """Lower bound on the gain from switching a ``>delta`` misreport at ``t_star``
    to truthful: ``eps delta^2 g^(t*-1) / 2 - rho g^t* / (1 - g)``."""
    return epsilon * delta ** 2 * gamma ** (t_star - 1) / 2 - rho * gamma ** t_star / (1 - gamma)


# -- sellers -----------------------------------------------------------------

@dataclass
class RoundCoins:
    omega: bool = False
    lam: Optional[float] = None
    expert: Optional[int] = None
    xi: bool = False


class Seller:
    name = "seller"

    def __init__(self):
        self._pending = False
        self.coins = RoundCoins()

    def branches(self):
        return [(1.0, None)]

    def draw(self):
        return None

    def step_with(self, choice, x) -> np.ndarray:
        raise NotImplementedError

    def feedback_branches(self):
        return [(1.0, False)]

    def feedback_with(self, bid: float, xi) -> None:
        pass

    def step(self, x) -> np.ndarray:
        if self._pending:
            raise ProtocolError("step called twice without feedback")
        w = self.step_with(self.draw(), x)
        self._pending = True
        return w

    def feedback(self, bid: float) -> None:
        if not self._pending:
            raise ProtocolError("feedback before step (or duplicate feedback)")
        self._pending = False
        self.feedback_with(bid, self._draw_xi())

    def _draw_xi(self):
        return False

    def clone(self) -> "Seller":
        """Independent copy for branching (shares rngs and static data)."""
        new = copy.copy(self)
        new.coins = copy.copy(self.coins)
        return new

    def state_key(self):
        """Hashable summary of the mutable state, or None if unknown.

        Two sellers with equal keys behave identically on the same public
        history, which lets exact enumeration merge branches.
        """
        return None

    def describe(self) -> dict:
        return {"seller": self.name}


class FixedWeightSeller(Seller):
    """Posts the same weight every round (test oracle)."""

    name = "fixed"

    def __init__(self, weight):
        super().__init__()
        self.weight = as_weight(weight)

    def step_with(self, choice, x):
        return self.weight.copy()

    def state_key(self):
        return ()


class CopyPriceSeller(Seller):
    """Naive control: posts the previous round's bid as this round's price."""

    name = "copy_price"

    def __init__(self, initial_price: float):
        super().__init__()
        self.next_price = check_unit_interval(initial_price, "initial price")

    def step_with(self, choice, x):
        return self.next_price * np.asarray(x, dtype=float)

    def feedback_with(self, bid, xi):
        self.next_price = float(bid)

    def state_key(self):
        return self.next_price


class OMRSeller(Seller):
    """Expert-reduction seller: sample an expert sketch, post its reconstruction,
    reward every expert by its own revenue on the submitted bid."""

    name = "omr"

    def __init__(self, experts, horizon: int, rng: np.random.Generator,
                 learner=None, tol: float = TOL):
        super().__init__()
        self.experts = experts
        self.horizon = int(horizon)
        self.rng = rng
        self.learner = learner if learner is not None else Hedge(experts.size, horizon)
        self.tol = tol
        self._V = None
        self._x = None
        self.t = 0
        # ungated sum of r_t(z): the realized expert problem's hindsight totals
        self.reward_totals = np.zeros(experts.size)

    def branches(self):
        p = self.learner.distribution()
        return [(float(p[k]), ("expert", k)) for k in range(p.size) if p[k] > 0]

    def draw(self):
        return ("expert", self.learner.sample(self.rng))

    def step_with(self, choice, x):
        x = np.asarray(x, dtype=float)
        self.t += 1
        self._x = x
        self._V = self.experts.advance(x)
        kind, val = choice
        if kind == "price":
            self.coins = RoundCoins(omega=True, lam=val)
            return val * x
        self.coins = RoundCoins(expert=val)
        return self._V[val].copy()

    def state_key(self):
        key = getattr(self.learner, "state_key", None)
        return None if key is None else (self.t, key())

    def clone(self):
        new = super().clone()
        new.experts = self.experts.clone()
        new.learner = self.learner.copy()
        return new

    def expert_rewards(self, bid: float) -> np.ndarray:
        prices = self._V @ self._x
        return np.where(bid >= prices - self.tol, np.maximum(prices, 0.0), 0.0)

    def feedback_branches(self):
        return [(1.0, True)]

    def _draw_xi(self):
        return True

    def feedback_with(self, bid, xi):
        r = self.expert_rewards(bid)
        self.reward_totals = self.reward_totals + r
        self.learner.update(r)
        self.coins.xi = True

    def describe(self) -> dict:
        return {"seller": self.name, "experts": self.experts.size,
                "expert_mode": self.experts.mode,
                "grid_override": bool(getattr(self.experts, "grid_overridden", False))}


class SUMSeller(OMRSeller):
    """Sparse-update seller.

    Each round prices uniformly at random (``w = lam * x``) with probability
    ``epsilon``; otherwise it samples the expert learner.  The learner's
    reward ``r_t`` is gated by coins ``xi_t ~ Ber(rho)`` drawn for all rounds
    up-front.

    Harness overrides: ``rho`` (may be 0, meaning the learner never updates),
    ``omega_prob`` (random-pricing probability) and ``lambda_support`` (finite
    uniform support for the random price, for exact enumeration).
    """

    name = "sum"

    def __init__(self, experts, horizon: int, epsilon: float, gamma_bar: float, *,
                 expert_rng: np.random.Generator, omega_rng: np.random.Generator,
                 lambda_rng: np.random.Generator, xi_rng: np.random.Generator,
                 rho: Optional[float] = None, omega_prob: Optional[float] = None,
                 lambda_support: Optional[Sequence[float]] = None, learner=None,
                 tol: float = TOL):
        inner = learner if learner is not None else Hedge(experts.size, horizon)
        self.epsilon = float(epsilon)
        self.gamma_bar = float(gamma_bar)
        self.rho = float(compute_rho(epsilon, gamma_bar) if rho is None else rho)
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.rho > 0:
            gate = SparseGate(self.rho, horizon, xi_rng)
        else:
            gate = SparseGate.from_coins(np.zeros(horizon, dtype=bool), rho=0.0)
        super().__init__(experts, horizon, expert_rng, SparseWrapped(inner, gate), tol)
        self.omega_prob = self.epsilon if omega_prob is None else float(omega_prob)
        if not 0.0 <= self.omega_prob <= 1.0:
            raise ValueError("omega_prob must lie in [0, 1]")
        self.omega_rng = omega_rng
        self.lambda_rng = lambda_rng
        self.lambda_support = None if lambda_support is None else [float(v) for v in lambda_support]

    @property
    def delta(self) -> float:
        return compute_delta(self.epsilon, self.gamma_bar, self.rho)

    def branches(self):
        out = []
        if self.omega_prob > 0:
            if self.lambda_support is None:
                raise ProtocolError("exact branching needs a finite lambda_support")
            m = len(self.lambda_support)
            out += [(self.omega_prob / m, ("price", lam)) for lam in self.lambda_support]
        if self.omega_prob < 1:
            out += [((1 - self.omega_prob) * p, c) for p, c in super().branches()]
        return out

    def draw(self):
        omega = bool(self.omega_rng.random() < self.omega_prob)
        if omega:
            if self.lambda_support is None:
                lam = float(self.lambda_rng.random())
            else:
                lam = self.lambda_support[int(self.lambda_rng.integers(len(self.lambda_support)))]
            return ("price", lam)
        return super().draw()

    def feedback_branches(self):
        if self.rho >= 1:
            return [(1.0, True)]
        if self.rho <= 0:
            return [(1.0, False)]
        return [(self.rho, True), (1 - self.rho, False)]

    def _draw_xi(self):
        return self.learner.gate[self.t]

    def feedback_with(self, bid, xi):
        r = self.expert_rewards(bid)
        self.reward_totals = self.reward_totals + r
        self.learner.update_with(r, bool(xi))
        self.coins.xi = bool(xi)

    def describe(self) -> dict:
        out = super().describe()
        out.update({"epsilon": self.epsilon, "gamma_bar": self.gamma_bar, "rho": self.rho,
                    "omega_prob": self.omega_prob, "delta": self.delta})
        return out


# -- buyers ------------------------------------------------------------------

@dataclass(frozen=True)
class OwnRecord:
    round: int
    bid: float
    sold: bool


@dataclass(frozen=True)
class BuyerView:
    """What buyer ``buyer_index`` may see when bidding in round ``round``.

    ``public`` holds contexts, prices, revealed weights and every buyer's true
    value for past rounds; ``own`` holds this buyer's bids and allocations.
    Other buyers' bids and allocations and the seller's coins are absent.
    """

    buyer_index: int
    round: int
    context: np.ndarray
    public: History
    own: tuple = ()


class Strategy:
    name = "strategy"

    def bid(self, view: BuyerView, true_value: float) -> float:
        raise NotImplementedError


class Truthful(Strategy):
    name = "truthful"

    def bid(self, view, true_value):
        return float(true_value)


class Shade(Strategy):
    name = "shade"

    def __init__(self, margin: float):
        self.margin = float(margin)

    def bid(self, view, true_value):
        return max(0.0, true_value - self.margin)


class ThresholdDeceiver(Strategy):
    """Bids ``lowball`` on its first ``deceive_rounds`` appearances, then truthfully."""

    name = "deceiver"

    def __init__(self, deceive_rounds: int, lowball: float = 0.0):
        self.deceive_rounds = int(deceive_rounds)
        self.lowball = check_unit_interval(lowball, "lowball")

    def bid(self, view, true_value):
        return self.lowball if len(view.own) < self.deceive_rounds else float(true_value)


class RandomBid(Strategy):
    """Uniform bids from a dedicated stream (used for perturbation tests)."""

    name = "random"

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def bid(self, view, true_value):
        return float(self.rng.random())


def buyer_truthful(view, true_value) -> float:
    return Truthful().bid(view, true_value)


def buyer_shade(view, true_value, margin) -> float:
    return Shade(margin).bid(view, true_value)


def buyer_threshold_deceiver(view, true_value, deceive_rounds, lowball) -> float:
    return ThresholdDeceiver(deceive_rounds, lowball).bid(view, true_value)


STRATEGIES = {"truthful": Truthful, "shade": Shade, "deceiver": ThresholdDeceiver}
