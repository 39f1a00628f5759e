"""Shared domain types and the closed-form payoff functions.

Vectors are plain 1-D ``numpy`` float arrays; the validation helpers below
enforce the unit-sphere / unit-ball invariants at module boundaries.
"""
from __future__ import annotations

import math

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# Absolute tolerance for equality-adjacent comparisons (sale at p == b,
# norm checks).  Every function that compares accepts a ``tol`` override.
TOL = 1e-9


class DimensionError(ValueError):
    pass


def _vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim != 1 or a.size < 1:
        raise DimensionError(f"expected a non-empty 1-D vector, got shape {a.shape}")
    return a


def as_context(x, tol: float = TOL) -> np.ndarray:
    """Validate a context vector (unit Euclidean norm)."""
    x = _vec(x)
    n = math.sqrt(float(x @ x))
    if abs(n - 1.0) > tol:
        raise ValueError(f"context must have unit norm, got {n!r}")
    return x


def as_weight(w, tol: float = TOL) -> np.ndarray:
    """Validate a weight vector (inside the closed unit ball)."""
    w = _vec(w)
    n = math.sqrt(float(w @ w))
    if n > 1.0 + tol:
        raise ValueError(f"weight must lie in the unit ball, got norm {n!r}")
    return w


def check_unit_interval(value: float, name: str = "value") -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def inner_product(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(a @ b)


def project_to_ball(v) -> np.ndarray:
    """Radial projection onto the unit ball: ``v / max(1, ||v||)``."""
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    return v / max(1.0, n)


def is_sale(bid: float, price: float, tol: float = TOL) -> bool:
    # Ties are sales; ``tol`` absorbs round-off at grid boundaries.
    return bid >= price - tol


def revenue(weight, context, bid: float, tol: float = TOL) -> float:
    """Single-round seller revenue ``[<w,x>]_+ * 1[b >= <w,x>]``.

    The sale indicator tests the unclipped price, so a negative price sells
    but earns nothing.
    """
    p = inner_product(weight, context)
    return max(0.0, p) if is_sale(bid, p, tol) else 0.0


def revenue_at_price(price: float, bid: float, tol: float = TOL) -> float:
    return max(0.0, price) if is_sale(bid, price, tol) else 0.0


def buyer_utility(true_value: float, price: float, bid: float, tol: float = TOL) -> float:
    """Per-round buyer utility ``(theta - p) * 1[b >= p]``; may be negative."""
    return (true_value - price) if is_sale(bid, price, tol) else 0.0


@dataclass(frozen=True)
class RoundPartition:
    """Assignment of rounds ``1..T`` to buyers ``1..n`` (disjoint slots)."""

    slots: tuple

    def __post_init__(self):
        slots = tuple(frozenset(int(t) for t in s) for s in self.slots)
        object.__setattr__(self, "slots", slots)
        seen: set = set()
        for s in slots:
            if seen & s:
                raise ValueError("partition slots must be pairwise disjoint")
            seen |= s
        T = len(seen)
        if seen != set(range(1, T + 1)):
            raise ValueError("partition slots must cover 1..T exactly")
        owner = {}
        for i, s in enumerate(slots, start=1):
            for t in s:
                owner[t] = i
        object.__setattr__(self, "_owner", owner)

    @property
    def horizon(self) -> int:
        return len(self._owner)

    @property
    def n_buyers(self) -> int:
        return len(self.slots)

    def buyer_of(self, t: int) -> int:
        """1-based buyer index owning round ``t``."""
        return self._owner[t]

    def rounds_of(self, buyer_index: int) -> list:
        return sorted(self.slots[buyer_index - 1])

    @classmethod
    def single(cls, T: int) -> "RoundPartition":
        return cls((range(1, T + 1),))

    @classmethod
    def round_robin(cls, T: int, n: int) -> "RoundPartition":
        return cls(tuple(range(i, T + 1, n) for i in range(1, n + 1)))

    @classmethod
    def blocks(cls, T: int, n: int) -> "RoundPartition":
        edges = np.linspace(0, T, n + 1).round().astype(int)
        return cls(tuple(range(edges[i] + 1, edges[i + 1] + 1) for i in range(n)))

    @classmethod
    def from_assignment(cls, owners: Sequence[int]) -> "RoundPartition":
        n = max(owners)
        slots = [[] for _ in range(n)]
        for t, i in enumerate(owners, start=1):
            slots[i - 1].append(t)
        return cls(tuple(slots))


@dataclass(frozen=True)
class DiscountProfile:
    gammas: tuple
    gamma_bar: float

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if not 0.0 <= self.gamma_bar < 1.0:
            raise ValueError("gamma_bar must lie in [0, 1)")
        for g in self.gammas:
            if not 0.0 <= g <= self.gamma_bar:
                raise ValueError(f"discount {g} outside [0, gamma_bar={self.gamma_bar}]")

    @classmethod
    def uniform(cls, n: int, gamma: float) -> "DiscountProfile":
        return cls((gamma,) * n, gamma)


@dataclass
class RoundTrace:
    round: int
    buyer_index: int
    context: np.ndarray
    weight: np.ndarray
    price: float
    bid: float
    true_value: float
    sold: bool
    coin_omega: bool = False
    coin_xi: bool = False
    expert_chosen: Optional[int] = None

    def check(self, tol: float = TOL) -> None:
        if abs(self.price - inner_product(self.weight, self.context)) > 1e-12:
            raise ValueError(f"round {self.round}: price != <w, x>")
        if self.sold != is_sale(self.bid, self.price, tol):
            raise ValueError(f"round {self.round}: sale flag inconsistent with bid/price")


def discounted_utility(trace: Sequence[RoundTrace], buyer_index: int,
                       partition: RoundPartition, discount: DiscountProfile,
                       tol: float = TOL) -> float:
    """Ex-post discounted utility of one buyer over its slot."""
    if len(trace) != partition.horizon:
        raise ValueError(f"trace has {len(trace)} rounds, partition covers {partition.horizon}")
    gamma = discount.gammas[buyer_index - 1]
    total = 0.0
    for t in partition.rounds_of(buyer_index):
        r = trace[t - 1]
        total += gamma ** (t - 1) * buyer_utility(r.true_value, r.price, r.bid, tol)
    return total


def unit_vectors(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """``n`` i.i.d. uniform directions on the sphere in R^d, shape (n, d)."""
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def ball_points(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """``n`` i.i.d. uniform points in the unit ball of R^d."""
    return unit_vectors(rng, n, d) * rng.random((n, 1)) ** (1.0 / d)
