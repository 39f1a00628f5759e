"""Full-information expert algorithms and expert regret.

Rewards are arrays indexed by expert id ``0..K-1`` with values in ``[0, 1]``.
"""
from __future__ import annotations

import copy
import math
from typing import Optional, Sequence

import numpy as np


class Hedge:
    """Exponential weights with the fixed-horizon rate ``sqrt(8 ln K / T)``.

    Log-space weights; ``update`` adds ``eta * reward``.  ``K == 1`` uses the
    ``K = 2`` rate since the distribution is degenerate anyway.
    """

    def __init__(self, n_experts: int, horizon: int, learning_rate: Optional[float] = None):
        if n_experts < 1:
            raise ValueError("need at least one expert")
        if horizon < 1:
            raise ValueError("horizon must be at least 1")
        self.n_experts = int(n_experts)
        self.horizon = int(horizon)
        if learning_rate is None:
            learning_rate = math.sqrt(8 * math.log(max(self.n_experts, 2)) / self.horizon)
        if learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        self.eta = float(learning_rate)
        self.log_weights = np.zeros(self.n_experts)
        self.t = 0

    def distribution(self) -> np.ndarray:
        a = self.log_weights - self.log_weights.max()
        p = np.exp(a)
        return p / p.sum()

    def sample(self, rng: np.random.Generator) -> int:
        # unnormalized weights suffice for inverse-cdf sampling
        cdf = np.cumsum(np.exp(self.log_weights - self.log_weights.max()))
        u = rng.random() * cdf[-1]
        return int(min(np.searchsorted(cdf, u, side="right"), self.n_experts - 1))

    def update(self, rewards) -> None:
        r = np.asarray(rewards, dtype=float)
        if r.shape != (self.n_experts,):
            raise ValueError(f"reward vector must cover all {self.n_experts} experts, got shape {r.shape}")
        self.log_weights = self.log_weights + self.eta * r
        self.t += 1

    def copy(self) -> "Hedge":
        # ``update`` rebinds log_weights, so a shallow copy is independent.
        return copy.copy(self)

    def state_key(self):
        return (self.t, self.log_weights.tobytes())


def hedge_init(K: int, T: int) -> Hedge:
    return Hedge(K, T)


def hedge_update(state: Hedge, reward) -> Hedge:
    new = state.copy()
    new.update(reward)
    return new


def hedge_sample(state: Hedge, rng: np.random.Generator) -> int:
    return state.sample(rng)


def hedge_regret_bound(K: int, T: int) -> float:
    return math.sqrt(T * math.log(K) / 2)


class SparseGate:
    """Private i.i.d. Bernoulli(rho) update coins, drawn up-front for T rounds."""

    def __init__(self, rho: float, horizon: int, rng: np.random.Generator):
        if not 0.0 < rho <= 1.0:
            raise ValueError("rho must lie in (0, 1]")
        self.rho = float(rho)
        self.coins = rng.random(horizon) < rho

    @classmethod
    def from_coins(cls, coins: Sequence[int], rho: float = 0.5) -> "SparseGate":
        gate = cls.__new__(cls)
        gate.rho = float(rho)
        gate.coins = np.asarray(coins, dtype=bool)
        return gate

    def __getitem__(self, t: int) -> bool:
        """Coin for round ``t`` (1-based)."""
        return bool(self.coins[t - 1])


class SparseWrapped:
    """Expert algorithm fed ``xi_t * r_t``: the all-zeros reward on closed rounds.

    Closed rounds still reach the inner algorithm (as zeros) so its round
    counter stays aligned with the protocol.
    """

    def __init__(self, inner, gate: SparseGate):
        self.inner = inner
        self.gate = gate
        self.t = 0

    @property
    def n_experts(self) -> int:
        return self.inner.n_experts

    def distribution(self) -> np.ndarray:
        return self.inner.distribution()

    def sample(self, rng: np.random.Generator) -> int:
        return self.inner.sample(rng)

    def update(self, rewards) -> bool:
        return self.update_with(rewards, self.gate[self.t + 1])

    def update_with(self, rewards, xi: bool) -> bool:
        """Feed round ``t+1`` with an explicit coin (exact enumeration)."""
        self.t += 1
        r = np.asarray(rewards, dtype=float)
        self.inner.update(r if xi else np.zeros_like(r))
        return bool(xi)

    def copy(self) -> "SparseWrapped":
        new = copy.copy(self)
        new.inner = self.inner.copy()
        return new

    def state_key(self):
        return (self.t, self.inner.state_key())


def sparse_wrap(inner, gate: SparseGate) -> SparseWrapped:
    return SparseWrapped(inner, gate)


def expert_regret(choices: Sequence[int], rewards) -> float:
    """Realized regret ``max_z sum_t r_t(z) - sum_t r_t(z_t)``.

    ``rewards`` has shape ``(T, K)``.
    """
    R = np.atleast_2d(np.asarray(rewards, dtype=float))
    z = np.asarray(choices, dtype=int)
    if R.shape[0] == 0 or R.shape[0] != z.size:
        raise ValueError("need one reward vector per chosen expert (non-empty)")
    totals = R.sum(axis=0)
    return float(totals.max() - R[np.arange(z.size), z].sum())


def best_expert(rewards) -> int:
    """Hindsight-best expert; ties go to the lowest id."""
    return int(np.argmax(np.asarray(rewards, dtype=float).sum(axis=0)))
