"""Context/value generators.

An environment sees only the public history (contexts, prices, revealed
weights, true values).  Bids, allocations and seller coins never reach it:
``EnvironmentView`` simply has no field for them.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import TOL, as_context, check_unit_interval, unit_vectors


@dataclass(frozen=True)
class PublicRecord:
    round: int
    context: np.ndarray
    price: float
    weight: np.ndarray
    true_value: float


class History(Sequence):
    """Read-only prefix of an append-only record list."""

    def __init__(self, records: list, length: Optional[int] = None):
        self._records = records
        self._n = len(records) if length is None else length

    def __len__(self):
        return self._n

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self._records[j] for j in range(*i.indices(self._n))]
        if i < 0:
            i += self._n
        if not 0 <= i < self._n:
            raise IndexError(i)
        return self._records[i]


@dataclass(frozen=True)
class EnvironmentView:
    history: History

    @property
    def round(self) -> int:
        """Round about to be generated."""
        return len(self.history) + 1


class Environment:
    """Base class: ``emit(view) -> (context, true_value)``."""

    name = "environment"

    def emit(self, view: EnvironmentView):
        raise NotImplementedError

    def describe(self) -> dict:
        return {"environment": self.name}


class FixedEnvironment(Environment):
    name = "fixed"

    def __init__(self, contexts, values, tol: float = TOL):
        X = np.atleast_2d(np.asarray(contexts, dtype=float))
        if len(values) != X.shape[0]:
            raise ValueError("contexts and values differ in length")
        self.contexts = np.array([as_context(x, tol) for x in X])
        self.values = [check_unit_interval(v, "true value") for v in values]

    def emit(self, view):
        t = view.round
        return self.contexts[t - 1], self.values[t - 1]

    @classmethod
    def from_trace_csv(cls, path) -> "FixedEnvironment":
        from .io import read_trace
        rows = read_trace(path)
        return cls([r.context for r in rows], [r.true_value for r in rows])


def env_fixed(contexts, values) -> FixedEnvironment:
    return FixedEnvironment(contexts, values)


def sphere(d: int) -> Callable:
    return lambda rng: unit_vectors(rng, 1, d)[0]


def uniform_values(lo: float = 0.0, hi: float = 1.0) -> Callable:
    return lambda rng: float(rng.uniform(lo, hi))


def point_mass(value) -> Callable:
    return lambda rng: value


class IIDEnvironment(Environment):
    """i.i.d. draws; the t-th call consumes the t-th draws of the stream."""

    name = "iid"

    def __init__(self, context_dist: Callable, value_dist: Callable, rng: np.random.Generator):
        self.context_dist = context_dist
        self.value_dist = value_dist
        self.rng = rng

    def emit(self, view):
        x = as_context(self.context_dist(self.rng))
        theta = check_unit_interval(self.value_dist(self.rng), "true value")
        return x, theta


def env_iid(context_dist, value_dist, seed) -> IIDEnvironment:
    return IIDEnvironment(context_dist, value_dist, np.random.default_rng(seed))


class LinearIIDEnvironment(Environment):
    """i.i.d. sphere contexts with values ``clip(<w*, x> + noise)`` (a learnable instance)."""

    name = "linear"

    def __init__(self, d: int, rng: np.random.Generator, noise: float = 0.1):
        self.d = d
        self.rng = rng
        w = unit_vectors(rng, 1, d)[0]
        self.hidden = w * 0.8
        self.noise = noise

    def emit(self, view):
        x = unit_vectors(self.rng, 1, self.d)[0]
        v = float(self.hidden @ x) + self.noise * float(self.rng.uniform(-1, 1))
        return x, float(np.clip(abs(v), 0.0, 1.0))


class PriceTracker(Environment):
    """Price-chasing adversary.

    Contexts cycle through a few fixed directions; the value on a direction is
    set just below the last price posted on it, so a seller repeating a price
    never sells.
    """

    name = "tracker"

    def __init__(self, d: int, rng: np.random.Generator, n_directions: int = 3,
                 offset: float = 0.05):
        self.directions = unit_vectors(rng, n_directions, d)
        self.initial = rng.uniform(0.3, 0.9, n_directions)
        self.offset = offset

    def emit(self, view):
        k = (view.round - 1) % len(self.directions)
        x = self.directions[k]
        last = None
        # Directions cycle, so the previous visit is exactly n rounds back.
        back = view.round - 1 - len(self.directions)
        if back >= 0 and np.array_equal(view.history[back].context, x):
            last = view.history[back].price
        theta = self.initial[k] if last is None else max(0.0, min(1.0, last - self.offset))
        return x, float(theta)


def env_adaptive_tracker(seed, d: int = 2, n_directions: int = 3, offset: float = 0.05) -> PriceTracker:
    return PriceTracker(d, np.random.default_rng(seed), n_directions, offset)


class ContextRotation(Environment):
    """Contexts rotate in a random plane; values follow a hidden linear rule
    that drops after every round in which the last posted price was below it."""

    name = "rotation"

    def __init__(self, d: int, rng: np.random.Generator, angle: float = 0.7, noise: float = 0.05):
        if d < 2:
            raise ValueError("rotation needs d >= 2")
        q, _ = np.linalg.qr(rng.standard_normal((d, 2)))
        self.plane = q[:, :2].T
        self.angle = angle
        self.phase = float(rng.uniform(0, 2 * np.pi))
        self.hidden = unit_vectors(rng, 1, d)[0] * 0.9
        self.noise = noise
        self.rng = rng

    def emit(self, view):
        phi = self.phase + self.angle * (view.round - 1)
        x = np.cos(phi) * self.plane[0] + np.sin(phi) * self.plane[1]
        x = x / np.linalg.norm(x)
        v = abs(float(self.hidden @ x))
        if view.history:
            last = view.history[-1]
            if last.price < last.true_value:
                v *= 0.9
        v += self.noise * float(self.rng.uniform(-1, 1))
        return x, float(np.clip(v, 0.0, 1.0))


ENVIRONMENTS = {
    "fixed": FixedEnvironment,
    "iid": IIDEnvironment,
    "linear": LinearIIDEnvironment,
    "tracker": PriceTracker,
    "rotation": ContextRotation,
}
