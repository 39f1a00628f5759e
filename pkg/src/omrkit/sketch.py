"""Online sketching: lazy OGD, the constructive sketch, reconstruction and
the finite expert set of grid-coefficient sketches.

A sketch is a sparse set of round indices with integer multipliers of a grid
step (``epsilon**2 / 8`` unless overridden).  Reconstructing it against a
context prefix gives a pricing weight in the unit ball.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .core import TOL, project_to_ball


class CapExceeded(RuntimeError):
    """Enumeration would produce more sketches than allowed."""

    def __init__(self, count, cap):
        self.count = count
        self.cap = cap
        shown = "more than 2**63" if count is OVERFLOW else str(count)
        super().__init__(f"sketch set has {shown} elements, cap is {cap}; use sampled mode")


class SketchDefectError(RuntimeError):
    """The per-round update loop failed to terminate (implementation bug)."""


class _Overflow:
    def __repr__(self):
        return "OVERFLOW"


OVERFLOW = _Overflow()
COUNT_LIMIT = 2 ** 63 - 1


@dataclass(frozen=True)
class GridSpec:
    """Coefficient grid: multipliers ``-m..m`` of ``step``, supports up to ``max_support``.

    ``overridden`` marks a non-default (coarsened) grid; such grids void the
    theorem-level guarantees and are recorded in output metadata.
    """

    step: float
    max_multiplier: int
    max_support: int
    overridden: bool = False

    @classmethod
    def default(cls, epsilon: float) -> "GridSpec":
        if not 0.0 < epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")
        step = epsilon ** 2 / 8
        return cls(step=step,
                   max_multiplier=int(math.floor(2.0 / step + 1e-9)),
                   max_support=int(math.ceil(16.0 / epsilon ** 2 - 1e-9)))

    @classmethod
    def coarse(cls, step: float, max_multiplier: int, max_support: int) -> "GridSpec":
        if step <= 0 or max_multiplier < 0 or max_support < 0:
            raise ValueError("invalid grid override")
        if max_multiplier * step > 2.0 + 1e-12:
            raise ValueError("grid coefficients must stay within [-2, 2]")
        return cls(step, int(max_multiplier), int(max_support), overridden=True)

    @property
    def size(self) -> int:
        return 2 * self.max_multiplier + 1

    def to_dict(self) -> dict:
        return {"step": self.step, "max_multiplier": self.max_multiplier,
                "max_support": self.max_support, "overridden": self.overridden}


@dataclass(frozen=True)
class Sketch:
    """Sparse expert: rounds ``support`` (1-based, increasing) with coefficients
    ``multipliers[i] * step``."""

    support: tuple
    multipliers: tuple
    step: float
    epsilon: Optional[float] = None

    def __post_init__(self):
        support = tuple(int(t) for t in self.support)
        mult = tuple(int(k) for k in self.multipliers)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "multipliers", mult)
        if len(support) != len(mult):
            raise ValueError("support and multipliers differ in length")
        if any(t < 1 for t in support) or any(a >= b for a, b in zip(support, support[1:])):
            raise ValueError("support must be strictly increasing round indices >= 1")
        if any(abs(k) * self.step > 2.0 + 1e-12 for k in mult):
            raise ValueError("coefficients must lie in [-2, 2]")

    @property
    def coefficients(self) -> np.ndarray:
        return np.asarray(self.multipliers, dtype=float) * self.step

    def __len__(self) -> int:
        return len(self.support)

    def to_dict(self) -> dict:
        out = {"support": list(self.support), "multipliers": list(self.multipliers),
               "epsilon": self.epsilon}
        if self.epsilon is None or not math.isclose(self.step, self.epsilon ** 2 / 8):
            out["step"] = self.step
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Sketch":
        eps = d.get("epsilon")
        step = d.get("step", None if eps is None else eps ** 2 / 8)
        if step is None:
            raise ValueError("sketch record needs 'epsilon' or 'step'")
        return cls(tuple(d["support"]), tuple(d["multipliers"]), float(step), eps)


def reconstruct(z: Sketch, contexts) -> np.ndarray:
    """Weight ``v_t(z; x_<=t)`` where ``t = len(contexts)``.

    Support indices beyond ``t`` are ignored, so the result only depends on
    the prefix.
    """
    X = np.atleast_2d(np.asarray(contexts, dtype=float))
    t = X.shape[0]
    s = np.zeros(X.shape[1])
    for tau, k in zip(z.support, z.multipliers):
        if tau > t:
            break
        s += (k * z.step) * X[tau - 1]
    return project_to_ball(s)


# -- lazy online gradient descent -------------------------------------------

@dataclass(frozen=True)
class LazyOgdState:
    u: np.ndarray
    v: np.ndarray
    beta: float
    update_count: int = 0

    @classmethod
    def start(cls, d: int, beta: float) -> "LazyOgdState":
        if beta <= 0:
            raise ValueError("step size must be positive")
        return cls(np.zeros(d), np.zeros(d), float(beta), 0)


def lazy_ogd_step(state: LazyOgdState, subgradient, tol: float = TOL) -> LazyOgdState:
    g = np.asarray(subgradient, dtype=float)
    if np.linalg.norm(g) > 1.0 + tol:
        raise ValueError("subgradient norm exceeds 1")
    u = state.u - state.beta * g
    return LazyOgdState(u, project_to_ball(u), state.beta, state.update_count + 1)


def _sign(h: float) -> float:
    # The update only fires when |h| > threshold > 0; sign(0) = +1 is never used.
    return 1.0 if h >= 0 else -1.0


@dataclass
class SketchRun:
    """Full record of one constructive-sketch pass."""

    sketch: Sketch
    updates: int
    errors: np.ndarray          # |<v_t, x_t> - <w, x_t>| after the round's updates
    weights: np.ndarray = field(repr=False)  # v_t, shape (T, d)


def online_sketch(w, contexts, epsilon: float) -> SketchRun:
    """Run the constructive sketch of ``w`` along ``contexts``.

    Each round updates ``u <- u - (eps^2/8) sign(h) x_t`` (projected) until the
    price error ``|h| = |<v, x_t> - <w, x_t>|`` is at most ``eps^2 / 2``.
    """
    if not 0.0 < epsilon <= 0.5:
        raise ValueError("epsilon must lie in (0, 1/2]")
    w = np.asarray(w, dtype=float)
    X = np.atleast_2d(np.asarray(contexts, dtype=float))
    T, d = X.shape
    if w.shape != (d,):
        raise ValueError(f"weight has shape {w.shape}, contexts have dimension {d}")
    thr, beta = epsilon ** 2 / 2, epsilon ** 2 / 8
    cap = 10 * math.ceil(16 / epsilon ** 2)
    state = LazyOgdState.start(d, beta)
    counts = np.zeros(T, dtype=np.int64)
    errors = np.empty(T)
    weights = np.empty((T, d))
    for t in range(T):
        x = X[t]
        target = float(w @ x)
        steps = 0
        h = float(state.v @ x) - target
        while abs(h) > thr:
            s = _sign(h)
            state = lazy_ogd_step(state, s * x)
            counts[t] -= int(s)
            steps += 1
            if steps > cap:
                raise SketchDefectError(f"round {t + 1}: update loop exceeded {cap} steps")
            h = float(state.v @ x) - target
        if abs(counts[t]) != steps:
            raise SketchDefectError(f"round {t + 1}: update sign flipped within a round")
        errors[t] = abs(h)
        weights[t] = state.v
    support = tuple(int(t) + 1 for t in np.flatnonzero(counts))
    sketch = Sketch(support, tuple(int(counts[t - 1]) for t in support), beta, epsilon)
    return SketchRun(sketch, state.update_count, errors, weights)


def construct_sketch(w, contexts, epsilon: float) -> Sketch:
    return online_sketch(w, contexts, epsilon).sketch


# -- the finite sketch set --------------------------------------------------

def count_sketch_set(T: int, epsilon: Optional[float] = None,
                     grid: Optional[GridSpec] = None, limit: int = COUNT_LIMIT):
    """``sum_s C(T, s) G**s`` over support sizes ``s <= max_support``; returns
    ``OVERFLOW`` once the running total passes ``limit``."""
    grid = grid or GridSpec.default(epsilon)
    G = grid.size
    total = 0
    for s in range(min(grid.max_support, T) + 1):
        total += math.comb(T, s) * G ** s
        if total > limit:
            return OVERFLOW
    return total


def _supports(T: int, smax: int, prefix=(), start=1) -> Iterator[tuple]:
    yield prefix
    if len(prefix) < smax:
        for i in range(start, T + 1):
            yield from _supports(T, smax, prefix + (i,), i + 1)


def iter_sketch_set(T: int, epsilon: Optional[float] = None,
                    grid: Optional[GridSpec] = None) -> Iterator[Sketch]:
    """Supports in lexicographic order, coefficients in row-major grid order."""
    import itertools

    grid = grid or GridSpec.default(epsilon)
    ks = range(-grid.max_multiplier, grid.max_multiplier + 1)
    for S in _supports(T, grid.max_support):
        for mult in itertools.product(ks, repeat=len(S)):
            yield Sketch(S, mult, grid.step, epsilon)


def enumerate_sketch_set(T: int, epsilon: Optional[float] = None, cap: int = 100_000,
                         grid: Optional[GridSpec] = None) -> list:
    if cap <= 0:
        raise ValueError("cap must be positive")
    n = count_sketch_set(T, epsilon, grid)
    if n is OVERFLOW or n > cap:
        raise CapExceeded(n, cap)
    return list(iter_sketch_set(T, epsilon, grid))


# -- expert sets consumed by the sellers -------------------------------------

class SketchBank:
    """Exact-mode expert set: a fixed list of sketches evaluated online.

    ``advance(x_t)`` returns the ``(K, d)`` matrix of reconstructed weights
    ``v_t(z; x_<=t)`` for every sketch ``z``.
    """

    mode = "exact"

    def __init__(self, sketches: Sequence[Sketch], grid: Optional[GridSpec] = None):
        self.sketches = list(sketches)
        if not self.sketches:
            raise ValueError("expert set is empty")
        self.grid = grid
        by_round: dict = {}
        for k, z in enumerate(self.sketches):
            for tau, c in zip(z.support, z.coefficients):
                by_round.setdefault(tau, ([], []))
                by_round[tau][0].append(k)
                by_round[tau][1].append(c)
        self._by_round = {t: (np.asarray(i), np.asarray(c)) for t, (i, c) in by_round.items()}
        self.reset()

    @property
    def size(self) -> int:
        return len(self.sketches)

    @property
    def grid_overridden(self) -> bool:
        return bool(self.grid and self.grid.overridden)

    def reset(self) -> None:
        self._sums = None
        self._V = None
        self.t = 0

    def clone(self) -> "SketchBank":
        new = copy.copy(self)
        if self._sums is not None:
            new._sums, new._V = self._sums.copy(), self._V.copy()
        return new

    def advance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._sums is None:
            self._sums = np.zeros((self.size, x.size))
            self._V = np.zeros((self.size, x.size))
        self.t += 1
        if self.t in self._by_round:
            idx, coef = self._by_round[self.t]
            np.add.at(self._sums, idx, coef[:, None] * x[None, :])
            # only rows touched this round change their normalization
            rows = np.unique(idx)
            S = self._sums[rows]
            n = np.sqrt(np.einsum("ij,ij->i", S, S))
            self._V[rows] = S / np.maximum(1.0, n)[:, None]
        return self._V.copy()

    def label(self, k: int) -> str:
        z = self.sketches[k]
        return f"z{k}:" + ",".join(f"{t}:{m}" for t, m in zip(z.support, z.multipliers))


class SketchDictionary:
    """Sampled-mode expert set: online sketches of a pool of reference weights.

    Expert ``j`` plays ``v_t(z_j; x_<=t)`` where ``z_j`` is the constructive
    sketch of ``reference[j]``; the sketches are built online alongside the
    run, which yields exactly the same weights because reconstruction only
    reads the prefix.  Regret guarantees tied to the full sketch set do not
    apply in this mode.
    """

    mode = "sampled"
    grid_overridden = False

    def __init__(self, reference_weights, epsilon: float):
        W = np.atleast_2d(np.asarray(reference_weights, dtype=float))
        if np.any(np.linalg.norm(W, axis=1) > 1 + TOL):
            raise ValueError("reference weights must lie in the unit ball")
        if not 0.0 < epsilon <= 0.5:
            raise ValueError("epsilon must lie in (0, 1/2]")
        self.reference = W
        self.epsilon = float(epsilon)
        self._cap = 10 * math.ceil(16 / epsilon ** 2)
        self.reset()

    @property
    def size(self) -> int:
        return self.reference.shape[0]

    def reset(self) -> None:
        K, d = self.reference.shape
        self._u = np.zeros((K, d))
        self._v = np.zeros((K, d))
        self.updates = np.zeros(K, dtype=np.int64)
        self._counts: list = []
        self.t = 0

    def clone(self) -> "SketchDictionary":
        new = copy.copy(self)
        new._u, new._v, new.updates = self._u.copy(), self._v.copy(), self.updates.copy()
        new._counts = list(self._counts)
        return new

    def advance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        thr, beta = self.epsilon ** 2 / 2, self.epsilon ** 2 / 8
        target = self.reference @ x
        h = self._v @ x - target
        counts = np.zeros(self.size, dtype=np.int64)
        active = np.flatnonzero(np.abs(h) > thr)
        steps = 0
        while active.size:
            s = np.where(h[active] >= 0, 1.0, -1.0)
            self._u[active] -= beta * s[:, None] * x[None, :]
            n = np.linalg.norm(self._u[active], axis=1)
            self._v[active] = self._u[active] / np.maximum(1.0, n)[:, None]
            counts[active] -= s.astype(np.int64)
            self.updates[active] += 1
            steps += 1
            if steps > self._cap:
                raise SketchDefectError(f"round {self.t + 1}: dictionary update loop did not terminate")
            h[active] = self._v[active] @ x - target[active]
            active = active[np.abs(h[active]) > thr]
        self.t += 1
        self._counts.append(counts)
        return self._v.copy()

    def sketches(self) -> list:
        """Sketches built so far (prefix of the run)."""
        C = np.asarray(self._counts).reshape(self.t, self.size)
        out = []
        for j in range(self.size):
            nz = np.flatnonzero(C[:, j])
            out.append(Sketch(tuple(nz + 1), tuple(int(c) for c in C[nz, j]),
                              self.epsilon ** 2 / 8, self.epsilon))
        return out

    def label(self, k: int) -> str:
        return f"ref{k}:" + ";".join(f"{c:.6g}" for c in self.reference[k])


def reference_grid(d: int, spacing: float) -> np.ndarray:
    """Cubic grid of spacing ``spacing`` intersected with the unit ball (d <= 3)."""
    if d > 3:
        raise ValueError("reference grids are limited to d <= 3")
    m = int(math.floor(1.0 / spacing + 1e-9))
    axis = np.arange(-m, m + 1) * spacing
    pts = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return pts[np.linalg.norm(pts, axis=1) <= 1.0 + 1e-12]
