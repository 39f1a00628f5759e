"""Experiment configuration: a flat JSON object with typed, validated fields."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields, asdict
from pathlib import Path
from typing import Optional

from .core import DiscountProfile, RoundPartition


class ConfigError(ValueError):
    pass


SELLERS = ("omr", "sum")
ENV_IDS = ("iid", "linear", "tracker", "rotation", "fixed")
BUYER_IDS = ("truthful", "shade", "deceiver")
PARTITIONS = ("single", "round_robin", "blocks")


@dataclass
class ExperimentConfig:
    horizon: int = 100
    dimension: int = 2
    epsilon: float = 0.25
    gamma_bar: float = 0.5
    gammas: Optional[list] = None
    n_buyers: int = 1
    partition: str = "single"
    environment: str = "iid"
    environment_file: Optional[str] = None
    seller: str = "omr"
    buyers: str = "truthful"
    shade_margin: float = 0.1
    deceive_rounds: int = 1
    lowball: float = 0.0
    expert_mode: str = "sampled"
    grid_step: Optional[float] = None
    grid_max_multiplier: Optional[int] = None
    grid_max_support: Optional[int] = None
    expert_cap: int = 100_000
    reference_spacing: float = 0.1
    rho: Optional[float] = None
    opt_resolution: float = 0.01
    replications: int = 1
    seed: int = 0
    out_dir: Optional[str] = None

    # -- validation -----------------------------------------------------------

    def validate(self) -> "ExperimentConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.horizon >= 1, "horizon must be >= 1")
        need(self.dimension >= 1, "dimension must be >= 1")
        need(self.seller in SELLERS, f"seller must be one of {SELLERS}")
        limit = 0.5 if self.seller == "omr" else 0.25
        need(0 < self.epsilon <= limit,
             f"epsilon must lie in (0, {limit}] for seller {self.seller!r}")
        need(0 <= self.gamma_bar < 1, "gamma_bar must lie in [0, 1)")
        need(self.n_buyers >= 1, "n_buyers must be >= 1")
        need(self.n_buyers <= self.horizon, "more buyers than rounds")
        if self.gammas is not None:
            need(len(self.gammas) == self.n_buyers, "gammas needs one entry per buyer")
            need(all(0 <= g <= self.gamma_bar for g in self.gammas), "gammas must lie in [0, gamma_bar]")
        need(self.partition in PARTITIONS, f"partition must be one of {PARTITIONS}")
        need(self.environment in ENV_IDS, f"environment must be one of {ENV_IDS}")
        need((self.environment == "fixed") == (self.environment_file is not None),
             "environment_file is required for (and only for) the fixed environment")
        ids = self.buyer_ids()
        need(len(ids) == self.n_buyers, "buyers needs one strategy per buyer")
        need(all(b in BUYER_IDS for b in ids), f"buyer strategies must be among {BUYER_IDS}")
        need(0 <= self.shade_margin <= 1, "shade_margin must lie in [0, 1]")
        need(0 <= self.lowball <= 1, "lowball must lie in [0, 1]")
        need(self.deceive_rounds >= 0, "deceive_rounds must be >= 0")
        need(self.expert_mode in ("exact", "sampled"), "expert_mode must be exact or sampled")
        grid = (self.grid_step, self.grid_max_multiplier, self.grid_max_support)
        need(all(g is None for g in grid) or all(g is not None for g in grid),
             "grid override needs grid_step, grid_max_multiplier and grid_max_support together")
        need(self.expert_cap >= 1, "expert_cap must be >= 1")
        need(self.reference_spacing > 0, "reference_spacing must be positive")
        need(self.rho is None or 0 <= self.rho <= 1, "rho override must lie in [0, 1]")
        need(self.opt_resolution > 0, "opt_resolution must be positive")
        need(self.replications >= 1, "replications must be >= 1")
        return self

    def buyer_ids(self) -> list:
        ids = [b.strip() for b in self.buyers.split(",")]
        return ids * self.n_buyers if len(ids) == 1 else ids

    # -- derived objects --------------------------------------------------------

    def make_partition(self) -> RoundPartition:
        if self.partition == "single" or self.n_buyers == 1:
            if self.n_buyers != 1:
                raise ConfigError("partition 'single' needs n_buyers = 1")
            return RoundPartition.single(self.horizon)
        if self.partition == "round_robin":
            return RoundPartition.round_robin(self.horizon, self.n_buyers)
        return RoundPartition.blocks(self.horizon, self.n_buyers)

    def make_discount(self) -> DiscountProfile:
        gammas = self.gammas if self.gammas is not None else [self.gamma_bar] * self.n_buyers
        return DiscountProfile(tuple(gammas), self.gamma_bar)

    def digest(self) -> str:
        return hashlib.sha256(emit(self).encode()).hexdigest()[:16]


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name, value):
    t = _TYPES[name]
    if value is None:
        if "Optional" in t:
            return None
        raise ConfigError(f"{name} may not be null")
    try:
        if "int" in t:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if "float" in t:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if "list" in t:
            return [float(v) for v in value]
        if "str" in t:
            if isinstance(value, list):
                return ",".join(str(v) for v in value)
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {value!r}") from None
    return value


def parse(doc) -> ExperimentConfig:
    """Build a validated config from a dict or JSON text; unknown keys are errors."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - set(_TYPES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in doc.items()}).validate()


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    return parse(text)


def emit(cfg: ExperimentConfig) -> str:
    return json.dumps(asdict(cfg), sort_keys=True, indent=2) + "\n"


def normalize(doc) -> str:
    """Canonical text of a config document (defaults filled, types fixed)."""
    return emit(parse(doc))
