"""Labeled child streams derived from one master seed.

Every party draws from its own stream (``environment``, ``seller-omega``,
``seller-lambda``, ``seller-xi``, ``expert-sampling``, ``buyer-<i>``), so a
test can perturb one stream without moving the others.  Streams depend only
on (master seed, replication, label), never on scheduling.
"""
from __future__ import annotations

import zlib

import numpy as np

LABELS = ("environment", "seller-omega", "seller-lambda", "seller-xi", "expert-sampling",
          "expert-pool")


class SeedStreams:
    def __init__(self, master: int, replication: int = 0):
        self.master = int(master)
        self.replication = int(replication)

    def sequence(self, label: str) -> np.random.SeedSequence:
        key = zlib.crc32(label.encode("utf-8"))
        return np.random.SeedSequence(self.master, spawn_key=(self.replication, key))

    def rng(self, label: str) -> np.random.Generator:
        return np.random.default_rng(self.sequence(label))

    def buyer(self, i: int) -> np.random.Generator:
        return self.rng(f"buyer-{i}")

    def describe(self) -> dict:
        return {"master": self.master, "replication": self.replication,
                "derivation": "SeedSequence(master, spawn_key=(replication, crc32(label)))"}
