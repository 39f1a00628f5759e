"""Trace CSV and summary JSON serialization.

Floats are written with 17 significant digits so doubles round-trip exactly.
"""
from __future__ import annotations

import csv
import io as _io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import RoundTrace

TRACE_COLUMNS = ("round", "buyer_index", "context", "price", "bid", "true_value", "sold",
                 "omega", "xi", "expert_id")


def fmt(x: float) -> str:
    return "%.17g" % float(x)


@dataclass(frozen=True)
class TraceRow:
    round: int
    buyer_index: int
    context: tuple
    price: float
    bid: float
    true_value: float
    sold: bool
    omega: bool
    xi: bool
    expert_id: Optional[int]

    @classmethod
    def from_trace(cls, r: RoundTrace) -> "TraceRow":
        return cls(r.round, r.buyer_index, tuple(float(c) for c in r.context), float(r.price),
                   float(r.bid), float(r.true_value), bool(r.sold), bool(r.coin_omega),
                   bool(r.coin_xi), r.expert_chosen)

    def fields(self) -> list:
        return [str(self.round), str(self.buyer_index), ";".join(fmt(c) for c in self.context),
                fmt(self.price), fmt(self.bid), fmt(self.true_value), str(int(self.sold)),
                str(int(self.omega)), str(int(self.xi)),
                "" if self.expert_id is None else str(self.expert_id)]

    @classmethod
    def parse(cls, rec: dict) -> "TraceRow":
        try:
            return cls(int(rec["round"]), int(rec["buyer_index"]),
                       tuple(float(c) for c in rec["context"].split(";")),
                       float(rec["price"]), float(rec["bid"]), float(rec["true_value"]),
                       _flag(rec["sold"]), _flag(rec["omega"]), _flag(rec["xi"]),
                       int(rec["expert_id"]) if rec["expert_id"] else None)
        except (KeyError, ValueError, AttributeError) as e:
            raise ValueError(f"malformed trace row {rec!r}: {e}") from None


def _flag(s: str) -> bool:
    if s not in ("0", "1"):
        raise ValueError(f"flag must be 0 or 1, got {s!r}")
    return s == "1"


def dumps_trace(rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in rows:
        if isinstance(r, RoundTrace):
            r = TraceRow.from_trace(r)
        w.writerow(r.fields())
    return buf.getvalue()


def loads_trace(text: str) -> list:
    reader = csv.DictReader(_io.StringIO(text))
    if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
        raise ValueError(f"trace header must be {','.join(TRACE_COLUMNS)}")
    rows = [TraceRow.parse(rec) for rec in reader]
    for t, r in enumerate(rows, start=1):
        if r.round != t:
            raise ValueError(f"trace rows out of order at row {t}")
    return rows


def write_trace(path, rows) -> None:
    Path(path).write_text(dumps_trace(rows))


def read_trace(path) -> list:
    return loads_trace(Path(path).read_text())


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, (np.floating, float)):
        return float(o)
    if hasattr(o, "to_dict"):
        return _jsonable(o.to_dict())
    return o


def dumps_json(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def write_json(path, doc) -> None:
    Path(path).write_text(dumps_json(doc))
