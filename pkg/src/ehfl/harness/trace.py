"""Trace files: one ``#``-prefixed JSON header line followed by CSV rows."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from ..fl import RoundRecord

TRACE_VERSION = "1"
BASE_COLUMNS = ("t", "n_t", "eta_t", "loss", "grad_norm_sq")


def columns(num_clients: int) -> list:
    return [*BASE_COLUMNS, *(f"E_{i + 1}" for i in range(num_clients)), "drift"]


def _f(x: float) -> str:
    return repr(float(x))


@dataclass
class Trace:
    header: dict
    records: list

    @property
    def T(self) -> int:
        return len(self.records)

    @property
    def label(self) -> str:
        return self.header.get("scheduler", "trace")


def format_trace(records: Sequence[RoundRecord], header: dict) -> str:
    m = len(records[0].energy) if records else int(header.get("num_clients", 0))
    cols = columns(m)
    head = dict(header, version=TRACE_VERSION, columns=cols, rows=len(records))
    buf = io.StringIO()
    buf.write("# " + json.dumps(head, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow([r.t, r.n, _f(r.eta), _f(r.loss), _f(r.grad_norm_sq), *r.energy,
                    "" if r.drift is None else _f(r.drift)])
    return buf.getvalue()


def write_trace(path, records: Sequence[RoundRecord], header: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_trace(records, header))
    return path


def read_trace(path) -> Trace:
    text = Path(path).read_text()
    first, _, body = text.partition("\n")
    if not first.startswith("#"):
        raise ValueError(f"{path}: missing '#' JSON header line")
    header = json.loads(first[1:])
    rows = csv.reader(io.StringIO(body))
    cols = next(rows)
    m = sum(1 for c in cols if c.startswith("E_"))
    records = []
    for row in rows:
        drift: Optional[float] = float(row[-1]) if row[-1] else None
        records.append(RoundRecord(int(row[0]), int(row[1]), float(row[2]), float(row[3]), float(row[4]),
                                   tuple(int(v) for v in row[5:5 + m]), drift))
    return Trace(header, records)
