"""Instance and schedule files.

Both are JSON documents.  Floats are written with ``repr`` precision, so a
save followed by a load reproduces every value bit for bit.

Instance layout::

    {"format": "mcsched-instance", "version": 1,
     "num_sources": 2, "group_sizes": [2, 2],
     "path_loss_exponent": 3.0, "noise_power": 0.1,
     "distances": [[...], [...]]}

Rows of ``distances`` are sources; columns are destinations numbered
source-major, so source ``i`` owns the next ``group_sizes[i]`` columns.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .formulations import KINDS, Schedule
from .network import ConfigError, NetworkInstance

INSTANCE_FORMAT = "mcsched-instance"
SCHEDULE_FORMAT = "mcsched-schedule"
VERSION = 1


class ParseError(ValueError):
    """A file could not be read as an instance or schedule.

    ``line`` and ``column`` locate JSON syntax problems; ``field`` names the
    offending key for structural ones.
    """

    def __init__(self, path, message: str, *, line: int | None = None,
                 column: int | None = None, field: str | None = None):
        where = str(path)
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        if field is not None:
            where += f" [{field}]"
        super().__init__(f"{where}: {message}")
        self.path, self.line, self.column, self.field = str(path), line, column, field


def _read_json(path) -> dict:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.msg, line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError(path, "top level must be an object", line=1)
    return doc


def _field(doc: dict, key: str, path, kind=None):
    if key not in doc:
        raise ParseError(path, "missing field", field=key)
    value = doc[key]
    if kind is not None and (not isinstance(value, kind) or isinstance(value, bool)):
        raise ParseError(path, f"wrong type {type(value).__name__}", field=key)
    return value


def _number(doc: dict, key: str, path) -> float:
    value = _field(doc, key, path, (int, float))
    return float(value)


def _check_header(doc: dict, path, fmt: str) -> None:
    if doc.get("format") != fmt:
        raise ParseError(path, f"expected format {fmt!r}, got {doc.get('format')!r}", field="format")
    if doc.get("version") != VERSION:
        raise ParseError(path, f"unsupported version {doc.get('version')!r}", field="version")


def instance_to_dict(instance: NetworkInstance) -> dict:
    return {
        "format": INSTANCE_FORMAT,
        "version": VERSION,
        "num_sources": instance.num_sources,
        "group_sizes": instance.group_sizes,
        "path_loss_exponent": float(instance.path_loss_exponent),
        "noise_power": float(instance.noise_power),
        "distances": instance.distances.tolist(),
    }


def save_instance(instance: NetworkInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1) + "\n")


def load_instance(path) -> NetworkInstance:
    doc = _read_json(path)
    _check_header(doc, path, INSTANCE_FORMAT)
    n = _field(doc, "num_sources", path, int)
    sizes = _field(doc, "group_sizes", path, list)
    if len(sizes) != n:
        raise ParseError(path, f"{len(sizes)} group sizes for {n} sources", field="group_sizes")
    for k, d in enumerate(sizes):
        if not isinstance(d, int) or isinstance(d, bool) or d < 1:
            raise ParseError(path, f"entry {k} must be a positive integer", field="group_sizes")
    m = sum(sizes)
    rows = _field(doc, "distances", path, list)
    if len(rows) != n:
        raise ParseError(path, f"{len(rows)} rows, expected {n}", field="distances")
    for r, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != m:
            raise ParseError(path, f"row {r} must list {m} distances", field="distances")
        for c, v in enumerate(row):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ParseError(path, f"entry [{r}][{c}] is not a number", field="distances")
            if not (math.isfinite(v) and v > 0):
                raise ParseError(path, f"entry [{r}][{c}] = {v} must be finite and > 0",
                                 field="distances")
    starts = np.concatenate([[0], np.cumsum(sizes)])
    groups = tuple(tuple(range(starts[i], starts[i + 1])) for i in range(n))
    try:
        return NetworkInstance(
            groups=groups,
            distances=np.array(rows, dtype=float),
            path_loss_exponent=_number(doc, "path_loss_exponent", path),
            noise_power=_number(doc, "noise_power", path),
        )
    except ConfigError as exc:
        raise ParseError(path, str(exc)) from None


def schedule_to_dict(schedule: Schedule) -> dict:
    slots = []
    for t in range(schedule.T):
        links = [[i, j] for i, d in enumerate(schedule.group_sizes) for j in range(d)
                 if schedule.activations[t, i, j]]
        slots.append({"links": links, "powers": [float(p) for p in schedule.powers[t]]})
    return {
        "format": SCHEDULE_FORMAT,
        "version": VERSION,
        "kind": schedule.kind,
        "group_sizes": list(schedule.group_sizes),
        "slots": slots,
    }


def save_schedule(schedule: Schedule, path) -> None:
    """One entry per slot: active ``[source, destination position]`` pairs and powers in mW."""
    Path(path).write_text(json.dumps(schedule_to_dict(schedule), indent=1) + "\n")


def load_schedule(path) -> Schedule:
    doc = _read_json(path)
    _check_header(doc, path, SCHEDULE_FORMAT)
    kind = _field(doc, "kind", path, str)
    if kind not in KINDS:
        raise ParseError(path, f"unknown kind {kind!r}", field="kind")
    sizes = _field(doc, "group_sizes", path, list)
    if not sizes or any(not isinstance(d, int) or isinstance(d, bool) or d < 1 for d in sizes):
        raise ParseError(path, "group sizes must be positive integers", field="group_sizes")
    slots = _field(doc, "slots", path, list)
    if not slots:
        raise ParseError(path, "at least one slot is required", field="slots")
    sched = Schedule.empty(len(slots), sizes, kind)
    for t, slot in enumerate(slots):
        where = f"slots[{t}]"
        if not isinstance(slot, dict):
            raise ParseError(path, "slot must be an object", field=where)
        powers = slot.get("powers")
        if not isinstance(powers, list) or len(powers) != len(sizes):
            raise ParseError(path, f"need {len(sizes)} powers", field=f"{where}.powers")
        for i, p in enumerate(powers):
            if not isinstance(p, (int, float)) or isinstance(p, bool) or not math.isfinite(p):
                raise ParseError(path, f"power {i} is not a finite number", field=f"{where}.powers")
            sched.powers[t, i] = float(p)
        links = slot.get("links")
        if not isinstance(links, list):
            raise ParseError(path, "links must be a list", field=f"{where}.links")
        for pair in links:
            ok = (isinstance(pair, list) and len(pair) == 2
                  and all(isinstance(v, int) and not isinstance(v, bool) for v in pair))
            if not ok or not 0 <= pair[0] < len(sizes) or not 0 <= pair[1] < sizes[pair[0]]:
                raise ParseError(path, f"bad link {pair!r}", field=f"{where}.links")
            sched.activations[t, pair[0], pair[1]] = True
    return sched
