"""Independent schedule audit and exhaustive ground truth.

Nothing here touches the LP encoding: schedules are checked against the
physical SINR ratio directly, and the brute-force optimum enumerates
activation patterns and keeps those that pass the audit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .formulations import SchedParams, Schedule
from .network import NetworkInstance

SINR_REL_TOL = 1e-7
MAX_BRUTE_FORCE_BITS = 20
ENUMERABLE_KINDS = ("mc-all-cp", "dmc-opt-cp", "uni-all")


class ScheduleShapeError(ValueError):
    pass


class BruteForceSizeError(ValueError):
    pass


class UnsupportedKindError(ValueError):
    pass


@dataclass(frozen=True)
class VerificationReport:
    sinr_ok: bool
    worst_sinr_margin: float
    budget_ok: tuple[bool, ...]
    demand_ok: tuple[tuple[bool, ...], ...]
    power_bounds_ok: bool
    structure_ok: bool
    throughput: float

    @property
    def ok(self) -> bool:
        return (
            self.sinr_ok
            and self.power_bounds_ok
            and self.structure_ok
            and all(self.budget_ok)
            and all(all(row) for row in self.demand_ok)
        )

    def summary(self) -> dict:
        return {
            "ok": self.ok,
            "sinr_ok": self.sinr_ok,
            "worst_sinr_margin": self.worst_sinr_margin,
            "budget_ok": list(self.budget_ok),
            "demand_ok": [list(r) for r in self.demand_ok],
            "power_bounds_ok": self.power_bounds_ok,
            "structure_ok": self.structure_ok,
            "throughput": self.throughput,
        }


def throughput(schedule: Schedule) -> float:
    """Destination receptions per slot."""
    return int(np.count_nonzero(schedule.activations)) / schedule.T


def verify_schedule(
    instance: NetworkInstance,
    schedule: Schedule,
    params: SchedParams,
    tol: float = SINR_REL_TOL,
) -> VerificationReport:
    """Audit ``schedule`` on the physical model.

    Every active link must see SINR at least ``beta * (1 - tol)`` given all
    concurrent transmitters in its slot.  Sources with no active link must
    be silent.  Demand, budget and per-slot power limits are checked as well.
    """
    T, N = params.T, instance.num_sources
    sizes = instance.group_sizes
    act, pw = schedule.activations, schedule.powers
    if act.ndim != 3 or act.shape[:2] != (T, N) or act.shape[2] < max(sizes):
        raise ScheduleShapeError(f"activations shape {act.shape} does not fit T={T}, N={N}")
    if pw.shape != (T, N):
        raise ScheduleShapeError(f"powers shape {pw.shape}, expected {(T, N)}")
    for i, D in enumerate(sizes):
        if act[:, i, D:].any():
            raise ScheduleShapeError(f"source {i} has activations beyond its {D} destinations")

    g = instance.gains
    beta = params.beta
    worst = math.inf
    for t in range(T):
        rx = pw[t][:, None] * g  # received power at every destination, shape (N, M)
        total = rx.sum(axis=0)
        for i in range(N):
            for j, d in enumerate(instance.groups[i]):
                if act[t, i, j]:
                    s = rx[i, d] / (instance.noise_power + total[d] - rx[i, d])
                    worst = min(worst, s - beta)
    sinr_ok = worst >= -tol * beta

    tx = act.any(axis=2)
    power_ok = bool(np.all(np.isfinite(pw)) and np.all(pw >= 0))
    power_ok &= bool(np.all(pw <= params.p_slot_max * (1 + tol)))
    power_ok &= bool(np.all(pw[~tx] == 0))
    if schedule.kind == "dmc-opt":
        power_ok &= bool(np.all(pw[tx] >= params.p_slot_min * (1 - tol)))

    structure_ok = True
    if schedule.kind in ("mc-all", "mc-all-cp"):
        for i, D in enumerate(sizes):
            rows = act[:, i, :D]
            structure_ok &= bool(np.all(rows == rows[:, :1]))
    if schedule.kind == "uni-all":
        structure_ok &= bool(np.all(act.sum(axis=2) <= 1))

    budget = params.budget
    budget_ok = tuple(bool(pw[:, i].sum() <= budget * (1 + tol)) for i in range(N))
    demand = params.demand_matrix(instance)
    counts = act.sum(axis=0)
    demand_ok = tuple(
        tuple(bool(counts[i, j] >= demand[i][j]) for j in range(sizes[i])) for i in range(N)
    )
    return VerificationReport(
        sinr_ok=bool(sinr_ok),
        worst_sinr_margin=float(worst),
        budget_ok=budget_ok,
        demand_ok=demand_ok,
        power_bounds_ok=power_ok,
        structure_ok=structure_ok,
        throughput=throughput(schedule),
    )


def _bit_layout(instance: NetworkInstance, T: int, kind: str) -> list[tuple[int, int, int]]:
    if kind == "mc-all-cp":
        return [(t, i, -1) for t in range(T) for i in instance.sources]
    return [(t, i, j) for t in range(T) for i in instance.sources
            for j in range(len(instance.groups[i]))]


def _decode_bits(bits, layout, instance, params, kind) -> Schedule:
    sched = Schedule.empty(params.T, instance.group_sizes, kind)
    for b, (t, i, j) in zip(bits, layout):
        if b:
            if j < 0:
                sched.activations[t, i, : len(instance.groups[i])] = True
            else:
                sched.activations[t, i, j] = True
    sched.powers = np.where(sched.transmitting(), params.const_power, 0.0)
    return sched


def brute_force_opt(
    instance: NetworkInstance, params: SchedParams, kind: str
) -> tuple[float, Schedule | None]:
    """Exact optimum of a constant-power formulation by full enumeration.

    Returns ``(best_throughput, witness)``; the witness is the
    lexicographically smallest optimal activation vector (bits ordered by
    slot, source, destination).  ``(-inf, None)`` means no assignment passes
    the audit.
    """
    if kind not in ENUMERABLE_KINDS:
        raise UnsupportedKindError(
            f"brute force supports {ENUMERABLE_KINDS}; {kind!r} has continuous powers"
            if kind in ("dmc-opt", "mc-all") else f"unknown kind {kind!r}"
        )
    params.validate(instance)
    layout = _bit_layout(instance, params.T, kind)
    n = len(layout)
    if n > MAX_BRUTE_FORCE_BITS:
        raise BruteForceSizeError(f"{n} binaries exceeds the limit of {MAX_BRUTE_FORCE_BITS}")

    weights = np.array(
        [len(instance.groups[i]) if j < 0 else 1 for _, i, j in layout], dtype=float
    )
    # rows in lexicographic order: first bit most significant, 0 before 1
    codes = np.arange(2**n, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int8)
    value = bits @ weights
    order = np.argsort(-value, kind="stable")

    # cheap necessary condition before the full audit: per-link slot counts
    demand = params.demand_matrix(instance)
    link_count = np.zeros((bits.shape[0], instance.num_sources, max(instance.group_sizes)), dtype=np.int64)
    for c, (t, i, j) in enumerate(layout):
        if j < 0:
            link_count[:, i, : len(instance.groups[i])] += bits[:, c, None]
        else:
            link_count[:, i, j] += bits[:, c]
    need = np.zeros(link_count.shape[1:], dtype=np.int64)
    for i, row in enumerate(demand):
        need[i, : len(row)] = row
    meets = np.all(link_count >= need[None], axis=(1, 2))

    for idx in order:
        if not meets[idx]:
            continue
        sched = _decode_bits(bits[idx], layout, instance, params, kind)
        if verify_schedule(instance, sched, params).ok:
            return throughput(sched), sched
    return -math.inf, None

