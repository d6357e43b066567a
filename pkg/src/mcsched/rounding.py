"""LP-relaxation rounding heuristic for the power-controlled per-link problem.

Solve the relaxation, pick the source whose fractional activations sum
highest, switch on its ``ceil`` (or, failing that, ``floor``) most active
(slot, destination) pairs at the LP's powers, freeze that source, re-solve
over the others and repeat until every source is frozen.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bnb import MilpOptions, MilpProblem, MilpSolution, MilpStatus, relax, solve_milp
from .formulations import POWER, TX, X_LINK, SchedParams, Schedule, VarMap, build_dmc_opt
from .lp import LpProblem, LpSolution, solve_lp
from .network import NetworkInstance

logger = logging.getLogger(__name__)

_INT_SNAP = 1e-6
DEFAULT_PROBE_NODES = 5000


class RoundingError(RuntimeError):
    """The heuristic could not produce a schedule."""

    def __init__(self, message: str, source: int | None = None, limit_hit: bool = False):
        super().__init__(message)
        self.source = source
        # True when a node limit, not a proof of infeasibility, ended the search
        self.limit_hit = limit_hit


class RoundingStateError(RuntimeError):
    pass


@dataclass
class RoundingState:
    varmap: VarMap
    remaining: list[int]
    c_values: dict[int, float]
    fixed_x: np.ndarray  # (T, N, Dmax) bool
    fixed_p: np.ndarray  # (T, N) mW
    fixed_sources: list[int]
    lp: LpSolution

    def link_value(self, t: int, i: int, j: int) -> float:
        return float(self.lp.primal[self.varmap.index(X_LINK, t, i, j)])

    def power_value(self, t: int, i: int) -> float:
        return float(self.lp.primal[self.varmap.index(POWER, t, i)])


@dataclass(frozen=True)
class Fixing:
    source: int
    mode: str
    m: int
    pairs: tuple[tuple[int, int], ...]  # (slot, destination position)
    powers: tuple[float, ...]  # per slot, 0 where the source stays silent

    @property
    def empty(self) -> bool:
        return self.m == 0


@dataclass
class ProbeResult:
    feasible: bool
    solution: LpSolution | None = None
    completion: np.ndarray | None = None


@dataclass
class PassRecord:
    index: int
    source: int
    c_value: float
    mode: str
    m: int
    attempts: list[tuple[str, int, str, bool]] = field(default_factory=list)
    power_mode: str = ""
    lp_objective: float | None = None

    def to_json(self) -> str:
        return json.dumps({
            "pass": self.index,
            "source": self.source,
            "c": self.c_value,
            "mode": self.mode,
            "m": self.m,
            "power_mode": self.power_mode,
            "attempts": [
                {"mode": a, "m": m, "power": p, "feasible": f} for a, m, p, f in self.attempts
            ],
            "lp_objective": self.lp_objective,
        }, sort_keys=True)


def _snap(c: float) -> float:
    r = round(c)
    return float(r) if abs(c - r) <= _INT_SNAP else c


def _c_values(lp: LpSolution, varmap: VarMap, sources) -> dict[int, float]:
    c = {i: 0.0 for i in sources}
    for col, (k, _, i, _) in enumerate(varmap.entries):
        if k == X_LINK and i in c:
            c[i] += float(lp.primal[col])
    return c


def rank_sources(state: RoundingState) -> int:
    """Remaining source with the largest activation mass; smallest id on ties."""
    if not state.remaining:
        raise RoundingStateError("no sources left to rank")
    return min(state.remaining, key=lambda i: (-_snap(state.c_values[i]), i))


def round_source(
    state: RoundingState, i: int, mode: str, params: SchedParams, m: int | None = None
) -> Fixing:
    """Pick the ``m`` most active (slot, destination) pairs of source ``i``.

    ``m`` defaults to ``ceil(c_i)`` or ``floor(c_i)`` according to ``mode``.
    Powers are taken from the current LP, raised to the per-slot minimum
    where the source now transmits.
    """
    if i not in state.remaining:
        raise RoundingStateError(f"source {i} is not awaiting a decision")
    c = _snap(state.c_values[i])
    if m is None:
        if mode == "ceil":
            m = math.ceil(c)
        elif mode == "floor":
            m = math.floor(c)
        else:
            raise ValueError(f"unknown rounding mode {mode!r}")
    D, T = state.varmap.group_sizes[i], state.varmap.T
    m = max(0, min(int(m), D * T))
    pairs = sorted(((t, j) for t in range(T) for j in range(D)),
                   key=lambda tj: (-state.link_value(tj[0], i, tj[1]), tj))[:m]
    slots = {t for t, _ in pairs}
    powers = tuple(
        max(state.power_value(t, i), params.p_slot_min) if t in slots else 0.0
        for t in range(T)
    )
    return Fixing(i, mode, m, tuple(sorted(pairs)), powers)


class _Restricted:
    """Per-link power-controlled problem with some sources frozen to constants."""

    def __init__(self, instance: NetworkInstance, params: SchedParams):
        self.milp, self.varmap = build_dmc_opt(instance, params)
        self.base: LpProblem = relax(self.milp)

    def problem(self, fixed_x: np.ndarray, fixed_p: np.ndarray, fixed_sources,
                free_power: int | None = None) -> LpProblem:
        lo, hi = self.base.lower.copy(), self.base.upper.copy()
        vm = self.varmap
        frozen = set(fixed_sources)
        for col, (k, t, i, j) in enumerate(vm.entries):
            if i not in frozen:
                continue
            if k == X_LINK:
                v = float(fixed_x[t, i, j])
            elif k == TX:
                v = float(fixed_x[t, i].any())
            elif i == free_power:
                continue
            else:
                v = float(fixed_p[t, i])
            lo[col] = hi[col] = v
        return self.base.with_bounds(lo, hi)

    def completion(self, lp: LpProblem, node_limit: int) -> MilpSolution:
        """Any integral point of the restricted problem, by depth-first search."""
        return solve_milp(
            MilpProblem(lp, self.milp.binary_vars),
            MilpOptions(node_selection="depth-first", stop_at_first=True, node_limit=node_limit),
        )


def feasibility_probe(
    instance: NetworkInstance,
    params: SchedParams,
    fixed_x: np.ndarray,
    fixed_p: np.ndarray,
    fixed_sources,
    *,
    free_power: int | None = None,
    exact: bool = True,
    node_limit: int = DEFAULT_PROBE_NODES,
    _restricted: _Restricted | None = None,
    tolerance: float = 1e-7,
    known_point: np.ndarray | None = None,
) -> ProbeResult:
    """Does the problem stay feasible with ``fixed_sources`` frozen?

    Frozen sources contribute their activations and powers as constants;
    every other source keeps its own variables.  ``free_power`` names one
    frozen source whose activations are fixed but whose powers may still be
    chosen.  The relaxation is solved first; with ``exact`` an integral
    completion must also be found (within ``node_limit`` search nodes),
    otherwise LP feasibility alone decides.  A ``known_point`` already
    integral and feasible for the restricted bounds stands in for the search.
    """
    r = _restricted or _Restricted(instance, params)
    lp = r.problem(fixed_x, fixed_p, fixed_sources, free_power)
    sol = solve_lp(lp, tolerance)
    if not sol.optimal:
        return ProbeResult(False, None)
    if not exact:
        return ProbeResult(True, sol)
    if known_point is not None and np.all(known_point >= lp.lower - 1e-9) \
            and np.all(known_point <= lp.upper + 1e-9):
        return ProbeResult(True, sol, known_point)
    found = r.completion(lp, node_limit)
    if found.primal is None:
        return ProbeResult(False, None)
    return ProbeResult(True, sol, found.primal)


def _fixing_from_point(point: np.ndarray, vm: VarMap, i: int) -> Fixing:
    T, D = vm.T, vm.group_sizes[i]
    pairs = tuple((t, j) for t in range(T) for j in range(D)
                  if point[vm.index(X_LINK, t, i, j)] >= 0.5)
    slots = {t for t, _ in pairs}
    powers = tuple(float(point[vm.index(POWER, t, i)]) if t in slots else 0.0 for t in range(T))
    return Fixing(i, "completion", len(pairs), pairs, powers)


def milp_relax_schedule(
    instance: NetworkInstance,
    params: SchedParams,
    trace: Callable[[PassRecord], None] | None = None,
    *,
    exact_probe: bool = True,
    probe_node_limit: int = DEFAULT_PROBE_NODES,
) -> Schedule:
    """Round the LP relaxation into a feasible power-controlled schedule.

    One source is frozen per outer pass, highest activation mass first.  For
    that source the ``ceil`` rounding is tried, then ``floor``, then
    progressively fewer pairs down to the source's total demand, all at the
    LP's powers; then the same list with the source's powers left to the
    probe.  If every candidate fails, the source is frozen as in the integral
    completion found by the previous probe, which is feasible by
    construction.  Raises :class:`RoundingError` when the problem itself is
    infeasible (or no completion is found within the node limit).
    """
    restricted = _Restricted(instance, params)
    vm = restricted.varmap
    N, T = instance.num_sources, params.T
    dmax = max(instance.group_sizes)
    root = solve_lp(restricted.base)
    if not root.optimal:
        raise RoundingError(f"LP relaxation is {root.status.value.lower()}")
    completion = None
    if exact_probe:
        found = restricted.completion(restricted.base, probe_node_limit)
        if found.primal is None:
            if found.status is MilpStatus.INFEASIBLE:
                raise RoundingError("the problem has no integral schedule")
            raise RoundingError("no integral schedule found within the node limit", limit_hit=True)
        completion = found.primal
    demand = params.demand_matrix(instance)
    state = RoundingState(
        varmap=vm,
        remaining=list(range(N)),
        c_values=_c_values(root, vm, range(N)),
        fixed_x=np.zeros((T, N, dmax), dtype=bool),
        fixed_p=np.zeros((T, N)),
        fixed_sources=[],
        lp=root,
    )
    for pass_index in range(N):
        i = rank_sources(state)
        c = state.c_values[i]
        record = PassRecord(pass_index, i, c, "", 0)
        floor_m = math.floor(_snap(c))
        fixings: list[tuple[str, Fixing]] = []
        for mode, m in [("ceil", None), ("floor", None)] + [
            ("reduced", m) for m in range(floor_m - 1, sum(demand[i]) - 1, -1)
        ]:
            fixing = round_source(state, i, "floor" if mode == "reduced" else mode, params, m)
            if fixings and fixing.m == fixings[-1][1].m:
                continue  # c_i integral: ceil and floor coincide
            fixings.append((mode, fixing))
        attempts = [(mode, f, power) for power in ("lp", "free") for mode, f in fixings]
        if completion is not None:
            attempts.append(("completion", _fixing_from_point(completion, vm, i), "lp"))
        previous = completion

        accepted = None
        for mode, fixing, power_mode in attempts:
            trial_x = state.fixed_x.copy()
            trial_p = state.fixed_p.copy()
            for t, j in fixing.pairs:
                trial_x[t, i, j] = True
            trial_p[:, i] = fixing.powers
            probe = feasibility_probe(
                instance, params, trial_x, trial_p, state.fixed_sources + [i],
                free_power=i if power_mode == "free" else None,
                exact=exact_probe, node_limit=probe_node_limit, _restricted=restricted,
                known_point=previous if mode == "completion" else None,
            )
            record.attempts.append((mode, fixing.m, power_mode, probe.feasible))
            if probe.feasible:
                # prefer the integral completion's powers so the next probe's
                # fallback stays inside the frozen bounds
                point = probe.completion if probe.completion is not None else probe.solution.primal
                for t in range(T):
                    trial_p[t, i] = point[vm.index(POWER, t, i)] if trial_x[t, i].any() else 0.0
                accepted = (fixing, trial_x, trial_p, probe)
                break
        if accepted is None:
            if trace is not None:
                trace(record)
            raise RoundingError(f"no feasible rounding for source {i}", source=i,
                                limit_hit=exact_probe)
        fixing, state.fixed_x, state.fixed_p, probe = accepted
        record.mode, record.m, record.power_mode = record.attempts[-1][0], fixing.m, record.attempts[-1][2]
        record.lp_objective = probe.solution.objective_value
        logger.debug("pass %d: source %d c=%.4f mode=%s m=%d", pass_index, i, c, record.mode, fixing.m)
        state.fixed_sources.append(i)
        state.remaining.remove(i)
        state.lp = probe.solution
        state.c_values = _c_values(probe.solution, vm, state.remaining)
        completion = probe.completion
        if trace is not None:
            trace(record)

    return Schedule(state.fixed_x.copy(), state.fixed_p.copy(), list(instance.group_sizes), "dmc-opt")
