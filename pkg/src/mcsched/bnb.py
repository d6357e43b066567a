"""Branch-and-bound for mixed binary linear programs.

Best-bound search proves optimality; depth-first search that stops at the
first integral point serves as a cheap feasibility test.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import DEFAULT_TOL, LpProblem, LpStatus, scaled_violation, solve_lp


class MilpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    # a node or time limit stopped the search; the incumbent may be suboptimal
    LIMIT_HIT = "LimitHit"
    # a limit stopped the search before any integral point was found
    UNKNOWN = "Unknown"


@dataclass
class MilpProblem:
    base: LpProblem
    binary_vars: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        self.binary_vars = frozenset(int(j) for j in self.binary_vars)

    def validate(self) -> None:
        self.base.validate()
        for j in self.binary_vars:
            if not 0 <= j < self.base.num_vars:
                raise ValueError(f"binary index {j} out of range")
            if self.base.lower[j] < 0 or self.base.upper[j] > 1:
                raise ValueError(f"binary variable {j} has bounds outside [0, 1]")


@dataclass
class MilpSolution:
    status: MilpStatus
    objective_value: float | None
    primal: np.ndarray | None
    node_count: int
    root_bound: float | None = None

    @property
    def limit_hit(self) -> bool:
        return self.status in (MilpStatus.LIMIT_HIT, MilpStatus.UNKNOWN)

    @property
    def optimal(self) -> bool:
        return self.status is MilpStatus.OPTIMAL


@dataclass
class MilpOptions:
    integrality_tol: float = 1e-6
    node_limit: int | None = None
    time_limit: float | None = None
    lp_tol: float = DEFAULT_TOL
    pivot_rule: str = "bland"
    # "best-bound" proves optimality; "depth-first" with stop_at_first is a
    # cheap feasibility search
    node_selection: str = "best-bound"
    stop_at_first: bool = False


def relax(problem: MilpProblem) -> LpProblem:
    """The LP relaxation: same rows and objective, integrality dropped.

    Former binaries keep their bounds, which lie within ``[0, 1]``.
    """
    return problem.base.with_bounds(problem.base.lower.copy(), problem.base.upper.copy())


def _objective_step(problem: MilpProblem) -> float | None:
    """Common step of attainable objective values, if one exists.

    When only binaries carry objective weight and all weights are integer
    multiples of the smallest one, every integral objective value lies on that
    grid, which lets a node be pruned once its bound cannot reach the next
    grid point above the incumbent.
    """
    c = problem.base.objective
    nz = np.flatnonzero(c)
    if nz.size == 0 or any(j not in problem.binary_vars for j in nz):
        return None
    step = float(np.min(np.abs(c[nz])))
    ratios = c[nz] / step
    if np.all(np.abs(ratios - np.round(ratios)) <= 1e-9 * np.maximum(1.0, np.abs(ratios))):
        return step
    return None


def solve_milp(problem: MilpProblem, options: MilpOptions | None = None) -> MilpSolution:
    """Maximize a mixed binary program exactly (up to the given limits).

    Nodes are explored best-bound first, oldest first among equal bounds; the
    branching variable is the most fractional binary, smallest index on ties.
    An integral LP point is accepted only after the binaries are fixed to
    their rounded values and the continuous part is re-solved, so incumbents
    never rest on fractional leakage through big-M rows.
    """
    opts = options or MilpOptions()
    problem.validate()
    base = problem.base
    binaries = np.array(sorted(problem.binary_vars), dtype=int)
    step = _objective_step(problem)
    itol = opts.integrality_tol
    start = time.perf_counter()
    counter = itertools.count()

    def lp(lower: np.ndarray, upper: np.ndarray):
        return solve_lp(base.with_bounds(lower, upper), opts.lp_tol, rule=opts.pivot_rule)

    def reachable(bound: float) -> float:
        if step is None:
            return bound
        return step * math.floor(bound / step + 1e-6)

    root = lp(base.lower.copy(), base.upper.copy())
    nodes = 1
    if root.status is LpStatus.INFEASIBLE:
        return MilpSolution(MilpStatus.INFEASIBLE, None, None, nodes)
    if root.status is LpStatus.UNBOUNDED:
        raise ValueError("LP relaxation is unbounded; binary programs here are expected bounded")
    root_bound = root.objective_value

    best_val = -math.inf
    best_x: np.ndarray | None = None
    depth_first = opts.node_selection == "depth-first"
    if opts.node_selection not in ("best-bound", "depth-first"):
        raise ValueError(f"unknown node selection {opts.node_selection!r}")
    heap: list = []
    stack: list = []

    def push(bound, lower, upper, sol):
        if depth_first:
            stack.append((-bound, 0, lower, upper, sol))
        else:
            heapq.heappush(heap, (-bound, next(counter), lower, upper, sol))

    push(root.objective_value, base.lower.copy(), base.upper.copy(), root)
    limit_hit = False

    while heap or stack:
        if opts.stop_at_first and best_x is not None:
            break
        neg_bound, _, lower, upper, sol = stack.pop() if depth_first else heapq.heappop(heap)
        if reachable(-neg_bound) <= best_val + 1e-9:
            continue
        x = sol.primal
        xb = x[binaries]
        dist = np.minimum(xb, 1.0 - xb)
        frac = np.flatnonzero(dist > itol)
        if frac.size == 0:
            lo2, hi2 = lower.copy(), upper.copy()
            rounded = np.round(xb)
            lo2[binaries] = rounded
            hi2[binaries] = rounded
            polished = lp(lo2, hi2)
            if polished.optimal and scaled_violation(base, polished.primal) <= 10 * opts.lp_tol:
                if polished.objective_value > best_val + 1e-12:
                    best_val = polished.objective_value
                    best_x = polished.primal
                continue
            # The relaxed point leaked through a big-M row (within the scaled
            # tolerance the binaries look integral but their rounding is not
            # feasible).  Branch on the least integral binary that is still
            # free; with none left the node really is infeasible.
            free = (upper[binaries] - lower[binaries]) > 0
            if not free.any():
                continue
            dev = np.where(free, np.abs(xb - rounded), -1.0)
            k = int(np.argmax(dev))
        else:
            k = int(frac[np.argmax(dist[frac])])
        var = int(binaries[k])
        values = (0.0, 1.0)
        if depth_first and x[var] < 0.5:
            values = (1.0, 0.0)  # the child pushed last is explored first
        for value in values:
            if opts.node_limit is not None and nodes >= opts.node_limit:
                limit_hit = True
                break
            if opts.time_limit is not None and time.perf_counter() - start > opts.time_limit:
                limit_hit = True
                break
            lo_c, hi_c = lower.copy(), upper.copy()
            lo_c[var] = hi_c[var] = value
            child = lp(lo_c, hi_c)
            nodes += 1
            if child.optimal and reachable(child.objective_value) > best_val + 1e-9:
                push(child.objective_value, lo_c, hi_c, child)
        if limit_hit:
            break

    if opts.stop_at_first and best_x is not None and (heap or stack):
        return MilpSolution(MilpStatus.LIMIT_HIT, best_val, best_x, nodes, root_bound)
    if limit_hit:
        if best_x is None:
            return MilpSolution(MilpStatus.UNKNOWN, None, None, nodes, root_bound)
        return MilpSolution(MilpStatus.LIMIT_HIT, best_val, best_x, nodes, root_bound)
    if best_x is None:
        return MilpSolution(MilpStatus.INFEASIBLE, None, None, nodes, root_bound)
    return MilpSolution(MilpStatus.OPTIMAL, best_val, best_x, nodes, root_bound)
