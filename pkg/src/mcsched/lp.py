"""Bounded-variable revised simplex for small dense linear programs.

Problems are stated as maximization with ``<=``, ``>=`` and ``=`` rows and
per-variable bounds.  Internally every row becomes a ``<=`` row (equalities
are split in two), fixed columns are substituted out, rows are equilibrated, and a two-phase primal simplex runs
on an explicit basis inverse with product-form updates and periodic
refactorization.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

LE, GE, EQ = "<=", ">=", "="
_RELATIONS = (LE, GE, EQ)

DEFAULT_TOL = 1e-7
_PIVOT_TOL = 1e-9
_REFACTOR_EVERY = 64


class LpInputError(ValueError):
    """Malformed LP input (bad indices, NaN/inf coefficients, crossed bounds)."""


class LpIterationLimit(RuntimeError):
    pass


class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


Row = tuple[Mapping[int, float], str, float]


@dataclass
class LpProblem:
    """``maximize objective @ x`` subject to ``rows`` and ``lower <= x <= upper``.

    Each row is ``(coefs, relation, rhs)`` with ``coefs`` a sparse mapping from
    column index to coefficient.  Upper bounds may be ``inf``; lower bounds
    must be finite.
    """

    num_vars: int
    objective: np.ndarray
    rows: list[Row]
    lower: np.ndarray
    upper: np.ndarray
    names: list[str] | None = None
    _compiled: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.objective = np.asarray(self.objective, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)

    @classmethod
    def build(
        cls,
        objective: Sequence[float],
        rows: Iterable[Row] = (),
        bounds: Sequence[tuple[float, float]] | None = None,
        names: list[str] | None = None,
    ) -> "LpProblem":
        obj = np.asarray(objective, dtype=float)
        n = obj.size
        if bounds is None:
            lo, hi = np.zeros(n), np.full(n, np.inf)
        else:
            lo = np.array([b[0] for b in bounds], dtype=float)
            hi = np.array([b[1] for b in bounds], dtype=float)
        return cls(n, obj, [(dict(c), r, float(b)) for c, r, b in rows], lo, hi, names)

    def with_bounds(self, lower: np.ndarray, upper: np.ndarray) -> "LpProblem":
        """Same rows and objective, new bounds; shares the compiled matrix."""
        return LpProblem(
            self.num_vars, self.objective, self.rows, lower, upper, self.names,
            self._compiled,
        )

    def validate(self) -> None:
        n = self.num_vars
        if self.objective.shape != (n,):
            raise LpInputError(f"objective has shape {self.objective.shape}, expected ({n},)")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise LpInputError("bounds must have one entry per variable")
        if not np.all(np.isfinite(self.objective)):
            raise LpInputError("objective contains NaN or infinite coefficients")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise LpInputError("bounds contain NaN")
        if not np.all(np.isfinite(self.lower)):
            raise LpInputError("lower bounds must be finite")
        if np.any(self.upper == -np.inf):
            raise LpInputError("upper bound of -inf")
        for r, (coefs, rel, rhs) in enumerate(self.rows):
            if rel not in _RELATIONS:
                raise LpInputError(f"row {r}: unknown relation {rel!r}")
            if not math.isfinite(rhs):
                raise LpInputError(f"row {r}: rhs is not finite")
            for j, a in coefs.items():
                if not 0 <= j < n:
                    raise LpInputError(f"row {r}: column index {j} out of range")
                if not math.isfinite(a):
                    raise LpInputError(f"row {r}: coefficient on column {j} is not finite")

    def dense(self) -> tuple[np.ndarray, list[str], np.ndarray]:
        """Rows as a dense matrix, relation list and rhs vector."""
        A = np.zeros((len(self.rows), self.num_vars))
        for r, (coefs, _, _) in enumerate(self.rows):
            for j, a in coefs.items():
                A[r, j] += a
        rels = [rel for _, rel, _ in self.rows]
        b = np.array([rhs for _, _, rhs in self.rows], dtype=float)
        return A, rels, b


@dataclass
class LpSolution:
    status: LpStatus
    objective_value: float | None
    primal: np.ndarray | None
    duals: np.ndarray | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass(frozen=True)
class ResidualReport:
    max_row_violation: float
    max_bound_violation: float
    objective_value: float

    def feasible(self, tolerance: float = DEFAULT_TOL) -> bool:
        return self.max_row_violation <= tolerance and self.max_bound_violation <= tolerance


def check_solution(problem: LpProblem, primal: Sequence[float], tolerance: float = DEFAULT_TOL) -> ResidualReport:
    """Exact residuals of ``primal`` against the rows and bounds of ``problem``."""
    x = np.asarray(primal, dtype=float)
    if x.shape != (problem.num_vars,):
        raise LpInputError(f"primal has length {x.size}, expected {problem.num_vars}")
    row_viol = 0.0
    for coefs, rel, rhs in problem.rows:
        act = sum(a * x[j] for j, a in coefs.items())
        if rel == LE:
            v = act - rhs
        elif rel == GE:
            v = rhs - act
        else:
            v = abs(act - rhs)
        row_viol = max(row_viol, v)
    bound_viol = 0.0
    if x.size:
        bound_viol = max(0.0, float(np.max(problem.lower - x)), float(np.max(x - problem.upper)))
    return ResidualReport(float(row_viol), bound_viol, float(problem.objective @ x))


def scaled_violation(problem: LpProblem, primal: np.ndarray) -> float:
    """Largest row violation of ``primal``, each row divided by its largest coefficient."""
    comp = _compile(problem)
    if comp.b.size == 0:
        return 0.0
    norms = np.max(np.abs(comp.A), axis=1)
    norms = np.where(norms > 0, norms, 1.0)
    return float(max(0.0, np.max((comp.A @ primal - comp.b) / norms)))


@dataclass
class _Compiled:
    A: np.ndarray  # <= rows, not yet scaled
    b: np.ndarray
    origin: np.ndarray  # original row index of each internal row
    sign: np.ndarray  # +1 if the internal row is the original, -1 if negated


def _compile(problem: LpProblem) -> _Compiled:
    cached = problem._compiled.get("std")
    if cached is not None:
        return cached
    A0, rels, b0 = problem.dense()
    blocks, rhs, origin, sign = [], [], [], []
    for r, rel in enumerate(rels):
        if rel in (LE, EQ):
            blocks.append(A0[r]); rhs.append(b0[r]); origin.append(r); sign.append(1.0)
        if rel in (GE, EQ):
            blocks.append(-A0[r]); rhs.append(-b0[r]); origin.append(r); sign.append(-1.0)
    n = problem.num_vars
    comp = _Compiled(np.array(blocks, dtype=float).reshape(len(blocks), n),
                     np.array(rhs, dtype=float), np.array(origin, dtype=int), np.array(sign))
    problem._compiled["std"] = comp
    return comp


def _presolve(comp: _Compiled, lower: np.ndarray, upper: np.ndarray, tol: float):
    """Substitute fixed columns into the rhs, then equilibrate what is left.

    Big-M rows mix coefficients many orders of magnitude apart; once the
    indicator columns are fixed the remaining rows scale far better, which
    keeps the basis well conditioned during branch-and-bound.  Returns
    ``None`` if a row with no free columns is violated, else
    ``(A, b, rows, cols, scale)``.
    """
    cols = np.flatnonzero(upper > lower)
    fixed = np.flatnonzero(upper <= lower)
    A = comp.A[:, cols]
    b = comp.b - comp.A[:, fixed] @ lower[fixed]
    norms = np.max(np.abs(A), axis=1) if cols.size else np.zeros(len(b))
    empty = norms <= 0
    if np.any(empty):
        full = np.max(np.abs(comp.A[empty]), axis=1)
        full = np.where(full > 0, full, 1.0)
        if np.any(b[empty] / full < -tol):
            return None
    rows = np.flatnonzero(~empty)
    scale = 1.0 / norms[rows]
    return A[rows] * scale[:, None], b[rows] * scale, rows, cols, scale


class _Simplex:
    """Two-phase bounded primal simplex on ``A x + s - art = b``."""

    def __init__(self, A, b, cost, lo, hi, tol, rule, max_iter):
        m, n = A.shape
        self.m, self.n, self.tol, self.rule, self.max_iter = m, n, tol, rule, max_iter
        x0 = lo.copy()
        resid = b - A @ x0
        need_art = np.flatnonzero(resid < 0)
        k = need_art.size
        art = np.zeros((m, k))
        art[need_art, np.arange(k)] = -1.0
        self.M = np.hstack([A, np.eye(m), art])
        self.b = b
        N = n + m + k
        self.N = N
        self.lo = np.concatenate([lo, np.zeros(m + k)])
        self.hi = np.concatenate([hi, np.full(m + k, np.inf)])
        self.cost2 = np.concatenate([cost, np.zeros(m + k)])
        self.cost1 = np.concatenate([np.zeros(n + m), np.ones(k)])
        self.art_start = n + m
        self.x = np.concatenate([x0, np.zeros(m + k)])
        basis = np.arange(n, n + m)
        basis[need_art] = n + m + np.arange(k)
        self.basis = basis
        self.is_basic = np.zeros(N, dtype=bool)
        self.is_basic[basis] = True
        self.at_upper = np.zeros(N, dtype=bool)
        self.x[basis] = np.abs(resid)
        self.Binv = np.eye(m)
        self.Binv[need_art, need_art] = -1.0
        self.iterations = 0

    def refactor(self) -> None:
        B = self.M[:, self.basis]
        self.Binv = np.linalg.inv(B)
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = self.Binv @ (self.b - self.M @ xn)

    def run(self, cost: np.ndarray) -> str:
        tol = self.tol
        fixed = self.hi - self.lo <= 0
        since_refactor = 0
        degenerate_run = 0
        while True:
            if self.iterations >= self.max_iter:
                raise LpIterationLimit(f"simplex exceeded {self.max_iter} iterations")
            if since_refactor >= _REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.M
            movable = ~self.is_basic & ~fixed
            cand = movable & ((~self.at_upper & (d < -tol)) | (self.at_upper & (d > tol)))
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "optimal"
            use_bland = self.rule == "bland" or degenerate_run > 50
            q = int(idx[0]) if use_bland else int(idx[np.argmax(np.abs(d[idx]))])
            direction = -1.0 if self.at_upper[q] else 1.0
            w = self.Binv @ self.M[:, q]
            rate = -direction * w
            xb = self.x[self.basis]
            lob, hib = self.lo[self.basis], self.hi[self.basis]
            ratios = np.full(self.m, np.inf)
            relaxed = np.full(self.m, np.inf)
            dec = rate < -_PIVOT_TOL
            inc = rate > _PIVOT_TOL
            with np.errstate(invalid="ignore", divide="ignore"):
                room_dec = np.maximum(xb[dec] - lob[dec], 0.0)
                room_inc = np.maximum(hib[inc] - xb[inc], 0.0)
                ratios[dec] = room_dec / -rate[dec]
                ratios[inc] = room_inc / rate[inc]
                relaxed[dec] = (room_dec + tol) / -rate[dec]
                relaxed[inc] = (room_inc + tol) / rate[inc]
            # Harris two-pass ratio test: any row whose exact ratio fits under
            # the tolerance-relaxed step may leave; pivot on a large element
            window = float(relaxed.min()) if self.m else np.inf
            flip = self.hi[q] - self.lo[q]
            self.iterations += 1
            since_refactor += 1
            if flip <= window and flip <= float(ratios.min() if self.m else np.inf) + tol:
                if not math.isfinite(flip):
                    return "unbounded"
                self.x[self.basis] = xb + rate * flip
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                self.at_upper[q] = direction > 0
                degenerate_run = 0
                continue
            if not math.isfinite(window):
                return "unbounded"
            ties = np.flatnonzero(ratios <= window)
            big = np.abs(w[ties])
            ties = ties[big >= 1e-3 * big.max()]
            if use_bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(w[ties]))])
            theta = float(ratios[r])
            leaving = int(self.basis[r])
            degenerate_run = degenerate_run + 1 if theta <= tol else 0
            self.x[self.basis] = xb + rate * theta
            self.x[q] += direction * theta
            if rate[r] < 0:
                self.x[leaving] = self.lo[leaving]
                self.at_upper[leaving] = False
            else:
                self.x[leaving] = self.hi[leaving]
                self.at_upper[leaving] = True
            self.basis[r] = q
            self.is_basic[q] = True
            self.is_basic[leaving] = False
            self.at_upper[q] = False
            piv = w[r]
            row = self.Binv[r] / piv
            self.Binv -= np.outer(w, row)
            self.Binv[r] = row

    def solve(self) -> str:
        if self.N > self.art_start:
            outcome = self.run(self.cost1)
            self.refactor()
            if outcome != "optimal":  # phase one is bounded below by zero
                raise LpIterationLimit("phase one did not terminate optimally")
            if np.any(self.x[self.art_start:] > self.tol):
                return "infeasible"
            self.x[self.art_start:] = np.clip(self.x[self.art_start:], 0.0, None)
            self.hi[self.art_start:] = 0.0
        outcome = self.run(self.cost2)
        self.refactor()
        return outcome


def solve_lp(
    problem: LpProblem,
    tolerance: float = DEFAULT_TOL,
    *,
    rule: str = "bland",
    max_iter: int = 50_000,
) -> LpSolution:
    """Maximize ``problem``; see :class:`LpProblem`.

    ``rule`` selects the entering column: ``"bland"`` (smallest index, the
    default) or ``"dantzig"`` (largest reduced cost, falling back to the
    smallest-index rule after a long run of degenerate pivots).  Both are
    deterministic.
    """
    problem.validate()
    if rule not in ("bland", "dantzig"):
        raise ValueError(f"unknown pivot rule {rule!r}")
    if np.any(problem.lower > problem.upper):
        return LpSolution(LpStatus.INFEASIBLE, None, None)
    comp = _compile(problem)
    n = problem.num_vars
    lower, upper = problem.lower, problem.upper
    reduced = _presolve(comp, lower, upper, tolerance)
    if reduced is None:
        return LpSolution(LpStatus.INFEASIBLE, None, None)
    A, b, rows, cols, scale = reduced
    sx = _Simplex(A, b, -problem.objective[cols], lower[cols].copy(),
                  upper[cols].copy(), tolerance, rule, max_iter)
    outcome = sx.solve()
    if outcome == "infeasible":
        return LpSolution(LpStatus.INFEASIBLE, None, None, iterations=sx.iterations)
    if outcome == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, None, None, iterations=sx.iterations)
    x = lower.copy()
    x[cols] = np.clip(sx.x[: cols.size], lower[cols], upper[cols])
    # pi is the multiplier of each internal row for min(-c x); map back to max c x
    pi = sx.cost2[sx.basis] @ sx.Binv if sx.m else np.zeros(0)
    internal = -pi * scale * comp.sign[rows]
    duals = np.zeros(len(problem.rows))
    np.add.at(duals, comp.origin[rows], internal)
    return LpSolution(LpStatus.OPTIMAL, float(problem.objective @ x), x, duals, sx.iterations)


def dual_bound(problem: LpProblem, duals: np.ndarray, zero_tol: float = 1e-9) -> float:
    """Lagrangian upper bound ``b @ y + max_box (c - A^T y) @ x``.

    Valid for any sign-feasible ``duals`` (``>= 0`` on ``<=`` rows, ``<= 0`` on
    ``>=`` rows); equals the optimum when ``duals`` come from an optimal basis.
    """
    A, _, b = problem.dense()
    d = problem.objective - A.T @ duals
    total = float(b @ duals)
    d[np.abs(d) <= zero_tol] = 0.0
    for j in range(problem.num_vars):
        if d[j] > 0:
            total += d[j] * problem.upper[j]
        elif d[j] < 0:
            total += d[j] * problem.lower[j]
    return total


def write_lp(problem: LpProblem, path: str | Path, binary_vars: Iterable[int] = ()) -> None:
    """Dump ``problem`` in the plain-text CPLEX LP layout."""
    names = problem.names or [f"x{j}" for j in range(problem.num_vars)]

    def expr(coefs: Mapping[int, float]) -> str:
        terms = [f"{'+' if a >= 0 else '-'} {abs(a):.17g} {names[j]}" for j, a in sorted(coefs.items()) if a != 0]
        return " ".join(terms) if terms else "0 " + names[0]

    obj = {j: c for j, c in enumerate(problem.objective) if c != 0}
    lines = ["Maximize", f" obj: {expr(obj)}", "Subject To"]
    for r, (coefs, rel, rhs) in enumerate(problem.rows):
        lines.append(f" c{r}: {expr(coefs)} {rel} {rhs:.17g}")
    lines.append("Bounds")
    for j in range(problem.num_vars):
        hi = "+inf" if math.isinf(problem.upper[j]) else f"{problem.upper[j]:.17g}"
        lines.append(f" {problem.lower[j]:.17g} <= {names[j]} <= {hi}")
    binaries = sorted(set(binary_vars))
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(names[j] for j in binaries))
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n")
