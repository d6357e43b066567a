"""Compile multicast scheduling problems into mixed binary programs.

Five formulations are provided:

``mc-all``      whole-group activation with per-slot power control
``dmc-opt``     per-link activation with per-slot power control
``dmc-opt-cp``  per-link activation at a constant transmit power
``mc-all-cp``   whole-group activation at a constant transmit power
``uni-all``     ``dmc-opt-cp`` serving at most one destination per slot

SINR requirements are linearized with a big-M term that switches the
constraint off when the corresponding activation variable is zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .bnb import MilpProblem, MilpSolution
from .lp import GE, LE, LpProblem, LpSolution
from .network import NetworkInstance

KINDS = ("mc-all", "dmc-opt", "dmc-opt-cp", "mc-all-cp", "uni-all")
GROUP_KINDS = ("mc-all", "mc-all-cp")

X_GROUP, X_LINK, POWER, TX = "x_group", "x_link", "power", "tx"


class BuildError(ValueError):
    pass


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class SchedParams:
    """Scheduling parameters.  Powers in mW; ``beta`` is linear, not dB.

    ``demand`` is either one integer applied to every link or a per-source
    list of per-destination counts.  ``p_budget`` defaults to
    ``T * p_slot_max``, which never binds.
    """

    T: int
    beta: float = 10.0
    demand: Union[int, Sequence[Sequence[int]]] = 1
    p_slot_max: float = 300.0
    p_slot_min: float = 3.0
    p_budget: float | None = None
    const_power: float = 90.0
    delta: Union[float, str] = "auto"

    @property
    def budget(self) -> float:
        return self.T * self.p_slot_max if self.p_budget is None else float(self.p_budget)

    def demand_matrix(self, instance: NetworkInstance) -> list[list[int]]:
        if isinstance(self.demand, (int, np.integer)):
            return [[int(self.demand)] * len(g) for g in instance.groups]
        dem = [[int(b) for b in row] for row in self.demand]
        if [len(r) for r in dem] != instance.group_sizes:
            raise BuildError("demand matrix does not match the group sizes")
        return dem

    def group_demand(self, instance: NetworkInstance) -> list[int]:
        # a whole-group activation must satisfy the most demanding link
        return [max(row) for row in self.demand_matrix(instance)]

    def validate(self, instance: NetworkInstance | None = None) -> None:
        if self.T < 1:
            raise BuildError(f"T must be >= 1, got {self.T}")
        if not self.beta > 0:
            raise BuildError(f"beta must be > 0, got {self.beta}")
        if not 0 < self.p_slot_min < self.p_slot_max:
            raise BuildError(
                f"need 0 < p_slot_min < p_slot_max, got {self.p_slot_min}, {self.p_slot_max}"
            )
        if not self.budget > 0:
            raise BuildError(f"p_budget must be > 0, got {self.budget}")
        if not 0 < self.const_power <= self.p_slot_max:
            raise BuildError(f"const_power must lie in (0, p_slot_max], got {self.const_power}")
        if self.delta != "auto" and not (isinstance(self.delta, (int, float)) and self.delta > 0):
            raise BuildError(f"delta must be 'auto' or a positive number, got {self.delta!r}")
        if instance is not None:
            for row in self.demand_matrix(instance):
                for b in row:
                    if not 0 <= b <= self.T:
                        raise BuildError(f"demand {b} outside [0, T={self.T}]")


@dataclass
class VarMap:
    """Column index <-> semantic variable ``(kind, slot, source, dest_pos)``.

    ``dest_pos`` is the position within the source's group for link
    variables and ``-1`` otherwise.
    """

    kind: str
    T: int
    group_sizes: list[int]
    entries: list[tuple[str, int, int, int]] = field(default_factory=list)
    _index: dict = field(default_factory=dict, repr=False)

    def add(self, var_kind: str, t: int, i: int, j: int = -1) -> int:
        key = (var_kind, t, i, j)
        if key in self._index:
            raise BuildError(f"duplicate variable {key}")
        self._index[key] = len(self.entries)
        self.entries.append(key)
        return self._index[key]

    def index(self, var_kind: str, t: int, i: int, j: int = -1) -> int:
        return self._index[(var_kind, t, i, j)]

    def get(self, var_kind: str, t: int, i: int, j: int = -1) -> int | None:
        return self._index.get((var_kind, t, i, j))

    def __len__(self) -> int:
        return len(self.entries)

    def columns(self, var_kind: str) -> list[int]:
        return [c for c, e in enumerate(self.entries) if e[0] == var_kind]

    @property
    def num_sources(self) -> int:
        return len(self.group_sizes)

    def name(self, col: int) -> str:
        k, t, i, j = self.entries[col]
        tag = {X_GROUP: "x", X_LINK: "x", POWER: "P", TX: "z"}[k]
        return f"{tag}_{t}_{i}" + (f"_{j}" if j >= 0 else "")


@dataclass
class Schedule:
    """Decoded schedule.

    ``activations[t, i, j]`` is True when source ``i`` delivers to the
    ``j``-th destination of its group in slot ``t`` (positions beyond the
    group size are always False); ``powers[t, i]`` is in mW.
    """

    activations: np.ndarray
    powers: np.ndarray
    group_sizes: list[int]
    kind: str = "dmc-opt"

    def __post_init__(self) -> None:
        self.activations = np.asarray(self.activations, dtype=bool)
        self.powers = np.asarray(self.powers, dtype=float)

    @property
    def T(self) -> int:
        return self.activations.shape[0]

    @classmethod
    def empty(cls, T: int, group_sizes: Sequence[int], kind: str = "dmc-opt") -> "Schedule":
        n = len(group_sizes)
        dmax = max(group_sizes) if group_sizes else 0
        return cls(np.zeros((T, n, dmax), dtype=bool), np.zeros((T, n)), list(group_sizes), kind)

    def transmitting(self) -> np.ndarray:
        """``(T, N)`` mask of sources with at least one active link."""
        return self.activations.any(axis=2)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Schedule):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.group_sizes == other.group_sizes
            and np.array_equal(self.activations, other.activations)
            and np.array_equal(self.powers, other.powers)
        )


def big_m(instance: NetworkInstance, params: SchedParams) -> float:
    """Big-M constant that deactivates an SINR row when its indicator is zero.

    ``beta * (sigma^2 + sum_k p_max * max_j gain[k, j]) + p_max * max gain``
    exceeds ``beta`` times the largest possible noise-plus-interference, so
    the row holds for every power vector within bounds.
    """
    if params.delta != "auto":
        return float(params.delta)
    g = instance.gains
    p = params.p_slot_max
    worst = instance.noise_power + p * float(g.max(axis=1).sum())
    return params.beta * worst + p * float(g.max())


class _Model:
    def __init__(self, kind: str, instance: NetworkInstance, params: SchedParams):
        self.vm = VarMap(kind, params.T, instance.group_sizes)
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.obj: list[float] = []
        self.rows: list = []
        self.binaries: list[int] = []

    def var(self, var_kind, t, i, j=-1, lo=0.0, hi=1.0, obj=0.0, binary=False) -> int:
        col = self.vm.add(var_kind, t, i, j)
        self.lower.append(lo)
        self.upper.append(hi)
        self.obj.append(obj)
        if binary:
            self.binaries.append(col)
        return col

    def row(self, coefs: dict, rel: str, rhs: float) -> None:
        self.rows.append((coefs, rel, float(rhs)))

    def finish(self) -> tuple[MilpProblem, VarMap]:
        names = [self.vm.name(c) for c in range(len(self.vm))]
        lp = LpProblem(len(self.vm), np.array(self.obj), self.rows,
                       np.array(self.lower), np.array(self.upper), names)
        return MilpProblem(lp, frozenset(self.binaries)), self.vm


def _prepare(instance: NetworkInstance, params: SchedParams):
    params.validate(instance)
    return params.demand_matrix(instance), big_m(instance, params)


def build_mc_all(instance: NetworkInstance, params: SchedParams) -> tuple[MilpProblem, VarMap]:
    """Whole-group activation with power control."""
    _, delta = _prepare(instance, params)
    demand = params.group_demand(instance)
    T, N, g = params.T, instance.num_sources, instance.gains
    beta, sigma2, pmax = params.beta, instance.noise_power, params.p_slot_max
    m = _Model("mc-all", instance, params)
    x = {(t, i): m.var(X_GROUP, t, i, obj=len(instance.groups[i]) / T, binary=True)
         for t in range(T) for i in range(N)}
    p = {(t, i): m.var(POWER, t, i, hi=pmax) for t in range(T) for i in range(N)}
    for t in range(T):
        for i in range(N):
            for d in instance.groups[i]:
                coefs = {p[t, k]: -beta * g[k, d] for k in range(N) if k != i}
                coefs[p[t, i]] = g[i, d]
                coefs[x[t, i]] = -delta
                m.row(coefs, GE, beta * sigma2 - delta)
    for i in range(N):
        m.row({x[t, i]: 1.0 for t in range(T)}, GE, demand[i])
    for i in range(N):
        m.row({p[t, i]: 1.0 for t in range(T)}, LE, params.budget)
    for t in range(T):
        for i in range(N):
            m.row({p[t, i]: 1.0, x[t, i]: -pmax}, LE, 0.0)
    return m.finish()


def _link_vars(m: _Model, instance: NetworkInstance, T: int):
    x = {(t, i, j): m.var(X_LINK, t, i, j, obj=1.0 / T, binary=True)
         for t in range(T) for i in instance.sources for j in range(len(instance.groups[i]))}
    z = {(t, i): m.var(TX, t, i, binary=True) for t in range(T) for i in instance.sources}
    return x, z


def _link_rows(m: _Model, instance, params, demand, x, z) -> None:
    """Rows shared by the per-link formulations, apart from SINR and power."""
    T = params.T
    for t in range(T):
        for i in instance.sources:
            D = len(instance.groups[i])
            m.row({x[t, i, j]: 1.0 for j in range(D)}, LE, D)
    for i in instance.sources:
        for j in range(len(instance.groups[i])):
            m.row({x[t, i, j]: 1.0 for t in range(T)}, GE, demand[i][j])
    for t in range(T):
        for i in instance.sources:
            D = len(instance.groups[i])
            for j in range(D):
                m.row({x[t, i, j]: 1.0, z[t, i]: -1.0}, LE, 0.0)
            coefs = {x[t, i, j]: -1.0 for j in range(D)}
            coefs[z[t, i]] = 1.0
            m.row(coefs, LE, 0.0)


def build_dmc_opt(instance: NetworkInstance, params: SchedParams) -> tuple[MilpProblem, VarMap]:
    """Per-link activation with per-slot power control.

    A transmitter indicator ``z[t, i]`` carries the minimum-power floor:
    ``p_min * z <= P <= p_max * z`` and ``x[t, i, j] <= z[t, i]``.
    """
    demand, delta = _prepare(instance, params)
    T, N, g = params.T, instance.num_sources, instance.gains
    beta, sigma2 = params.beta, instance.noise_power
    m = _Model("dmc-opt", instance, params)
    x, z = _link_vars(m, instance, T)
    p = {(t, i): m.var(POWER, t, i, hi=params.p_slot_max) for t in range(T) for i in range(N)}
    for t in range(T):
        for i in range(N):
            for j, d in enumerate(instance.groups[i]):
                coefs = {p[t, k]: -beta * g[k, d] for k in range(N) if k != i}
                coefs[p[t, i]] = g[i, d]
                coefs[x[t, i, j]] = -delta
                m.row(coefs, GE, beta * sigma2 - delta)
    _link_rows(m, instance, params, demand, x, z)
    for i in range(N):
        m.row({p[t, i]: 1.0 for t in range(T)}, LE, params.budget)
    for t in range(T):
        for i in range(N):
            m.row({p[t, i]: 1.0, z[t, i]: -params.p_slot_min}, GE, 0.0)
            m.row({p[t, i]: 1.0, z[t, i]: -params.p_slot_max}, LE, 0.0)
    return m.finish()


def _cp_link_model(kind: str, instance: NetworkInstance, params: SchedParams) -> _Model:
    demand, delta = _prepare(instance, params)
    T, N, g = params.T, instance.num_sources, instance.gains
    beta, sigma2, P = params.beta, instance.noise_power, params.const_power
    m = _Model(kind, instance, params)
    x, z = _link_vars(m, instance, T)
    for t in range(T):
        for i in range(N):
            for j, d in enumerate(instance.groups[i]):
                coefs = {z[t, k]: -beta * P * g[k, d] for k in range(N) if k != i}
                coefs[x[t, i, j]] = -delta
                m.row(coefs, GE, beta * sigma2 - P * g[i, d] - delta)
    _link_rows(m, instance, params, demand, x, z)
    for i in range(N):
        m.row({z[t, i]: P for t in range(T)}, LE, params.budget)
    m.x, m.z = x, z  # type: ignore[attr-defined]
    return m


def build_dmc_opt_cp(instance: NetworkInstance, params: SchedParams) -> tuple[MilpProblem, VarMap]:
    """Per-link activation, every transmitter at ``const_power``."""
    return _cp_link_model("dmc-opt-cp", instance, params).finish()


def build_uni_all(instance: NetworkInstance, params: SchedParams) -> tuple[MilpProblem, VarMap]:
    """Unicast baseline: at most one destination per source and slot."""
    m = _cp_link_model("uni-all", instance, params)
    for t in range(params.T):
        for i in instance.sources:
            m.row({m.x[t, i, j]: 1.0 for j in range(len(instance.groups[i]))}, LE, 1.0)  # type: ignore[attr-defined]
    return m.finish()


def build_mc_all_cp(instance: NetworkInstance, params: SchedParams) -> tuple[MilpProblem, VarMap]:
    """Whole-group activation at ``const_power``."""
    _, delta = _prepare(instance, params)
    demand = params.group_demand(instance)
    T, N, g = params.T, instance.num_sources, instance.gains
    beta, sigma2, P = params.beta, instance.noise_power, params.const_power
    m = _Model("mc-all-cp", instance, params)
    x = {(t, i): m.var(X_GROUP, t, i, obj=len(instance.groups[i]) / T, binary=True)
         for t in range(T) for i in range(N)}
    for t in range(T):
        for i in range(N):
            for d in instance.groups[i]:
                coefs = {x[t, k]: -beta * P * g[k, d] for k in range(N) if k != i}
                coefs[x[t, i]] = -delta
                m.row(coefs, GE, beta * sigma2 - P * g[i, d] - delta)
    for i in range(N):
        m.row({x[t, i]: 1.0 for t in range(T)}, GE, demand[i])
    for i in range(N):
        m.row({x[t, i]: P for t in range(T)}, LE, params.budget)
    return m.finish()


BUILDERS = {
    "mc-all": build_mc_all,
    "dmc-opt": build_dmc_opt,
    "dmc-opt-cp": build_dmc_opt_cp,
    "mc-all-cp": build_mc_all_cp,
    "uni-all": build_uni_all,
}


def build(kind: str, instance: NetworkInstance, params: SchedParams) -> tuple[MilpProblem, VarMap]:
    try:
        builder = BUILDERS[kind]
    except KeyError:
        raise BuildError(f"unknown formulation {kind!r}; expected one of {KINDS}") from None
    return builder(instance, params)


def extract_schedule(
    varmap: VarMap,
    solution: MilpSolution | LpSolution,
    params: SchedParams,
    integrality_tol: float = 1e-6,
) -> Schedule:
    """Decode a solver primal into a :class:`Schedule`.

    MILP solutions must be integral on every binary column.  LP solutions are
    rounded to the nearest integer instead.  Constant-power formulations get
    ``const_power`` on every transmitting source.
    """
    x = solution.primal
    if x is None:
        raise DecodeError(f"solution has no primal (status {solution.status.value})")
    x = np.asarray(x, dtype=float)
    if x.shape != (len(varmap),):
        raise DecodeError(f"primal length {x.size} does not match {len(varmap)} columns")
    strict = isinstance(solution, MilpSolution)
    sched = Schedule.empty(varmap.T, varmap.group_sizes, varmap.kind)
    tx = np.zeros((varmap.T, varmap.num_sources), dtype=bool)
    has_power = False

    def binary(col: int) -> bool:
        v = x[col]
        if strict and min(abs(v), abs(1.0 - v)) > integrality_tol:
            raise DecodeError(f"column {varmap.name(col)} is fractional: {v}")
        return bool(v >= 0.5)

    for col, (k, t, i, j) in enumerate(varmap.entries):
        if k == X_LINK:
            sched.activations[t, i, j] = binary(col)
        elif k == X_GROUP:
            on = binary(col)
            sched.activations[t, i, : varmap.group_sizes[i]] = on
            tx[t, i] = on
        elif k == TX:
            tx[t, i] = binary(col)
        elif k == POWER:
            has_power = True
            sched.powers[t, i] = max(0.0, float(x[col]))
    if not has_power:
        sched.powers = np.where(tx, params.const_power, 0.0)
    else:
        # P <= p_max * z pins a silent transmitter at zero; anything left is roundoff
        sched.powers[~tx] = 0.0
    return sched


def encode_schedule(varmap: VarMap, schedule: Schedule) -> np.ndarray:
    """Binary sub-vector (in column order) that a schedule corresponds to."""
    out = []
    for k, t, i, j in varmap.entries:
        if k == X_LINK:
            out.append(float(schedule.activations[t, i, j]))
        elif k == X_GROUP:
            out.append(float(schedule.activations[t, i, 0]))
        elif k == TX:
            out.append(float(schedule.activations[t, i].any()))
    return np.array(out)
