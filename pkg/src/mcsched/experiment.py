"""Monte-Carlo sweeps over source counts, schemes and seeds.

Every (N, trial) pair draws one instance that all schemes share, so scheme
comparisons are paired.  Records come back in a canonical order no matter
how the work was scheduled, and a failing solve becomes a flagged record
rather than an exception.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

from .bnb import MilpOptions, MilpStatus, solve_milp
from .formulations import SchedParams, Schedule, build, extract_schedule
from .network import InstanceConfig, NetworkInstance, generate_instance
from .rounding import RoundingError, milp_relax_schedule
from .verify import verify_schedule

logger = logging.getLogger(__name__)

# scheme name -> formulation kind; the heuristic runs on the power-controlled model
SCHEMES = {
    "dmc-opt": "dmc-opt-cp",
    "dmc-all": "mc-all-cp",
    "uni-all": "uni-all",
    "dmc-opt-milp": "dmc-opt",
    "dmc-opt-heuristic": "dmc-opt",
}
STATUSES = ("optimal", "heuristic", "infeasible", "limit-hit", "error")
CSV_HEADER = ["scheme", "N", "D", "T", "B", "seed", "throughput", "status", "seconds"]
AGG_HEADER = ["scheme", "N", "trials", "mean_throughput", "infeasible", "limit_hit", "error"]

_SEED_MASK = (1 << 64) - 1


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep.  Power levels in mW, ``beta`` linear (10 dB)."""

    sources: tuple[int, ...] = (2, 4, 6, 8, 10)
    group_size: int = 2
    T: int = 8
    B: int = 8
    schemes: tuple[str, ...] = ("dmc-opt", "dmc-all", "uni-all")
    trials: int = 30
    base_seed: int = 1
    beta: float = 10.0
    p_slot_max: float = 300.0
    p_slot_min: float = 3.0
    const_power: float = 90.0
    path_loss_exponent: float = 3.0
    noise_power: float = 0.1
    distance_range: tuple[float, float] = (0.05, 1.0)
    # caps for the exact searches; hitting one is reported, never hidden
    node_limit: int | None = 20_000
    time_limit: float | None = 120.0
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "sources", tuple(int(n) for n in self.sources))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "distance_range", tuple(float(v) for v in self.distance_range))

    def validate(self) -> None:
        if self.trials < 1:
            raise ExperimentError(f"trials must be >= 1, got {self.trials}")
        if not self.schemes:
            raise ExperimentError("at least one scheme is required")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ExperimentError(f"unknown schemes {unknown}; choose from {sorted(SCHEMES)}")
        if not self.sources or any(n < 1 for n in self.sources):
            raise ExperimentError("source counts must be positive")
        if self.workers < 1:
            raise ExperimentError("workers must be >= 1")
        if not 0 <= self.B <= self.T:
            raise ExperimentError(f"need 0 <= B <= T, got B={self.B}, T={self.T}")
        self.params().validate()
        self.instance_config(self.sources[0], 0).validate()

    def params(self) -> SchedParams:
        return SchedParams(
            T=self.T, beta=self.beta, demand=self.B, p_slot_max=self.p_slot_max,
            p_slot_min=self.p_slot_min, const_power=self.const_power,
        )

    def instance_config(self, n: int, seed: int) -> InstanceConfig:
        return InstanceConfig(
            num_sources=n, group_size=self.group_size,
            path_loss_exponent=self.path_loss_exponent, noise_power=self.noise_power,
            distance_range=self.distance_range, seed=seed,
        )


@dataclass(frozen=True)
class ResultRecord:
    scheme: str
    N: int
    D: int
    T: int
    B: int
    seed: int
    throughput: float
    status: str
    seconds: float | None = None

    def sort_key(self):
        return (self.scheme, self.N, self.seed)


def trial_seed(base_seed: int, n: int, trial: int) -> int:
    """``base_seed`` XOR a stable 64-bit hash of ``(n, trial)``."""
    digest = hashlib.blake2b(f"{n}:{trial}".encode(), digest_size=8).digest()
    return (int(base_seed) ^ int.from_bytes(digest, "big")) & _SEED_MASK


def solve_scheme(
    scheme: str, instance: NetworkInstance, params: SchedParams,
    options: MilpOptions | None = None,
) -> tuple[str, float, Schedule | None]:
    """Solve one scheme on one instance and audit the result.

    Returns ``(status, throughput, schedule)``; infeasible outcomes carry
    zero throughput and no schedule.
    """
    if scheme == "dmc-opt-heuristic":
        try:
            sched = milp_relax_schedule(instance, params)
        except RoundingError as exc:
            return ("limit-hit" if exc.limit_hit else "infeasible"), 0.0, None
        status = "heuristic"
    else:
        milp, varmap = build(SCHEMES[scheme], instance, params)
        sol = solve_milp(milp, options)
        if sol.status is MilpStatus.INFEASIBLE:
            return "infeasible", 0.0, None
        if sol.primal is None:
            return "limit-hit", 0.0, None
        sched = extract_schedule(varmap, sol, params)
        status = "optimal" if sol.optimal else "limit-hit"
    report = verify_schedule(instance, sched, params)
    if not report.ok:
        logger.error("%s schedule failed verification: %s", scheme, report.summary())
        return "error", 0.0, sched
    return status, report.throughput, sched


def _run_trial(config: ExperimentConfig, n: int, trial: int, timing: bool) -> list[ResultRecord]:
    seed = trial_seed(config.base_seed, n, trial)
    instance = generate_instance(config.instance_config(n, seed))
    params = config.params()
    options = MilpOptions(node_limit=config.node_limit, time_limit=config.time_limit)
    out = []
    for scheme in config.schemes:
        start = time.perf_counter()
        try:
            status, value, _ = solve_scheme(scheme, instance, params, options)
        except Exception:  # one bad record must not sink the sweep
            logger.exception("scheme %s failed on N=%d seed=%d", scheme, n, seed)
            status, value = "error", 0.0
        elapsed = time.perf_counter() - start if timing else None
        out.append(ResultRecord(scheme, n, config.group_size, config.T, config.B, seed,
                                float(value), status, elapsed))
    return out


def run_experiment(config: ExperimentConfig, *, timing: bool = True) -> list[ResultRecord]:
    """All (N, trial, scheme) records, sorted by scheme, N and seed.

    With ``timing=False`` the ``seconds`` field is left empty so that two
    runs of the same configuration produce identical output.
    """
    config.validate()
    jobs = [(n, trial) for n in config.sources for trial in range(config.trials)]
    records: list[ResultRecord] = []
    if config.workers == 1:
        for n, trial in jobs:
            records.extend(_run_trial(config, n, trial, timing))
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_run_trial, config, n, trial, timing) for n, trial in jobs]
            for fut in futures:
                records.extend(fut.result())
    return sorted(records, key=ResultRecord.sort_key)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def aggregate(records: Iterable[ResultRecord]) -> list[dict]:
    """Mean throughput per (scheme, N); infeasible records count as zero."""
    groups: dict[tuple[str, int], list[ResultRecord]] = {}
    for rec in records:
        groups.setdefault((rec.scheme, rec.N), []).append(rec)
    rows = []
    for (scheme, n), recs in sorted(groups.items()):
        # fixed summation order keeps the mean independent of record order
        values = sorted(r.throughput for r in recs)
        rows.append({
            "scheme": scheme,
            "N": n,
            "trials": len(recs),
            "mean_throughput": math.fsum(values) / len(values),
            "infeasible": sum(r.status == "infeasible" for r in recs),
            "limit_hit": sum(r.status == "limit-hit" for r in recs),
            "error": sum(r.status == "error" for r in recs),
        })
    return rows


def aggregate_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + "_mean" + (p.suffix or ".csv"))


def emit_csv(records: Sequence[ResultRecord], path) -> Path:
    """Write the records and a ``*_mean.csv`` companion; returns the companion's path."""
    if not records:
        raise ExperimentError("no records to write")
    path = Path(path)
    records = sorted(records, key=ResultRecord.sort_key)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rec in records:
            w.writerow([_fmt(getattr(rec, k)) for k in CSV_HEADER])
    agg = aggregate_path(path)
    with agg.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_HEADER)
        for row in aggregate(records):
            w.writerow([_fmt(row[k]) for k in AGG_HEADER])
    return agg


def read_csv(path) -> list[ResultRecord]:
    """Parse a file written by :func:`emit_csv` back into records."""
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ExperimentError(f"unexpected header {reader.fieldnames}")
        for row in reader:
            out.append(ResultRecord(
                scheme=row["scheme"], N=int(row["N"]), D=int(row["D"]), T=int(row["T"]),
                B=int(row["B"]), seed=int(row["seed"]), throughput=float(row["throughput"]),
                status=row["status"],
                seconds=float(row["seconds"]) if row["seconds"] else None,
            ))
    return out


def paired_violations(records: Iterable[ResultRecord], better: str, worse: str,
                      tol: float = 1e-9) -> list[tuple[int, int]]:
    """``(N, seed)`` pairs where ``better`` scored below ``worse`` on the same instance."""
    table = {(r.scheme, r.N, r.seed): r.throughput for r in records}
    bad = []
    for (scheme, n, seed), value in sorted(table.items()):
        if scheme != worse or (better, n, seed) not in table:
            continue
        if table[(better, n, seed)] < value - tol:
            bad.append((n, seed))
    return bad


def config_from_dict(data: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ExperimentError(f"unknown config keys {unknown}")
    return ExperimentConfig(**data)


def config_to_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["sources"], d["schemes"] = list(config.sources), list(config.schemes)
    d["distance_range"] = list(config.distance_range)
    return d

