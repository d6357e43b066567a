"""Acceptance suite: one PASS/FAIL line per criterion.

Every criterion is computed by ``run_all``, which also writes its raw
results as CSV (no timings), so the determinism check can rerun the whole
pipeline and compare files byte for byte.  Failures are reported, never
softened: a failing criterion fails its test.
"""

import csv
import math
import time
from pathlib import Path

import pytest

from mcsched.bnb import relax, solve_milp
from mcsched.experiment import ExperimentConfig, aggregate, emit_csv, paired_violations, run_experiment
from mcsched.formulations import SchedParams, build, extract_schedule
from mcsched.lp import solve_lp
from mcsched.network import InstanceConfig, generate_instance
from mcsched.rounding import RoundingError, milp_relax_schedule
from mcsched.verify import brute_force_opt, verify_schedule

CP_KINDS = ("dmc-opt-cp", "mc-all-cp", "uni-all")
GAP_TOL = 1e-6


def _f(v):
    return "" if v is None else repr(float(v))


def _write(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def sandwich_case(k: int):
    """Instance ``k`` of the sandwich set: N, T and B cycle through small values."""
    n = (2, 3, 4)[k % 3]
    T = (2, 3, 4)[(k // 3) % 3]
    B = (1, 2)[(k // 9) % 2]
    return generate_instance(InstanceConfig(num_sources=n, group_size=2, seed=5000 + k)), \
        SchedParams(T=T, demand=B)


def oracle_equivalence(out: Path, audit: list):
    start = time.perf_counter()
    rows, mismatches = [], []
    for seed in range(100):
        inst = generate_instance(InstanceConfig(num_sources=2, group_size=2, seed=seed))
        params = SchedParams(T=2, demand=1)
        for kind in CP_KINDS:
            milp, vm = build(kind, inst, params)
            sol = solve_milp(milp)
            brute, _ = brute_force_opt(inst, params, kind)
            got = sol.objective_value if sol.optimal else -math.inf
            if sol.optimal:
                audit.append(("oracle", kind, seed, inst, extract_schedule(vm, sol, params), params))
            elif sol.primal is not None:
                mismatches.append((seed, kind, "limit"))
            if not (got == brute == -math.inf or abs(got - brute) <= 1e-9):
                mismatches.append((seed, kind, got, brute))
            rows.append([seed, kind, sol.status.value, _f(got), _f(brute)])
    elapsed = time.perf_counter() - start
    _write(out / "c1_oracle.csv", ["seed", "kind", "status", "milp", "brute_force"], rows)
    ok = not mismatches and elapsed < 60
    return ok, f"{len(rows)} solves, {len(mismatches)} mismatches, {elapsed:.1f}s (limit 60s)"


def sandwich(out: Path, audit: list, traces: list):
    start = time.perf_counter()
    rows, bad = [], []
    for k in range(50):
        inst, params = sandwich_case(k)
        milp, vm = build("dmc-opt", inst, params)
        lp = solve_lp(relax(milp))
        exact = solve_milp(milp)
        passes = []
        try:
            sched = milp_relax_schedule(inst, params, trace=passes.append)
            report = verify_schedule(inst, sched, params)
            heur = report.throughput
        except RoundingError as exc:
            sched, report, heur = None, None, None
            if exact.primal is not None:
                bad.append((k, f"heuristic failed: {exc}"))
        if exact.optimal:
            audit.append(("sandwich", "dmc-opt", k, inst, extract_schedule(vm, exact, params), params))
            traces.append((k, inst, params, passes, sched, report))
        elif exact.primal is not None or exact.limit_hit:
            bad.append((k, f"exact search stopped: {exact.status.value}"))
        lp_val = lp.objective_value if lp.optimal else None
        ex_val = exact.objective_value if exact.optimal else None
        if ex_val is not None:
            if lp_val is None or lp_val - ex_val < -GAP_TOL:
                bad.append((k, f"LP {lp_val} below MILP {ex_val}"))
            if heur is not None and ex_val - heur < -GAP_TOL:
                bad.append((k, f"heuristic {heur} above MILP {ex_val}"))
        elif heur is not None and report.ok:
            bad.append((k, f"heuristic found {heur} on a problem the MILP calls {exact.status.value}"))
        rows.append([k, inst.num_sources, params.T, params.demand, exact.status.value,
                     _f(lp_val), _f(ex_val), _f(heur)])
    elapsed = time.perf_counter() - start
    _write(out / "c2_sandwich.csv", ["k", "N", "T", "B", "status", "lp", "milp", "heuristic"], rows)
    feasible = sum(r[6] != "" for r in rows)
    ok = not bad and elapsed < 300
    detail = f"{len(rows)} instances ({feasible} feasible), {len(bad)} violations, {elapsed:.1f}s (limit 300s)"
    if bad:
        detail += f"; first: {bad[0]}"
    return ok, detail


def extra_cases(audit: list):
    """Optimal schedules of the remaining builders on small instances, for the soundness audit.

    Power-controlled MC-ALL and DMC-OPT, plus UNI-ALL with enough slots to be
    feasible (two links per source need T >= 2 per unit of demand).
    """
    for seed in range(10):
        inst = generate_instance(InstanceConfig(num_sources=2, group_size=2, seed=700 + seed))
        for kind, params in (("mc-all", SchedParams(T=2, demand=1)),
                             ("dmc-opt", SchedParams(T=2, demand=1)),
                             ("uni-all", SchedParams(T=4, demand=1))):
            milp, vm = build(kind, inst, params)
            sol = solve_milp(milp)
            if sol.optimal:
                audit.append(("extra", kind, seed, inst, extract_schedule(vm, sol, params), params))


def soundness(out: Path, audit: list, sweep_records):
    rows, failed = [], 0
    for source, kind, key, inst, sched, params in audit:
        rep = verify_schedule(inst, sched, params)
        failed += not rep.ok
        rows.append([source, kind, key, int(rep.ok), _f(rep.throughput)])
    # sweep records were audited inside the harness; failures carry status "error"
    errors = sum(r.status == "error" for r in sweep_records)
    _write(out / "c3_soundness.csv", ["source", "kind", "key", "ok", "throughput"], rows)
    kinds = sorted({r[1] for r in rows})
    ok = failed == 0 and errors == 0 and len(audit) > 0
    return ok, (f"{len(audit)} decoded optimal schedules over {kinds}, {failed} violations; "
                f"{errors} failed audits in {len(sweep_records)} sweep records")


SWEEP = ExperimentConfig(sources=(2, 4, 6, 8, 10), group_size=2, T=8, B=8,
                         schemes=("dmc-opt", "dmc-all", "uni-all"), trials=30, base_seed=1)


def sweep(out: Path):
    start = time.perf_counter()
    records = run_experiment(SWEEP, timing=False)
    elapsed = time.perf_counter() - start
    emit_csv(records, out / "c4_sweep.csv")
    means = {(r["scheme"], r["N"]): r["mean_throughput"] for r in aggregate(records)}
    return records, means, elapsed


def dominance(records, means, elapsed):
    ns = SWEEP.sources
    weak = all(means[("dmc-opt", n)] >= means[("dmc-all", n)] for n in ns)
    strict = [n for n in ns if means[("dmc-opt", n)] > means[("dmc-all", n)]]
    pairs = sum(r.scheme == "dmc-all" for r in records)
    bad = paired_violations(records, "dmc-opt", "dmc-all")
    limits = sum(r.status == "limit-hit" for r in records)
    ok = weak and bool(strict) and not bad and elapsed < 600
    curve = ", ".join(f"N={n}: {means[('dmc-opt', n)]:.3f} vs {means[('dmc-all', n)]:.3f}" for n in ns)
    return ok, (f"means dmc-opt vs dmc-all [{curve}]; weak={weak}, strict at {strict or 'no N'}; "
                f"per-record {pairs - len(bad)}/{pairs}; limit-hit={limits}; {elapsed:.1f}s (limit 600s)")


def shape(records, means):
    ns = SWEEP.sources
    crossing = [n for n in ns if means[("uni-all", n)] >= means[("dmc-all", n)]]
    # first N attaining the maximum
    peak = {s: max(ns, key=lambda n: (means[(s, n)], -n)) for s in ("dmc-opt", "dmc-all")}
    ok = bool(crossing) and peak["dmc-opt"] >= peak["dmc-all"]
    flat = all(v == 0.0 for v in means.values())
    detail = (f"uni-all >= dmc-all at N in {crossing or 'none'}; "
              f"peaks dmc-opt N={peak['dmc-opt']}, dmc-all N={peak['dmc-all']}")
    if flat:
        detail += "; every mean is 0, so both conditions hold only trivially"
    return ok, detail


def heuristic_behavior(out: Path, traces):
    rows, bad = [], []
    for k, inst, params, passes, sched, report in traces:
        n = inst.num_sources
        sources = [p.source for p in passes]
        if sched is None:
            bad.append((k, "no schedule"))
            continue
        if len(passes) > n or sorted(sources) != list(range(n)) or len(set(sources)) != len(sources):
            bad.append((k, f"passes {sources}"))
        if [p.index for p in passes] != list(range(len(passes))):
            bad.append((k, "pass indices"))
        if not report.ok:
            bad.append((k, "verification failed"))
        for p in passes:
            rows.append([k, p.index, p.source, p.mode, p.m, p.power_mode, len(p.attempts)])
    _write(out / "c6_trace.csv", ["k", "pass", "source", "mode", "m", "power", "attempts"], rows)
    ok = not bad and len(traces) > 0
    detail = f"{len(traces)} feasible instances, {len(rows)} passes, {len(bad)} violations"
    if bad:
        detail += f"; first: {bad[0]}"
    return ok, detail


def run_all(out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    audit, traces = [], []
    results = {1: oracle_equivalence(out, audit)}
    results[2] = sandwich(out, audit, traces)
    extra_cases(audit)
    records, means, elapsed = sweep(out)
    results[3] = soundness(out, audit, records)
    results[4] = dominance(records, means, elapsed)
    results[5] = shape(records, means)
    results[6] = heuristic_behavior(out, traces)
    return results


@pytest.fixture(scope="module")
def results(tmp_path_factory):
    first = tmp_path_factory.mktemp("run1")
    res = run_all(first)
    second = tmp_path_factory.mktemp("run2")
    run_all(second)
    files = sorted(p.name for p in first.iterdir())
    same = [name for name in files if (first / name).read_bytes() == (second / name).read_bytes()]
    res[7] = (len(same) == len(files) and files == sorted(p.name for p in second.iterdir()),
              f"{len(same)}/{len(files)} CSV files byte-identical across two runs ({', '.join(files)})")
    return res


NAMES = {
    1: "oracle equivalence",
    2: "sandwich property",
    3: "encoding soundness",
    4: "containment/dominance",
    5: "qualitative shape",
    6: "heuristic behavior",
    7: "determinism",
}


@pytest.mark.parametrize("k", sorted(NAMES))
def test_criterion(k, results, capsys):
    ok, detail = results[k]
    with capsys.disabled():
        print(f"\nCRITERION {k} ({NAMES[k]}): {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail
