"""Executable checks behind the exact tests: the brute-force oracle,
periodicity/monotonicity checkers, the predictability harness, and the
randomized differential campaign with shrinking.

The oracle never looks at the settle-time arithmetic: it simulates from the
origin, captures the state at each hyperperiod boundary past the largest
offset, and declares feasibility purely from state recurrence. Everything
in `analysis` is validated against it.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .analysis import (
    Verdict,
    Witness,
    fp_test_async_constrained,
    periodicity_bounds,
    select_test,
)
from .engine import Engine, JobsTrace, Trace, run, run_jobs
from .model import (
    Platform,
    SystemState,
    Task,
    TaskSystem,
    hyperperiod,
    job_arrival,
    validate_task_system,
)
from .policy import PriorityPolicy, explicit_order


class TraceTooShortError(ValueError):
    """The supplied trace does not cover the instants a check needs."""


@dataclass(frozen=True)
class CheckOutcome:
    """Result of one lemma-style check over a trace."""

    passed: bool
    first_violation: tuple | None = None
    checked: int = 0
    skipped: int = 0


def check_schedule_periodicity(trace: Trace, start: int, period: int) -> CheckOutcome:
    """Does sigma(t) = sigma(t + period) hold for all t in [start, start+period)?

    Compares the per-processor task indices (jobs one period apart are
    different instances of the same task by construction).
    """
    if period < 1:
        raise ValueError("period must be >= 1")
    have = trace.start + len(trace.assignments)
    if trace.start > start or have < start + 2 * period:
        raise TraceTooShortError(
            f"need assignments over [{start}, {start + 2 * period}), trace has [{trace.start}, {have})"
        )
    for t in range(start, start + period):
        if trace.tasks_at(t) != trace.tasks_at(t + period):
            return CheckOutcome(False, (t, trace.tasks_at(t), trace.tasks_at(t + period)), t - start)
    return CheckOutcome(True, None, period)


def brute_force_feasibility(
    system: TaskSystem,
    platform: Platform,
    policy: PriorityPolicy,
    max_windows: int = 64,
) -> Verdict:
    """Long-horizon oracle: infeasible at the first missed deadline,
    feasible as soon as a hyperperiod-boundary state repeats (the schedule
    then cycles forever by determinism + memorylessness), inconclusive when
    `max_windows` hyperperiods pass without either.
    """
    v = validate_task_system(system, platform)
    P = hyperperiod(v.system)
    o_max = v.system.max_offset
    rule = "oracle-state-recurrence"
    eng = Engine(v.system, v.platform, policy, record_assignments=False)
    if not eng.advance_to(o_max, stop_on_miss=True):
        e = eng.misses[0]
        return Verdict("infeasible", rule, witness=Witness("deadline_miss", e.task_index, e.instance, e.time), P=P)
    seen: dict[SystemState, int] = {eng.capture(): eng.now}
    for _ in range(max_windows):
        if not eng.advance_to(eng.now + P, stop_on_miss=True):
            e = eng.misses[0]
            return Verdict("infeasible", rule, witness=Witness("deadline_miss", e.task_index, e.instance, e.time), P=P)
        state = eng.capture()
        if state in seen:
            return Verdict(
                "feasible", rule, (seen[state], eng.now), None, None, (state, state), P=P
            )
        seen[state] = eng.now
    return Verdict(
        "inconclusive", rule, (0, eng.now), None, None, None,
        {"windows_simulated": max_windows, "budget": max_windows}, P=P,
    )


# -- lemma checks over recorded traces ----------------------------------------


def _executed_series(trace: Trace, system: TaskSystem, platform: Platform):
    """Exact executed amount of each job at each instant, rebuilt from the
    recorded assignments and the rate matrix.

    Amounts are capped at the job's requirement: a fast processor may
    overshoot in its final unit and that surplus is discarded, never banked.
    Returns (lookup, scale): lookup(task, instance, t) gives the scaled
    integer amount executed in [release, t).
    """
    dens = [r.denominator for row in platform.rates for r in row]
    scale = math.lcm(*dens) if dens else 1
    rate = [[int(r * scale) for r in row] for row in platform.rates]
    cap = [t.wcet * scale for t in system.tasks]
    cum: dict[tuple[int, int], tuple[list[int], list[int]]] = {}
    for t in range(trace.start, trace.start + len(trace.assignments)):
        row = trace.assignment_at(t)
        for p, ref in enumerate(row):
            if ref is not None:
                times, totals = cum.setdefault(ref, ([], []))
                prev = totals[-1] if totals else 0
                times.append(t + 1)  # work lands at the end of the unit
                totals.append(min(prev + rate[ref[0] - 1][p], cap[ref[0] - 1]))

    def lookup(task_index: int, instance: int, t: int) -> int:
        entry = cum.get((task_index, instance))
        if entry is None:
            return 0
        times, totals = entry
        pos = bisect_right(times, t)
        return totals[pos - 1] if pos else 0

    return lookup, scale


def execution_monotonicity_check(
    trace: Trace, system: TaskSystem, platform: Platform
) -> CheckOutcome:
    """Earlier jobs are never behind their one-hyperperiod-later twins:
    executed(task, k, t) >= executed(task, k + P/T, t + P) whenever t sits in
    the k-th job's release-to-deadline window and no deadline was missed up
    to t + P. Instants past the first miss are skipped, not failed.
    """
    if not trace.assignments:
        raise TraceTooShortError("trace records no assignments")
    P = hyperperiod(system)
    end = trace.start + len(trace.assignments)
    first_miss = trace.first_miss()
    miss_horizon = first_miss.time if first_miss else None
    lookup, _scale = _executed_series(trace, system, platform)
    checked = skipped = 0
    for task in system.tasks:
        h = P // task.period
        k = 1
        while True:
            release = job_arrival(task, k)
            if release + P > end:
                break
            for t in range(release, min(release + task.deadline, end - P) + 1):
                if miss_horizon is not None and t + P >= miss_horizon:
                    skipped += 1
                    continue
                checked += 1
                if lookup(task.index, k, t) < lookup(task.index, k + h, t + P):
                    return CheckOutcome(False, (task.index, k, t), checked, skipped)
            k += 1
    return CheckOutcome(True, None, checked, skipped)


def state_order_check(trace: Trace, system: TaskSystem) -> CheckOutcome:
    """One hyperperiod apart, each task either has strictly more active jobs,
    or the same number with the oldest job at least as far along at the
    earlier instant. Needs per-instant snapshots in the trace.
    """
    P = hyperperiod(system)
    snaps = trace.snapshots
    first_miss = trace.first_miss()
    miss_horizon = first_miss.time if first_miss else None
    checked = skipped = 0
    times = sorted(snaps)
    for t in times:
        if t + P not in snaps:
            continue
        if miss_horizon is not None and t + P >= miss_horizon:
            skipped += 1
            continue
        s_now, s_later = snaps[t], snaps[t + P]
        for task in system.tasks:
            if t < task.offset:
                continue
            a_now, _, g_now = s_now.task_triple(task.index)
            a_later, _, g_later = s_later.task_triple(task.index)
            checked += 1
            ok = a_now < a_later or (a_now == a_later and g_now >= g_later)
            if not ok:
                return CheckOutcome(False, (task.index, t), checked, skipped)
    if checked == 0:
        raise TraceTooShortError("no snapshot pairs one hyperperiod apart")
    return CheckOutcome(True, None, checked, skipped)


# -- job sets: predictability and availability --------------------------------


@dataclass(frozen=True)
class JobSpec:
    """One job with an execution-time interval; rates row is per processor."""

    release: int
    e_lo: Fraction
    e_hi: Fraction
    deadline: int
    rates: tuple[Fraction, ...]

    def __post_init__(self):
        if not 0 < self.e_lo <= self.e_hi:
            raise ValueError("need 0 < e_lo <= e_hi")


@dataclass(frozen=True)
class JobSetSpec:
    """Finite job set, highest priority first, with execution-time play."""

    m: int
    jobs: tuple[JobSpec, ...]

    def realize(self, es: Sequence[Fraction]):
        return [
            (j.release, e, j.deadline, j.rates) for j, e in zip(self.jobs, es)
        ]

    def lower(self):
        return self.realize([j.e_lo for j in self.jobs])

    def upper(self):
        return self.realize([j.e_hi for j in self.jobs])

    def sample(self, rng: random.Random) -> list[Fraction]:
        """One execution-time vector, uniform over the finest grid spanned
        by each interval's endpoint denominators."""
        es = []
        for j in self.jobs:
            q = math.lcm(j.e_lo.denominator, j.e_hi.denominator)
            es.append(Fraction(rng.randint(int(j.e_lo * q), int(j.e_hi * q)), q))
        return es


@dataclass
class PrefixRow:
    """Start/finish observations for the lowest-priority job of one prefix."""

    length: int
    plus_feasible: bool
    start_lo: int | None = None
    start_hi: int | None = None
    finish_lo: int | None = None
    finish_hi: int | None = None
    start_samples: list[int] = field(default_factory=list)
    finish_samples: list[int] = field(default_factory=list)
    ok: bool | None = None


@dataclass
class StartFinishReport:
    rows: list[PrefixRow]
    passed: bool
    checked_prefixes: int
    skipped_prefixes: int

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "checked_prefixes": self.checked_prefixes,
            "skipped_prefixes": self.skipped_prefixes,
            "rows": [
                {
                    "prefix": r.length,
                    "plus_feasible": r.plus_feasible,
                    "start": [r.start_lo, r.start_samples, r.start_hi],
                    "finish": [r.finish_lo, r.finish_samples, r.finish_hi],
                    "ok": r.ok,
                }
                for r in self.rows
            ],
        }


def _prefix_traces(spec: JobSetSpec, es: Sequence[Fraction]) -> list[JobsTrace]:
    """Independent simulation of every prefix of the realized job set."""
    realized = spec.realize(es)
    return [run_jobs(realized[:i], spec.m) for i in range(1, len(realized) + 1)]


def predictability_harness(
    spec: JobSetSpec, samples: int, *, seed: int = 0
) -> StartFinishReport:
    """Check that squeezing execution times can only move starts and
    finishes earlier: lower <= sampled <= upper for both the start and the
    finish of each prefix's lowest-priority job. Prefixes whose maximal
    realization misses a deadline fall outside the hypothesis and are
    skipped (reported, not failed).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = random.Random(seed)
    lo_traces = _prefix_traces(spec, [j.e_lo for j in spec.jobs])
    hi_traces = _prefix_traces(spec, [j.e_hi for j in spec.jobs])
    sampled = [spec.sample(rng) for _ in range(samples)]
    sample_traces = [_prefix_traces(spec, es) for es in sampled]

    rows: list[PrefixRow] = []
    passed = True
    checked = skipped = 0
    for i in range(1, len(spec.jobs) + 1):
        plus_ok = not hi_traces[i - 1].misses
        row = PrefixRow(length=i, plus_feasible=plus_ok)
        if not plus_ok:
            skipped += 1
            rows.append(row)
            continue
        row.start_lo = lo_traces[i - 1].started[i]
        row.finish_lo = lo_traces[i - 1].finished[i]
        row.start_hi = hi_traces[i - 1].started[i]
        row.finish_hi = hi_traces[i - 1].finished[i]
        row.ok = row.start_lo <= row.start_hi and row.finish_lo <= row.finish_hi
        for traces in sample_traces:
            s = traces[i - 1].started[i]
            f = traces[i - 1].finished[i]
            row.start_samples.append(s)
            row.finish_samples.append(f)
            row.ok = row.ok and row.start_lo <= s <= row.start_hi and row.finish_lo <= f <= row.finish_hi
        checked += 1
        passed = passed and row.ok
        rows.append(row)
    return StartFinishReport(rows, passed, checked, skipped)


def availability_subset_check(
    spec: JobSetSpec, *, samples: int = 1, seed: int = 0
) -> CheckOutcome:
    """Idle processors under maximal execution times are idle under any
    smaller ones too, prefix by prefix and instant by instant."""
    rng = random.Random(seed)
    hi_traces = _prefix_traces(spec, [j.e_hi for j in spec.jobs])
    checked = skipped = 0
    for _ in range(samples):
        es = spec.sample(rng)
        mid_traces = _prefix_traces(spec, es)
        for i in range(1, len(spec.jobs) + 1):
            if hi_traces[i - 1].misses:
                skipped += 1
                continue
            horizon = max(hi_traces[i - 1].end, mid_traces[i - 1].end)
            for t in range(horizon):
                checked += 1
                if not hi_traces[i - 1].idle_processors(t) <= mid_traces[i - 1].idle_processors(t):
                    return CheckOutcome(False, (i, t), checked, skipped)
    return CheckOutcome(True, None, checked, skipped)


# -- randomized campaign -------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    """One generated system + platform + policy, tagged with its seed."""

    seed: int
    system: TaskSystem
    platform: Platform
    policy: PriorityPolicy

    def to_json(self) -> dict:
        from .fileio import dump_task_system_dict

        return dump_task_system_dict(self.system, self.platform, self.policy)


#: Desk-scale generator bounds: hyperperiods stay tiny (P <= 60) while all
#: deadline classes, synchrony classes and platform kinds get exercised.
GEN_MAX_TASKS = 4
GEN_PERIODS = range(1, 7)
GEN_MAX_OFFSET = 8
GEN_RATES = (0, 1, 2, 3)
GEN_MAX_PROCS = 3


def generate_instance(seed: int) -> Instance:
    rng = random.Random(seed)
    n = rng.randint(1, GEN_MAX_TASKS)
    m = rng.randint(1, GEN_MAX_PROCS)
    synchronous = rng.random() < 0.4
    constrained_bias = rng.random() < 0.5
    tasks = []
    for i in range(1, n + 1):
        period = rng.choice(GEN_PERIODS)
        wcet = rng.randint(1, period)
        deadline = rng.randint(1, period if constrained_bias else 2 * period)
        offset = 0 if synchronous else rng.randint(0, GEN_MAX_OFFSET)
        tasks.append(Task(i, offset, period, deadline, wcet))
    if rng.random() < 0.3:
        rates = tuple(tuple(Fraction(1) for _ in range(m)) for _ in range(n))
    else:
        rows = []
        for _ in range(n):
            row = [rng.choice(GEN_RATES) for _ in range(m)]
            if not any(row):
                row[rng.randrange(m)] = rng.choice(GEN_RATES[1:])
            rows.append(tuple(Fraction(r) for r in row))
        rates = tuple(rows)
    kind = rng.choice(["rm", "dm", "edf", "explicit"])
    if kind == "explicit":
        order = list(range(1, n + 1))
        rng.shuffle(order)
        policy = explicit_order(order)
    else:
        policy = PriorityPolicy(kind)
    return Instance(seed, TaskSystem(tuple(tasks)), Platform(m, rates), policy)


def generate_job_set(seed: int) -> JobSetSpec:
    """Random job set with execution-time intervals; deadlines are drawn
    loose enough that maximal realizations are usually feasible."""
    rng = random.Random(seed)
    m = rng.randint(1, GEN_MAX_PROCS)
    count = rng.randint(2, 5)
    jobs = []
    for _ in range(count):
        release = rng.randint(0, 6)
        q = 2 if rng.random() < 0.2 else 1
        e_lo = Fraction(rng.randint(1, 4 * q), q)
        e_hi = e_lo + Fraction(rng.randint(0, 3 * q), q)
        row = [rng.choice(GEN_RATES) for _ in range(m)]
        if not any(row):
            row[rng.randrange(m)] = rng.choice(GEN_RATES[1:])
        slowest = min(r for r in row if r)
        service = int(-((-e_hi) // slowest))  # ceil of worst-case own service time
        deadline = release + service + rng.randint(1, 12)
        jobs.append(JobSpec(release, e_lo, e_hi, deadline, tuple(Fraction(r) for r in row)))
    return JobSetSpec(m, tuple(jobs))


@dataclass
class CheckRecord:
    seed: int
    check: str
    outcome: str  # "pass" | "fail" | "skip"
    detail: str = ""

    def to_json(self) -> dict:
        return {"seed": self.seed, "check": self.check, "outcome": self.outcome, "detail": self.detail}


def _campaign_trace(instance: Instance, base: int, P: int) -> Trace:
    """Full trace with per-instant snapshots covering [0, base + 2P]."""
    v = validate_task_system(instance.system, instance.platform)
    return run(
        v.system, v.platform, instance.policy, base + 2 * P,
        record_assignments=True, snapshot_every=1,
    )


def run_instance_checks(instance: Instance, *, max_windows: int = 64) -> list[CheckRecord]:
    """All differential and lemma checks that apply to one instance."""
    records: list[CheckRecord] = []
    seed = instance.seed
    v = validate_task_system(instance.system, instance.platform)
    system, platform, policy = v.system, v.platform, instance.policy
    constrained = v.deadline_class != "arbitrary"

    exact = select_test(system, platform, policy)
    oracle = brute_force_feasibility(system, platform, policy, max_windows=max_windows)
    if exact.outcome == "inconclusive" or oracle.outcome == "inconclusive":
        records.append(CheckRecord(seed, "oracle-agreement", "skip", "inconclusive"))
    elif exact.outcome == oracle.outcome:
        records.append(CheckRecord(seed, "oracle-agreement", "pass", exact.outcome))
    else:
        records.append(
            CheckRecord(seed, "oracle-agreement", "fail", f"exact={exact.outcome} oracle={oracle.outcome}")
        )
        return records  # the instance is broken; later checks assume agreement

    if policy.task_level and constrained:
        variants = [
            fp_test_async_constrained(system, platform, policy, use_X=True),
            fp_test_async_constrained(system, platform, policy, per_task_windows=True),
            fp_test_async_constrained(system, platform, policy, use_X=True, per_task_windows=True),
        ]
        plain = fp_test_async_constrained(system, platform, policy)
        if all(w.outcome == plain.outcome for w in variants):
            records.append(CheckRecord(seed, "window-variants", "pass", plain.outcome))
        else:
            records.append(
                CheckRecord(
                    seed, "window-variants", "fail",
                    f"plain={plain.outcome} variants={[w.outcome for w in variants]}",
                )
            )

    if not exact.feasible:
        return records

    P = hyperperiod(system)
    if policy.task_level:
        bounds = periodicity_bounds(system, policy)
        base = bounds.settle[-1] if constrained else bounds.settle_arbitrary[-1]
    else:
        bounds = None
        base = system.max_offset + (exact.interval[1] - exact.interval[0] if exact.interval else P)
    trace = _campaign_trace(instance, base, P)

    if policy.task_level:
        outcome = check_schedule_periodicity(trace, base, P)
        records.append(
            CheckRecord(
                seed, "settle-periodicity", "pass" if outcome.passed else "fail",
                "" if outcome.passed else str(outcome.first_violation),
            )
        )
    if v.synchronous and (constrained or policy.task_level):
        origin_ok = trace.snapshots[0] == trace.snapshots[P]
        sweep = check_schedule_periodicity(trace, 0, P)
        extra = check_schedule_periodicity(trace, P, P) if len(trace.assignments) >= 3 * P else sweep
        ok = origin_ok and sweep.passed and extra.passed
        records.append(
            CheckRecord(
                seed, "origin-periodicity", "pass" if ok else "fail",
                "" if ok else f"theta-match={origin_ok}",
            )
        )

    mono = execution_monotonicity_check(trace, system, platform)
    records.append(
        CheckRecord(
            seed, "execution-monotonicity", "pass" if mono.passed else "fail",
            "" if mono.passed else str(mono.first_violation),
        )
    )
    order_chk = state_order_check(trace, system)
    records.append(
        CheckRecord(
            seed, "state-order", "pass" if order_chk.passed else "fail",
            "" if order_chk.passed else str(order_chk.first_violation),
        )
    )
    return records


@dataclass
class CampaignResult:
    records: list[CheckRecord]
    instances: int

    @property
    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records if r.outcome == "fail"]

    def summary(self) -> dict:
        counts: dict[str, dict[str, int]] = {}
        for r in self.records:
            bucket = counts.setdefault(r.check, {"pass": 0, "fail": 0, "skip": 0})
            bucket[r.outcome] += 1
        return {"instances": self.instances, "checks": counts, "failures": len(self.failures)}


def run_campaign(
    count: int,
    base_seed: int = 0,
    *,
    max_windows: int = 64,
    on_failure: Callable[[Instance, CheckRecord], None] | None = None,
) -> CampaignResult:
    """Differential campaign over `count` seeded instances, in seed order."""
    records: list[CheckRecord] = []
    for i in range(count):
        seed = base_seed * 1_000_003 + i
        instance = generate_instance(seed)
        for rec in run_instance_checks(instance, max_windows=max_windows):
            records.append(rec)
            if rec.outcome == "fail" and on_failure is not None:
                on_failure(instance, rec)
    return CampaignResult(records, count)


def shrink_instance(instance: Instance, still_fails: Callable[[Instance], bool]) -> Instance:
    """Greedy minimization: drop tasks, then shave wcet, deadline, period,
    and offset while the failure predicate keeps holding."""

    def drop_task(inst: Instance, pos: int) -> Instance | None:
        if inst.system.n <= 1:
            return None
        tasks = [t for i, t in enumerate(inst.system.tasks) if i != pos]
        tasks = [Task(i + 1, t.offset, t.period, t.deadline, t.wcet) for i, t in enumerate(tasks)]
        rates = tuple(row for i, row in enumerate(inst.platform.rates) if i != pos)
        policy = inst.policy
        if policy.kind == "explicit":
            dropped = pos + 1
            order = [i for i in policy.order if i != dropped]
            order = [i - 1 if i > dropped else i for i in order]
            policy = explicit_order(order)
        return Instance(inst.seed, TaskSystem(tuple(tasks)), Platform(inst.platform.m, rates), policy)

    def tweak(inst: Instance, pos: int, **changes) -> Instance:
        t = inst.system.tasks[pos]
        new = Task(
            t.index,
            changes.get("offset", t.offset),
            changes.get("period", t.period),
            changes.get("deadline", t.deadline),
            changes.get("wcet", t.wcet),
        )
        tasks = list(inst.system.tasks)
        tasks[pos] = new
        return Instance(inst.seed, TaskSystem(tuple(tasks)), inst.platform, inst.policy)

    current = instance
    progress = True
    while progress:
        progress = False
        for pos in range(current.system.n):
            smaller = drop_task(current, pos)
            if smaller is not None and still_fails(smaller):
                current = smaller
                progress = True
                break
        if progress:
            continue
        for pos, task in enumerate(current.system.tasks):
            candidates = []
            if task.wcet > 1:
                candidates.append(tweak(current, pos, wcet=task.wcet - 1))
            if task.deadline > 1:
                candidates.append(tweak(current, pos, deadline=task.deadline - 1))
            if task.period > 1:
                candidates.append(tweak(current, pos, period=task.period - 1))
            if task.offset > 0:
                candidates.append(tweak(current, pos, offset=task.offset - 1))
            for cand in candidates:
                if still_fails(cand):
                    current = cand
                    progress = True
                    break
            if progress:
                break
    return current
